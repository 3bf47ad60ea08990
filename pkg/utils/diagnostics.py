"""Errors raised across olaf and their rendering for the command line."""
import json


class OlafError(Exception):
    code = "Error"

    def __init__(self, message, span=None, detail=None, rule=None, code=None):
        super().__init__(message)
        self.message = message
        self.span = span
        self.detail = detail
        self.rule = rule
        if code is not None:
            self.code = code

    @property
    def text(self) -> str:
        return f"{self.message}: {self.detail}" if self.detail else self.message

    def render(self) -> str:
        where = f" at {self.span[0]}:{self.span[1]}" if self.span else ""
        rule = f" (rule: {self.rule})" if self.rule else ""
        return f"error[{self.code}]{where} — {self.text}{rule}"

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "line": self.span[0] if self.span else None,
            "column": self.span[1] if self.span else None,
            "message": self.text,
            "rule": self.rule,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def __str__(self):
        return self.render()


class ParseError(OlafError):
    code = "ParseError"

    @classmethod
    def from_lark(cls, exc, text: str = ""):
        name = type(exc).__name__
        if name == "UnexpectedCharacters":
            message = f"unexpected character {text[exc.pos_in_stream]!r}" if text else "unexpected character"
        elif name == "UnexpectedEOF":
            message = "unexpected end of input"
        else:
            token = getattr(exc, "token", None)
            message = "unexpected end of input" if token is not None and token.type == "$END" \
                else f"unexpected token {str(token)!r}"
        expected = sorted(getattr(exc, "expected", None) or getattr(exc, "allowed", None) or [])
        detail = f"expected one of {', '.join(expected[:8])}" if expected else None
        line = getattr(exc, "line", None)
        span = (line, getattr(exc, "column", 0)) if isinstance(line, int) and line > 0 else None
        return cls(message, span=span, detail=detail)


class OlafTypeError(OlafError):
    """A rejected typing judgment; ``code`` names the failure class."""

    CODES = (
        "UnboundVar", "UnboundLabel", "ArityMismatch", "NotAnOperation",
        "NotAContinuation", "EffectEscape", "SubtypeFailure", "SubeffectFailure",
        "IllFormedType", "SelfTypeMismatch", "ResumeTypeMismatch",
    )

    def __init__(self, code, message, span=None, detail=None, rule=None):
        if code not in self.CODES:
            raise ValueError(f"unknown type error code {code}")
        super().__init__(message, span=span, detail=detail, rule=rule, code=code)


class DesugarError(OlafError):
    code = "StructureMismatch"


class Untranslatable(OlafError):
    code = "Untranslatable"


class CorpusFailure(OlafError):
    code = "CorpusFailure"


def render(error: OlafError, as_json: bool = False) -> str:
    return error.to_json() if as_json else error.render()
