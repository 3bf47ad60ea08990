from datetime import datetime

from sqlalchemy import Boolean, Column, DateTime, Float, Integer, String, Text

from .db import Base


class BenchRun(Base):
    __tablename__ = "bench_runs"

    id = Column(Integer, primary_key=True, index=True)
    program = Column(String, index=True)
    variant = Column(String, index=True)  # direct | callback
    iterations = Column(Integer)
    tail_fast = Column(Boolean, default=False)
    wall_time_ms = Column(Float)
    steps = Column(Integer)
    context_reifications = Column(Integer)
    delimiter_crossings = Column(Integer)
    fresh_labels = Column(Integer)
    created_at = Column(DateTime, default=datetime.utcnow)

    @classmethod
    def from_summary(cls, program: str, summary: dict, iterations: int, tail_fast: bool):
        counters = summary["counters"]
        return cls(
            program=program,
            variant=summary["variant"],
            iterations=iterations,
            tail_fast=tail_fast,
            wall_time_ms=summary["medianMs"],
            steps=counters["steps"],
            context_reifications=counters["contextReifications"],
            delimiter_crossings=counters["delimiterCrossings"],
            fresh_labels=counters["freshLabels"],
        )

    def to_dict(self):
        return {
            "id": self.id,
            "program": self.program,
            "variant": self.variant,
            "iterations": self.iterations,
            "tail_fast": self.tail_fast,
            "wall_time_ms": self.wall_time_ms,
            "steps": self.steps,
            "context_reifications": self.context_reifications,
            "delimiter_crossings": self.delimiter_crossings,
            "fresh_labels": self.fresh_labels,
            "created_at": self.created_at.strftime("%Y-%m-%d %H:%M:%S") if self.created_at else "",
        }


class CorpusRun(Base):
    __tablename__ = "corpus_runs"

    id = Column(Integer, primary_key=True, index=True)
    entry_id = Column(String, index=True)
    passed = Column(Boolean)
    outcome = Column(String)
    steps = Column(Integer)
    detail = Column(Text)
    created_at = Column(DateTime, default=datetime.utcnow)

    def to_dict(self):
        return {
            "id": self.id,
            "entry_id": self.entry_id,
            "passed": self.passed,
            "outcome": self.outcome,
            "steps": self.steps,
            "detail": self.detail,
            "created_at": self.created_at.strftime("%Y-%m-%d %H:%M:%S") if self.created_at else "",
        }
