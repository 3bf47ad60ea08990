import pytest
from sqlalchemy.orm import sessionmaker

from database.db import Base, make_engine
from database.models import BenchRun, CorpusRun


@pytest.fixture
def session():
    engine = make_engine("sqlite://")
    Base.metadata.create_all(bind=engine)
    db = sessionmaker(bind=engine)()
    try:
        yield db
    finally:
        db.close()
        engine.dispose()


SUMMARY = {
    "variant": "callback",
    "counters": {"steps": 120, "freshLabels": 9, "contextReifications": 14, "delimiterCrossings": 20},
    "medianMs": 1.5,
}


def test_bench_run_from_summary(session):
    session.add(BenchRun.from_summary("pingpong", SUMMARY, iterations=3, tail_fast=True))
    session.commit()
    row = session.query(BenchRun).one().to_dict()
    assert row["program"] == "pingpong"
    assert row["variant"] == "callback"
    assert row["tail_fast"] is True
    assert row["context_reifications"] == 14
    assert row["delimiter_crossings"] == 20
    assert row["fresh_labels"] == 9
    assert row["wall_time_ms"] == 1.5
    assert row["created_at"]


def test_corpus_run_round_trip(session):
    session.add(CorpusRun(entry_id="trivial", passed=True, outcome="Finished", steps=2, detail=""))
    session.commit()
    row = session.query(CorpusRun).filter_by(entry_id="trivial").one().to_dict()
    assert row["passed"] is True
    assert row["steps"] == 2


def test_postgres_urls_are_normalised():
    pytest.importorskip("psycopg2")
    engine = make_engine("postgres://user:pw@localhost/olaf")
    assert engine.url.drivername.startswith("postgresql")
