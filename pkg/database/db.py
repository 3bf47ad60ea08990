import logging

from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from utils.config import DATABASE_URL

log = logging.getLogger(__name__)


def make_engine(url: str):
    # Handle PostgreSQL prefix compatibility for SQLAlchemy 1.4+
    if url.startswith("postgres://"):
        url = url.replace("postgres://", "postgresql://", 1)
    # SQLite-specific connect_args
    connect_args = {"check_same_thread": False} if url.startswith("sqlite") else {}
    log.debug("run history database: %s", url.split("@")[-1])
    return create_engine(url, connect_args=connect_args)


engine = make_engine(DATABASE_URL)
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

Base = declarative_base()


def init_db(bind=None):
    Base.metadata.create_all(bind=bind or engine)


def get_db():
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()
