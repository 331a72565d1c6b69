from typing import Iterator, Optional

from sqlalchemy.pool import StaticPool
from sqlmodel import Session, SQLModel, create_engine

from app import models  # noqa: F401  (registers the tables)
from app.settings import settings

_engine = None


def get_engine(url: Optional[str] = None):
    """Engine for settings.DATABASE_URL, created (with tables) on first use."""
    global _engine
    if _engine is None or url is not None:
        target = url or settings.DATABASE_URL
        kwargs = {}
        if target.startswith("sqlite"):
            kwargs["connect_args"] = {"check_same_thread": False}
            if target in ("sqlite://", "sqlite:///:memory:"):
                kwargs["poolclass"] = StaticPool
        _engine = create_engine(target, **kwargs)
        SQLModel.metadata.create_all(_engine)
    return _engine


def get_session() -> Iterator[Session]:
    with Session(get_engine()) as session:
        yield session
