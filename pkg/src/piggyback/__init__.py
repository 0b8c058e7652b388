"""Simulate repository replication piggybacked on news and email traffic."""

from .core import (
    DayDelta,
    Record,
    Repository,
    RepositoryProfile,
    ValidationError,
    make_repository,
)
from .mail import EmailSimulation, EmailTrafficModel, derive_c, q_email, zeta
from .news import (
    NetworkProfile,
    NewsReceiverPolicy,
    NewsSimulation,
    SenderMode,
    SenderPolicy,
    q_news,
    t_news,
)
from .series import SimTimeSeries

__version__ = "0.1.0"

__all__ = [
    "DayDelta",
    "EmailSimulation",
    "EmailTrafficModel",
    "NetworkProfile",
    "NewsReceiverPolicy",
    "NewsSimulation",
    "Record",
    "Repository",
    "RepositoryProfile",
    "SenderMode",
    "SenderPolicy",
    "SimTimeSeries",
    "ValidationError",
    "derive_c",
    "make_repository",
    "q_email",
    "q_news",
    "t_news",
    "zeta",
]
