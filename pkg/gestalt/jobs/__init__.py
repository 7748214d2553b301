from __future__ import annotations

from abc import abstractmethod

from pydantic import BaseModel


class Job(BaseModel):
    """Base job class, extended by job types. Jobs cross process boundaries as JSON."""

    jobname: str

    @property
    @abstractmethod
    def job_type(self) -> str:
        """Return the registered job type string."""


__all__ = [
    "Job",
]
