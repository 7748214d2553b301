from abc import ABC, abstractmethod
from typing import Any

from gestalt.jobs import Job


class BaseJobRunner(ABC):
    """Generic base class skeleton used for typing"""

    MAX_RETRIES = 0

    @abstractmethod
    def __init__(self, config_json: str):
        pass

    @abstractmethod
    def setup(self) -> None:
        pass

    @abstractmethod
    def run(self) -> Any:
        pass

    @abstractmethod
    def cleanup(self) -> None:
        pass


class JobRunner[J: Job](BaseJobRunner):
    """
    Base class for running jobs.

    Attributes:
        job_class (type[J]): The class type for the job; must be specified by subclasses.
        MAX_RETRIES (int): How often the pooler may hand the job to a fresh worker after a worker died on it.
        job: The job instance validated from the serialized job config.
    """

    job_class: type[J]  # to be specified by subclasses!

    def __init__(self, config_json: str):
        self.job = self.job_class.model_validate_json(config_json)

    def execute(self) -> Any:
        self.setup()
        try:
            return self.run()
        finally:
            self.cleanup()

    @abstractmethod
    def setup(self) -> None:
        pass

    @abstractmethod
    def run(self) -> Any:
        pass

    @abstractmethod
    def cleanup(self) -> None:
        pass


RUNNER_REGISTRY: dict[str, type[JobRunner[Any]]] = {}


def jobrunner(name: str):
    """Load a job runner into the registry"""

    def wrapper[R: type[JobRunner[Any]]](cls: R) -> R:
        RUNNER_REGISTRY[name] = cls
        return cls

    return wrapper


def get_runner(job_type: str, config_json: str) -> JobRunner[Any]:
    # importing the runner modules fills the registry
    from gestalt.jobs.runners import region  # noqa: F401  # pyright: ignore[reportUnusedImport]

    runner_cls = RUNNER_REGISTRY.get(job_type)
    if runner_cls is None:
        msg = f"No runner registered for job type {job_type}"
        raise ValueError(msg)
    return runner_cls(config_json)
