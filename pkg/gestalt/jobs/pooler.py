"""
A small process pool for per-region training jobs.

The orchestrating thread hands serialized jobs to worker processes over pipes and collects one
reply per job. Workers never write outside the paths named in their job, and every job carries
its own seeds, so results do not depend on the number of workers or on completion order.
"""

from collections import deque
from multiprocessing import Pipe, Process
from multiprocessing.connection import Connection
from threading import Thread
from time import sleep
from typing import Any
from uuid import UUID, uuid1, uuid4

from loguru import logger

from gestalt.errors import GestaltError, JobFailedError, WorkerShutdownError
from gestalt.jobs import Job

TICK = 0.05


class WorkerProcess(Process):
    """Runs jobs received over its pipe until it is told to stop."""

    def __init__(self, worker_id: UUID, conn: Connection):
        super().__init__(name=f"gestalt_worker_{str(worker_id)[:6]}", daemon=True)
        self.id = worker_id
        self.pipe = conn

    def run_job(self, job_type: str, jobname: str, config_json: str) -> list[Any]:
        # worker level import, the registry is filled in the child
        from gestalt.jobs.runners import get_runner

        logger.debug(f"worker {str(self.id)[:6]} running job {jobname} of type {job_type}")
        try:
            result = get_runner(job_type, config_json).execute()
        except GestaltError as e:
            return ["done", jobname, False, str(e), e.exit_code]
        except Exception as e:  # noqa: BLE001  # reported back to the orchestrator
            return ["done", jobname, False, repr(e), 4]
        return ["done", jobname, True, str(result), 0]

    def run(self):
        logger.debug(f"Starting worker process {str(self.id)[:6]}")
        while True:
            data: list[Any] = self.pipe.recv()
            if not data:
                self.pipe.send(["error", "Invalid message format"])
            elif data[0] == "stop":
                self.pipe.send(["stop", True])
                break
            elif data[0] == "run":
                self.pipe.send(self.run_job(*data[1:]))
            else:
                self.pipe.send([data[0], False])
        logger.debug(f"worker {str(self.id)[:6]} is shutting down")


class ProcessPooler(Thread):
    """Creates a fixed pool of worker processes, feeds them jobs and hands a dead worker's job to a fresh one."""

    def __init__(self, jobs: list[Job], workers: int):
        self.id: UUID = uuid1()
        super().__init__(name=f"pooler_{str(self.id)[:6]}")
        from gestalt.jobs.runners import RUNNER_REGISTRY, region  # noqa: F401  # pyright: ignore[reportUnusedImport]

        self.registry = RUNNER_REGISTRY
        self.size = max(1, min(workers, len(jobs)))
        self.pending: deque[tuple[Job, int]] = deque((job, 0) for job in jobs)
        self.workers: dict[UUID, tuple[Process, Connection]] = {}
        self.assigned: dict[UUID, tuple[Job, int]] = {}
        self.results: dict[str, str] = {}
        self.failures: list[GestaltError] = []

    def run(self):
        logger.debug(f"Pooler {str(self.id)[:6]} bringing up {self.size} workers for {len(self.pending)} jobs")
        try:
            for _ in range(self.size):
                self.spawn_worker()
            while (self.pending or self.assigned) and not self.failures:
                self.dispatch()
                self.collect()
                self.clean_up_dead_workers()
                sleep(TICK)
        except GestaltError as e:
            self.failures.append(e)
        finally:
            self.cleanup()

    def spawn_worker(self) -> UUID:
        worker_id = uuid4()
        parent_conn, child_conn = Pipe()
        worker_process = WorkerProcess(worker_id, child_conn)
        worker_process.start()
        self.workers[worker_id] = (worker_process, parent_conn)
        return worker_id

    def dispatch(self):
        for worker_id, (_process, connection) in self.workers.items():
            if not self.pending:
                return
            if worker_id in self.assigned:
                continue
            job, attempts = self.pending.popleft()
            connection.send(["run", job.job_type, job.jobname, job.model_dump_json()])
            self.assigned[worker_id] = (job, attempts)

    def collect(self):
        for worker_id, (job, _attempts) in list(self.assigned.items()):
            _process, connection = self.workers[worker_id]
            if not connection.poll():
                continue
            _, jobname, ok, payload, exit_code = connection.recv()
            del self.assigned[worker_id]
            if ok:
                logger.debug(f"worker {str(worker_id)[:6]} completed job {jobname}")
                self.results[jobname] = payload
            else:
                logger.error(f"job {job.jobname} failed in worker {str(worker_id)[:6]}: {payload}")
                self.failures.append(JobFailedError(jobname, payload, exit_code))

    def clean_up_dead_workers(self):
        for worker_id, (worker_process, _connection) in list(self.workers.items()):
            if worker_process.is_alive():
                continue
            logger.warning(f"Found dead worker process {str(worker_id)[:6]}, removing from pool.")
            del self.workers[worker_id]
            claimed = self.assigned.pop(worker_id, None)
            if claimed is not None:
                job, attempts = claimed
                runner_cls = self.registry.get(job.job_type)
                if runner_cls is None or attempts >= runner_cls.MAX_RETRIES:
                    raise JobFailedError(job.jobname, "worker process died")
                logger.warning(f"Dead worker {str(worker_id)[:6]} had claimed job {job.jobname}, retrying!")
                self.pending.appendleft((job, attempts + 1))
            if self.pending:
                self.spawn_worker()

    def stop_worker(self, worker_id: UUID):
        # Send an IPC command asking the worker to exit cleanly
        process, connection = self.workers.pop(worker_id)
        try:
            connection.send(["stop"])
            if connection.poll(timeout=5) and connection.recv() == ["stop", True]:
                process.join(timeout=5)
                return
        except (BrokenPipeError, EOFError):
            pass
        # if it didn't stop gracefully, force kill it.
        try:
            process.kill()
            process.join(timeout=5)
        except Exception:
            raise WorkerShutdownError(str(worker_id), reason="Could not kill process!") from None

    def cleanup(self):
        logger.debug(f"Pooler {str(self.id)[:6]} cleaning up worker pool")
        for worker_id in list(self.workers):
            if worker_id in self.assigned:
                process, _connection = self.workers.pop(worker_id)
                process.kill()
                process.join(timeout=5)
            else:
                self.stop_worker(worker_id)


def run_jobs(jobs: list[Job], workers: int = 1) -> dict[str, str]:
    """
    Runs every job and returns jobname -> runner result. With one worker (or one job) the jobs run
    inline in this process, in order.
    """
    if not jobs:
        return {}
    if workers <= 1 or len(jobs) == 1:
        from gestalt.jobs.runners import get_runner

        return {job.jobname: str(get_runner(job.job_type, job.model_dump_json()).execute()) for job in jobs}

    pooler = ProcessPooler(jobs, workers)
    pooler.start()
    pooler.join()
    if pooler.failures:
        raise pooler.failures[0]
    return {job.jobname: pooler.results[job.jobname] for job in jobs}
