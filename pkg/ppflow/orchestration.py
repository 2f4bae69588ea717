from __future__ import annotations

import asyncio
import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, Protocol, runtime_checkable

from .errors import PPFlowError
from .models import CaseResult

__all__ = [
    "CaseState",
    "CaseSpec",
    "CaseHandle",
    "CaseStatus",
    "CaseRunner",
    "CaseScheduler",
    "InProcessCaseScheduler",
]

logger = logging.getLogger(__name__)


class CaseState(str, Enum):
    """Lifecycle states of one epsilon-case."""

    PENDING = "pending"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    CANCELLED = "cancelled"


@dataclass(frozen=True)
class CaseSpec:
    epsilon: float
    idempotency_key: Optional[str] = None
    tags: Dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class CaseHandle:
    """Scheduler-specific handle for referencing a case."""

    reference: str
    scheduler: str


@dataclass
class CaseStatus:
    state: CaseState
    reference: str
    scheduler: str
    details: Dict[str, Any] = field(default_factory=dict)
    result: Optional[CaseResult] = None


CaseRunner = Callable[[CaseSpec], CaseResult]


@runtime_checkable
class CaseScheduler(Protocol):
    """Protocol for pluggable case schedulers."""

    name: str

    async def schedule(self, spec: CaseSpec) -> CaseHandle:
        ...

    async def get_status(self, handle: CaseHandle) -> CaseStatus:
        ...

    async def cancel(self, handle: CaseHandle) -> None:
        ...

    async def wait(self, handle: CaseHandle) -> CaseStatus:
        ...


def _error_payload(exc: BaseException) -> Dict[str, Any]:
    if isinstance(exc, PPFlowError):
        return exc.to_dict()
    return {"code": type(exc).__name__, "message": str(exc), "payload": {}}


class InProcessCaseScheduler:
    """Runs cases on a local thread pool.

    A case that raises is recorded as ``failed`` with the error code and
    message; other cases keep running.
    """

    def __init__(self, runner: CaseRunner, *, max_workers: int = 2) -> None:
        if max_workers < 1:
            raise ValueError("max_workers must be at least 1")
        self.name = "in-process"
        self._runner = runner
        self._executor = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="ppflow-case")
        self._cases: Dict[str, CaseStatus] = {}
        self._futures: Dict[str, "asyncio.Future[CaseResult]"] = {}

    async def schedule(self, spec: CaseSpec) -> CaseHandle:
        reference = spec.idempotency_key or f"case-{len(self._cases)+1}"
        handle = CaseHandle(reference=reference, scheduler=self.name)
        if reference not in self._cases:
            self._cases[reference] = CaseStatus(
                state=CaseState.PENDING,
                reference=reference,
                scheduler=self.name,
                details={"epsilon": spec.epsilon, "tags": dict(spec.tags)},
            )
            loop = asyncio.get_running_loop()
            self._futures[reference] = loop.run_in_executor(self._executor, self._execute, reference, spec)
        return handle

    def _execute(self, reference: str, spec: CaseSpec) -> CaseResult:
        status = self._cases[reference]
        if status.state is CaseState.CANCELLED:
            result = CaseResult.failed(spec.epsilon, {"code": "cancelled", "message": "case cancelled", "payload": {}})
            status.result = result
            return result
        status.state = CaseState.RUNNING
        logger.info("case eps=%.3e started", spec.epsilon)
        start = time.perf_counter()
        try:
            result = self._runner(spec)
        except Exception as exc:
            error = _error_payload(exc)
            logger.warning("case eps=%.3e failed: %s", spec.epsilon, error["message"])
            result = CaseResult.failed(spec.epsilon, error, runtime=time.perf_counter() - start)
            status.details["error"] = error
            status.state = CaseState.FAILED
            status.result = result
            return result
        result = dataclasses.replace(result, runtime=time.perf_counter() - start)
        status.state = CaseState.SUCCEEDED if result.succeeded else CaseState.FAILED
        status.result = result
        logger.info("case eps=%.3e %s in %.1fs", spec.epsilon, status.state.value, result.runtime)
        return result

    async def get_status(self, handle: CaseHandle) -> CaseStatus:
        if handle.reference not in self._cases:
            raise KeyError(f"Case '{handle.reference}' is not managed by this scheduler")
        return self._cases[handle.reference]

    async def cancel(self, handle: CaseHandle) -> None:
        status = await self.get_status(handle)
        if status.state is CaseState.PENDING:
            status.state = CaseState.CANCELLED
            self._futures[handle.reference].cancel()
        else:
            logger.debug("case %s is %s and cannot be cancelled", handle.reference, status.state.value)

    async def wait(self, handle: CaseHandle) -> CaseStatus:
        status = await self.get_status(handle)
        try:
            await self._futures[handle.reference]
        except asyncio.CancelledError:
            status.state = CaseState.CANCELLED
        return status

    def close(self) -> None:
        self._executor.shutdown(wait=True)
