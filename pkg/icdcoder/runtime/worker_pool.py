from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, Dict, Generic, Hashable, List, Optional, Sequence, Tuple, TypeVar

logger = logging.getLogger(__name__)

K = TypeVar("K", bound=Hashable)
A = TypeVar("A")
R = TypeVar("R")


@dataclass(frozen=True)
class TaskOutcome(Generic[K, R]):
    """
    Result of one task run by `BoundedWorkerPool`.

    Parameters
    ----------
    key
        Key the task was submitted under.
    value
        Return value when the task succeeded.
    error
        Exception raised by the task, if any.
    """

    key: K
    value: Optional[R] = None
    error: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return self.error is None


class BoundedWorkerPool:
    """
    Run independent tasks with a bound on concurrent execution.

    Results are collected by key, so the returned mapping does not depend on
    completion order. With ``parallelism == 1`` tasks run inline on the calling
    thread, which keeps single-worker runs free of thread scheduling.

    Concurrency Model
    -----------------
    - A fresh `ThreadPoolExecutor` is created per call and shut down before
      returning; no threads outlive a call.
    - Task exceptions are captured into `TaskOutcome.error` and never kill
      the pool or the remaining tasks.

    Parameters
    ----------
    parallelism
        Maximum number of tasks running at once (>= 1).
    name
        Thread name prefix, visible in logs and debuggers.
    """

    def __init__(self, parallelism: int = 1, name: str = "icdcoder-worker"):
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        self.parallelism = parallelism
        self.name = name

    def run(self, fn: Callable[[A], R], items: Sequence[Tuple[K, A]]) -> Dict[K, TaskOutcome[K, R]]:
        """
        Apply `fn` to every item and return outcomes keyed by item key.

        Parameters
        ----------
        fn
            Task function taking the item payload.
        items
            ``(key, payload)`` pairs; keys must be unique.

        Returns
        -------
        dict
            Outcomes in the same key order as `items`.
        """
        keys = [k for k, _ in items]
        if len(set(keys)) != len(keys):
            raise ValueError("task keys must be unique")

        done: Dict[K, TaskOutcome[K, R]] = {}
        if self.parallelism == 1 or len(items) <= 1:
            for key, payload in items:
                done[key] = self._call(fn, key, payload)
        else:
            with ThreadPoolExecutor(max_workers=self.parallelism, thread_name_prefix=self.name) as ex:
                futures = {ex.submit(self._call, fn, key, payload): key for key, payload in items}
                for fut in as_completed(futures):
                    outcome = fut.result()
                    done[outcome.key] = outcome

        return {k: done[k] for k in keys}

    def map(self, fn: Callable[[A], R], payloads: Sequence[A]) -> List[R]:
        """
        Ordered parallel map; re-raises the first failure in input order.
        """
        outcomes = self.run(fn, list(enumerate(payloads)))
        results: List[R] = []
        for i in range(len(payloads)):
            o = outcomes[i]
            if o.error is not None:
                raise o.error
            results.append(o.value)  # type: ignore[arg-type]
        return results

    @staticmethod
    def _call(fn: Callable[[A], R], key: K, payload: A) -> TaskOutcome[K, R]:
        try:
            return TaskOutcome(key=key, value=fn(payload))
        except Exception as e:
            logger.debug("task %r failed: %r", key, e)
            return TaskOutcome(key=key, error=e)
