"""Stopwatch with named laps."""

import time
from typing import List, Tuple


class TimerError(Exception):
    """Misuse of a Timer: starting it twice or stopping it when idle."""


class Timer:
    """Stopwatch recording intermediate times as named laps.

    :param start_timer: if True, the timer starts when it is created.
    """

    def __init__(self, start_timer: bool = False):
        self._start_time: float = -1.0
        self.laps: List[Tuple[str, float]] = []
        if start_timer:
            self.start()

    @property
    def is_running(self) -> bool:
        return self._start_time >= 0

    def start(self, reset: bool = False) -> None:
        if self.is_running:
            raise TimerError("Timer is already running. Use .stop() to stop it.")
        if reset:
            self.laps = []
        self._start_time = time.perf_counter()

    def lap(self, name: str) -> float:
        """Record the time elapsed since the previous lap under the given name
        and return it.
        """
        if not self.is_running:
            raise TimerError("Timer is not running. Use .start() to start it.")
        now = time.perf_counter()
        elapsed = now - self._start_time
        self.laps.append((name, elapsed))
        self._start_time = now
        return elapsed

    def stop(self, name: str = "end") -> None:
        self.lap(name)
        self._start_time = -1.0

    @property
    def total_time(self) -> float:
        """Total time in seconds over all recorded laps."""
        return sum(x for _, x in self.laps)

    @property
    def total_time_as_str(self) -> str:
        return f"{self.total_time:.2f}s"

    @property
    def recorded_times_as_str(self) -> List[str]:
        return [f"{name}: {elapsed:.2f}s" for name, elapsed in self.laps]
