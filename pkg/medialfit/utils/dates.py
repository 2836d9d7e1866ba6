# dates.py
from __future__ import annotations
import pendulum as p


def now_utc() -> p.DateTime:
    return p.now("UTC")


def iso_local(dt: p.DateTime) -> str:
    return dt.in_timezone(p.local_timezone()).to_datetime_string()


class Stopwatch:
    """Chronomètre de phases pour le manifeste : `with sw.phase("solve"): ...`."""

    def __init__(self) -> None:
        self.timings: dict[str, float] = {}

    def phase(self, name: str) -> "_Phase":
        return _Phase(self, name)


class _Phase:
    def __init__(self, sw: Stopwatch, name: str) -> None:
        self.sw = sw
        self.name = name

    def __enter__(self) -> "_Phase":
        self._t0 = p.now()
        return self

    def __exit__(self, *exc) -> None:
        dt = (p.now() - self._t0).total_seconds()
        self.sw.timings[self.name] = self.sw.timings.get(self.name, 0.0) + dt
