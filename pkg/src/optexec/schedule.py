"""Target holdings schedules Q(t), tracking weights w(t) and tracking metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEDULE_KINDS = ("linear", "quadratic", "tabulated")


class ScheduleError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ScheduleSpec:
    """Deterministic liquidation schedule with Q(0) = x0 and Q(T) = 0.

    ``linear`` is the TWAP holdings path x0(1 - t/T); ``quadratic`` is
    x0(1 - (t/T)^2). Tabulated schedules interpolate linearly.
    """

    kind: str
    x0: float
    T: float
    t_samples: np.ndarray | None = None
    q_samples: np.ndarray | None = None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "linear":
            out = self.x0 * (1.0 - t / self.T)
        elif self.kind == "quadratic":
            out = self.x0 * (1.0 - (t / self.T) ** 2)
        else:
            out = np.interp(t, self.t_samples, self.q_samples)
        return float(out) if out.ndim == 0 else out


def _validate_table(t: np.ndarray, q: np.ndarray, x0: float, T: float) -> None:
    if t.ndim != 1 or t.shape != q.shape or t.size < 2:
        raise ScheduleError("need at least two (t, Q) samples of equal length")
    if t[0] != 0.0:
        raise ScheduleError(f"first time must be 0, got {t[0]!r}", row=0)
    if t[-1] != T:
        raise ScheduleError(f"last time must equal T={T!r}, got {t[-1]!r}", row=t.size - 1)
    for i in range(1, t.size):
        if not t[i] > t[i - 1]:
            raise ScheduleError("times must be strictly increasing", row=i)
    for i in range(t.size):
        if q[i] < 0.0:
            raise ScheduleError(f"negative holdings {q[i]!r}", row=i)
    for i in range(1, t.size):
        if q[i] > q[i - 1]:
            raise ScheduleError(f"schedule increases from {q[i - 1]!r} to {q[i]!r}", row=i)
    if q[0] != x0:
        raise ScheduleError(f"Q(0) must equal x0={x0!r}, got {q[0]!r}", row=0)
    if q[-1] != 0.0:
        raise ScheduleError(f"Q(T) must be 0, got {q[-1]!r}", row=t.size - 1)


def make_schedule(kind: str, x0: float, T: float, samples=None) -> ScheduleSpec:
    """Build a schedule; ``samples`` is an (n, 2) array of (t, Q) for ``tabulated``."""
    if kind not in SCHEDULE_KINDS:
        raise ScheduleError(f"unknown schedule kind {kind!r}")
    if kind != "tabulated":
        return ScheduleSpec(kind, float(x0), float(T))
    if samples is None:
        raise ScheduleError("tabulated schedule needs samples")
    arr = np.asarray(samples, dtype=float)
    t, q = arr[:, 0].copy(), arr[:, 1].copy()
    _validate_table(t, q, float(x0), float(T))
    return ScheduleSpec(kind, float(x0), float(T), t, q)


def read_schedule_csv(path, x0: float, T: float) -> ScheduleSpec:
    """Read a two-column (t, Q) CSV with a header row.

    Row indices in errors count data rows from 0.
    """
    rows = []
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "Q"]:
            raise ScheduleError(f"expected header 't,Q', got {header!r}")
        for i, row in enumerate(reader):
            if len(row) != 2:
                raise ScheduleError(f"expected 2 columns, got {len(row)}", row=i)
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError as exc:
                raise ScheduleError(str(exc), row=i) from None
    return make_schedule("tabulated", x0, T, np.array(rows))


def write_schedule_csv(sched: ScheduleSpec, path, n: int = 101) -> None:
    t = sched.t_samples if sched.kind == "tabulated" else np.linspace(0.0, sched.T, n)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "Q"])
        for ti, qi in zip(t, sched(t)):
            w.writerow([repr(float(ti)), repr(float(qi))])


@dataclass(frozen=True)
class WeightSpec:
    """Non-negative tracking weight w(t), in $/share^2/sec."""

    kind: str = "constant"
    value: float = 0.0
    t_samples: np.ndarray | None = None
    w_samples: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "constant":
            if self.value < 0.0:
                raise ScheduleError(f"weight must be non-negative, got {self.value!r}")
        elif self.kind == "tabulated":
            if self.t_samples is None or self.w_samples is None:
                raise ScheduleError("tabulated weight needs samples")
            w = np.asarray(self.w_samples, dtype=float)
            neg = np.flatnonzero(w < 0.0)
            if neg.size:
                raise ScheduleError(f"negative weight {w[neg[0]]!r}", row=int(neg[0]))
        else:
            raise ScheduleError(f"unknown weight kind {self.kind!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.full_like(t, self.value)
        else:
            out = np.interp(t, self.t_samples, self.w_samples)
        return float(out) if out.ndim == 0 else out

    @property
    def is_zero(self) -> bool:
        if self.kind == "constant":
            return self.value == 0.0
        return not np.any(np.asarray(self.w_samples) != 0.0)


def tracking_penalty(w, x, Q):
    """lambda(t, y) = -w(t) y^2 with y = x - Q(t)."""
    return -w * (x - Q) ** 2


@dataclass(frozen=True)
class TrackingError:
    max_abs: float
    mean_square: float
    terminal_gap: float
    per_path_max_abs: np.ndarray
    per_path_mean_square: np.ndarray
    per_path_terminal_gap: np.ndarray


def tracking_error(paths, sched: ScheduleSpec) -> TrackingError:
    """Deviation of simulated holdings from ``sched``.

    ``paths`` is a sequence of objects with ``t`` and ``x`` arrays (SimPath).
    ``mean_square`` is the time average of (x - Q)^2 (trapezoid), averaged over
    paths; ``max_abs`` is the largest deviation on any path; ``terminal_gap``
    is the mean of |x_T - Q(T)|.
    """
    mx, ms, tg = [], [], []
    for p in paths:
        t = np.asarray(p.t)
        dev = np.asarray(p.x) - sched(t)
        mx.append(np.max(np.abs(dev)))
        ms.append(np.trapezoid(dev ** 2, t) / (t[-1] - t[0]))
        tg.append(abs(dev[-1]))
    mx, ms, tg = np.array(mx), np.array(ms), np.array(tg)
    return TrackingError(float(mx.max()), float(ms.mean()), float(tg.mean()), mx, ms, tg)
