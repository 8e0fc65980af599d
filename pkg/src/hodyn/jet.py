"""Jets (coordinates with their time derivatives) and trajectories of jets."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .expr import COMPONENTS

__all__ = [
    "JetPoint",
    "Trajectory",
    "Bindings",
    "taylor_propagate",
    "truncate_jet",
    "sample_trajectory",
    "trajectory_bindings",
    "format_float",
]


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class JetPoint:
    """A time instant with derivatives ``derivs[n] = r^(n)``, shape ``(M+1, dim)``."""

    t: float
    derivs: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.derivs, dtype=float)
        if d.ndim == 1:
            d = d[:, None]
        if d.ndim != 2 or d.shape[0] < 1:
            raise ValueError(f"derivs must have shape (M+1, dim), got {d.shape}")
        if d.shape[1] not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {d.shape[1]}")
        if not np.all(np.isfinite(d)) or not math.isfinite(self.t):
            raise ValueError("jet entries must be finite")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "derivs", _frozen(d))

    @classmethod
    def scalar(cls, values: Sequence[float], t: float = 0.0) -> "JetPoint":
        """One-dimensional jet from ``[r0, r1, ..., rM]``."""
        return cls(t, np.asarray(values, dtype=float)[:, None])

    @property
    def M(self) -> int:
        return self.derivs.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.derivs.shape[1]

    def __getitem__(self, n: int) -> np.ndarray:
        return self.derivs[n]

    def __eq__(self, other):
        if not isinstance(other, JetPoint):
            return NotImplemented
        return self.t == other.t and np.array_equal(self.derivs, other.derivs)

    def __hash__(self):
        return hash((self.t, self.derivs.tobytes()))

    def with_order(self, n: int, value) -> "JetPoint":
        """Copy with ``derivs[n]`` replaced, extending with zeros if needed."""
        d = np.zeros((max(self.M, n) + 1, self.dim))
        d[: self.M + 1] = self.derivs
        d[n] = value
        return JetPoint(self.t, d)


class Bindings(Mapping[str, float]):
    """Read-only name -> value view over a jet plus named parameters.

    Jet variables are exposed as ``r<n>_<c>``; in one dimension the plain
    ``r<n>`` names are bound as well.
    """

    def __init__(self, jet: JetPoint | None = None, params: Mapping[str, float] | None = None):
        values: dict[str, float] = dict(params or {})
        if jet is not None:
            values["t"] = jet.t
            for n in range(jet.M + 1):
                for c in range(jet.dim):
                    values[f"r{n}_{COMPONENTS[c]}"] = float(jet.derivs[n, c])
                if jet.dim == 1:
                    values[f"r{n}"] = float(jet.derivs[n, 0])
        self._values = values

    def __getitem__(self, key: str) -> float:
        return self._values[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)


def taylor_propagate(jet: JetPoint, dt: float, order: int) -> JetPoint:
    """Advance ``jet`` by ``dt`` with a truncated Taylor series.

    Order ``n`` of the result is ``sum_{j=0}^{order-n} derivs[n+j] dt^j / j!``;
    orders above ``order`` are copied unchanged.
    """
    if order > jet.M or order < 0:
        raise ValueError(f"order {order} out of range for jet with M={jet.M}")
    if not math.isfinite(dt):
        raise ValueError("dt must be finite")
    out = np.array(jet.derivs, copy=True)
    for n in range(order + 1):
        acc = np.zeros(jet.dim)
        coef = 1.0
        for j in range(order - n + 1):
            acc = acc + jet.derivs[n + j] * coef
            coef *= dt / (j + 1)
        out[n] = acc
    return JetPoint(jet.t + dt, out)


def _propagate_many(derivs: np.ndarray, dt: np.ndarray, order: int) -> np.ndarray:
    """Vectorized position-only Taylor propagation; derivs (K, M+1, dim), dt (K,)."""
    out = np.zeros((derivs.shape[0], derivs.shape[2]))
    coef = np.ones_like(dt)
    for j in range(order + 1):
        out += derivs[:, j] * coef[:, None]
        coef = coef * dt / (j + 1)
    return out


def truncate_jet(jet: JetPoint, new_m: int) -> JetPoint:
    if not 0 <= new_m <= jet.M:
        raise ValueError(f"new order {new_m} outside 0..{jet.M}")
    return JetPoint(jet.t, jet.derivs[: new_m + 1])


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered jets with a common order and dimension.

    Stored as arrays: ``times`` (K,) and ``derivs`` (K, M+1, dim).
    """

    times: np.ndarray
    derivs: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        d = np.asarray(self.derivs, dtype=float)
        if d.ndim == 2:
            d = d[:, :, None]
        if t.ndim != 1 or d.ndim != 3 or d.shape[0] != t.shape[0]:
            raise ValueError(f"inconsistent trajectory shapes {t.shape} / {d.shape}")
        if d.shape[2] not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {d.shape[2]}")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", _frozen(t))
        object.__setattr__(self, "derivs", _frozen(d))

    @classmethod
    def from_jets(cls, jets: Sequence[JetPoint], metadata: dict | None = None) -> "Trajectory":
        if not jets:
            return cls(np.zeros(0), np.zeros((0, 1, 1)), metadata or {})
        shapes = {j.derivs.shape for j in jets}
        if len(shapes) != 1:
            raise ValueError(f"jets must share M and dim, got shapes {sorted(shapes)}")
        return cls(
            np.array([j.t for j in jets]),
            np.stack([j.derivs for j in jets]),
            metadata or {},
        )

    def __len__(self) -> int:
        return self.times.shape[0]

    def __getitem__(self, i: int) -> JetPoint:
        return JetPoint(self.times[i], self.derivs[i])

    def __iter__(self) -> Iterator[JetPoint]:
        for i in range(len(self)):
            yield self[i]

    @property
    def samples(self) -> list[JetPoint]:
        return list(self)

    @property
    def M(self) -> int:
        return self.derivs.shape[1] - 1

    @property
    def dim(self) -> int:
        return self.derivs.shape[2]

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        if len(self) < 3:
            return True
        h = np.diff(self.times)
        return bool(np.all(np.abs(h - h.mean()) <= rtol * abs(h.mean())))

    def resample_uniform(self, count: int | None = None) -> "Trajectory":
        """Uniform grid over the same span; each jet Taylor-propagated at full
        order from the nearest original sample."""
        count = len(self) if count is None else count
        grid = np.linspace(self.times[0], self.times[-1], count)
        idx = np.clip(np.searchsorted(self.times, grid), 1, len(self) - 1)
        left = self.times[idx - 1]
        right = self.times[idx]
        idx = np.where(grid - left <= right - grid, idx - 1, idx)
        jets = [
            JetPoint(g, taylor_propagate(self[i], g - self.times[i], self.M).derivs)
            for g, i in zip(grid, idx)
        ]
        return Trajectory.from_jets(jets, dict(self.metadata, resampled=True))

    def column_names(self) -> list[str]:
        return ["t"] + [
            f"r{n}_{COMPONENTS[c]}" for n in range(self.M + 1) for c in range(self.dim)
        ]

    def to_csv(self) -> str:
        """CSV text: ``t, r0_x[, r0_y, r0_z], r1_x, ...`` with 17 significant digits."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.column_names())
        flat = self.derivs.reshape(len(self), -1)
        for t, row in zip(self.times, flat):
            w.writerow([format_float(t)] + [format_float(v) for v in row])
        return buf.getvalue()


def trajectory_bindings(traj: Trajectory, params: Mapping[str, float] | None = None) -> dict:
    """Like :class:`Bindings` but with one array per variable, for the numpy
    backend of :func:`hodyn.expr.compile_expr`."""
    values: dict = dict(params or {})
    values["t"] = traj.times
    for n in range(traj.M + 1):
        for c in range(traj.dim):
            values[f"r{n}_{COMPONENTS[c]}"] = traj.derivs[:, n, c]
        if traj.dim == 1:
            values[f"r{n}"] = traj.derivs[:, n, 0]
    return values


def sample_trajectory(
    derivs_fn: Callable[[float], np.ndarray], times: Sequence[float], metadata: dict | None = None
) -> Trajectory:
    """Build a trajectory from an analytic jet function ``t -> (M+1, dim)``."""
    jets = [JetPoint(t, np.asarray(derivs_fn(t), dtype=float)) for t in times]
    return Trajectory.from_jets(jets, metadata)
