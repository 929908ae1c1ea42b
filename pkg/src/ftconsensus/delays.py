"""Bounded time-varying link delays.

Delays are a pure function of ``(seed, src, dst, tick)`` computed with a
splitmix64-style hash, so a single link can be queried in isolation and a whole
tick's worth of links can be drawn in one vectorised call with the same result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

DISTRIBUTIONS = ("uniform", "constant", "table")

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _hash(seed: int, src, dst, tick) -> np.ndarray:
    h = _mix(np.atleast_1d(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)) + _GOLDEN)
    for part in (src, dst, tick):
        h = _mix(h ^ (np.atleast_1d(np.asarray(part).astype(np.uint64)) + _GOLDEN))
    return h


@dataclass(frozen=True)
class DelayModel:
    """Per-link delay generator with every draw in ``[0, tau_bar]``.

    ``distribution`` is one of

    * ``"uniform"``: independent uniform integer on ``[0, tau_bar]`` per link and tick;
    * ``"constant"``: always ``tau_bar`` (worst case);
    * ``"table"``: uniform on ``[0, edge_bounds[(src, dst)]]``, links missing
      from the table fall back to ``tau_bar``.

    Self-links never delay.
    """

    tau_bar: int
    distribution: str = "uniform"
    seed: int = 0
    edge_bounds: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.tau_bar) != self.tau_bar or self.tau_bar < 0:
            raise ValueError(f"tau_bar must be a nonnegative integer, got {self.tau_bar}")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown delay distribution {self.distribution!r}")
        for edge, bound in self.edge_bounds.items():
            if not 0 <= bound <= self.tau_bar:
                raise ValueError(f"bound {bound} for link {edge} outside [0, {self.tau_bar}]")

    def bounds(self, src, dst) -> np.ndarray:
        src = np.atleast_1d(src)
        dst = np.atleast_1d(dst)
        out = np.full(src.shape, self.tau_bar, dtype=np.int64)
        if self.distribution == "table" and self.edge_bounds:
            for k, (i, j) in enumerate(zip(src.tolist(), dst.tolist())):
                out[k] = self.edge_bounds.get((i, j), self.tau_bar)
        return out

    def sample(self, src, dst, tick: int, bounds: np.ndarray | None = None) -> np.ndarray:
        """Delays for the links ``src[e] -> dst[e]`` used at ``tick``."""
        src = np.atleast_1d(src)
        dst = np.atleast_1d(dst)
        if self.tau_bar == 0:
            return np.zeros(src.shape, dtype=np.int64)
        if self.distribution == "constant":
            out = np.full(src.shape, self.tau_bar, dtype=np.int64)
        else:
            if bounds is None:
                bounds = self.bounds(src, dst)
            u = (_hash(self.seed, src, dst, tick) >> np.uint64(11)).astype(np.float64) * 2.0**-53
            out = np.floor(u * (bounds + 1)).astype(np.int64)
        out[src == dst] = 0
        return out


def sample_delay(model: DelayModel, edge: tuple[int, int], tick: int) -> int:
    src, dst = edge
    return int(model.sample(np.array([src]), np.array([dst]), tick)[0])
