"""
Composite Gauss-Legendre rules, triangle rules and deterministic reductions
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, List, Tuple, TypeVar

import numpy as np
from scipy import special

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@lru_cache(maxsize=16)
def gauss_legendre(npt: int) -> Tuple[np.ndarray, np.ndarray]:
    """Legendre nodes and weights on [-1, 1] (read-only, cached)"""
    nodes, weights = special.roots_legendre(npt)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panel_breaks(a: float, b: float, width: float) -> np.ndarray:
    """Uniform breakpoints on [a, b] with panels no wider than width"""
    if b <= a:
        return np.array([a, a])
    n_panels = max(1, int(math.ceil((b - a) / width - 1e-9)))
    return np.linspace(a, b, n_panels + 1)


def graded_breaks(a: float, b: float, width: float, levels: int = 24) -> np.ndarray:
    """Uniform breakpoints refined geometrically towards a.

    Used for spectral integrands with a power-law singularity at the left end.
    """
    breaks = panel_breaks(a, b, width)
    first = breaks[1] - a
    geometric = a + first * np.power(0.5, np.arange(levels, 0, -1))
    return np.concatenate(([a], geometric, breaks[1:]))


def composite_rule(breaks: np.ndarray, npt: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of shape (n_panels, npt) for the given breakpoints"""
    x, w = gauss_legendre(npt)
    lo = np.asarray(breaks[:-1])[:, None]
    hi = np.asarray(breaks[1:])[:, None]
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def mapped_rule(a: float, b: np.ndarray, npt: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    """Rules on [a, b_i] for each upper limit b_i; shapes (len(b), npt)"""
    x, w = gauss_legendre(npt)
    b = np.asarray(b, dtype=float)[:, None]
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@dataclass(frozen=True)
class TriangleRule:
    """Composite rule on the triangle 0 <= tau <= s <= t.

    Each s-panel row pairs its s nodes with the standard tau nodes of all earlier
    panels and with a rule mapped onto [panel start, s].
    """

    breaks: np.ndarray
    s_nodes: np.ndarray
    s_weights: np.ndarray
    npt: int

    @classmethod
    def build(cls, t: float, width: float, npt: int = 8) -> "TriangleRule":
        breaks = panel_breaks(0.0, t, width)
        nodes, weights = composite_rule(breaks, npt)
        return cls(breaks=breaks, s_nodes=nodes, s_weights=weights, npt=npt)

    @property
    def n_panels(self) -> int:
        return self.s_nodes.shape[0]

    @property
    def n_pairs(self) -> int:
        p = self.n_panels
        return self.npt * self.npt * (p * (p + 1) // 2)

    def row(self, panel: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(s, ws, tau, wtau) for one s-panel; tau and wtau have shape (npt, n_tau)"""
        s = self.s_nodes[panel]
        ws = self.s_weights[panel]
        diag_tau, diag_w = mapped_rule(self.breaks[panel], s, self.npt)
        if panel == 0:
            return s, ws, diag_tau, diag_w
        lower_tau = np.broadcast_to(self.s_nodes[:panel].ravel(), (self.npt, panel * self.npt))
        lower_w = np.broadcast_to(self.s_weights[:panel].ravel(), (self.npt, panel * self.npt))
        return s, ws, np.hstack([lower_tau, diag_tau]), np.hstack([lower_w, diag_w])


def pairwise_sum(values: Iterable) -> complex:
    """Sum with a fixed binary tree so the result does not depend on scheduling"""
    v = np.asarray(list(values) if not isinstance(values, np.ndarray) else values)
    if v.size == 0:
        return 0.0
    v = v.ravel()
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, np.zeros(1, dtype=v.dtype))
        v = v[0::2] + v[1::2]
    return v[0]


def ordered_map(fn: Callable[[T], R], items: List[T], threads: int = 1) -> List[R]:
    """Map fn over items, results in input order regardless of completion order"""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
