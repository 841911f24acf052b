"""
Two-time phase and damping kernels of the first Dyson term.

With <F_a(s), F_b(tau)> = (lam^2/eps^2) int_0^s du int_0^tau dv b_a(u) b_b(v) gamma((u - v)/eps):

    phi12(s, tau)  = (1/eps) int_tau^s (e1 - e2)
    zeta12(s, tau) = -(lam^2/2eps^2) int_tau^s du int_0^u dv (b1 b1 - b2 b2) gamma_I((u - v)/eps)
    eta12(s, tau)  = 1/4 ||F12(s, tau)||^2 + i theta12+(s, tau)

For constant coupling weights every kernel is a combination of the double primitive
Q(x) = int_0^x (x - y) gamma(y) dy; time-dependent weights use cumulative 2D tables.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline, RectBivariateSpline

from core.quadrature import composite_rule, panel_breaks
from core.reservoir import CorrelationFunction, ReservoirModel, correlation
from core.system import TwoLevelSystem

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

BACKENDS = ("primitive", "table")


def _out(values: np.ndarray) -> ArrayLike:
    return values.item() if np.ndim(values) == 0 else values


@lru_cache(maxsize=16)
def energy_primitive(sys: TwoLevelSystem, grid_points: int = 2048) -> Callable:
    """E(t) = int_0^t e21, exact for a constant gap and a spline antiderivative otherwise"""
    if sys.e21.is_constant:
        gap = sys.e21.value
        return lambda t: gap * np.asarray(t, dtype=float)
    grid = np.linspace(0.0, 1.0, grid_points)
    return CubicSpline(grid, np.asarray(sys.e21(grid), dtype=float)).antiderivative()


def phi12(sys: TwoLevelSystem, eps: float, s: ArrayLike, tau: ArrayLike) -> ArrayLike:
    """Dynamical Bohr phase (1/eps) int_tau^s (e1 - e2)(u) du"""
    E = energy_primitive(sys)
    return _out(-(np.asarray(E(s)) - np.asarray(E(tau))) / eps)


@dataclass(frozen=True, eq=False)
class _CouplingTables:
    """Rectangle integrals C_ab(s, tau) and triangle integrals T_j(s) on a uniform grid"""

    grid: np.ndarray
    rect: Dict[Tuple[int, int], Tuple[RectBivariateSpline, RectBivariateSpline]]
    tri: Dict[int, CubicSpline]

    def rectangle(self, a: int, b: int, s: np.ndarray, tau: np.ndarray) -> np.ndarray:
        if (a, b) == (2, 1):
            return np.conj(self.rectangle(1, 2, tau, s))
        re, im = self.rect[(a, b)]
        s_flat, tau_flat = np.ravel(s), np.ravel(tau)
        values = re.ev(s_flat, tau_flat) + 1j * im.ev(s_flat, tau_flat)
        return values.reshape(np.shape(s))

    def triangle(self, j: int, s: np.ndarray) -> np.ndarray:
        return self.tri[j](s)


def _cumulative(y: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Cumulative Simpson rule along one axis; real and imaginary parts separately"""
    if not np.iscomplexobj(y):
        return cumulative_simpson(y, dx=h, axis=axis, initial=0.0)
    re = cumulative_simpson(y.real, dx=h, axis=axis, initial=0.0)
    return re + 1j * cumulative_simpson(y.imag, dx=h, axis=axis, initial=0.0)


def _build_tables(sys: TwoLevelSystem, corr: CorrelationFunction, eps: float, t_max: float,
                  points_per_eps: int) -> _CouplingTables:
    n = max(4, int(math.ceil(t_max * points_per_eps / eps)))
    grid = np.linspace(0.0, t_max, n + 1)
    h = grid[1] - grid[0]
    logger.info(f"Building {n + 1}x{n + 1} coupling tables for eps={eps:g}")
    offsets = np.arange(-n, n + 1) * h / eps
    g_offsets = np.asarray(corr.gamma(offsets))
    idx = np.arange(n + 1)
    kernel = g_offsets[(idx[:, None] - idx[None, :]) + n]
    weights = {1: np.asarray(sys.b1(grid), dtype=float) * np.ones_like(grid),
               2: np.asarray(sys.b2(grid), dtype=float) * np.ones_like(grid)}

    rect = {}
    for a, b in ((1, 1), (1, 2), (2, 2)):
        integrand = weights[a][:, None] * weights[b][None, :] * kernel
        table = _cumulative(_cumulative(integrand, h, axis=0), h, axis=1)
        rect[(a, b)] = (RectBivariateSpline(grid, grid, table.real), RectBivariateSpline(grid, grid, table.imag))

    tri = {}
    for j in (1, 2):
        integrand = weights[j][:, None] * weights[j][None, :] * kernel
        inner = np.diagonal(_cumulative(integrand, h, axis=1))
        tri[j] = CubicSpline(grid, _cumulative(inner, h, axis=0))
    return _CouplingTables(grid=grid, rect=rect, tri=tri)


@dataclass(frozen=True, eq=False)
class PhaseKernels:
    """phi12, zeta12, eta12 and ||F12||^2 at fixed (eps, lam); all evaluators broadcast over (s, tau)"""

    system: TwoLevelSystem
    corr: CorrelationFunction
    eps: float
    lam: float
    t_max: float = 1.0
    backend: str = "primitive"
    _tables: Optional[_CouplingTables] = field(default=None, repr=False)

    @classmethod
    def build(
        cls,
        sys: TwoLevelSystem,
        model: ReservoirModel,
        eps: float,
        lam: float,
        t_max: float = 1.0,
        table_step: float = 1.0 / 32,
        points_per_eps: int = 16,
        backend: Optional[str] = None,
    ) -> "PhaseKernels":
        if eps <= 0:
            raise ValueError(f"eps must be positive, got {eps}")
        if lam < 0:
            raise ValueError(f"lam must be nonnegative, got {lam}")
        backend = backend or ("primitive" if sys.constant_coupling else "table")
        if backend not in BACKENDS:
            raise ValueError(f"Unknown phase-kernel backend '{backend}'")
        if backend == "primitive" and not sys.constant_coupling:
            raise ValueError("The primitive backend needs constant coupling weights")
        corr = correlation(model, t_max / eps, table_step)
        tables = None
        if backend == "table":
            logger.warning("Time-dependent coupling weights: phase kernels from 2D cumulative tables")
            tables = _build_tables(sys, corr, eps, t_max, points_per_eps)
        return cls(system=sys, corr=corr, eps=eps, lam=lam, t_max=t_max, backend=backend, _tables=tables)

    @property
    def strength(self) -> float:
        return self.lam**2

    def _Q(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.corr.primitive2(x))

    def _weights(self) -> Tuple[float, float]:
        return self.system.b1.value, self.system.b2.value

    def phi12(self, s: ArrayLike, tau: ArrayLike) -> ArrayLike:
        return phi12(self.system, self.eps, s, tau)

    def cross(self, a: str, b: str, s: ArrayLike, tau: ArrayLike) -> ArrayLike:
        """<F_a(s), F_b(tau)> for a, b in {"1", "2", "12"}"""
        s, tau = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(tau, dtype=float))
        expand = {"1": ((1, 1.0),), "2": ((2, 1.0),), "12": ((1, 1.0), (2, -1.0))}
        total = np.zeros(s.shape, dtype=complex)
        for i, ci in expand[a]:
            for j, cj in expand[b]:
                total = total + ci * cj * self._rect(i, j, s, tau)
        return _out(self.strength * total)

    def _rect(self, i: int, j: int, s: np.ndarray, tau: np.ndarray) -> np.ndarray:
        """(1/eps^2) int_0^s int_0^tau b_i(u) b_j(v) gamma((u - v)/eps)"""
        if self.backend == "table":
            return self._tables.rectangle(i, j, s, tau) / self.eps**2
        b = dict(zip((1, 2), self._weights()))
        e = self.eps
        G = self._Q(s / e) - self._Q((s - tau) / e) + np.conj(self._Q(tau / e))
        return b[i] * b[j] * G

    def F12_norm2(self, s: ArrayLike, tau: ArrayLike) -> ArrayLike:
        """(lam^2/eps^2) int_tau^s int_tau^s b12(u) b12(v) gamma((u - v)/eps), real and nonnegative"""
        s, tau = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(tau, dtype=float))
        if self.backend == "primitive":
            b1, b2 = self._weights()
            value = 2.0 * self.strength * (b1 - b2) ** 2 * self._Q((s - tau) / self.eps).real
        else:
            c = lambda x, y: np.asarray(self.cross("12", "12", x, y))
            value = (c(s, s) + c(tau, tau)).real - 2.0 * c(s, tau).real
        return _out(np.maximum(value, 0.0))

    def theta12(self, s: ArrayLike, tau: ArrayLike, sign: int = 1) -> ArrayLike:
        """theta12^(+/-) = 1/2 Im{<F1(s),F2(s)> - <F1(tau),F2(tau)> +/- <F12(s),F12(tau)>}"""
        s, tau = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(tau, dtype=float))
        if self.backend == "primitive":
            b1, b2 = self._weights()
            e = self.eps
            J = self._Q(s / e).imag - self._Q(tau / e).imag - self._Q((s - tau) / e).imag
            return _out(sign * 0.5 * self.strength * (b1 - b2) ** 2 * J)
        own = np.asarray(self.cross("1", "2", s, s)) - np.asarray(self.cross("1", "2", tau, tau))
        mixed = np.asarray(self.cross("12", "12", s, tau))
        return _out(0.5 * (own + sign * mixed).imag)

    def theta12_plus(self, s: ArrayLike, tau: ArrayLike) -> ArrayLike:
        return self.theta12(s, tau, +1)

    def theta12_minus(self, s: ArrayLike, tau: ArrayLike) -> ArrayLike:
        return self.theta12(s, tau, -1)

    def eta12(self, s: ArrayLike, tau: ArrayLike) -> ArrayLike:
        """Complex damping 1/4 ||F12(s, tau)||^2 + i theta12+(s, tau)"""
        return _out(0.25 * np.asarray(self.F12_norm2(s, tau)) + 1j * np.asarray(self.theta12_plus(s, tau)))

    def zeta12(self, s: ArrayLike, tau: ArrayLike) -> ArrayLike:
        s, tau = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(tau, dtype=float))
        if self.backend == "primitive":
            b1, b2 = self._weights()
            e = self.eps
            diff = self._Q(s / e).imag - self._Q(tau / e).imag
            return _out(-0.5 * self.strength * (b1**2 - b2**2) * diff)
        T = lambda x: self._tables.triangle(1, x) - self._tables.triangle(2, x)
        return _out(-0.5 * self.strength / self.eps**2 * (T(s) - T(tau)).imag)

    def exponent(self, s: ArrayLike, tau: ArrayLike) -> np.ndarray:
        """-i phi12 + i zeta12 - eta12"""
        return (-1j * np.asarray(self.phi12(s, tau)) + 1j * np.asarray(self.zeta12(s, tau))
                - np.asarray(self.eta12(s, tau)))


@lru_cache(maxsize=8)
def phase_kernels(sys: TwoLevelSystem, model: ReservoirModel, eps: float, lam: float, t_max: float = 1.0) -> PhaseKernels:
    return PhaseKernels.build(sys, model, eps, lam, t_max)


def eta12(model: ReservoirModel, sys: TwoLevelSystem, eps: float, lam: float, s: ArrayLike, tau: ArrayLike) -> ArrayLike:
    return phase_kernels(sys, model, eps, lam).eta12(s, tau)


def zeta12(model: ReservoirModel, sys: TwoLevelSystem, eps: float, lam: float, s: ArrayLike, tau: ArrayLike) -> ArrayLike:
    return phase_kernels(sys, model, eps, lam).zeta12(s, tau)


def F12_norm2(model: ReservoirModel, sys: TwoLevelSystem, eps: float, lam: float, s: ArrayLike, tau: ArrayLike) -> ArrayLike:
    return phase_kernels(sys, model, eps, lam).F12_norm2(s, tau)


def _rule(a: float, b: float, width: float, npt: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    if b <= a:
        return np.zeros(0), np.zeros(0)
    nodes, weights = composite_rule(panel_breaks(a, b, width), npt)
    return nodes.ravel(), weights.ravel()


def rectangle_direct(sys: TwoLevelSystem, corr: CorrelationFunction, eps: float, wu: Callable, wv: Callable,
                     u_range: Tuple[float, float], v_range: Tuple[float, float], width: float) -> complex:
    """Tensor Gauss-Legendre panels for int int wu(u) wv(v) gamma((u - v)/eps) du dv"""
    u, du = _rule(*u_range, width)
    v, dv = _rule(*v_range, width)
    if u.size == 0 or v.size == 0:
        return 0j
    g = np.asarray(corr.gamma((u[:, None] - v[None, :]) / eps))
    return complex(np.einsum("i,j,ij->", du * wu(u), dv * wv(v), g))


def _weight_fns(sys: TwoLevelSystem) -> Dict[str, Callable]:
    as_array = lambda f: (lambda x: np.asarray(f(x), dtype=float) * np.ones_like(x))
    return {"1": as_array(sys.b1), "2": as_array(sys.b2), "12": as_array(sys.b12)}


def direct_width(eps: float, panel_max: float = 1.0 / 256) -> float:
    return min(eps / 16.0, panel_max)


def eta12_direct(model: ReservoirModel, sys: TwoLevelSystem, eps: float, lam: float, s: float, tau: float,
                 panel_max: float = 1.0 / 256) -> complex:
    """eta12 from its defining double integrals by brute-force 2D quadrature, for s >= tau"""
    corr = correlation(model, max(s, tau) / eps)
    w = _weight_fns(sys)
    width = direct_width(eps, panel_max)
    real = rectangle_direct(sys, corr, eps, w["12"], w["12"], (tau, s), (tau, s), width).real
    first = rectangle_direct(sys, corr, eps, w["12"], w["1"], (tau, s), (0.0, s), width).imag
    second = rectangle_direct(sys, corr, eps, w["2"], w["12"], (tau, s), (0.0, tau), width).imag
    return lam**2 / (2.0 * eps**2) * complex(0.5 * real, first - second)


def zeta12_direct(model: ReservoirModel, sys: TwoLevelSystem, eps: float, lam: float, s: float, tau: float,
                  panel_max: float = 1.0 / 256) -> float:
    """zeta12 from its defining triangle integral by brute-force quadrature"""
    corr = correlation(model, max(s, tau) / eps)
    w = _weight_fns(sys)
    width = direct_width(eps, panel_max)
    u, du = _rule(tau, s, width)
    total = 0.0
    for ui, wi in zip(u, du):
        v, dv = _rule(0.0, ui, width)
        g = np.asarray(corr.gamma((ui - v) / eps)).imag
        inner = w["1"](np.array([ui]))[0] * w["1"](v) - w["2"](np.array([ui]))[0] * w["2"](v)
        total += wi * float(np.sum(dv * inner * g))
    return -lam**2 / (2.0 * eps**2) * total


def F12_norm2_direct(model: ReservoirModel, sys: TwoLevelSystem, eps: float, lam: float, s: float, tau: float,
                     panel_max: float = 1.0 / 256) -> float:
    corr = correlation(model, max(s, tau) / eps)
    w = _weight_fns(sys)
    lo, hi = min(s, tau), max(s, tau)
    value = rectangle_direct(sys, corr, eps, w["12"], w["12"], (lo, hi), (lo, hi), direct_width(eps, panel_max))
    return lam**2 / eps**2 * value.real
