"""
Driven two-level system with a commuting dephasing coupling.

H_S(t) = e_mean(t) 1 - (e21(t)/2) (cos theta(t) sigma_z + sin theta(t) sigma_x),
B(t)   = b1(t) P1(t) + b2(t) P2(t),  theta(t) = theta_max * s(t).

Level 1 sits on the first basis vector while theta = 0, and e21 = e2 - e1.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import comb

from core.exceptions import ConfigError
from core.expressions import ScalarFunction

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

IDENTITY = np.eye(2)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])

# 5-point central stencils for derivative orders 1..4, as (coefficients, denominator power)
_STENCILS = {
    1: (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, 1),
    2: (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0, 2),
    3: (np.array([-1.0, 2.0, 0.0, -2.0, 1.0]) / 2.0, 3),
    4: (np.array([1.0, -4.0, 6.0, -4.0, 1.0]), 4),
}


def central_difference(fn, t: np.ndarray, h: float, order: int) -> np.ndarray:
    """5-point central difference of fn (returning arrays shaped t.shape + extra) at t"""
    coeffs, power = _STENCILS[order]
    t = np.asarray(t, dtype=float)
    total = 0.0
    for k, c in zip(range(-2, 3), coeffs):
        if c != 0.0:
            total = total + c * fn(t + k * h)
    return total / h**power


@dataclass(frozen=True, eq=False)
class DriveProfile:
    """Schedule s(t) on [0, 1] with s(0) = 0 and s(1) = 1.

    Derivatives 1..smoothness_order vanish at both ends. For t < t_flat the schedule
    is held at 0 and the polynomial is rescaled onto [t_flat, 1].
    """

    poly: Polynomial
    smoothness_order: int
    t_flat: float = 0.0
    kind: str = "smoothstep"

    def _reduced(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.clip((t - self.t_flat) / (1.0 - self.t_flat), 0.0, 1.0)

    def value(self, t: ArrayLike) -> ArrayLike:
        out = self.poly(self._reduced(t))
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, t: ArrayLike, n: int = 1) -> ArrayLike:
        t_arr = np.asarray(t, dtype=float)
        u = self._reduced(t_arr)
        inside = (t_arr >= self.t_flat) & (t_arr <= 1.0)
        out = np.where(inside, self.poly.deriv(n)(u) / (1.0 - self.t_flat) ** n, 0.0)
        return float(out) if out.ndim == 0 else out

    def max_rate(self, samples: int = 4097) -> float:
        """max |s'(t)| on a uniform grid"""
        return float(np.max(np.abs(self.derivative(np.linspace(0.0, 1.0, samples)))))


def make_smoothstep_profile(order: int, t_flat: float = 0.0) -> DriveProfile:
    """Odd-symmetric polynomial smoothstep of degree 2*order - 1.

    Args:
        order: s^(n)(0) = s^(n)(1) = 0 for n = 1..order-1; must be at least 5
        t_flat: initial fraction of [0, 1] on which s stays 0
    """
    if int(order) != order or order < 5:
        raise ConfigError(f"Smoothstep order must be an integer >= 5 (four vanishing derivatives), got {order}")
    if not 0.0 <= t_flat < 1.0:
        raise ConfigError(f"t_flat must lie in [0, 1), got {t_flat}")
    n = int(order) - 1
    coeffs = np.zeros(2 * n + 2)
    for k in range(n + 1):
        coeffs[n + 1 + k] = (-1) ** k * comb(n + k, k, exact=True) * comb(2 * n + 1, n - k, exact=True)
    return DriveProfile(poly=Polynomial(coeffs), smoothness_order=n, t_flat=float(t_flat))


def make_linear_profile() -> DriveProfile:
    """s(t) = t, with no flat start"""
    return DriveProfile(poly=Polynomial([0.0, 1.0]), smoothness_order=0, kind="linear")


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues, coupling weights, projectors and eigenvectors at one or more times"""

    e1: ArrayLike
    e2: ArrayLike
    b1: ArrayLike
    b2: ArrayLike
    P1: np.ndarray
    P2: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray


@dataclass(frozen=True, eq=False)
class TwoLevelSystem:
    """Spectral description of the driven Hamiltonian and the dephasing coupling"""

    e21: ScalarFunction
    e_mean: ScalarFunction
    theta_max: float
    profile: DriveProfile
    b1: ScalarFunction
    b2: ScalarFunction
    delta: float

    @classmethod
    def from_config(cls, cfg: Any) -> "TwoLevelSystem":
        """Build from a SystemConfig-like object"""
        return cls(
            e21=ScalarFunction(cfg.e21),
            e_mean=ScalarFunction(cfg.e_mean),
            theta_max=float(cfg.theta_max),
            profile=make_smoothstep_profile(cfg.profile_order, cfg.t_flat),
            b1=ScalarFunction(cfg.b1),
            b2=ScalarFunction(cfg.b2),
            delta=float(cfg.delta),
        )

    def theta(self, t: ArrayLike) -> ArrayLike:
        return self.theta_max * self.profile.value(t)

    def theta_derivative(self, t: ArrayLike, n: int = 1) -> ArrayLike:
        return self.theta_max * self.profile.derivative(t, n)

    def e1(self, t: ArrayLike) -> ArrayLike:
        return self.e_mean(t) - 0.5 * self.e21(t)

    def e2(self, t: ArrayLike) -> ArrayLike:
        return self.e_mean(t) + 0.5 * self.e21(t)

    def b12(self, t: ArrayLike) -> ArrayLike:
        return self.b1(t) - self.b2(t)

    @property
    def constant_coupling(self) -> bool:
        return self.b1.is_constant and self.b2.is_constant

    def max_gap(self, samples: int = 2049) -> float:
        return float(np.max(np.abs(self.e21(np.linspace(0.0, 1.0, samples)))))

    def mixing(self, t: ArrayLike) -> np.ndarray:
        """cos(theta) sigma_z + sin(theta) sigma_x, shaped t.shape + (2, 2)"""
        th = np.asarray(self.theta(t))[..., None, None]
        return np.cos(th) * SIGMA_Z + np.sin(th) * SIGMA_X

    def projectors(self, t: ArrayLike):
        n_sigma = self.mixing(t)
        P1 = 0.5 * (IDENTITY + n_sigma)
        return P1, IDENTITY - P1

    def projector_derivative(self, t: ArrayLike, analytic: bool = True, h: float = 1e-4) -> np.ndarray:
        """d/dt P1 from theta' by the chain rule, or by 5-point central differences"""
        if not analytic:
            return central_difference(lambda x: self.projectors(x)[0], t, h, 1)
        th = np.asarray(self.theta(t))[..., None, None]
        rate = np.asarray(self.theta_derivative(t))[..., None, None]
        return 0.5 * rate * (-np.sin(th) * SIGMA_Z + np.cos(th) * SIGMA_X)

    def hamiltonian(self, t: ArrayLike) -> np.ndarray:
        em = np.asarray(self.e_mean(t))[..., None, None]
        gap = np.asarray(self.e21(t))[..., None, None]
        return em * IDENTITY - 0.5 * gap * self.mixing(t)

    def coupling(self, t: ArrayLike) -> np.ndarray:
        P1, P2 = self.projectors(t)
        b1 = np.asarray(self.b1(t))[..., None, None]
        b2 = np.asarray(self.b2(t))[..., None, None]
        return b1 * P1 + b2 * P2

    def eigenvectors(self, t: ArrayLike):
        """Real eigenvectors; d/dt psi_j is orthogonal to psi_j, so the frame is parallel transported"""
        half = 0.5 * np.asarray(self.theta(t))
        c, s = np.cos(half), np.sin(half)
        psi1 = np.stack([c, s], axis=-1).astype(complex)
        psi2 = np.stack([-s, c], axis=-1).astype(complex)
        return psi1, psi2


def spectral_data(sys: TwoLevelSystem, t: ArrayLike) -> SpectralData:
    """Spectral data of H_S(t) and B(t) in the shared, parallel-transported eigenbasis"""
    P1, P2 = sys.projectors(t)
    psi1, psi2 = sys.eigenvectors(t)
    return SpectralData(
        e1=sys.e1(t), e2=sys.e2(t), b1=sys.b1(t), b2=sys.b2(t),
        P1=P1, P2=P2, psi1=psi1, psi2=psi2,
    )


def eigenframe(sys: TwoLevelSystem, grid: np.ndarray):
    """Numerical eigenbasis of H_S on a grid, phase fixed by parallel transport.

    Each eigenvector is multiplied by the phase that minimises ||psi(t_k) - psi(t_{k-1})||.
    Returns arrays psi1, psi2 of shape (len(grid), 2).
    """
    H = sys.hamiltonian(grid)
    evals, evecs = np.linalg.eigh(H)
    upper_is_2 = np.asarray(sys.e21(grid)) > 0
    psi1 = np.where(upper_is_2[:, None], evecs[:, :, 0], evecs[:, :, 1]).astype(complex)
    psi2 = np.where(upper_is_2[:, None], evecs[:, :, 1], evecs[:, :, 0]).astype(complex)
    for psi in (psi1, psi2):
        lead = np.argmax(np.abs(psi[0]))
        psi[0] *= np.conj(psi[0, lead]) / abs(psi[0, lead])
        for k in range(1, len(grid)):
            overlap = np.vdot(psi[k - 1], psi[k])
            psi[k] *= np.conj(overlap) / abs(overlap)
    return psi1, psi2


@dataclass
class AssumptionCheck:
    """Outcome of one assumption with the witness of its worst violation"""

    name: str
    passed: bool
    witness_t: Optional[float] = None
    witness_value: Optional[float] = None
    detail: Dict[str, Any] = field(default_factory=dict)


@dataclass
class AssumptionReport:
    checks: List[AssumptionCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def get(self, name: str) -> AssumptionCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)


def check_assumptions(
    sys: TwoLevelSystem,
    tol: float = 1e-6,
    grid_points: int = 2048,
    inflation: float = 1.5,
    step: float = 1e-3,
    algebra_tol: float = 1e-12,
) -> AssumptionReport:
    """Certify the gap, smoothness and flat-start assumptions plus the projector algebra"""
    if tol <= 0:
        raise ValueError(f"Tolerance must be positive, got {tol}")
    grid = np.linspace(0.0, 1.0, grid_points)
    checks = [
        _check_gap(sys, grid, inflation),
        _check_smoothness(sys),
        _check_flat_start(sys, tol, step),
        _check_algebra(sys, grid, algebra_tol),
    ]
    for c in checks:
        if not c.passed:
            logger.info(f"Assumption {c.name} failed at t={c.witness_t} (value {c.witness_value})")
    return AssumptionReport(checks=checks)


def _check_gap(sys: TwoLevelSystem, grid: np.ndarray, inflation: float) -> AssumptionCheck:
    gap = np.abs(np.asarray(sys.e21(grid), dtype=float))
    worst = int(np.argmin(gap))
    slope = float(np.max(np.abs(np.diff(gap)))) if len(grid) > 1 else 0.0
    certified = float(gap[worst]) - inflation * 0.5 * slope
    return AssumptionCheck(
        name="A.1 gap",
        passed=certified >= sys.delta,
        witness_t=float(grid[worst]),
        witness_value=float(gap[worst]),
        detail={"certified_floor": certified, "delta": sys.delta},
    )


def _check_smoothness(sys: TwoLevelSystem) -> AssumptionCheck:
    profile = sys.profile
    ok = profile.t_flat == 0.0 or profile.smoothness_order >= 4
    return AssumptionCheck(
        name="A.2 smoothness",
        passed=ok,
        witness_t=None if ok else profile.t_flat,
        detail={"kind": profile.kind, "smoothness_order": profile.smoothness_order},
    )


def _check_flat_start(sys: TwoLevelSystem, tol: float, step: float) -> AssumptionCheck:
    points = step * np.arange(2, 7)
    P0 = sys.projectors(0.0)[0]
    worst_by_order = {}
    for n in range(1, 5):
        deriv = central_difference(lambda x: sys.projectors(x)[0] - P0, points, step, n)
        norms = np.linalg.norm(deriv, ord=2, axis=(-2, -1))
        k = int(np.argmax(norms))
        worst_by_order[n] = (float(points[k]), float(norms[k]))
    failing = [n for n, (_, v) in worst_by_order.items() if v > tol]
    if failing:
        n = failing[0]
        witness_t, witness_value = worst_by_order[n]
    else:
        n = max(worst_by_order, key=lambda k: worst_by_order[k][1])
        witness_t, witness_value = worst_by_order[n]
    return AssumptionCheck(
        name="A.3 flat start",
        passed=not failing,
        witness_t=witness_t,
        witness_value=witness_value,
        detail={"order": n, "failing_orders": failing, "tol": tol},
    )


def _check_algebra(sys: TwoLevelSystem, grid: np.ndarray, tol: float) -> AssumptionCheck:
    P1, P2 = sys.projectors(grid)
    H = sys.hamiltonian(grid)
    B = sys.coupling(grid)
    residuals = np.stack([
        np.linalg.norm(P1 + P2 - IDENTITY, axis=(-2, -1)),
        np.linalg.norm(P1 @ P1 - P1, axis=(-2, -1)),
        np.linalg.norm(H @ B - B @ H, axis=(-2, -1)),
    ])
    worst = np.unravel_index(int(np.argmax(residuals)), residuals.shape)
    value = float(residuals[worst])
    return AssumptionCheck(
        name="projector algebra",
        passed=value <= tol,
        witness_t=float(grid[worst[1]]),
        witness_value=value,
    )
