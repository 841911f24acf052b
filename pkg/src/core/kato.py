"""
Kato generator, transport of the intertwiner W(t) and the free transition kernel
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy as sp
from scipy.interpolate import CubicSpline

from core.exceptions import TransportError
from core.system import IDENTITY, TwoLevelSystem

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def kato_generator(sys: TwoLevelSystem, t: ArrayLike, analytic: bool = True) -> np.ndarray:
    """K(t) = sum_j (dP_j/dt) P_j, anti-self-adjoint with vanishing diagonal blocks"""
    P1, P2 = sys.projectors(t)
    dP1 = sys.projector_derivative(t, analytic=analytic)
    return dP1 @ P1 - dP1 @ P2


def normalize_unitary_matrix(U: np.ndarray) -> np.ndarray:
    """Closest unitary matrix (polar factor) from the singular value decomposition"""
    u, _, vh = sp.linalg.svd(U, full_matrices=False)
    return u @ vh


def resolution_step(sys: TwoLevelSystem, max_step: float = 1.0 / 1024, theta_resolution: float = 0.1) -> float:
    """Largest step resolving theta: min(max_step, theta_resolution / max|theta'|)"""
    rate = abs(sys.theta_max) * sys.profile.max_rate()
    if rate == 0.0:
        return max_step
    return min(max_step, theta_resolution / rate)


@dataclass(frozen=True, eq=False)
class KatoTransport:
    """W(t) and K(t) on a grid, with cubic interpolation of W between grid points"""

    system: TwoLevelSystem
    grid: np.ndarray
    W: np.ndarray
    K: np.ndarray
    unitarity_residual: float
    intertwining_residual: float
    analytic: bool = True
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_spline", CubicSpline(self.grid, self.W, axis=0))

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def W_at(self, t: ArrayLike) -> np.ndarray:
        return self._spline(np.asarray(t, dtype=float))

    def dW_at(self, t: ArrayLike) -> np.ndarray:
        """dW/dt = K(t) W(t)"""
        return kato_generator(self.system, t, self.analytic) @ self.W_at(t)

    def K_tilde(self, t: ArrayLike) -> np.ndarray:
        """K~_21(t) = W(t)* P2(t) K(t) P1(t) W(t)"""
        W = self.W_at(t)
        P1, P2 = self.system.projectors(t)
        K = kato_generator(self.system, t, self.analytic)
        return np.conj(np.swapaxes(W, -1, -2)) @ P2 @ K @ P1 @ W

    def transition_vector(self, t: ArrayLike) -> np.ndarray:
        """K~_21(t) psi_1(0), shaped t.shape + (2,)"""
        psi1_0 = self.system.eigenvectors(0.0)[0]
        return self.K_tilde(t) @ psi1_0


def transport(
    sys: TwoLevelSystem,
    step: Optional[float] = None,
    unitarity_tol: float = 1e-10,
    intertwine_tol: float = 1e-8,
    reunitarize: bool = True,
    analytic: bool = True,
    certify: bool = True,
) -> KatoTransport:
    """Integrate dW/dt = K W, W(0) = 1, with classical RK4 and a polar re-unitarization per step.

    Args:
        sys: the two-level system
        step: grid step; defaults to the resolution bound min(1/1024, 0.1/max|theta'|)
        unitarity_tol: bound on max_t ||W*W - 1||
        intertwine_tol: bound on max_t ||W(t)P1(0) - P1(t)W(t)||
        reunitarize: project onto the unitary group after every step
        analytic: generator from theta' (True) or from finite differences of P1
        certify: raise TransportError when a tolerance is exceeded
    """
    bound = resolution_step(sys)
    if step is None:
        step = bound
    elif step > bound * (1 + 1e-12):
        logger.warning(f"Kato step {step:.3g} exceeds the resolution bound {bound:.3g}")
    n_steps = max(1, int(math.ceil(1.0 / step - 1e-9)))
    grid = np.linspace(0.0, 1.0, n_steps + 1)
    h = grid[1] - grid[0]
    logger.info(f"Kato transport: {n_steps} RK4 steps of {h:.3g}")

    K_nodes = kato_generator(sys, grid, analytic)
    K_mid = kato_generator(sys, grid[:-1] + 0.5 * h, analytic)
    W = np.empty((n_steps + 1, 2, 2), dtype=complex)
    W[0] = IDENTITY
    for k in range(n_steps):
        Wk = W[k]
        k1 = K_nodes[k] @ Wk
        k2 = K_mid[k] @ (Wk + 0.5 * h * k1)
        k3 = K_mid[k] @ (Wk + 0.5 * h * k2)
        k4 = K_nodes[k + 1] @ (Wk + h * k3)
        W_next = Wk + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        W[k + 1] = normalize_unitary_matrix(W_next) if reunitarize else W_next

    unitarity = _unitarity_residual(W)
    P1_0 = sys.projectors(0.0)[0]
    P1 = sys.projectors(grid)[0]
    intertwining = float(np.max(np.linalg.norm(W @ P1_0 - P1 @ W, ord=2, axis=(-2, -1))))
    logger.debug(f"Kato residuals: unitarity {unitarity:.2e}, intertwining {intertwining:.2e}")

    if certify and unitarity > unitarity_tol:
        raise TransportError(f"Unitarity drift {unitarity:.2e} exceeds {unitarity_tol:.1e}")
    if certify and intertwining > intertwine_tol:
        raise TransportError(f"Intertwining residual {intertwining:.2e} exceeds {intertwine_tol:.1e}")

    return KatoTransport(
        system=sys, grid=grid, W=W, K=K_nodes,
        unitarity_residual=unitarity, intertwining_residual=intertwining, analytic=analytic,
    )


def _unitarity_residual(W: np.ndarray) -> float:
    WdW = np.conj(np.swapaxes(W, -1, -2)) @ W
    return float(np.max(np.linalg.norm(WdW - IDENTITY, ord=2, axis=(-2, -1))))


def q12(kt: KatoTransport, s: ArrayLike, tau: ArrayLike) -> np.ndarray:
    """Two-time kernel <psi1(0)| K~21(tau)* K~21(s) |psi1(0)> / e21(tau)^2"""
    v_s = kt.transition_vector(s)
    v_tau = kt.transition_vector(tau)
    gap = np.asarray(kt.system.e21(tau))
    return np.sum(np.conj(v_tau) * v_s, axis=-1) / gap**2


def q12_diagonal(kt: KatoTransport, t: ArrayLike) -> ArrayLike:
    """q12(t, t) = |<psi2(0)| W* dW/dt |psi1(0)>|^2 / e21(t)^2"""
    psi1_0, psi2_0 = kt.system.eigenvectors(0.0)
    W = kt.W_at(t)
    amplitude = np.conj(psi2_0) @ (np.conj(np.swapaxes(W, -1, -2)) @ kt.dW_at(t)) @ psi1_0
    out = np.abs(amplitude) ** 2 / np.asarray(kt.system.e21(t)) ** 2
    return float(out) if np.ndim(out) == 0 else out


def p_free(kt: KatoTransport, eps: float, t: float) -> float:
    """Free adiabatic transition probability eps^2 q12(t, t)"""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return float(eps**2 * q12_diagonal(kt, t))
