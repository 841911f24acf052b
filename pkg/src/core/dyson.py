"""
Transition probability 1 -> 2: the exact first Dyson term, the leading-order prediction,
a third-order magnitude and the coupling regime.

    ||omega1(t)||^2 = 2 Re int_0^t ds int_0^s dtau exp(-i phi12 + i zeta12 - eta12)(s, tau) e21(tau)^2 q12(s, tau)
    p_free          = eps^2 q12(t, t)
    p_correction    = (lam^2 / 2 eps) int_0^t eps^2 q12(s, s) b12(s)^2 gamma_hat^beta(e12(s)) ds
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.exceptions import NodeBudgetError, QuadratureError
from core.kato import KatoTransport, q12_diagonal
from core.phases import PhaseKernels
from core.quadrature import (
    TriangleRule,
    composite_rule,
    gauss_legendre,
    mapped_rule,
    ordered_map,
    pairwise_sum,
    panel_breaks,
)
from core.reservoir import ReservoirModel, decay_exponent, spectral_density
from core.system import TwoLevelSystem, central_difference

logger = logging.getLogger(__name__)

REGIMES = ("negligible-coupling", "balanced", "reservoir-assisted", "outside-theorem")


@dataclass
class RegimeThresholds:
    """lam/sqrt(eps) below negligible_ratio is negligible, up to balanced_ratio is balanced;
    reservoir-assisted requires lam < window_ratio * eps^max(1/4, (1 - m1)/2)"""

    negligible_ratio: float = 0.3
    balanced_ratio: float = 3.0
    window_ratio: float = 1.0

    @classmethod
    def from_config(cls, cfg: Any) -> "RegimeThresholds":
        return cls(
            negligible_ratio=float(cfg.negligible_ratio),
            balanced_ratio=float(cfg.balanced_ratio),
            window_ratio=float(cfg.window_ratio),
        )


@dataclass
class DysonTerm:
    order: int
    value: float

    def __post_init__(self):
        if self.order < 1 or self.order % 2 == 0:
            raise ValueError(f"Dyson terms carrying the 1 -> 2 transition have odd order, got {self.order}")
        if self.value < 0:
            raise ValueError(f"Dyson term magnitude must be nonnegative, got {self.value}")


@dataclass
class TransitionReport:
    t: float
    eps: float
    lam: float
    beta: float
    m: float
    p_free: float
    p_correction: float
    p_dyson1: Optional[float] = None
    omega3_norm: Optional[float] = None
    residual: Optional[float] = None
    regime: str = ""
    error_exponents: Tuple[float, float] = (0.0, 0.0)
    terms: List[DysonTerm] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": self.eps, "lam": self.lam, "m": self.m, "beta": self.beta, "t": self.t,
            "p_free": self.p_free, "p_correction": self.p_correction, "p_dyson1": self.p_dyson1,
            "omega3": self.omega3_norm, "residual": self.residual, "regime": self.regime,
        }


def error_exponents(m: float) -> Tuple[float, float]:
    """(m1, alpha0) with m1 = min(m, 1) and alpha0 = 1/(2 + 2m - m1)"""
    if m <= 0:
        raise ValueError(f"m must be positive, got {m}")
    m1 = min(m, 1.0)
    return m1, 1.0 / (2.0 + 2.0 * m - m1)


def classify_regime(eps: float, lam: float, m: float, thresholds: Optional[RegimeThresholds] = None) -> str:
    thresholds = thresholds or RegimeThresholds()
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    m1, _ = error_exponents(m)
    ratio = lam / math.sqrt(eps)
    if ratio < thresholds.negligible_ratio:
        return "negligible-coupling"
    if ratio <= thresholds.balanced_ratio:
        return "balanced"
    if lam < thresholds.window_ratio * eps ** max(0.25, 0.5 * (1.0 - m1)):
        return "reservoir-assisted"
    return "outside-theorem"


def oscillation_width(sys: TwoLevelSystem, eps: float, npt: int = 8, oscillation_nodes: int = 10,
                      panel_eps_fraction: float = 0.5) -> float:
    """Panel width giving about oscillation_nodes nodes per Bohr period, and at most panel_eps_fraction * eps"""
    gap = max(sys.max_gap(), 1e-300)
    return min(npt * 2.0 * math.pi * eps / (oscillation_nodes * gap), panel_eps_fraction * eps)


def _triangle(sys: TwoLevelSystem, eps: float, t: float, width: float, npt: int, max_phase: float,
              max_panels: int = 4096) -> TriangleRule:
    """Panels narrowed until the Bohr phase per panel is at most max_phase, up to max_panels"""
    gap = sys.max_gap()
    if gap > 0 and math.isfinite(max_phase):
        width = min(width, max_phase * eps / gap)
    width = min(width, t)
    n_panels = int(math.ceil(t / width - 1e-9))
    if n_panels > max_panels:
        raise QuadratureError(
            f"Resolving a phase increment of {max_phase:.3g} per panel needs {n_panels} panels, cap is {max_panels}"
        )
    return TriangleRule.build(t, width, npt)


def _first_order_rows(kernels: PhaseKernels, kt: KatoTransport, rule: TriangleRule, threads: int) -> np.ndarray:
    """Per s-panel sums of the ||omega1||^2 integrand, tau running from 0 to s"""
    npt = rule.npt
    v_nodes = kt.transition_vector(rule.s_nodes)

    def row(p: int) -> complex:
        s, ws, tau, wtau = rule.row(p)
        v_diag = kt.transition_vector(tau[:, -npt:])
        v_s = v_nodes[p]
        if p:
            v_lower = np.broadcast_to(v_nodes[:p].reshape(-1, 2), (npt, p * npt, 2))
            v_tau = np.concatenate([v_lower, v_diag], axis=1)
        else:
            v_tau = v_diag
        overlap = np.sum(np.conj(v_tau) * v_s[:, None, :], axis=-1)
        integrand = np.exp(kernels.exponent(s[:, None], tau)) * overlap
        return complex(np.sum(ws[:, None] * wtau * integrand))

    return np.array(ordered_map(row, list(range(rule.n_panels)), threads))


def dyson1_exact(
    kernels: PhaseKernels,
    kt: KatoTransport,
    sys: TwoLevelSystem,
    t: float,
    panel_eps_fraction: float = 0.5,
    oscillation_nodes: int = 10,
    max_phase_per_panel: float = math.pi / 4,
    max_panels: int = 4096,
    threads: int = 1,
    npt: int = 8,
) -> float:
    """||omega1(t)||^2 by composite Gauss-Legendre on the triangle 0 <= tau <= s <= t"""
    if t <= 0:
        return 0.0
    width = oscillation_width(sys, kernels.eps, npt, oscillation_nodes, panel_eps_fraction)
    rule = _triangle(sys, kernels.eps, t, width, npt, max_phase_per_panel, max_panels)
    logger.debug(f"dyson1: {rule.n_panels} panels, {rule.n_pairs} node pairs")
    value = 2.0 * float(np.real(pairwise_sum(_first_order_rows(kernels, kt, rule, threads))))
    if value < -1e-12 or value > 1.0 + 1e-9:
        logger.warning(f"dyson1 = {value:.6g} outside [0, 1]")
    return value


def dyson1_by_parts(
    kernels: PhaseKernels,
    kt: KatoTransport,
    sys: TwoLevelSystem,
    t: float,
    fd_fraction: float = 1.0 / 64,
    panel_eps_fraction: float = 0.5,
    threads: int = 1,
    npt: int = 8,
) -> float:
    """||omega1(t)||^2 after two integrations by parts in tau:

    eps^2 q12(t,t) - 2 eps^2 Re int int exp(-i phi12) d_tau[(1/e21) d_tau(exp(i zeta12 - eta12) e21 q12)]

    with tau-derivatives by 5-point central differences. Needs a flat start of the drive.
    """
    eps = kernels.eps
    h = fd_fraction * eps
    width = oscillation_width(sys, eps, npt, panel_eps_fraction=panel_eps_fraction)
    rule = _triangle(sys, eps, t, width, npt, math.inf)
    v_nodes = kt.transition_vector(rule.s_nodes)

    def amplitude(s: np.ndarray, tau: np.ndarray, v_s: np.ndarray) -> np.ndarray:
        v_tau = kt.transition_vector(tau)
        overlap = np.sum(np.conj(v_tau) * v_s[:, None, :], axis=-1)
        damping = np.exp(1j * np.asarray(kernels.zeta12(s, tau)) - np.asarray(kernels.eta12(s, tau)))
        return damping * overlap / np.asarray(sys.e21(tau))

    def row(p: int) -> complex:
        s, ws, tau, wtau = rule.row(p)
        S = s[:, None]
        v_s = v_nodes[p]
        fn = lambda x: amplitude(S, x, v_s)
        d1 = central_difference(fn, tau, h, 1)
        d2 = central_difference(fn, tau, h, 2)
        gap = np.asarray(sys.e21(tau))
        dgap = np.asarray(sys.e21.derivative(tau))
        outer = d2 / gap - dgap / gap**2 * d1
        integrand = np.exp(-1j * np.asarray(kernels.phi12(S, tau))) * outer
        return complex(np.sum(ws[:, None] * wtau * integrand))

    total = pairwise_sum(np.array(ordered_map(row, list(range(rule.n_panels)), threads)))
    return float(eps**2 * q12_diagonal(kt, t) - 2.0 * eps**2 * np.real(total))


def leading_order(
    kt: KatoTransport,
    model: ReservoirModel,
    sys: TwoLevelSystem,
    eps: float,
    lam: float,
    t: float,
    panel: float = 1.0 / 256,
    npt: int = 8,
) -> Tuple[float, float]:
    """(p_free, p_correction); the correction integrand is nonnegative"""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    p_free = float(eps**2 * q12_diagonal(kt, t))
    if t <= 0 or lam == 0:
        return p_free, 0.0
    nodes, weights = composite_rule(panel_breaks(0.0, t, panel), npt)
    nodes, weights = nodes.ravel(), weights.ravel()
    e12 = -np.asarray(sys.e21(nodes), dtype=float)
    integrand = q12_diagonal(kt, nodes) * np.asarray(sys.b12(nodes)) ** 2 * spectral_density(model, e12)
    p_correction = 0.5 * lam**2 * eps * float(np.sum(weights * integrand))
    return p_free, max(p_correction, 0.0)


def theorem_residual(p_dyson1: float, p_free: float, p_correction: float) -> float:
    """dyson1 - p_free - p_correction"""
    return p_dyson1 - p_free - p_correction


def _third_order_rule(sys: TwoLevelSystem, eps: float, t: float, node_budget: int, panel_eps_fraction: float,
                      npt: int) -> TriangleRule:
    """Finest triangle rule whose node pairs fit the budget; NodeBudgetError if it cannot resolve eps"""
    required = min(oscillation_width(sys, eps, npt, panel_eps_fraction=panel_eps_fraction), t)
    max_panels = int((math.sqrt(1.0 + 8.0 * node_budget / npt**2) - 1.0) / 2.0)
    needed = int(math.ceil(t / required - 1e-9))
    if max_panels < needed:
        raise NodeBudgetError(f"dyson3 needs {needed} panels, the node budget {node_budget} allows {max_panels}")
    return TriangleRule.build(t, t / max_panels, npt)


def dyson3_magnitude(
    kernels: PhaseKernels,
    kt: KatoTransport,
    sys: TwoLevelSystem,
    t: float,
    node_budget: int = 200_000,
    panel_eps_fraction: float = 0.5,
    threads: int = 1,
    npt: int = 8,
) -> float:
    """Upper estimate of ||omega3(t)||.

    Weyl operators and reservoir dressings are unitary, so the recursion gives

        ||omega3(t)|| <= int_0^t ds |K~21(s)| int_0^s dtau |K~12(tau)| ||omega1(tau)||
                       = int_0^t dtau |K~(tau)| ||omega1(tau)|| (A(t) - A(tau)),   A(x) = int_0^x |K~|

    with ||omega1(tau)||^2 from cumulative first-order panel sums, linear in tau between breaks.
    """
    if t <= 0:
        return 0.0
    rule = _third_order_rule(sys, kernels.eps, t, node_budget, panel_eps_fraction, npt)
    logger.debug(f"dyson3: {rule.n_panels} panels, {rule.n_pairs} node pairs")
    rows = _first_order_rows(kernels, kt, rule, threads)
    norm1 = np.sqrt(np.maximum(np.concatenate([[0.0], 2.0 * np.cumsum(rows).real]), 0.0))

    strength = lambda x: np.linalg.norm(kt.transition_vector(x), axis=-1)
    nodes, weights = rule.s_nodes, rule.s_weights
    k_nodes = strength(nodes)
    cumulative = np.concatenate([[0.0], np.cumsum(np.sum(weights * k_nodes, axis=1))])
    A = np.empty_like(nodes)
    for p in range(rule.n_panels):
        sub, w_sub = mapped_rule(rule.breaks[p], nodes[p], npt)
        A[p] = cumulative[p] + np.sum(w_sub * strength(sub), axis=1)
    g = k_nodes * np.interp(nodes, rule.breaks, norm1)
    return float(pairwise_sum(np.ravel(weights * g * (cumulative[-1] - A))))


def dyson3_phased(
    kernels: PhaseKernels,
    kt: KatoTransport,
    sys: TwoLevelSystem,
    t: float,
    node_budget: int = 200_000,
    panel_eps_fraction: float = 0.5,
    threads: int = 1,
    npt: int = 8,
) -> float:
    """Third Dyson vector with every Weyl expectation replaced by 1, keeping all phases.

    omega3(t) = int_0^t ds int_0^s dtau exp(-i(phi12 - zeta12 + theta12-)(s, tau)) K21(s) K12(tau) omega1(tau)
    omega1(tau) = -int_0^tau exp(-i(phi12 - zeta12 + 1/2 Im<F1,F2>)(sigma)) K21(sigma) psi1(0) dsigma

    A size estimate that may undershoot through cancellation; dyson3_magnitude is the bound.
    """
    if t <= 0:
        return 0.0
    rule = _third_order_rule(sys, kernels.eps, t, node_budget, panel_eps_fraction, npt)
    _, psi2_0 = sys.eigenvectors(0.0)

    def one_time_phase(x: np.ndarray) -> np.ndarray:
        zero = np.zeros_like(x)
        own = np.asarray(kernels.cross("1", "2", x, x)).imag
        return np.asarray(kernels.phi12(x, zero)) - np.asarray(kernels.zeta12(x, zero)) + 0.5 * own

    def forward(x: np.ndarray) -> np.ndarray:
        """<psi2(0)| K~21(x) |psi1(0)>"""
        return kt.transition_vector(x) @ np.conj(psi2_0)

    def backward(x: np.ndarray) -> np.ndarray:
        """<psi1(0)| K~12(x) |psi2(0)> = -conj <psi2(0)| K~21(x) |psi1(0)>"""
        return -np.conj(forward(x))

    gl_x, gl_w = gauss_legendre(npt)
    breaks = rule.breaks
    per_panel = np.sum(rule.s_weights * np.exp(-1j * one_time_phase(rule.s_nodes)) * forward(rule.s_nodes), axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(per_panel)])

    def omega1(x: np.ndarray) -> np.ndarray:
        """Coefficient of psi2(0) in omega1(x), by panel sums plus a mapped partial panel"""
        flat = np.ravel(x)
        p = np.clip(np.searchsorted(breaks, flat, side="right") - 1, 0, len(breaks) - 2)
        a = breaks[p][:, None]
        half = 0.5 * (flat[:, None] - a)
        sub = a + half * (gl_x + 1.0)
        partial = np.sum(half * gl_w * np.exp(-1j * one_time_phase(sub)) * forward(sub), axis=1)
        return -(cumulative[p] + partial).reshape(np.shape(x))

    def row(p: int) -> complex:
        s, ws, tau, wtau = rule.row(p)
        S = s[:, None]
        phase = (np.asarray(kernels.phi12(S, tau)) - np.asarray(kernels.zeta12(S, tau))
                 + np.asarray(kernels.theta12_minus(S, tau)))
        integrand = np.exp(-1j * phase) * forward(s)[:, None] * backward(tau) * omega1(tau)
        return complex(np.sum(ws[:, None] * wtau * integrand))

    logger.debug(f"dyson3: {rule.n_panels} panels, {rule.n_pairs} node pairs")
    total = pairwise_sum(np.array(ordered_map(row, list(range(rule.n_panels)), threads)))
    return float(abs(total))


def transition_report(
    kt: KatoTransport,
    model: ReservoirModel,
    sys: TwoLevelSystem,
    eps: float,
    lam: float,
    t: float,
    routes: Tuple[str, ...] = ("free", "leading", "dyson1"),
    kernels: Optional[PhaseKernels] = None,
    thresholds: Optional[RegimeThresholds] = None,
    dyson_options: Optional[Dict[str, Any]] = None,
    kernel_options: Optional[Dict[str, Any]] = None,
    panel_max: float = 1.0 / 256,
    threads: int = 1,
) -> TransitionReport:
    """Evaluate the requested routes at one (eps, lam, t); phase kernels are built only for Dyson routes"""
    opts = dict(dyson_options or {})
    budget = opts.pop("dyson3_node_budget", 200_000)
    m = decay_exponent(model)
    p_free, p_correction = leading_order(kt, model, sys, eps, lam, t, panel=panel_max)
    if "leading" not in routes:
        p_correction = 0.0
    report = TransitionReport(
        t=t, eps=eps, lam=lam, beta=model.beta, m=m, p_free=p_free, p_correction=p_correction,
        regime=classify_regime(eps, lam, m, thresholds) if 0 < eps < 1 else "outside-theorem",
        error_exponents=error_exponents(m),
    )
    if ("dyson1" in routes or "dyson3" in routes) and kernels is None:
        kernels = PhaseKernels.build(sys, model, eps, lam, t_max=max(t, 1e-12), **(kernel_options or {}))
    if "dyson1" in routes:
        report.p_dyson1 = dyson1_exact(kernels, kt, sys, t, threads=threads, **opts)
        report.residual = theorem_residual(report.p_dyson1, p_free, p_correction)
        report.terms.append(DysonTerm(1, max(report.p_dyson1, 0.0)))
    if "dyson3" in routes:
        report.omega3_norm = dyson3_magnitude(
            kernels, kt, sys, t, node_budget=budget,
            panel_eps_fraction=opts.get("panel_eps_fraction", 0.5), threads=threads,
        )
        report.terms.append(DysonTerm(3, report.omega3_norm))
    return report
