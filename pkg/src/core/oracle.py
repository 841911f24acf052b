"""
Brute-force reference: the reservoir discretized into finitely many modes, truncated Fock
space, and the full time-rescaled Schroedinger equation integrated directly.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import expm_multiply

from core.exceptions import ConfigError, LeakageError, NormDriftError
from core.expressions import parse_number
from core.reservoir import ReservoirModel, gamma_hat
from core.system import IDENTITY, SIGMA_X, SIGMA_Z, TwoLevelSystem

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# commutator-free fourth-order Magnus: two exponentials at the Gauss-Legendre nodes
_GAUSS_NODES = (0.5 - math.sqrt(3.0) / 6.0, 0.5 + math.sqrt(3.0) / 6.0)
_ALPHA = ((3.0 - 2.0 * math.sqrt(3.0)) / 12.0, (3.0 + 2.0 * math.sqrt(3.0)) / 12.0)


@dataclass(frozen=True)
class OracleConfig:
    """Discretization and truncation knobs of the oracle.

    dt_phys = 0 selects the largest step allowed by the resolution bound.
    """

    n_modes: int = 48
    omega_max: float = 10.0
    n_excitations: int = 2
    dt_phys: float = 0.0
    beta: float = math.inf
    steps_per_period: int = 20
    norm_drift_tol: float = 1e-8
    leakage_tol: float = 0.05
    max_dimension: int = 200_000

    def __post_init__(self):
        if self.n_modes < 1:
            raise ConfigError(f"oracle.n_modes must be >= 1, got {self.n_modes}")
        if self.n_excitations < 0:
            raise ConfigError(f"oracle.n_excitations must be >= 0, got {self.n_excitations}")
        if not self.omega_max > 0:
            raise ConfigError(f"oracle.omega_max must be positive, got {self.omega_max}")
        if self.dt_phys < 0:
            raise ConfigError(f"oracle.dt must be >= 0, got {self.dt_phys}")
        if math.isfinite(self.beta):
            raise ConfigError("The Fock-space oracle runs at zero temperature only (beta = inf)")

    @classmethod
    def from_config(cls, cfg: Any, beta: Optional[float] = None, **overrides) -> "OracleConfig":
        """Build from an OracleSection-like object"""
        values = dict(
            n_modes=int(cfg.n_modes),
            omega_max=parse_number(cfg.omega_max),
            n_excitations=int(cfg.n_excitations),
            dt_phys=parse_number(cfg.dt),
            beta=math.inf if beta is None else parse_number(beta),
        )
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class BathModes:
    """Mode frequencies omega_k and real coupling weights g_k"""

    omega: np.ndarray
    weights: np.ndarray

    @property
    def n_modes(self) -> int:
        return len(self.omega)


@dataclass
class OracleResult:
    p12: float
    norm_drift: float
    leakage: float
    populations: Tuple[float, float]
    mean_occupation: float
    dimension: int
    n_steps: int
    dt_phys: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p12": self.p12,
            "norm_drift": self.norm_drift,
            "leakage": self.leakage,
            "populations": list(self.populations),
            "mean_occupation": self.mean_occupation,
            "dimension": self.dimension,
            "n_steps": self.n_steps,
            "dt_phys": self.dt_phys,
        }


def discretize(model: ReservoirModel, cfg: OracleConfig) -> BathModes:
    """Midpoint modes omega_k = (k - 1/2) d_omega with |g_k|^2 = gamma_hat(omega_k) d_omega / 2pi"""
    if model.is_thermal:
        raise ConfigError("Bath discretization for the oracle needs a zero-temperature reservoir")
    d_omega = cfg.omega_max / cfg.n_modes
    omega = (np.arange(1, cfg.n_modes + 1) - 0.5) * d_omega
    weights = np.sqrt(np.asarray(gamma_hat(model, omega)) * d_omega / (2.0 * math.pi))
    return BathModes(omega=omega, weights=weights)


def discretized_correlation(modes: BathModes, x: ArrayLike) -> ArrayLike:
    """gamma_N(x) = sum_k |g_k|^2 exp(-i omega_k x)"""
    x_arr = np.asarray(x, dtype=float)
    phases = np.exp(-1j * np.multiply.outer(x_arr, modes.omega))
    out = phases @ (modes.weights**2)
    return complex(out) if out.ndim == 0 else out


def fock_basis(n_modes: int, n_excitations: int) -> np.ndarray:
    """Occupation vectors with total occupation <= n_excitations, vacuum first, by total then lexicographic"""
    states: List[np.ndarray] = []
    for total in range(n_excitations + 1):
        for occupied in itertools.combinations_with_replacement(range(n_modes), total):
            states.append(np.bincount(np.asarray(occupied, dtype=int), minlength=n_modes))
    return np.array(states, dtype=int).reshape(len(states), n_modes)


def fock_dimension(n_modes: int, n_excitations: int) -> int:
    return math.comb(n_modes + n_excitations, n_excitations)


def annihilators(basis: np.ndarray) -> List[sps.csr_matrix]:
    """Truncated a_k as sparse matrices on the given occupation basis"""
    index = {tuple(state): i for i, state in enumerate(basis)}
    dim, n_modes = basis.shape
    ops = []
    for k in range(n_modes):
        rows, cols, data = [], [], []
        for col, state in enumerate(basis):
            if state[k] == 0:
                continue
            lowered = state.copy()
            lowered[k] -= 1
            rows.append(index[tuple(lowered)])
            cols.append(col)
            data.append(math.sqrt(state[k]))
        ops.append(sps.csr_matrix((data, (rows, cols)), shape=(dim, dim), dtype=float))
    return ops


def field_operator(modes: BathModes, basis: np.ndarray) -> sps.csr_matrix:
    """phi_N = (1/sqrt 2) sum_k g_k (a_k + a_k*)"""
    dim = basis.shape[0]
    phi = sps.csr_matrix((dim, dim), dtype=float)
    for g, a in zip(modes.weights, annihilators(basis)):
        if g != 0.0:
            phi = phi + g * (a + a.T)
    return (phi / math.sqrt(2.0)).tocsr()


def reservoir_hamiltonian(modes: BathModes, basis: np.ndarray) -> sps.csr_matrix:
    return sps.diags(basis @ modes.omega).tocsr()


class _Generator:
    """H(t) = H_S(t) x 1 + lam B(t) x phi_N + 1 x H_R assembled from fixed Kronecker blocks"""

    def __init__(self, sys: TwoLevelSystem, modes: BathModes, basis: np.ndarray, lam: float):
        self.sys = sys
        self.lam = lam
        dim = basis.shape[0]
        one = sps.identity(dim, format="csr")
        phi = field_operator(modes, basis)
        self.blocks = {
            "I": sps.kron(IDENTITY, one, format="csr"),
            "Z": sps.kron(SIGMA_Z, one, format="csr"),
            "X": sps.kron(SIGMA_X, one, format="csr"),
            "Iphi": sps.kron(IDENTITY, phi, format="csr"),
            "Zphi": sps.kron(SIGMA_Z, phi, format="csr"),
            "Xphi": sps.kron(SIGMA_X, phi, format="csr"),
            "HR": sps.kron(IDENTITY, reservoir_hamiltonian(modes, basis), format="csr"),
        }

    def coefficients(self, t: float) -> Dict[str, float]:
        s = self.sys
        th = float(s.theta(t))
        gap = float(s.e21(t))
        b1, b2 = float(s.b1(t)), float(s.b2(t))
        # B(t) = (b1 + b2)/2 + (b1 - b2)/2 n.sigma,  H_S(t) = e_mean - e21/2 n.sigma
        half_sum = 0.5 * self.lam * (b1 + b2)
        half_diff = 0.5 * self.lam * (b1 - b2)
        return {
            "I": float(s.e_mean(t)),
            "Z": -0.5 * gap * math.cos(th),
            "X": -0.5 * gap * math.sin(th),
            "Iphi": half_sum,
            "Zphi": half_diff * math.cos(th),
            "Xphi": half_diff * math.sin(th),
            "HR": 1.0,
        }

    def combined(self, weighted_times: List[Tuple[float, float]]) -> sps.csr_matrix:
        """sum_i w_i H(t_i)"""
        total: Dict[str, float] = {key: 0.0 for key in self.blocks}
        for w, t in weighted_times:
            for key, c in self.coefficients(t).items():
                total[key] += w * c
        out = None
        for key, c in total.items():
            if c == 0.0:
                continue
            term = c * self.blocks[key]
            out = term if out is None else out + term
        return out.tocsr()


def resolved_step(sys: TwoLevelSystem, cfg: OracleConfig) -> float:
    """Physical step resolving the fastest bath mode and the Bohr frequency"""
    fastest = max(cfg.omega_max, sys.max_gap())
    bound = 2.0 * math.pi / (cfg.steps_per_period * fastest)
    if cfg.dt_phys == 0.0:
        return bound
    if cfg.dt_phys > bound * (1 + 1e-12):
        logger.warning(f"Oracle step {cfg.dt_phys:.3g} exceeds the resolution bound {bound:.3g}; clamping")
        return bound
    return cfg.dt_phys


def evolve(sys: TwoLevelSystem, modes: BathModes, cfg: OracleConfig, eps: float, lam: float, t: float,
           certify: bool = True) -> OracleResult:
    """Integrate i eps d/dt psi = H(t) psi from psi_1(0) x vacuum up to rescaled time t.

    Args:
        sys: the two-level system
        modes: discretized bath
        cfg: truncation and step settings
        eps: adiabatic parameter
        lam: coupling constant
        t: final rescaled time in [0, 1]
        certify: raise on norm drift or leakage beyond tolerance
    """
    if not 0 < eps:
        raise ValueError(f"eps must be positive, got {eps}")
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")

    dim = fock_dimension(modes.n_modes, cfg.n_excitations)
    if 2 * dim > cfg.max_dimension:
        raise ConfigError(
            f"Oracle Hilbert dimension {2 * dim} exceeds max_dimension {cfg.max_dimension}; "
            f"reduce oracle.n_modes or oracle.n_excitations"
        )
    basis = fock_basis(modes.n_modes, cfg.n_excitations)
    totals = basis.sum(axis=1)
    # with no excitations allowed the field vanishes and nothing can leak
    boundary = np.tile(totals == cfg.n_excitations, 2) if cfg.n_excitations > 0 else np.zeros(2 * dim, dtype=bool)

    dt_bound = resolved_step(sys, cfg)
    horizon = t / eps
    n_steps = max(1, int(math.ceil(horizon / dt_bound - 1e-9))) if horizon > 0 else 0
    dt = horizon / n_steps if n_steps else 0.0
    h = eps * dt
    logger.info(
        f"Oracle run: {modes.n_modes} modes, {cfg.n_excitations} excitations, dimension {2 * dim}, "
        f"{n_steps} steps of {dt:.3g}"
    )

    gen = _Generator(sys, modes, basis, lam)
    psi = np.zeros(2 * dim, dtype=complex)
    psi1_0 = sys.eigenvectors(0.0)[0]
    psi[0] = psi1_0[0]
    psi[dim] = psi1_0[1]

    leakage = float(np.sum(np.abs(psi[boundary]) ** 2))
    drift = 0.0
    c1, c2 = _GAUSS_NODES
    a1, a2 = _ALPHA
    for k in range(n_steps):
        t0 = k * h
        first = gen.combined([(a2, t0 + c1 * h), (a1, t0 + c2 * h)])
        second = gen.combined([(a1, t0 + c1 * h), (a2, t0 + c2 * h)])
        psi = expm_multiply(-1j * dt * first, psi)
        psi = expm_multiply(-1j * dt * second, psi)
        leakage = max(leakage, float(np.sum(np.abs(psi[boundary]) ** 2)))
        drift = max(drift, abs(float(np.linalg.norm(psi)) - 1.0))

    logger.debug(f"Oracle finished: norm drift {drift:.2e}, leakage {leakage:.2e}")
    if certify and drift > cfg.norm_drift_tol:
        raise NormDriftError(f"Oracle norm drift {drift:.2e} exceeds {cfg.norm_drift_tol:.1e}")
    if certify and leakage > cfg.leakage_tol:
        raise LeakageError(
            f"Population {leakage:.3g} at the Fock cutoff exceeds {cfg.leakage_tol:g}; raise oracle.n_excitations",
            leakage,
        )

    state = psi.reshape(2, dim)
    P1, P2 = sys.projectors(t)
    populations = tuple(float(np.sum(np.abs(P @ state) ** 2)) for P in (P1, P2))
    mean_occupation = float(np.sum((np.abs(state) ** 2) @ totals))
    return OracleResult(
        p12=populations[1],
        norm_drift=drift,
        leakage=leakage,
        populations=populations,
        mean_occupation=mean_occupation,
        dimension=2 * dim,
        n_steps=n_steps,
        dt_phys=dt,
    )
