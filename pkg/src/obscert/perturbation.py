"""Perturbed spectra and the sequences controlling gap and mode-energy survival.

Everything here compares the eigendata of A + K against that of A: the
relative drifts theta_n, their interpolant f, the two-sided variational
bounds, the drift-monotonicity constant kappa*, and the commutator
R = AK - KA whose decay governs the high-frequency modes.
"""

from dataclasses import dataclass

import numpy as np

from .eig import compress_and_maximize, eig_sym
from .model import ObservationMap, Perturbation, SpectralOperator
from .observability import GapReport

__all__ = [
    "PiecewiseLinear",
    "PerturbedSpectrum",
    "SandwichReport",
    "ConditionOneReport",
    "CommutatorReport",
    "NecessaryConditionReport",
    "perturbed_spectrum",
    "sandwich_sequences",
    "fit_condition_one",
    "commutator_diagnostics",
    "necessary_condition_sequence",
]


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise-linear interpolant that reproduces its knots bit-for-bit."""

    knots: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.knots, self.values)
        idx = np.searchsorted(self.knots, x)
        idx = np.clip(idx, 0, self.knots.size - 1)
        hit = self.knots[idx] == x
        out = np.where(hit, self.values[idx], out)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PerturbedSpectrum:
    """Eigenpairs of A + K aligned to the unperturbed indices by sorted order."""

    mu: np.ndarray
    mu_tilde: np.ndarray
    phi_tilde: np.ndarray
    theta: np.ndarray
    f_interp: PiecewiseLinear
    guard: int
    degenerate: np.ndarray
    residual_norm: float

    @property
    def dim(self) -> int:
        return self.mu.size

    @property
    def trusted(self) -> int:
        return self.dim - self.guard


def perturbed_spectrum(operator: SpectralOperator, perturbation: Perturbation) -> PerturbedSpectrum:
    """Eigendecomposition of A + K with relative drifts theta_n = mu~_n/mu_n - 1."""
    if perturbation.dim != operator.dim:
        raise ValueError(
            f"perturbation dimension {perturbation.dim} does not match operator {operator.dim}"
        )
    dec = eig_sym(operator.a_matrix() + perturbation.matrix)
    mu = operator.eigenvalues
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(mu > 0, dec.values / np.where(mu > 0, mu, 1.0) - 1.0, np.nan)
    theta.setflags(write=False)
    return PerturbedSpectrum(
        mu=mu,
        mu_tilde=dec.values,
        phi_tilde=dec.vectors,
        theta=theta,
        f_interp=PiecewiseLinear(mu, theta),
        guard=operator.guard_band,
        degenerate=dec.degenerate,
        residual_norm=dec.residual_norm,
    )


@dataclass(frozen=True)
class SandwichReport:
    """Two-sided variational bounds on the eigenvalue ratios mu~_n / mu_n.

    ``lower``/``upper`` are the textbook forms 1/(1-beta_n) - 1 and alpha_n;
    ``lower_cert``/``upper_cert`` are the directly certified compression
    differences <K psi_n, psi_n>/mu_n and <K phi_n, phi_n>/mu_n, which hold
    exactly at truncation regardless of which vector attains the maxima.
    ``violations`` is judged against the certified pair.
    """

    alpha: np.ndarray
    beta: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    lower_cert: np.ndarray
    upper_cert: np.ndarray
    discrepancy: np.ndarray
    violations: tuple
    paper_violations: tuple
    tol: float


def sandwich_sequences(
    operator: SpectralOperator,
    perturbation: Perturbation,
    spectrum: PerturbedSpectrum,
    tol: float = 1e-8,
) -> SandwichReport:
    mu = operator.eigenvalues
    if mu[0] <= 0:
        raise ValueError("sandwich sequences need a strictly positive operator")
    n_t = spectrum.trusted
    k_mat = perturbation.matrix
    ak_mat = operator.a_matrix() + k_mat
    a_mat = operator.a_matrix()
    eye = np.eye(operator.dim)

    alpha = np.empty(n_t)
    beta = np.empty(n_t)
    upper_cert = np.empty(n_t)
    lower_cert = np.empty(n_t)
    for n in range(1, n_t + 1):
        # maximizer of the perturbed quadratic form over the unperturbed span
        hat = compress_and_maximize(ak_mat, eye[:, :n]).top_vector
        k_hat = k_mat @ hat
        alpha[n - 1] = float(hat @ (k_mat @ (hat / mu)))
        upper_cert[n - 1] = float(hat @ k_hat) / mu[n - 1]
        # maximizer of the unperturbed quadratic form over the perturbed span
        psi = compress_and_maximize(a_mat, spectrum.phi_tilde[:, :n]).top_vector
        k_psi = k_mat @ psi
        beta[n - 1] = float(psi @ (k_mat @ np.linalg.solve(ak_mat, psi)))
        lower_cert[n - 1] = float(psi @ k_psi) / mu[n - 1]

    with np.errstate(divide="ignore"):
        lower = np.where(beta < 1.0, 1.0 / (1.0 - beta) - 1.0, np.inf)
    theta = spectrum.theta[:n_t]
    violations = tuple(
        int(n + 1)
        for n in range(n_t)
        if not (lower_cert[n] - tol <= theta[n] <= upper_cert[n] + tol)
    )
    paper_violations = tuple(
        int(n + 1)
        for n in range(n_t)
        if not (lower[n] - tol <= theta[n] <= alpha[n] + tol)
    )
    return SandwichReport(
        alpha=alpha,
        beta=beta,
        lower=lower,
        upper=alpha,
        lower_cert=lower_cert,
        upper_cert=upper_cert,
        discrepancy=np.abs(upper_cert - alpha),
        violations=violations,
        paper_violations=paper_violations,
        tol=tol,
    )


@dataclass(frozen=True)
class ConditionOneReport:
    """Smallest kappa making mu_n*theta_n + kappa*mu_n non-decreasing (trusted range).

    Passing (kappa* < 1) certifies the preserved gap gamma_tilde for the
    perturbed eigenvalues; ``preservation_violations`` lists any trusted
    index where that certified gap fails (must be empty when passed).
    """

    kappa_star: float
    passed: bool
    gamma_tilde: float
    certified_upto: int
    preservation_violations: tuple


def fit_condition_one(
    spectrum: PerturbedSpectrum, gap: GapReport, slack: float = 1e-9
) -> ConditionOneReport:
    n_t = spectrum.trusted
    if n_t < 3:
        raise ValueError(f"need at least 3 trusted indices, have {n_t}")
    mu = spectrum.mu[: n_t + 1]
    if np.any(np.diff(mu) <= 0):
        raise ValueError("unperturbed eigenvalues must be strictly increasing on the trusted range")
    drift = spectrum.mu_tilde[: n_t + 1] - mu
    kappa = -(np.diff(drift)) / np.diff(mu)
    kappa_star = max(0.0, float(kappa.max()))
    passed = kappa_star < 1.0
    gamma_tilde = (1.0 - kappa_star) * gap.gamma_hat
    violations = ()
    if passed:
        tilde_gaps = np.diff(spectrum.mu_tilde[: n_t + 1])
        violations = tuple(
            int(i + 1) for i in range(n_t) if tilde_gaps[i] <= gamma_tilde - slack
        )
    return ConditionOneReport(kappa_star, passed, gamma_tilde, n_t, violations)


@dataclass(frozen=True)
class CommutatorReport:
    """Commutator R = AK - KA with decay diagnostics (never a compactness proof)."""

    commutator: np.ndarray
    op_norm: float
    singular_values: np.ndarray
    tail_ratio: float
    r_phi_norms: np.ndarray
    decay_slope: float | None
    decays: bool | None
    mapping_norm: float | None


def commutator_diagnostics(
    operator: SpectralOperator,
    perturbation: Perturbation,
    spectrum: PerturbedSpectrum,
    decay_slope_threshold: float = -0.5,
) -> CommutatorReport:
    if perturbation.dim != operator.dim:
        raise ValueError("dimension mismatch between operator and perturbation")
    mu = operator.eigenvalues
    k_mat = perturbation.matrix
    commutator = mu[:, None] * k_mat - k_mat * mu[None, :]
    svals = np.linalg.svd(commutator, compute_uv=False)
    op_norm = float(svals[0])
    half = -(-operator.dim // 2)
    tail_ratio = float(svals[half - 1] / svals[0]) if op_norm > 0 else 0.0
    n_t = spectrum.trusted
    r_phi = commutator @ spectrum.phi_tilde[:, :n_t]
    r_phi_norms = np.linalg.norm(r_phi, axis=0)

    keep = svals > 1e-14 * max(op_norm, 1e-300)
    if keep.sum() >= 3:
        idx = np.arange(1, keep.sum() + 1, dtype=float)
        slope = float(np.polyfit(np.log(idx), np.log(svals[keep]), 1)[0])
        decays = slope < decay_slope_threshold
    else:
        slope, decays = None, None
    mapping_norm = (
        float(np.linalg.norm(k_mat / mu[None, :], 2)) if mu[0] > 0 else None
    )
    return CommutatorReport(
        commutator, op_norm, svals, tail_ratio, r_phi_norms, slope, decays, mapping_norm
    )


@dataclass(frozen=True)
class NecessaryConditionReport:
    """Running minima c_n = min_{k <= n} ||C phi~_k|| over the trusted range."""

    norms: np.ndarray
    c: np.ndarray
    flagged: tuple
    zero_floor: float


def necessary_condition_sequence(
    observation: ObservationMap,
    spectrum: PerturbedSpectrum,
    zero_floor: float = 1e-12,
) -> NecessaryConditionReport:
    if observation.in_dim != spectrum.dim:
        raise ValueError(
            f"observation dimension {observation.in_dim} does not match spectrum {spectrum.dim}"
        )
    n_t = spectrum.trusted
    if n_t < 1:
        raise ValueError("trusted range is empty")
    norms = np.sqrt(observation.mode_norms_sq(spectrum.phi_tilde[:, :n_t]))
    c = np.minimum.accumulate(norms)
    flagged = tuple(int(k + 1) for k in np.nonzero(norms <= zero_floor)[0])
    return NecessaryConditionReport(norms, c, flagged, zero_floor)
