"""Contour-integral spectral projectors, the projector-commutator identity,
high-frequency tail bounds, and the final observability certificate."""

import math
from dataclasses import dataclass, field

import numpy as np

from .eig import resolvent_matrix
from .model import ObservationMap, Perturbation, SpectralOperator
from .observability import (
    GapReport,
    GramianReport,
    HautusReport,
    SpectralObsReport,
    UnperturbedVerdict,
    rho_at,
)
from .perturbation import (
    CommutatorReport,
    ConditionOneReport,
    NecessaryConditionReport,
    PerturbedSpectrum,
    SandwichReport,
)

__all__ = [
    "ContourError",
    "DegenerateIndexError",
    "NotObservableError",
    "RieszProjector",
    "IdentityResidualReport",
    "TailReport",
    "Certificate",
    "riesz_project",
    "residue_sanity",
    "lemma_identity_check",
    "tail_bound_check",
    "assemble_certificate",
    "COND_GAP",
    "COND_DELTA",
    "COND_HAUTUS",
    "COND_ONE",
    "COND_NECESSARY",
    "COND_TAIL",
]

SCHEMA_VERSION = 1

COND_GAP = "unperturbed gap condition"
COND_DELTA = "unperturbed per-mode observation bound"
COND_HAUTUS = "unperturbed frequency-domain (Hautus) test"
COND_ONE = "condition (i): eigenvalue-drift monotonicity"
COND_NECESSARY = "necessary condition: observation norm vanishes on a perturbed mode"
COND_TAIL = "tail index: commutator bound never falls below rho/2 in the trusted range"


class ContourError(ValueError):
    """Contour radius collides with a neighboring eigenvalue."""


class DegenerateIndexError(ValueError):
    """Requested index belongs to an eigenvalue cluster (degenerate-skip)."""


class NotObservableError(ValueError):
    """The unperturbed pair fails the frequency-domain test (rho <= 0)."""


def _contour_radius(spectrum: PerturbedSpectrum, k0: int, gamma_tilde: float):
    mu_k = spectrum.mu_tilde[k0]
    others = np.delete(spectrum.mu_tilde, k0)
    local_gap = float(np.abs(others - mu_k).min())
    eps = gamma_tilde / 4.0
    shrunk = False
    if local_gap < 2.0 * eps:
        eps = 0.4 * local_gap  # keep the circle clear of the neighboring eigenvalue
        shrunk = True
    if not (eps > 0.0) or local_gap <= 2.0 * eps:
        raise ContourError(
            f"no valid contour at index {k0 + 1}: local gap {local_gap:.3e}, radius {eps:.3e}"
        )
    return float(mu_k), eps, local_gap, shrunk


def _check_simple(spectrum: PerturbedSpectrum, index: int) -> int:
    k0 = index - 1
    if not (0 <= k0 < spectrum.dim):
        raise ValueError(f"index {index} outside 1..{spectrum.dim}")
    if spectrum.degenerate[k0]:
        raise DegenerateIndexError(f"eigenvalue at index {index} is clustered; projector skipped")
    return k0


@dataclass(frozen=True)
class RieszProjector:
    """Contour-quadrature spectral projector for one simple eigenvalue."""

    index: int
    center: float
    radius: float
    nodes: int
    matrix: np.ndarray
    quadrature_residual: float
    imaginary_norm: float
    shrunk: bool


def riesz_project(
    ak_matrix: np.ndarray,
    spectrum: PerturbedSpectrum,
    index: int,
    nodes: int = 64,
    gamma_tilde: float | None = None,
) -> RieszProjector:
    """Trapezoid quadrature of the resolvent around one perturbed eigenvalue.

    The circle is centered at the eigenvalue with radius gamma_tilde/4
    (shrunk to 0.4x the local gap when two-gap clearance would fail, which
    is recorded); the trapezoid rule on the analytic integrand converges
    geometrically in the node count.
    """
    if nodes < 16:
        raise ValueError(f"need at least 16 quadrature nodes, got {nodes}")
    k0 = _check_simple(spectrum, index)
    if gamma_tilde is None:
        gamma_tilde = float(np.diff(spectrum.mu_tilde).min())
    center, eps, _, shrunk = _contour_radius(spectrum, k0, gamma_tilde)

    angles = 2.0 * math.pi * np.arange(nodes) / nodes
    acc = np.zeros((spectrum.dim, spectrum.dim), dtype=complex)
    for t in angles:
        phase = np.exp(1j * t)
        acc += phase * resolvent_matrix(
            ak_matrix, center + eps * phase, eigenvalues=spectrum.mu_tilde
        )
    proj = acc * (eps / nodes)

    phi = spectrum.phi_tilde[:, k0]
    exact = np.outer(phi, phi)
    residual = float(np.linalg.norm(proj.real - exact, 2))
    return RieszProjector(
        index=index,
        center=center,
        radius=eps,
        nodes=nodes,
        matrix=proj.real,
        quadrature_residual=residual,
        imaginary_norm=float(np.linalg.norm(proj.imag, 2)),
        shrunk=shrunk,
    )


def _commutator(operator: SpectralOperator, perturbation: Perturbation) -> np.ndarray:
    mu = operator.eigenvalues
    k = perturbation.matrix
    return mu[:, None] * k - k * mu[None, :]


def _spectral_sum(spectrum: PerturbedSpectrum, k0: int, shift: complex | None = None) -> np.ndarray:
    """F(mu) = sum over j != k of P_j / (mu - mu~_j); at mu = mu~_k when shift is None."""
    mu_t = spectrum.mu_tilde
    at = mu_t[k0] if shift is None else shift
    weights = np.zeros(spectrum.dim, dtype=complex)
    mask = np.arange(spectrum.dim) != k0
    weights[mask] = 1.0 / (at - mu_t[mask])
    v = spectrum.phi_tilde
    out = (v * weights[None, :]) @ v.T
    return out.real if shift is None else out


def residue_sanity(
    operator: SpectralOperator,
    perturbation: Perturbation,
    spectrum: PerturbedSpectrum,
    index: int,
    nodes: int = 64,
    gamma_tilde: float | None = None,
) -> tuple[float, float]:
    """Quadrature norms of the two contour terms the residue calculus discards.

    Both the double-pole term P R P / (mu - mu~_k)^2 and the analytic term
    F(mu) R F(mu) integrate to zero; returns their quadrature norms.
    """
    k0 = _check_simple(spectrum, index)
    if gamma_tilde is None:
        gamma_tilde = float(np.diff(spectrum.mu_tilde).min())
    center, eps, _, _ = _contour_radius(spectrum, k0, gamma_tilde)
    commutator = _commutator(operator, perturbation)
    phi = spectrum.phi_tilde[:, k0]
    proj = np.outer(phi, phi)
    prp = proj @ commutator @ proj

    angles = 2.0 * math.pi * np.arange(nodes) / nodes
    double_pole = np.zeros_like(prp, dtype=complex)
    analytic = np.zeros_like(prp, dtype=complex)
    for t in angles:
        phase = np.exp(1j * t)
        shift = center + eps * phase
        double_pole += phase * prp / (eps * phase) ** 2
        f_mu = _spectral_sum(spectrum, k0, shift=shift)
        analytic += phase * (f_mu @ commutator @ f_mu)
    scale = eps / nodes
    return (
        float(np.linalg.norm(double_pole * scale, 2)),
        float(np.linalg.norm(analytic * scale, 2)),
    )


@dataclass(frozen=True)
class IdentityResidualReport:
    """Residual of P K = K P + F R P + P R F for one simple eigenvalue."""

    index: int
    lhs_rhs_gap: float
    f_norm: float
    local_gap: float
    passed: bool


def lemma_identity_check(
    operator: SpectralOperator,
    perturbation: Perturbation,
    spectrum: PerturbedSpectrum,
    index: int,
    tol_factor: float = 1e-7,
) -> IdentityResidualReport:
    """Check the projector-commutator exchange identity at one trusted index.

    With P the spectral projector of mu~_k, R = AK - KA and F the reduced
    resolvent sum over j != k, the identity P K = K P + F R P + P R F is an
    algebraic consequence of R = (A+K)K - K(A+K); the residual is solver
    noise only.
    """
    k0 = _check_simple(spectrum, index)
    phi = spectrum.phi_tilde[:, k0]
    proj = np.outer(phi, phi)
    f_mat = _spectral_sum(spectrum, k0)
    commutator = _commutator(operator, perturbation)
    k_mat = perturbation.matrix
    lhs = proj @ k_mat
    rhs = k_mat @ proj + f_mat @ commutator @ proj + proj @ commutator @ f_mat
    gap = float(np.linalg.norm(lhs - rhs, 2))
    others = np.delete(spectrum.mu_tilde, k0)
    local_gap = float(np.abs(others - spectrum.mu_tilde[k0]).min())
    passed = gap <= tol_factor * (1.0 + perturbation.norm())
    return IdentityResidualReport(index, gap, float(np.linalg.norm(f_mat, 2)), local_gap, passed)


@dataclass(frozen=True)
class TailReport:
    """Per-index tail quantities of the high-frequency observation bound.

    For each trusted simple index k: sigma_k = <K phi~_k, phi~_k>,
    t_k = ||(I - P_k) K phi~_k||^2, b_k = (4/gamma_tilde) ||R phi~_k||^2 and
    the sharper b_alt_k = ||R phi~_k||^2 / gamma_tilde^2; rho is evaluated
    exactly at each omega_k = mu~_k - sigma_k and the effective rho is the
    minimum of the scan value and those evaluations.
    """

    indices: np.ndarray
    sigma: np.ndarray
    t: np.ndarray
    b: np.ndarray
    b_alt: np.ndarray
    c_norms_sq: np.ndarray
    rho_at_omega: np.ndarray
    wahed_margin: np.ndarray
    chain_holds: np.ndarray
    chain_alt_holds: np.ndarray
    rho_scan: float
    rho_effective: float
    gamma_tilde: float
    k_rho: int | None
    skipped: tuple
    wahed_tol: float

    def wahed_ok(self) -> bool:
        return bool(np.all(self.wahed_margin >= -self.wahed_tol))


def tail_bound_check(
    operator: SpectralOperator,
    perturbation: Perturbation,
    observation: ObservationMap,
    spectrum: PerturbedSpectrum,
    gamma_tilde: float,
    rho_hat: float,
    wahed_tol: float = 1e-9,
) -> TailReport:
    if rho_hat <= 0:
        raise NotObservableError(
            f"frequency-domain constant rho = {rho_hat:.3e} is not positive; "
            "the unperturbed pair must be exactly observable"
        )
    if gamma_tilde <= 0:
        raise ValueError(f"gamma_tilde must be positive, got {gamma_tilde}")
    n_t = spectrum.trusted
    k_mat = perturbation.matrix
    commutator = _commutator(operator, perturbation)
    a_mat = operator.a_matrix()
    gram = observation.gram()

    kept, skipped = [], []
    for k in range(1, n_t + 1):
        (skipped if spectrum.degenerate[k - 1] else kept).append(k)
    idx = np.array(kept, dtype=int)
    m = idx.size
    sigma = np.empty(m)
    t_seq = np.empty(m)
    r_norm_sq = np.empty(m)
    c_sq = np.empty(m)
    rho_omega = np.empty(m)
    for i, k in enumerate(idx):
        phi = spectrum.phi_tilde[:, k - 1]
        k_phi = k_mat @ phi
        sigma[i] = float(phi @ k_phi)
        t_seq[i] = float(np.sum((k_phi - sigma[i] * phi) ** 2))
        r_norm_sq[i] = float(np.sum((commutator @ phi) ** 2))
        c_phi = observation.matrix @ phi
        c_sq[i] = float(c_phi @ c_phi)
        rho_omega[i] = rho_at(a_mat, gram, float(spectrum.mu_tilde[k - 1] - sigma[i]))

    b = (4.0 / gamma_tilde) * r_norm_sq
    b_alt = r_norm_sq / gamma_tilde**2
    rho_effective = float(min(rho_hat, rho_omega.min())) if m else float(rho_hat)
    margin = t_seq + c_sq - rho_effective

    half_rho = rho_effective / 2.0
    bad = np.nonzero(b > half_rho)[0]
    if bad.size == 0:
        k_rho = 0
    elif bad[-1] == m - 1:
        k_rho = None  # never certified within the trusted range
    else:
        k_rho = int(idx[bad[-1]])

    return TailReport(
        indices=idx,
        sigma=sigma,
        t=t_seq,
        b=b,
        b_alt=b_alt,
        c_norms_sq=c_sq,
        rho_at_omega=rho_omega,
        wahed_margin=margin,
        chain_holds=t_seq <= b + 1e-12,
        chain_alt_holds=t_seq <= b_alt + 1e-12,
        rho_scan=float(rho_hat),
        rho_effective=rho_effective,
        gamma_tilde=float(gamma_tilde),
        k_rho=k_rho,
        skipped=tuple(skipped),
        wahed_tol=wahed_tol,
    )


@dataclass(frozen=True)
class Certificate:
    """Machine-readable pass/fail record of every hypothesis plus constants."""

    verdict: str  # true | false | hypotheses-unmet
    failed_conditions: tuple
    gamma_hat: float
    delta_hat: float
    rho_hat: float
    rho_effective: float | None
    kappa_star: float | None
    gamma_tilde: float | None
    k_rho: int | None
    c_k_rho: float | None
    c_k_rho_sq: float | None
    delta_tilde: float | None
    min_perturbed_energy: float | None
    k_t: float
    big_k_t: float
    horizon: float
    trusted: int
    guard: int
    dim: int
    unperturbed_status: str
    unperturbed_reasons: tuple
    degenerate_indices: tuple
    details: dict = field(default_factory=dict)


def assemble_certificate(
    operator: SpectralOperator,
    unperturbed: UnperturbedVerdict,
    gap: GapReport,
    spectral: SpectralObsReport,
    hautus: HautusReport,
    gramian: GramianReport,
    condition_one: ConditionOneReport | None,
    commutator: CommutatorReport,
    necessary: NecessaryConditionReport,
    tail: TailReport | None,
    sandwich: SandwichReport | None,
    degenerate_indices: tuple = (),
    final_tol: float = 1e-9,
) -> Certificate:
    """Combine all reports into the final verdict for the perturbed pair.

    Any failed hypothesis yields "hypotheses-unmet" with the condition named;
    "false" is reserved for the case where every hypothesis holds and yet the
    assembled per-mode bound fails.
    """
    failed = []
    if not gap.passed:
        failed.append(COND_GAP)
    if "delta" in unperturbed.reasons:
        failed.append(COND_DELTA)
    if hautus.rho_hat <= 0:
        failed.append(COND_HAUTUS)
    if condition_one is None or not condition_one.passed:
        failed.append(COND_ONE)
    if necessary.flagged:
        failed.append(f"{COND_NECESSARY} (k = {', '.join(map(str, necessary.flagged))})")
    if not failed and (tail is None or tail.k_rho is None):
        failed.append(COND_TAIL)

    k_rho = tail.k_rho if tail is not None else None
    rho_eff = tail.rho_effective if tail is not None else None
    c_k_rho = c_sq = delta_tilde = min_energy = None
    final_ok = False
    if tail is not None and k_rho is not None and necessary.c.size:
        c_k_rho = float(necessary.c[max(k_rho, 1) - 1])
        c_sq = c_k_rho**2
        delta_tilde = min(c_sq, tail.rho_effective / 2.0)
        min_energy = float(np.min(necessary.norms**2))
        preserved = condition_one is not None and not condition_one.preservation_violations
        final_ok = preserved and min_energy >= delta_tilde - final_tol and tail.wahed_ok()

    if failed:
        verdict = "hypotheses-unmet"
    elif final_ok:
        verdict = "true"
    else:
        verdict = "false"

    return Certificate(
        verdict=verdict,
        failed_conditions=tuple(failed),
        gamma_hat=gap.gamma_hat,
        delta_hat=spectral.delta_hat,
        rho_hat=hautus.rho_hat,
        rho_effective=rho_eff,
        kappa_star=condition_one.kappa_star if condition_one is not None else None,
        gamma_tilde=condition_one.gamma_tilde if condition_one is not None else None,
        k_rho=k_rho,
        c_k_rho=c_k_rho,
        c_k_rho_sq=c_sq,
        delta_tilde=delta_tilde,
        min_perturbed_energy=min_energy,
        k_t=gramian.k_t,
        big_k_t=gramian.big_k_t,
        horizon=gramian.horizon,
        trusted=operator.trusted,
        guard=operator.guard_band,
        dim=operator.dim,
        unperturbed_status=unperturbed.status,
        unperturbed_reasons=unperturbed.reasons,
        degenerate_indices=tuple(degenerate_indices),
        details={
            "commutator_norm": commutator.op_norm,
            "commutator_tail_ratio": commutator.tail_ratio,
            "commutator_decay_slope": commutator.decay_slope,
            "mapping_norm": commutator.mapping_norm,
            "sandwich_violations": list(sandwich.violations) if sandwich else None,
            "sandwich_paper_violations": list(sandwich.paper_violations) if sandwich else None,
            "tail_skipped_degenerate": list(tail.skipped) if tail else None,
            "necessary_flags": list(necessary.flagged),
            "drift_interpolant": "piecewise-linear",
        },
    )
