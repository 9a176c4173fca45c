"""Core data model: truncated operators, perturbations, observation maps, scenarios.

Everything downstream works in the eigenbasis of the main operator, so the
operator itself is always a diagonal matrix and all approximation error lives
in the perturbation and in the truncation itself.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import eig

__all__ = [
    "ScenarioError",
    "SpectralOperator",
    "Perturbation",
    "ObservationMap",
    "Tolerances",
    "AnalysisParams",
    "Scenario",
    "default_guard",
    "build_dirichlet_laplacian",
    "build_window_observation",
    "window_gram",
    "build_perturbation",
    "custom_operator_from_matrix",
    "build_mode_annihilator",
    "load_scenario",
    "scenario_from_dict",
    "materialize_operator",
    "materialize_perturbation",
    "materialize_observation",
]

SYMMETRY_RTOL_OPERATOR = 1e-10
SYMMETRY_RTOL_PERTURBATION = 1e-12
NEGATIVITY_RTOL = 1e-10
ORTHONORMALITY_TOL = 1e-10


class ScenarioError(ValueError):
    """A scenario file, matrix spec, or builder parameter failed validation."""


def default_guard(dim: int) -> int:
    """Trailing index count excluded from theorem checks: ceil(dim / 4)."""
    return -(-dim // 4)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _check_symmetric(m: np.ndarray, rtol: float, what: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ScenarioError(f"{what} must be a square matrix, got shape {m.shape}")
    scale = np.linalg.norm(m)
    if np.linalg.norm(m - m.T) > rtol * max(scale, 1.0):
        raise ScenarioError(f"{what} is not symmetric to {rtol:g} relative")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class SpectralOperator:
    """Self-adjoint non-negative operator at truncation, stored as eigendata.

    ``eigenvalues`` are non-decreasing and >= 0; ``basis`` columns are the
    eigenvectors in the original working coordinates (identity for presets);
    ``guard_band`` trailing indices are excluded from theorem checks.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray
    guard_band: int

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=float)
        basis = np.asarray(self.basis, dtype=float)
        n = vals.size
        if n < 1 or basis.shape != (n, n):
            raise ScenarioError(f"basis shape {basis.shape} does not match {n} eigenvalues")
        if np.any(np.diff(vals) < 0):
            raise ScenarioError("eigenvalues must be non-decreasing")
        if vals[0] < 0:
            raise ScenarioError("operator must be non-negative (negative eigenvalue found)")
        if np.linalg.norm(basis.T @ basis - np.eye(n)) > ORTHONORMALITY_TOL * n:
            raise ScenarioError("basis columns are not orthonormal")
        if not (1 <= int(self.guard_band) < n):
            raise ScenarioError(f"guard band must lie in [1, {n - 1}], got {self.guard_band}")
        object.__setattr__(self, "eigenvalues", _frozen(vals))
        object.__setattr__(self, "basis", _frozen(basis))
        object.__setattr__(self, "guard_band", int(self.guard_band))

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def trusted(self) -> int:
        """Number of leading indices trusted for theorem checks."""
        return self.dim - self.guard_band

    def a_matrix(self) -> np.ndarray:
        """The operator in its own eigenbasis (diagonal)."""
        return np.diag(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        """The operator in the original working coordinates."""
        return self.basis @ np.diag(self.eigenvalues) @ self.basis.T

    def graph_norm(self, z: np.ndarray, power: int = 0) -> float:
        """Norm ||A^(power/2) z|| in eigen-coordinates, power in {-2, 0, 2}."""
        if power not in (-2, 0, 2):
            raise ValueError("only powers -2, 0, 2 are supported")
        z = np.asarray(z, dtype=float)
        if power == 0:
            return float(np.linalg.norm(z))
        if power == -2 and self.eigenvalues[0] <= 0:
            raise ValueError("operator has a kernel; negative powers undefined")
        w = self.eigenvalues if power == 2 else 1.0 / self.eigenvalues
        return float(np.linalg.norm(w * z))


@dataclass(frozen=True)
class Perturbation:
    """Symmetric non-negative matrix in the eigenbasis of the main operator."""

    matrix: np.ndarray
    kind: str

    def __post_init__(self):
        m = _check_symmetric(self.matrix, SYMMETRY_RTOL_PERTURBATION, "perturbation matrix")
        w = np.linalg.eigvalsh(m)
        top = max(w[-1], 0.0)
        if w[0] < -NEGATIVITY_RTOL * max(top, 1e-300):
            raise ScenarioError(
                f"perturbation is indefinite: min eigenvalue {w[0]:.3e} vs max {top:.3e}"
            )
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


@dataclass(frozen=True)
class ObservationMap:
    """Linear map from the truncated state space into the output space."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] < 1:
            raise ScenarioError(f"observation matrix must be 2-d with >= 1 row, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ScenarioError("observation matrix has non-finite entries")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]

    def gram(self) -> np.ndarray:
        return self.matrix.T @ self.matrix

    def mode_norms_sq(self, vectors: np.ndarray) -> np.ndarray:
        """Squared output norms ||C v_k||^2 for each column of ``vectors``."""
        cv = self.matrix @ np.asarray(vectors, dtype=float)
        return np.einsum("ij,ij->j", cv, cv)


# ---------------------------------------------------------------------------
# presets


def build_dirichlet_laplacian(dim: int, guard: int | None = None) -> SpectralOperator:
    """1-D Dirichlet Laplacian on (0,1) truncated to its first ``dim`` modes.

    Eigenvalues k^2 pi^2 with the identity basis (diagonal representation);
    consecutive gaps (2k+1) pi^2, so the gap condition holds with 3 pi^2.
    """
    if dim < 8:
        raise ScenarioError(f"truncation {dim} too small, need >= 8 for the guard band")
    k = np.arange(1, dim + 1, dtype=float)
    return SpectralOperator(k**2 * math.pi**2, np.eye(dim), guard or default_guard(dim))


def window_gram(dim: int, a: float, b: float) -> np.ndarray:
    """Closed-form Gram matrix of windowed sine modes: int_a^b 2 sin(j pi x) sin(k pi x) dx."""
    if not (0.0 <= a < b <= 1.0):
        raise ScenarioError(f"window must satisfy 0 <= a < b <= 1, got ({a}, {b})")
    j = np.arange(1, dim + 1, dtype=float)

    def cos_integral(m):
        # int_a^b cos(m pi x) dx, valid elementwise including m == 0
        m = np.asarray(m, dtype=float)
        safe = np.where(m == 0.0, 1.0, m) * math.pi
        val = (np.sin(m * math.pi * b) - np.sin(m * math.pi * a)) / safe
        return np.where(m == 0.0, b - a, val)

    return cos_integral(j[:, None] - j[None, :]) - cos_integral(j[:, None] + j[None, :])


def build_window_observation(dim: int, a: float, b: float) -> ObservationMap:
    """Observation by restriction to the window (a, b) of (0, 1).

    Realized as a square matrix factor of the closed-form Gram matrix, so
    C^T C carries the exact mode inner products.
    """
    if a == 0.0 and b == 1.0:
        return ObservationMap(np.eye(dim))
    g = window_gram(dim, a, b)
    w, v = np.linalg.eigh(0.5 * (g + g.T))
    if w[0] < -1e-12 * max(w[-1], 1.0):
        raise ScenarioError("window Gram matrix unexpectedly indefinite")
    return ObservationMap(np.sqrt(np.clip(w, 0.0, None))[:, None] * v.T)


def build_mode_annihilator(vectors: np.ndarray, mode: int) -> ObservationMap:
    """Observation map I - v v^T annihilating the given (1-based) mode column."""
    vectors = np.asarray(vectors, dtype=float)
    n = vectors.shape[0]
    if not (1 <= mode <= vectors.shape[1]):
        raise ScenarioError(f"mode {mode} outside 1..{vectors.shape[1]}")
    v = vectors[:, mode - 1]
    return ObservationMap(np.eye(n) - np.outer(v, v))


def _finite_rank_vectors(dim: int, rank: int, decay: float) -> np.ndarray:
    k = np.arange(1, dim + 1, dtype=float)
    vecs = np.empty((dim, rank))
    for i in range(rank):
        v = k**-decay * np.cos(i * math.pi * k / (dim + 1))
        vecs[:, i] = v / np.linalg.norm(v)
    return vecs


def build_perturbation(kind: str, params: dict, operator: SpectralOperator) -> Perturbation:
    """Preset constructors for symmetric non-negative compact-type perturbations."""
    n = operator.dim
    params = dict(params or {})
    if kind == "zero":
        return Perturbation(np.zeros((n, n)), kind)

    if kind == "inverse_power":
        c = float(params.get("c", 1.0))
        s = float(params.get("s", 1.0))
        if c < 0:
            raise ScenarioError(f"inverse_power needs c >= 0, got {c}")
        if s < 1:
            raise ScenarioError(f"inverse_power needs s >= 1, got {s}")
        if operator.eigenvalues[0] <= 0:
            raise ScenarioError("inverse_power needs a strictly positive operator")
        return Perturbation(np.diag(c * operator.eigenvalues**-s), kind)

    if kind == "finite_rank":
        c = float(params.get("c", 1.0))
        rank = int(params.get("rank", 1))
        if c <= 0:
            raise ScenarioError(f"finite_rank needs c > 0, got {c}")
        if not (1 <= rank <= n):
            raise ScenarioError(f"finite_rank rank must lie in 1..{n}, got {rank}")
        if "vectors" in params:
            vecs = np.asarray(params["vectors"], dtype=float)
            if vecs.ndim == 1:
                vecs = vecs[:, None]
            if vecs.shape != (n, rank):
                raise ScenarioError(f"expected {rank} vectors of length {n}, got {vecs.shape}")
            norms = np.linalg.norm(vecs, axis=0)
            if np.any(norms == 0):
                raise ScenarioError("finite_rank vectors must be nonzero")
            vecs = vecs / norms
        else:
            vecs = _finite_rank_vectors(n, rank, float(params.get("decay", 3.0)))
        return Perturbation(c * (vecs @ vecs.T), kind)

    if kind == "smoothing_kernel":
        c = float(params.get("c", 1.0))
        decay = float(params.get("decay", 3.0))
        length = float(params.get("length", 3.0))
        if c <= 0 or decay < 1 or length <= 0:
            raise ScenarioError(
                f"smoothing_kernel needs c > 0, decay >= 1, length > 0, got {(c, decay, length)}"
            )
        k = np.arange(1, n + 1, dtype=float)
        d = k**-decay
        if params.get("seed") is None:
            band = np.exp(-((k[:, None] - k[None, :]) ** 2) / (2.0 * length**2))
            mat = c * d[:, None] * band * d[None, :]
        else:
            # randomized positive-semidefinite variant with the same row decay
            rank = int(params.get("rank", 8))
            rng = np.random.default_rng(int(params["seed"]))
            z = rng.standard_normal((n, rank))
            factor = d[:, None] * z
            mat = c * (factor @ factor.T) / rank
        return Perturbation(0.5 * (mat + mat.T), kind)

    if kind == "custom":
        m = _check_symmetric(params["matrix"], SYMMETRY_RTOL_PERTURBATION, "custom perturbation")
        if m.shape[0] != n:
            raise ScenarioError(f"perturbation dimension {m.shape[0]} does not match operator {n}")
        return Perturbation(m, kind)

    raise ScenarioError(f"unknown perturbation kind {kind!r}")


def custom_operator_from_matrix(matrix: np.ndarray, guard: int | None = None) -> SpectralOperator:
    """Ingest a user symmetric matrix as a SpectralOperator via full eigendecomposition."""
    m = _check_symmetric(matrix, SYMMETRY_RTOL_OPERATOR, "operator matrix")
    dec = eig.eig_sym(m)
    scale = max(np.abs(dec.values[0]), np.abs(dec.values[-1]))
    if dec.values[0] < -NEGATIVITY_RTOL * max(scale, 1e-300):
        raise ScenarioError(f"operator has negative spectrum: min eigenvalue {dec.values[0]:.3e}")
    vals = np.clip(dec.values, 0.0, None)
    return SpectralOperator(vals, dec.vectors, guard or default_guard(m.shape[0]))


# ---------------------------------------------------------------------------
# scenario files


@dataclass(frozen=True)
class Tolerances:
    gap_floor: float = 1e-8
    delta_floor: float = 1e-8
    zero_floor: float = 1e-12
    sandwich: float = 1e-8
    identity_residual: float = 1e-7
    hautus_margin: float = 1e-9
    gap_slack: float = 1e-9
    certificate: float = 1e-9

    def __post_init__(self):
        for name, value in vars(self).items():
            if not (value > 0):
                raise ScenarioError(f"tolerance {name} must be positive, got {value}")


@dataclass(frozen=True)
class AnalysisParams:
    contour_nodes: int = 64
    hautus_resolution: int = 200
    time_horizon: float | None = None
    guard: int | None = None
    seed: int = 0
    decay_slope_threshold: float = -0.5

    def __post_init__(self):
        if self.contour_nodes < 16:
            raise ScenarioError(f"contour_nodes must be >= 16, got {self.contour_nodes}")
        if self.hautus_resolution < 2:
            raise ScenarioError(f"hautus_resolution must be >= 2, got {self.hautus_resolution}")
        if self.time_horizon is not None and not (self.time_horizon > 0):
            raise ScenarioError(f"time_horizon must be positive, got {self.time_horizon}")


@dataclass(frozen=True)
class Scenario:
    """Validated analysis scenario (operator/perturbation/observation specs)."""

    operator: dict
    perturbation: dict
    observation: dict
    truncation: int
    tolerances: Tolerances
    analysis: AnalysisParams
    base_dir: Path = field(default_factory=Path)
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.truncation < 8:
            raise ScenarioError(f"truncation must be >= 8, got {self.truncation}")

    def guard(self) -> int:
        return self.analysis.guard or default_guard(self.truncation)


def _matrix_from_node(node, base_dir: Path, what: str) -> np.ndarray:
    if isinstance(node, dict) and "csv" in node:
        path = base_dir / node["csv"]
        try:
            return np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
        except OSError as exc:
            raise ScenarioError(f"cannot read {what} CSV {path}: {exc}") from exc
        except ValueError as exc:
            raise ScenarioError(f"malformed {what} CSV {path}: {exc}") from exc
    try:
        return np.asarray(node, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{what} must be a numeric array or a csv reference") from exc


def scenario_from_dict(data: dict, base_dir: Path | str = ".") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario root must be a JSON object")
    missing = {"operator", "perturbation", "observation", "truncation"} - set(data)
    if missing:
        raise ScenarioError(f"scenario is missing keys: {sorted(missing)}")
    try:
        tolerances = Tolerances(**data.get("tolerances", {}))
        analysis = AnalysisParams(**data.get("analysis", {}))
    except TypeError as exc:
        raise ScenarioError(f"unknown tolerance/analysis field: {exc}") from exc
    return Scenario(
        operator=data["operator"],
        perturbation=data["perturbation"],
        observation=data["observation"],
        truncation=int(data["truncation"]),
        tolerances=tolerances,
        analysis=analysis,
        base_dir=Path(base_dir),
        raw=data,
    )


def load_scenario(path: Path | str) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario {path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(data, base_dir=path.parent)


def materialize_operator(scenario: Scenario) -> SpectralOperator:
    node = scenario.operator
    guard = scenario.guard()
    n = scenario.truncation
    if isinstance(node, dict) and "preset" in node:
        if node["preset"] == "dirichlet_laplacian":
            return build_dirichlet_laplacian(n, guard)
        raise ScenarioError(f"unknown operator preset {node['preset']!r}")
    if isinstance(node, dict) and "diagonal" in node:
        diag = np.asarray(node["diagonal"], dtype=float)
        if diag.size != n:
            raise ScenarioError(f"diagonal length {diag.size} does not match truncation {n}")
        return custom_operator_from_matrix(np.diag(diag), guard)
    mat = _matrix_from_node(node.get("matrix", node) if isinstance(node, dict) else node,
                            scenario.base_dir, "operator")
    if mat.shape != (n, n):
        raise ScenarioError(f"operator shape {mat.shape} does not match truncation {n}")
    return custom_operator_from_matrix(mat, guard)


def materialize_perturbation(scenario: Scenario, operator: SpectralOperator) -> Perturbation:
    node = dict(scenario.perturbation)
    kind = node.pop("kind", None)
    if kind is None:
        raise ScenarioError("perturbation spec needs a 'kind' field")
    if kind == "custom":
        if "diagonal" in node:
            mat = np.diag(np.asarray(node["diagonal"], dtype=float))
        else:
            mat = _matrix_from_node(node.get("matrix", node), scenario.base_dir, "perturbation")
        # user matrices arrive in working coordinates; rotate into the eigenbasis
        mat = operator.basis.T @ mat @ operator.basis
        return build_perturbation("custom", {"matrix": mat}, operator)
    return build_perturbation(kind, node, operator)


def materialize_observation(
    scenario: Scenario,
    operator: SpectralOperator,
    perturbed_vectors: np.ndarray | None = None,
) -> ObservationMap:
    node = scenario.observation
    n = operator.dim
    if isinstance(node, dict) and "preset" in node:
        preset = node["preset"]
        if preset == "window":
            return build_window_observation(n, float(node.get("a", 0.0)), float(node.get("b", 1.0)))
        if preset == "full":
            return ObservationMap(np.eye(n))
        if preset == "zero":
            return ObservationMap(np.zeros((1, n)))
        if preset == "mode_annihilator":
            target = node.get("target", "perturbed")
            if target == "perturbed":
                if perturbed_vectors is None:
                    raise ScenarioError("mode_annihilator(perturbed) needs the perturbed spectrum")
                vectors = perturbed_vectors
            elif target == "unperturbed":
                vectors = np.eye(n)
            else:
                raise ScenarioError(f"unknown annihilator target {target!r}")
            return build_mode_annihilator(vectors, int(node["mode"]))
        raise ScenarioError(f"unknown observation preset {preset!r}")
    mat = _matrix_from_node(node.get("matrix", node) if isinstance(node, dict) else node,
                            scenario.base_dir, "observation")
    if mat.ndim != 2 or mat.shape[1] != n:
        raise ScenarioError(f"observation shape {mat.shape} incompatible with truncation {n}")
    # columns are given against working coordinates; rotate into the eigenbasis
    return ObservationMap(mat @ operator.basis)
