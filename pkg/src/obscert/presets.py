"""Named scenario presets shipped with the toolkit (also in scenarios/*.json)."""

from pathlib import Path

from .reporting import write_json

__all__ = ["PRESETS", "preset", "dump_presets"]


def _laplacian(n, perturbation, observation, **analysis):
    data = {
        "operator": {"preset": "dirichlet_laplacian"},
        "perturbation": perturbation,
        "observation": observation,
        "truncation": n,
    }
    if analysis:
        data["analysis"] = analysis
    return data


PRESETS = {
    "laplacian_zero": _laplacian(
        64, {"kind": "zero"}, {"preset": "window", "a": 0.0, "b": 1.0}
    ),
    "laplacian_commuting": _laplacian(
        64,
        {"kind": "inverse_power", "c": 1.0, "s": 1.0},
        {"preset": "window", "a": 0.0, "b": 0.5},
    ),
    "laplacian_finite_rank": _laplacian(
        64,
        {"kind": "finite_rank", "rank": 2, "c": 0.5, "decay": 3.0},
        {"preset": "window", "a": 0.0, "b": 0.75},
    ),
    "laplacian_smoothing": _laplacian(
        64,
        {"kind": "smoothing_kernel", "c": 1.0, "decay": 3.0, "length": 3.0},
        {"preset": "window", "a": 0.0, "b": 0.5},
    ),
    # exact perturbed-eigenvalue tie: drift monotonicity fails with kappa* = 1
    "adversarial_condition_one": {
        "operator": {"diagonal": [float(k * k) for k in range(1, 33)]},
        "perturbation": {
            "kind": "custom",
            "diagonal": [0.0, 5.0] + [0.0] * 30,
        },
        "observation": {"preset": "full"},
        "truncation": 32,
    },
    # observation blind to one perturbed mode: the necessary condition fails
    "annihilator_perturbed": _laplacian(
        32,
        {"kind": "smoothing_kernel", "c": 1.0, "decay": 3.0, "length": 3.0},
        {"preset": "mode_annihilator", "mode": 3, "target": "perturbed"},
    ),
    # unperturbed non-observable fixture: one plain mode is invisible
    "annihilator_unperturbed": _laplacian(
        16,
        {"kind": "zero"},
        {"preset": "mode_annihilator", "mode": 3, "target": "unperturbed"},
    ),
    # gap condition fails outright (repeated eigenvalue)
    "repeated_eigenvalues": {
        "operator": {"diagonal": [1.0, 1.0] + [float(k * k) for k in range(2, 12)]},
        "perturbation": {"kind": "zero"},
        "observation": {"preset": "full"},
        "truncation": 12,
    },
}

#: the well-posed presets exercised by the cross-scenario acceptance criteria
STANDARD_PRESETS = (
    "laplacian_zero",
    "laplacian_commuting",
    "laplacian_finite_rank",
    "laplacian_smoothing",
)


def preset(name: str) -> dict:
    import copy

    return copy.deepcopy(PRESETS[name])


def dump_presets(directory) -> list:
    """Write every preset to <directory>/<name>.json; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, data in PRESETS.items():
        path = directory / f"{name}.json"
        write_json(path, data)
        paths.append(path)
    return paths
