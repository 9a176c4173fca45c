"""Analysis orchestration: scenario -> reports -> certificate -> files on disk."""

import copy
import csv
import dataclasses
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .model import (
    ObservationMap,
    Perturbation,
    Scenario,
    ScenarioError,
    SpectralOperator,
    load_scenario,
    materialize_observation,
    materialize_operator,
    materialize_perturbation,
    scenario_from_dict,
)
from .observability import (
    GapReport,
    GramianReport,
    HautusReport,
    SpectralObsReport,
    UnperturbedVerdict,
    check_gap,
    hautus_scan,
    observability_gramian,
    spectral_obs_test,
    verdict_unperturbed,
)
from .perturbation import (
    CommutatorReport,
    ConditionOneReport,
    NecessaryConditionReport,
    PerturbedSpectrum,
    SandwichReport,
    commutator_diagnostics,
    fit_condition_one,
    necessary_condition_sequence,
    perturbed_spectrum,
    sandwich_sequences,
)
from .reporting import format_number, scenario_hash, write_csv, write_json
from .riesz import (
    SCHEMA_VERSION,
    Certificate,
    DegenerateIndexError,
    TailReport,
    assemble_certificate,
    lemma_identity_check,
    residue_sanity,
    riesz_project,
    tail_bound_check,
)

__all__ = [
    "AnalysisResult",
    "analyze",
    "run_analyze",
    "run_sweep",
    "emit_plot_data",
    "exit_code_for",
    "certificate_to_dict",
]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_HYPOTHESES_UNMET = 2
EXIT_FALSE = 3


def _thread_count() -> int:
    raw = os.environ.get("OBSV_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class AnalysisResult:
    scenario: Scenario
    operator: SpectralOperator
    perturbation: Perturbation
    observation: ObservationMap
    spectrum: PerturbedSpectrum
    gap: GapReport
    spectral: SpectralObsReport
    hautus: HautusReport
    gramian: GramianReport
    unperturbed: UnperturbedVerdict
    sandwich: SandwichReport | None
    condition_one: ConditionOneReport | None
    commutator: CommutatorReport
    necessary: NecessaryConditionReport
    tail: TailReport | None
    certificate: Certificate
    projector_residuals: dict
    identity_gaps: dict
    residue_checks: dict
    warnings: list
    durations: dict


def analyze(scenario: Scenario) -> AnalysisResult:
    """Run the full pipeline on a validated scenario (pure, no file output)."""
    tol = scenario.tolerances
    params = scenario.analysis
    warnings: list[str] = []
    durations: dict[str, float] = {}

    def timed(stage):
        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                durations[stage] = durations.get(stage, 0.0) + time.perf_counter() - self.t0

        return _Timer()

    with timed("build"):
        operator = materialize_operator(scenario)
        perturbation = materialize_perturbation(scenario, operator)

    with timed("spectra"):
        spectrum = perturbed_spectrum(operator, perturbation)

    with timed("build"):
        observation = materialize_observation(scenario, operator, spectrum.phi_tilde)

    with timed("frequency_checks"):
        gap = check_gap(operator, tol.gap_floor)
        spectral = spectral_obs_test(observation, operator)
        hautus = hautus_scan(
            operator.a_matrix(), observation, params.hautus_resolution, operator.guard_band
        )
        unperturbed = verdict_unperturbed(gap, spectral, tol.delta_floor)
        horizon = params.time_horizon
        if horizon is None:
            horizon = 2.0 * math.pi / gap.gamma_hat if gap.gamma_hat > 0 else 1.0
        gramian = observability_gramian(operator, observation, horizon)

    with timed("perturbation_sequences"):
        sandwich = None
        if operator.eigenvalues[0] > 0:
            sandwich = sandwich_sequences(operator, perturbation, spectrum, tol.sandwich)
        else:
            warnings.append("operator has a kernel; sandwich sequences skipped")
        try:
            condition_one = fit_condition_one(spectrum, gap, tol.gap_slack)
        except ValueError as exc:
            condition_one = None
            warnings.append(f"condition (i) fit skipped: {exc}")
        commutator = commutator_diagnostics(
            operator, perturbation, spectrum, params.decay_slope_threshold
        )
        necessary = necessary_condition_sequence(observation, spectrum, tol.zero_floor)

    projector_residuals: dict[int, float] = {}
    identity_gaps: dict[int, float] = {}
    residue_checks: dict[int, tuple] = {}
    tail = None
    run_tail = (
        condition_one is not None
        and condition_one.passed
        and condition_one.gamma_tilde > 0
        and hautus.rho_hat > 0
    )
    if run_tail:
        with timed("projectors"):
            gamma_tilde = condition_one.gamma_tilde
            ak_mat = operator.a_matrix() + perturbation.matrix
            candidates = [
                k for k in range(1, spectrum.trusted + 1) if not spectrum.degenerate[k - 1]
            ]
            skipped = [k for k in range(1, spectrum.trusted + 1) if spectrum.degenerate[k - 1]]
            if skipped:
                warnings.append(f"degenerate indices skipped by projector stage: {skipped}")

            def one_projector(k):
                return riesz_project(ak_mat, spectrum, k, params.contour_nodes, gamma_tilde)

            threads = _thread_count()
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    projectors = list(pool.map(one_projector, candidates))
            else:
                projectors = [one_projector(k) for k in candidates]
            for proj in projectors:
                projector_residuals[proj.index] = proj.quadrature_residual
                if proj.shrunk:
                    warnings.append(f"contour radius shrunk at index {proj.index}")
            for k in candidates:
                identity_gaps[k] = lemma_identity_check(
                    operator, perturbation, spectrum, k, tol.identity_residual
                ).lhs_rhs_gap
            sample = sorted(set(candidates[:1] + candidates[-1:] + candidates[len(candidates) // 2 : len(candidates) // 2 + 1]))
            for k in sample:
                residue_checks[k] = residue_sanity(
                    operator, perturbation, spectrum, k, params.contour_nodes, gamma_tilde
                )

        with timed("tail"):
            tail = tail_bound_check(
                operator,
                perturbation,
                observation,
                spectrum,
                condition_one.gamma_tilde,
                hautus.rho_hat,
                tol.hautus_margin,
            )

    with timed("certificate"):
        degenerate = tuple(int(k + 1) for k in np.nonzero(spectrum.degenerate)[0])
        certificate = assemble_certificate(
            operator,
            unperturbed,
            gap,
            spectral,
            hautus,
            gramian,
            condition_one,
            commutator,
            necessary,
            tail,
            sandwich,
            degenerate_indices=degenerate,
            final_tol=tol.certificate,
        )

    return AnalysisResult(
        scenario=scenario,
        operator=operator,
        perturbation=perturbation,
        observation=observation,
        spectrum=spectrum,
        gap=gap,
        spectral=spectral,
        hautus=hautus,
        gramian=gramian,
        unperturbed=unperturbed,
        sandwich=sandwich,
        condition_one=condition_one,
        commutator=commutator,
        necessary=necessary,
        tail=tail,
        certificate=certificate,
        projector_residuals=projector_residuals,
        identity_gaps=identity_gaps,
        residue_checks=residue_checks,
        warnings=warnings,
        durations=durations,
    )


def exit_code_for(certificate: Certificate) -> int:
    return {
        "true": EXIT_OK,
        "hypotheses-unmet": EXIT_HYPOTHESES_UNMET,
        "false": EXIT_FALSE,
    }[certificate.verdict]


def certificate_to_dict(result: AnalysisResult) -> dict:
    """Certificate as a canonical-JSON-ready structure (no timestamps)."""
    cert = result.certificate
    data = {
        "schema_version": SCHEMA_VERSION,
        "verdict": cert.verdict,
        "failed_conditions": list(cert.failed_conditions),
        "constants": {
            "gamma_hat": cert.gamma_hat,
            "delta_hat": cert.delta_hat,
            "rho_hat": cert.rho_hat,
            "rho_effective": cert.rho_effective,
            "kappa_star": cert.kappa_star,
            "gamma_tilde": cert.gamma_tilde,
            "k_rho": cert.k_rho,
            "c_k_rho": cert.c_k_rho,
            "c_k_rho_sq": cert.c_k_rho_sq,
            "delta_tilde": cert.delta_tilde,
            "min_perturbed_energy": cert.min_perturbed_energy,
            "k_T": cert.k_t,
            "K_T": cert.big_k_t,
            "horizon": cert.horizon,
        },
        "dimensions": {"dim": cert.dim, "guard": cert.guard, "trusted": cert.trusted},
        "unperturbed": {
            "status": cert.unperturbed_status,
            "reasons": list(cert.unperturbed_reasons),
        },
        "degenerate_indices": list(cert.degenerate_indices),
        "details": dict(cert.details),
        "reports": {
            "hautus": {
                "omega_grid": result.hautus.omega_grid,
                "rho_of_omega": result.hautus.rho_of_omega,
                "argmin_omega": result.hautus.argmin_omega,
            },
            "projectors": {
                "nodes": result.scenario.analysis.contour_nodes,
                "max_quadrature_residual": (
                    max(result.projector_residuals.values())
                    if result.projector_residuals
                    else None
                ),
            },
            "identity_check": {
                "max_gap": max(result.identity_gaps.values()) if result.identity_gaps else None
            },
            "residue_sanity": {
                str(k): list(v) for k, v in sorted(result.residue_checks.items())
            },
            "seed": result.scenario.analysis.seed,
        },
    }
    return data


def _sequences_rows(result: AnalysisResult):
    spectrum = result.spectrum
    n_t = spectrum.trusted
    gaps = result.gap.gaps
    tilde_gaps = np.diff(spectrum.mu_tilde[: n_t + 1])
    r_norms = result.commutator.r_phi_norms
    sandwich = result.sandwich
    necessary = result.necessary
    cphi_sq = result.spectral.norms_sq
    for n in range(1, n_t + 1):
        s = n - 1
        yield (
            n,
            spectrum.mu[s],
            spectrum.mu_tilde[s],
            spectrum.theta[s],
            gaps[s],
            tilde_gaps[s],
            sandwich.alpha[s] if sandwich else None,
            sandwich.beta[s] if sandwich else None,
            sandwich.lower[s] if sandwich else None,
            sandwich.upper[s] if sandwich else None,
            sandwich.lower_cert[s] if sandwich else None,
            sandwich.upper_cert[s] if sandwich else None,
            cphi_sq[s],
            necessary.norms[s],
            r_norms[s],
            necessary.c[s],
        )


SEQUENCE_COLUMNS = [
    "n",
    "mu",
    "mu_tilde",
    "theta",
    "gap",
    "gap_tilde",
    "alpha",
    "beta",
    "lower",
    "upper",
    "lower_cert",
    "upper_cert",
    "c_phi_sq",
    "c_phi_tilde",
    "r_phi_tilde_norm",
    "c_running_min",
]

TAIL_COLUMNS = ["k", "mu_tilde", "t", "b", "c_phi_tilde_sq", "pass"]


def _tail_rows(result: AnalysisResult):
    tail = result.tail
    if tail is None:
        return
    for i, k in enumerate(tail.indices):
        yield (
            int(k),
            result.spectrum.mu_tilde[k - 1],
            tail.t[i],
            tail.b[i],
            tail.c_norms_sq[i],
            bool(tail.wahed_margin[i] >= -tail.wahed_tol),
        )


def write_outputs(result: AnalysisResult, out_dir: Path, started: str, scenario_data: dict) -> list:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cert_path = out_dir / "certificate.json"
    write_json(cert_path, certificate_to_dict(result))
    seq_path = out_dir / "sequences.csv"
    write_csv(seq_path, SEQUENCE_COLUMNS, _sequences_rows(result))
    tail_path = out_dir / "tail_table.csv"
    write_csv(tail_path, TAIL_COLUMNS, _tail_rows(result))
    outputs = [cert_path, seq_path, tail_path]
    manifest = {
        "scenario_hash": scenario_hash(scenario_data),
        "toolkit_version": __version__,
        "seed": result.scenario.analysis.seed,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": [p.name for p in outputs],
        "durations_seconds": result.durations,
        "warnings": result.warnings,
    }
    manifest_path = out_dir / "manifest.json"
    write_json(manifest_path, manifest)
    outputs.append(manifest_path)
    return outputs


def _override_analysis(scenario: Scenario, nodes, grid, guard, seed) -> Scenario:
    updates = {}
    if nodes is not None:
        updates["contour_nodes"] = nodes
    if grid is not None:
        updates["hautus_resolution"] = grid
    if guard is not None:
        updates["guard"] = guard
    if seed is not None:
        updates["seed"] = seed
    if not updates:
        return scenario
    analysis = dataclasses.replace(scenario.analysis, **updates)
    return dataclasses.replace(scenario, analysis=analysis)


def run_analyze(
    scenario_path,
    out_dir,
    nodes: int | None = None,
    grid: int | None = None,
    guard: int | None = None,
    seed: int | None = None,
    strict: bool = False,
) -> int:
    """Analyze one scenario file and write certificate/sequence/tail/manifest."""
    started = datetime.now(timezone.utc).isoformat()
    try:
        scenario = load_scenario(scenario_path)
        scenario = _override_analysis(scenario, nodes, grid, guard, seed)
        result = analyze(scenario)
        write_outputs(result, Path(out_dir), started, scenario.raw)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for message in result.warnings:
        print(f"warning: {message}", file=sys.stderr)
    verdict = result.certificate.verdict
    if verdict == "hypotheses-unmet":
        print(f"hypotheses-unmet: {'; '.join(result.certificate.failed_conditions)}")
    else:
        print(f"verdict: {verdict}")
    if strict and result.warnings:
        print("strict mode: warnings escalate to errors", file=sys.stderr)
        return EXIT_ERROR
    return exit_code_for(result.certificate)


_PARAM_ALIASES = {
    "c": ("perturbation", "c"),
    "s": ("perturbation", "s"),
    "decay": ("perturbation", "decay"),
    "length": ("perturbation", "length"),
    "rank": ("perturbation", "rank"),
    "seed": ("perturbation", "seed"),
    "N": ("truncation",),
    "truncation": ("truncation",),
    "a": ("observation", "a"),
    "b": ("observation", "b"),
    "T": ("analysis", "time_horizon"),
    "guard": ("analysis", "guard"),
}

_INTEGER_PARAMS = {("truncation",), ("perturbation", "rank"), ("perturbation", "seed"),
                   ("analysis", "guard")}


def _set_param(data: dict, path: tuple, value: float) -> None:
    node = data
    for key in path[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise ScenarioError(f"scenario has no section {key!r} for parameter override")
        node = node[key]
    node[path[-1]] = int(value) if path in _INTEGER_PARAMS else value


def run_sweep(scenario_path, param: str, values, out_dir) -> int:
    """Re-run the analysis over a grid of one numeric scenario field."""
    try:
        values = list(values)
        if not values:
            raise ScenarioError("empty sweep value list")
        path = _PARAM_ALIASES.get(param) or tuple(param.split("."))
        base = load_scenario(scenario_path)
        rows = []
        for value in values:
            data = copy.deepcopy(base.raw)
            _set_param(data, path, value)
            scenario = scenario_from_dict(data, base.base_dir)
            result = analyze(scenario)
            cert = result.certificate
            rows.append(
                (
                    value,
                    cert.gamma_hat,
                    cert.gamma_tilde,
                    cert.kappa_star,
                    cert.delta_hat,
                    cert.rho_hat,
                    cert.delta_tilde,
                    cert.verdict,
                )
            )
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        header = ["value", "gamma_hat", "gamma_tilde", "kappa_star", "delta_hat", "rho_hat",
                  "delta_tilde", "verdict"]
        lines = [",".join(header)]
        for row in rows:
            cells = ["" if v is None else (v if isinstance(v, str) else format_number(v))
                     for v in row]
            lines.append(",".join(cells))
        (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    except ScenarioError as exc:
        print(f"sweep error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"sweep error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def _read_csv(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return list(reader)


def emit_plot_data(report_dir, strict: bool = False) -> int:
    """Derive plain plotting series from a finished analysis directory."""
    report_dir = Path(report_dir)
    emitted = 0
    missing = []

    seq_path = report_dir / "sequences.csv"
    if seq_path.exists():
        rows = _read_csv(seq_path)
        write_csv(
            report_dir / "theta_series.csv",
            ["n", "theta"],
            ((int(r["n"]), float(r["theta"])) for r in rows),
        )
        write_csv(
            report_dir / "gap_series.csv",
            ["n", "gap", "gap_tilde"],
            ((int(r["n"]), float(r["gap"]), float(r["gap_tilde"])) for r in rows),
        )
        emitted += 2
    else:
        missing.append(seq_path.name)

    cert_path = report_dir / "certificate.json"
    if cert_path.exists():
        cert = json.loads(cert_path.read_text(encoding="utf-8"))
        hautus = cert.get("reports", {}).get("hautus", {})
        grid = hautus.get("omega_grid", [])
        rho = hautus.get("rho_of_omega", [])
        write_csv(report_dir / "hautus_series.csv", ["omega", "rho"], zip(grid, rho))
        emitted += 1
    else:
        missing.append(cert_path.name)

    tail_path = report_dir / "tail_table.csv"
    if tail_path.exists():
        rows = _read_csv(tail_path)
        write_csv(
            report_dir / "tail_series.csv",
            ["k", "t", "b"],
            ((int(r["k"]), float(r["t"]), float(r["b"])) for r in rows),
        )
        emitted += 1
    else:
        missing.append(tail_path.name)

    for name in missing:
        print(f"warning: missing input {name}; series skipped", file=sys.stderr)
    if missing and strict:
        return EXIT_ERROR
    if emitted == 0:
        print("plot data error: no inputs found", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK
