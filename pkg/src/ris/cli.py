"""Command-line runner: config ingestion, experiment orchestration, CSV emission.

Usage: ``ris <experiment> --config <path> [--out <path>] [--jobs N]``.

Configs are JSON; complex scalars are two-element arrays [re, im] and
complex matrices are nested lists of such pairs.  Every run writes a
results CSV (fixed columns per experiment) and a metadata JSON sidecar
(config echo with defaults filled in, package version, wall time).  CSV
bodies are deterministic: fixed row order, 17-significant-digit floats,
independent of the parallelism degree.  Exit codes: 0 success, 2 oracle
tolerance failure, 1 anything else.  The environment variable RIS_MAX_DIM
overrides the default dimension cap (n_S * n_E <= 8).
"""
from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .asymptotic import (
    asymptotic_periodic_state,
    effective_asymptotic_state,
    kato_structure_check,
    trace_distance,
)
from .dynamics import (
    RISModel,
    commutator_superop,
    dyson_term,
    dyson_term_quadrature,
    dyson_truncation_bound,
    full_generator,
    interaction_dynamics,
)
from .linops import Superoperator, matrix_exp, superop_norm
from .spin import SpinParams, build_spin_model, closed_form_deltas, spin_asymptotic_state
from .vanhove import (
    converge_lambda,
    converge_lambda_interpolated,
    converge_tau,
    effective_generator_fast_repetition,
    effective_generator_weak_coupling,
)

EXPERIMENTS = ("effective", "converge-lambda", "converge-tau", "asymptotic",
               "kato", "dyson-check", "spin-oracle")

_DEFAULTS = {
    "lambdas": [0.2, 0.1, 0.05],
    "taus": [0.2, 0.1, 0.05],
    "eps": [0.04, 0.02, 0.01, 0.005],
    "s_max": 5.0,
    "s_steps": 50,
    "interpolated": False,
    "branch_cut_angle": None,   # largest-gap bisector
    "quadrature_order": 32,
    "dyson_orders": [2, 3, 4],
    "dyson_times": [0.5, 1.0],
    "t_samples": [0.0],
    "regime": "weak-coupling",
    "parametrization_order": 1,
    "jobs": 1,
    "tolerances": {"oracle": 1e-9, "cluster": 1e-8, "peripheral": 1e-9},
}


class ConfigError(ValueError):
    """Schema violation, annotated with the JSON path of the offending entry."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    experiment: str
    model: RISModel
    spin_params: SpinParams | None
    lambdas: list
    taus: list
    eps: list
    s_max: float
    s_steps: int
    interpolated: bool
    branch_cut_angle: float | None
    quadrature_order: int
    dyson_orders: list
    dyson_times: list
    t_samples: list
    regime: str
    parametrization_order: int
    jobs: int
    tolerances: dict
    output: str | None
    echo: dict = field(repr=False, default_factory=dict)


def _complex_scalar(value, path: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(x, (int, float)) for x in value)):
        return complex(value[0], value[1])
    raise ConfigError(path, "expected a real number or a two-element [re, im] array")


def _complex_matrix(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a non-empty matrix (list of rows)")
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != len(value):
            raise ConfigError(f"{path}[{i}]", "matrix must be square")
        rows.append([_complex_scalar(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)])
    return np.array(rows, dtype=complex)


def _hermitian_matrix(value, path: str) -> np.ndarray:
    m = _complex_matrix(value, path)
    asym = float(np.abs(m - m.conj().T).max())
    if asym > 1e-12 * max(1.0, float(np.abs(m).max())):
        raise ConfigError(path, f"matrix is not Hermitian (max asymmetry {asym:.3e})")
    return m


def _positive_reals(value, path: str, strict: bool = True) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a non-empty array of numbers")
    out = []
    for i, x in enumerate(value):
        if not isinstance(x, (int, float)) or (strict and x <= 0):
            raise ConfigError(f"{path}[{i}]", "expected a positive number")
        out.append(float(x))
    return out


def _build_model(doc: dict, path: str) -> tuple[RISModel, SpinParams | None]:
    if "spin" in doc:
        spec = doc["spin"]
        if not isinstance(spec, dict):
            raise ConfigError(f"{path}.spin", "expected an object")
        required = ("S", "E", "beta", "tau")
        for key in required:
            if key not in spec:
                raise ConfigError(f"{path}.spin.{key}", "missing required field")
        try:
            params = SpinParams(
                S=float(spec["S"]), E=float(spec["E"]), beta=float(spec["beta"]),
                tau=float(spec["tau"]),
                b=_complex_scalar(spec.get("b", 0.0), f"{path}.spin.b"),
                c=_complex_scalar(spec.get("c", 0.0), f"{path}.spin.c"),
                a=_complex_scalar(spec.get("a", 0.0), f"{path}.spin.a"),
                d=_complex_scalar(spec.get("d", 0.0), f"{path}.spin.d"))
        except ValueError as exc:
            raise ConfigError(f"{path}.spin", str(exc)) from exc
        return build_spin_model(params), params
    if "inline" in doc:
        spec = doc["inline"]
        if not isinstance(spec, dict):
            raise ConfigError(f"{path}.inline", "expected an object")
        for key in ("h_s", "h_e", "v", "beta"):
            if key not in spec:
                raise ConfigError(f"{path}.inline.{key}", "missing required field")
        h_s = _hermitian_matrix(spec["h_s"], f"{path}.inline.h_s")
        h_e = _hermitian_matrix(spec["h_e"], f"{path}.inline.h_e")
        v = _hermitian_matrix(spec["v"], f"{path}.inline.v")
        p0 = None
        if spec.get("p0") is not None:
            p0 = _hermitian_matrix(spec["p0"], f"{path}.inline.p0")
        try:
            model = RISModel(h_s=h_s, h_e=h_e, v=v, beta=float(spec["beta"]), p0=p0)
        except ValueError as exc:
            raise ConfigError(f"{path}.inline", str(exc)) from exc
        return model, None
    raise ConfigError(path, 'expected a "spin" or "inline" model description')


def _max_dim() -> int:
    raw = os.environ.get("RIS_MAX_DIM", "8")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError("$RIS_MAX_DIM", f"not an integer: {raw!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment description; fill and echo defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("$", "top-level document must be an object")
    if "experiment" not in doc:
        raise ConfigError("$.experiment", "missing required field")
    experiment = doc["experiment"]
    if experiment not in EXPERIMENTS:
        raise ConfigError("$.experiment", f"unknown experiment {experiment!r}; "
                          f"expected one of {', '.join(EXPERIMENTS)}")
    if "model" not in doc or not isinstance(doc["model"], dict):
        raise ConfigError("$.model", "missing model object")
    model, spin_params = _build_model(doc["model"], "$.model")

    cap = _max_dim()
    if model.dim > cap:
        raise ConfigError("$.model", f"full dimension {model.dim} exceeds the cap {cap} "
                          "(override with RIS_MAX_DIM)")

    merged = dict(_DEFAULTS)
    merged["tolerances"] = dict(_DEFAULTS["tolerances"])
    for key, value in doc.items():
        if key in ("experiment", "model", "output", "tau"):
            continue
        if key not in merged:
            raise ConfigError(f"$.{key}", "unknown field")
        if key == "tolerances":
            if not isinstance(value, dict):
                raise ConfigError("$.tolerances", "expected an object")
            merged["tolerances"].update(value)
        else:
            merged[key] = value

    lambdas = _positive_reals(merged["lambdas"], "$.lambdas")
    taus = _positive_reals(merged["taus"], "$.taus")
    eps = _positive_reals(merged["eps"], "$.eps")
    if not isinstance(merged["s_steps"], int) or merged["s_steps"] < 2:
        raise ConfigError("$.s_steps", "expected an integer >= 2")
    if not isinstance(merged["s_max"], (int, float)) or merged["s_max"] <= 0:
        raise ConfigError("$.s_max", "expected a positive number")
    if merged["regime"] not in ("weak-coupling", "fast-repetition"):
        raise ConfigError("$.regime", 'expected "weak-coupling" or "fast-repetition"')
    if not isinstance(merged["jobs"], int) or merged["jobs"] < 1:
        raise ConfigError("$.jobs", "expected an integer >= 1")
    for key in ("spin-oracle",):
        if experiment == key and spin_params is None:
            raise ConfigError("$.model", f"experiment {key!r} requires a spin model")
    if experiment in ("converge-lambda", "asymptotic", "kato", "spin-oracle", "effective"):
        if "tau" not in doc and spin_params is None:
            raise ConfigError("$.tau", "missing required field (no spin tau to fall back on)")
    tau = float(doc.get("tau", spin_params.tau if spin_params else 0.0))
    if tau <= 0 and experiment != "converge-tau":
        raise ConfigError("$.tau", "tau must be positive")

    echo = {"experiment": experiment, "model": doc["model"], "tau": tau,
            "output": doc.get("output"), **merged}
    return ExperimentConfig(
        experiment=experiment, model=model, spin_params=spin_params,
        lambdas=lambdas, taus=taus, eps=eps,
        s_max=float(merged["s_max"]), s_steps=merged["s_steps"],
        interpolated=bool(merged["interpolated"]),
        branch_cut_angle=merged["branch_cut_angle"],
        quadrature_order=int(merged["quadrature_order"]),
        dyson_orders=list(merged["dyson_orders"]), dyson_times=list(merged["dyson_times"]),
        t_samples=list(merged["t_samples"]), regime=merged["regime"],
        parametrization_order=int(merged["parametrization_order"]),
        jobs=merged["jobs"], tolerances=merged["tolerances"],
        output=doc.get("output"), echo=echo)


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} in results")
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# per-experiment drivers; the _rows_* workers are top-level so that they can
# be dispatched to worker processes, taking only picklable payloads
# ---------------------------------------------------------------------------

def _rows_converge_lambda(payload) -> list:
    cfg_echo, lam = payload
    config = parse_config(json.dumps(cfg_echo))
    fn = converge_lambda_interpolated if config.interpolated else converge_lambda
    report = fn(config.model, cfg_echo["tau"], [lam], config.s_max, config.s_steps,
                config.branch_cut_angle)
    return [(p, s, e) for p, s, e in report.rows]


def _rows_converge_tau(payload) -> list:
    cfg_echo, pair = payload
    config = parse_config(json.dumps(cfg_echo))
    report = converge_tau(config.model, [pair], config.s_max, config.s_steps)
    return [(p, s, e) for p, s, e in report.rows]


def _rows_asymptotic(payload) -> list:
    cfg_echo, lam = payload
    config = parse_config(json.dumps(cfg_echo))
    tau = cfg_echo["tau"]
    eff = effective_asymptotic_state(effective_generator_weak_coupling(
        config.model, tau, config.branch_cut_angle))
    report = asymptotic_periodic_state(config.model, lam, tau,
                                       t_samples=config.t_samples)
    rows = []
    for t, rho in report.period_samples:
        dist = trace_distance(report.asymptotic_density, eff.density)
        entries = []
        for i in range(config.model.n_s):
            for j in range(config.model.n_s):
                entries.extend([rho[i, j].real, rho[i, j].imag])
        rows.append((lam, t, *entries, dist))
    return rows


def _parallel_map(fn, payloads, jobs: int) -> list:
    if jobs <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, payloads))


def _run_experiment(config: ExperimentConfig, jobs: int):
    """Returns (header, rows, metadata_extras, exit_code)."""
    model, tau = config.model, config.echo["tau"]
    extras = {}

    if config.experiment == "converge-lambda":
        payloads = [(config.echo, lam) for lam in config.lambdas]
        chunks = _parallel_map(_rows_converge_lambda, payloads, jobs)
        rows = sorted(r for chunk in chunks for r in chunk)
        return ["parameter", "s", "error"], rows, extras, 0

    if config.experiment == "converge-tau":
        if len(config.lambdas) == 1:
            pairs = [(config.lambdas[0], t) for t in config.taus]
        elif len(config.lambdas) == len(config.taus):
            pairs = list(zip(config.lambdas, config.taus))
        else:
            raise ConfigError("$.lambdas", "need one lambda or one per tau")
        payloads = [(config.echo, pair) for pair in pairs]
        chunks = _parallel_map(_rows_converge_tau, payloads, jobs)
        rows = sorted(r for chunk in chunks for r in chunk)
        return ["parameter", "s", "error"], rows, extras, 0

    if config.experiment == "asymptotic":
        payloads = [(config.echo, lam) for lam in config.lambdas]
        chunks = _parallel_map(_rows_asymptotic, payloads, jobs)
        rows = sorted(r for chunk in chunks for r in chunk)
        header = ["lambda", "t"]
        for i in range(model.n_s):
            for j in range(model.n_s):
                header.extend([f"rho_{i}{j}_re", f"rho_{i}{j}_im"])
        header.append("trace_distance")
        return header, rows, extras, 0

    if config.experiment == "effective":
        if config.regime == "weak-coupling":
            eff = effective_generator_weak_coupling(model, tau, config.branch_cut_angle)
        else:
            eff = effective_generator_fast_repetition(model)
        extras["regime"] = eff.regime
        extras["branch_cut_angle"] = eff.branch_cut_angle
        g = eff.generator.matrix
        rows = [(i, j, g[i, j].real, g[i, j].imag)
                for i in range(g.shape[0]) for j in range(g.shape[1])]
        return ["row", "col", "entry_re", "entry_im"], rows, extras, 0

    if config.experiment == "kato":
        report = kato_structure_check(model, tau, config.eps)
        extras.update({
            "commutator_norm": report.commutator_norm,
            "idempotency_defect": report.idempotency_defect,
            "subprojection_defect": report.subprojection_defect,
            "trace_p_plus": report.trace_p_plus,
            "extrapolation_stable": report.extrapolation_stable,
            "distance_ratios": list(report.distance_ratios),
        })
        rows = [(eps, dist) for eps, dist in report.distance_rows]
        return ["eps", "distance_to_p0plus"], rows, extras, 0

    if config.experiment == "dyson-check":
        a1 = superop_norm(commutator_superop(model.v))
        rows = []
        for t in config.dyson_times:
            free = matrix_exp(t * full_generator(model, 0.0))
            for order in config.dyson_orders:
                lam = 1.0  # lambda*t is carried by dyson_times via t
                total = Superoperator(free.matrix.copy())
                quad_gap = 0.0
                for k in range(1, order):
                    term = dyson_term(model, k, t)
                    if k <= 3:
                        quad = dyson_term_quadrature(model, k, t,
                                                     nodes=config.quadrature_order)
                        quad_gap = max(quad_gap, superop_norm(term - quad))
                    total = total + (1j * lam) ** k * (term @ free)
                err = superop_norm(interaction_dynamics(model, lam, t) - total)
                bound = dyson_truncation_bound(order, lam, t, a1)
                rows.append((order, lam, t, err, bound, quad_gap))
        ok = all(err <= bound for _, _, _, err, bound, _ in rows)
        return (["order", "lambda", "t", "truncation_error", "bound", "blockexp_vs_quadrature"],
                rows, extras, 0 if ok else 2)

    if config.experiment == "spin-oracle":
        params = config.spin_params
        d0, d1 = closed_form_deltas(params)
        eff = effective_generator_weak_coupling(model, params.tau, config.branch_cut_angle)
        g = eff.generator.matrix
        rows = [("delta0", d0, g[0, 0].real, abs(g[0, 0].real - d0)),
                ("delta1", d1, g[-1, -1].real, abs(g[-1, -1].real - d1))]
        if params.S != 0 and params.coupling_strength > 0:
            rho_closed = spin_asymptotic_state(params)
            rho_pipe = effective_asymptotic_state(eff).density
            for i in range(2):
                rows.append((f"rho_{i}{i}", rho_closed[i, i].real, rho_pipe[i, i].real,
                             abs(rho_closed[i, i].real - rho_pipe[i, i].real)))
        tol = config.tolerances["oracle"]
        code = 0 if all(r[3] <= tol for r in rows) else 2
        return ["quantity", "closed_form", "pipeline", "abs_diff"], rows, extras, code

    raise ConfigError("$.experiment", f"unhandled experiment {config.experiment!r}")


def _write_outputs(config: ExperimentConfig, header, rows, extras, out_path, wall, jobs):
    lines = [",".join(header)]
    for row in rows:
        cells = [str(c) if isinstance(c, str) else _fmt(c) for c in row]
        lines.append(",".join(cells))
    csv_body = "\n".join(lines) + "\n"
    with open(out_path, "w") as fh:
        fh.write(csv_body)
    meta = {
        "config": config.echo,
        "version": __version__,
        "wall_time_seconds": wall,
        "jobs": jobs,
        "rows": len(rows),
        **extras,
    }
    meta_path = os.path.splitext(out_path)[0] + ".meta.json"
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=repr)
        fh.write("\n")
    return meta_path


def run(config: ExperimentConfig, out_path: str | None = None,
        jobs: int | None = None) -> int:
    """Execute one experiment; write CSV + metadata sidecar; return the exit code."""
    jobs = jobs if jobs is not None else config.jobs
    out_path = out_path or config.output or f"{config.experiment}.csv"
    start = time.perf_counter()
    header, rows, extras, code = _run_experiment(config, jobs)
    wall = time.perf_counter() - start
    _write_outputs(config, header, rows, extras, out_path, wall, jobs)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ris",
        description="Repeated-interaction system experiments (exact dynamics, "
                    "van Hove limits, asymptotic states).")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=None, help="results CSV path")
        p.add_argument("--jobs", type=int, default=None,
                       help="parallel workers over grid rows")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        config = parse_config(text)
        if config.experiment != args.experiment:
            print(f"error: config declares experiment {config.experiment!r}, "
                  f"command line says {args.experiment!r}", file=sys.stderr)
            return 1
        return run(config, out_path=args.out, jobs=args.jobs)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
