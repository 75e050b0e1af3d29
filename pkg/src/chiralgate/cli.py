"""Batch experiment runner.

    chiralgate run CONFIG.json [--set key=value]... [--out DIR] [--seed N] [--no-timestamp]

The config is a JSON object; ``--set`` overrides any dotted key with a JSON
literal (bare words are taken as strings). Precedence is flags > file >
built-in defaults. Every CSV starts with ``#`` comment lines echoing the
resolved config, the package version and the seed, followed by one header
row. A ``summary.json`` holds the headline numbers.

Exit codes: 0 success, 1 output could not be written, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import io
import json
import sys
import warnings
from pathlib import Path
from typing import Any, Callable

import numpy as np

from chiralgate import __version__, analytic
from chiralgate.disorder import (
    DisorderSpec,
    chirality_sweep,
    delay_sweep,
    monte_carlo_fidelity,
)
from chiralgate.exact.scattering import NumericalFailure, TwoPhotonScatterer, single_photon_matrix
from chiralgate.gate import ChoiSetup, QuadratureNotConverged, evaluate, optimize_width
from chiralgate.model import Direction, EmitterChain, FrequencyGrid, PulseSpec, TwoPhotonState

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
METHODS = ("analytic", "exact", "both")
JET_THRESHOLD = 1e-4

BASE_DEFAULTS = {
    "chain": {"n_emitters": 12, "gamma_b": 0.0, "gamma_s": 0.0, "k0d": float(np.pi)},
    "pulse": {"target_phase": float(np.pi), "delay": 0.0},
    "grid": {"n_points": 257, "span": 8.0},
    "filter_sigmas": 6.0,
    "method": "exact",
    "seed": 0,
}

EXPERIMENT_DEFAULTS = {
    "single-photon-spectrum": {"sweep": {"omega_min": -3.0, "omega_max": 3.0, "n_points": 301},
                               "method": "both"},
    "two-photon-map": {"grid": {"n_points": 201, "span": 4.0}, "method": "both"},
    "fidelity-vs-width": {"sweep": {"n_emitters": [4, 8, 12], "widths": [0.02, 0.05, 0.1, 0.2]}},
    "chirality-vs-N": {"sweep": {"n_emitters": list(range(2, 13)), "loss_fraction": 0.01,
                                 "width_range": [0.02, 0.6]}},
    "phase-sweep": {"sweep": {"alphas_over_pi": [0.25, 0.5, 0.75, 1.0],
                              "width_range": [0.01, 0.6]}},
    "disorder-heatmap": {"sweep": {"sigma_gamma_db": [0.0, 2.5, 5.0],
                                   "sigma_delta": [0.0, 0.25, 0.5],
                                   "n_realizations": 20, "random_spacing": False}},
    "delay-sweep": {"sweep": {"delays": [0.0, 5.0, 10.0, 20.0, 50.0, 100.0]}},
}

NEEDS_WIDTH = {"two-photon-map", "disorder-heatmap", "delay-sweep"}
EXACT_ONLY = {"disorder-heatmap"}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_literal(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(config: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = config
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"field '{'.'.join(parts[:-1])}' is not an object")
        node = child
    node[parts[-1]] = _parse_literal(raw)


def load_config(path: Path, overrides: list, seed: int | None) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        user = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(user, dict):
        raise ConfigError("top level of the config must be an object")
    for assignment in overrides:
        apply_override(user, assignment)
    name = user.get("experiment")
    if name is None:
        raise ConfigError("missing field 'experiment'")
    if name not in EXPERIMENT_DEFAULTS:
        raise ConfigError(f"field 'experiment': unknown {name!r}; "
                          f"choose from {', '.join(EXPERIMENT_DEFAULTS)}")
    config = _merge(_merge(BASE_DEFAULTS, EXPERIMENT_DEFAULTS[name]), user)
    if seed is not None:
        config["seed"] = seed
    validate_config(config)
    return config


def _field(config: dict, dotted: str) -> Any:
    node = config
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"missing field '{dotted}'")
        node = node[part]
    return node


def _number(config: dict, dotted: str, positive: bool = False) -> float:
    value = _field(config, dotted)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ConfigError(f"field '{dotted}' must be a finite number, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(f"field '{dotted}' must be positive, got {value!r}")
    return float(value)


def _number_list(config: dict, dotted: str, positive: bool = False) -> list:
    value = _field(config, dotted)
    if not isinstance(value, list) or not value:
        raise ConfigError(f"field '{dotted}' must be a non-empty list")
    for i, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, (int, float)) or not np.isfinite(item):
            raise ConfigError(f"field '{dotted}[{i}]' must be a finite number")
        if positive and item <= 0:
            raise ConfigError(f"field '{dotted}[{i}]' must be positive")
    return [float(x) for x in value]


def validate_config(config: dict) -> None:
    name = config["experiment"]
    method = config.get("method")
    if method not in METHODS:
        raise ConfigError(f"field 'method' must be one of {', '.join(METHODS)}, got {method!r}")
    if name in EXACT_ONLY and method != "exact":
        raise ConfigError(f"field 'method': {name} requires 'exact'")
    if isinstance(config["seed"], bool) or not isinstance(config["seed"], int):
        raise ConfigError("field 'seed' must be an integer")
    n = _field(config, "chain.n_emitters")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError("field 'chain.n_emitters' must be a positive integer")
    _number(config, "chain.k0d")
    if "beta" in config["chain"] or "directionality" in config["chain"]:
        beta = _number(config, "chain.beta", positive=True)
        d = _number(config, "chain.directionality")
        if not (beta <= 1 and -1 < d <= 1):
            raise ConfigError("fields 'chain.beta'/'chain.directionality' out of range")
    else:
        for key in ("gamma_b", "gamma_s"):
            if _number(config, f"chain.{key}") < 0:
                raise ConfigError(f"field 'chain.{key}' must be >= 0")
    if name in NEEDS_WIDTH:
        _number(config, "pulse.width", positive=True)
    _number(config, "pulse.target_phase")
    _number(config, "grid.span", positive=True)
    points = _field(config, "grid.n_points")
    if isinstance(points, bool) or not isinstance(points, int) or points < 3:
        raise ConfigError("field 'grid.n_points' must be an integer >= 3")
    if config["filter_sigmas"] is not None:
        _number(config, "filter_sigmas", positive=True)
    check = SWEEP_CHECKS.get(name)
    if check:
        check(config)


def _check_spectrum(config):
    lo = _number(config, "sweep.omega_min")
    hi = _number(config, "sweep.omega_max")
    if not lo < hi:
        raise ConfigError("fields 'sweep.omega_min' < 'sweep.omega_max' required")
    _number(config, "sweep.n_points", positive=True)


def _check_widths(config):
    _number_list(config, "sweep.n_emitters", positive=True)
    _number_list(config, "sweep.widths", positive=True)


def _check_width_range(config):
    lo, hi = _number_list(config, "sweep.width_range", positive=True)[:2]
    if not lo < hi:
        raise ConfigError("field 'sweep.width_range' must be increasing")


def _check_chirality(config):
    _number_list(config, "sweep.n_emitters", positive=True)
    frac = _number(config, "sweep.loss_fraction")
    if not 0 <= frac < 0.5:
        raise ConfigError("field 'sweep.loss_fraction' must lie in [0, 0.5)")
    _check_width_range(config)


def _check_phase(config):
    for i, a in enumerate(_number_list(config, "sweep.alphas_over_pi")):
        if not 0 < a < 2:
            raise ConfigError(f"field 'sweep.alphas_over_pi[{i}]' must lie in (0, 2)")
    _check_width_range(config)


def _check_disorder(config):
    for key in ("sweep.sigma_gamma_db", "sweep.sigma_delta"):
        if any(v < 0 for v in _number_list(config, key)):
            raise ConfigError(f"field '{key}' must be >= 0")
    _number(config, "sweep.n_realizations", positive=True)


def _check_delay(config):
    _number_list(config, "sweep.delays")


SWEEP_CHECKS: dict[str, Callable] = {
    "single-photon-spectrum": _check_spectrum,
    "fidelity-vs-width": _check_widths,
    "chirality-vs-N": _check_chirality,
    "phase-sweep": _check_phase,
    "disorder-heatmap": _check_disorder,
    "delay-sweep": _check_delay,
}


# ---------------------------------------------------------------- experiments


def build_chain(config: dict, **changes) -> EmitterChain:
    c = config["chain"]
    if "beta" in c or "directionality" in c:
        chain = EmitterChain.from_beta_directionality(c["n_emitters"], c["beta"],
                                                      c["directionality"], k0d=c["k0d"])
    else:
        chain = EmitterChain(c["n_emitters"], gamma_b=c["gamma_b"], gamma_s=c["gamma_s"],
                             k0d=c["k0d"])
    return chain.replace(**changes) if changes else chain


def build_setup(config: dict, chain: EmitterChain, width: float | None = None) -> ChoiSetup:
    p = config["pulse"]
    return ChoiSetup.create(chain, width if width is not None else p["width"],
                            target_phase=p["target_phase"], delay=p["delay"],
                            filter_sigmas=config["filter_sigmas"],
                            n_points=config["grid"]["n_points"], span=config["grid"]["span"])


def _methods(config: dict) -> list:
    return ["analytic", "exact"] if config["method"] == "both" else [config["method"]]


class Table:
    """Wide-form CSV payload: column names, units and rows."""

    def __init__(self, name: str, columns: list, units: dict):
        self.name, self.columns, self.units, self.rows = name, columns, units, []

    def add(self, *values) -> None:
        self.rows.append(values)


def run_single_photon_spectrum(config: dict) -> tuple:
    sw = config["sweep"]
    grid = FrequencyGrid(sw["omega_min"], sw["omega_max"], int(sw["n_points"]))
    chain = build_chain(config)
    table = Table("spectrum", ["omega", "method", "t_re", "t_im", "r_re", "r_im"],
                  {"omega": "gamma0"})
    from chiralgate.exact.hamiltonian import ChainOperators

    for method in _methods(config):
        if method == "exact":
            s = single_photon_matrix(ChainOperators.from_chain(chain), grid.values)
            t, r = s[(Direction.RIGHT, Direction.RIGHT)], s[(Direction.LEFT, Direction.RIGHT)]
        else:
            t = analytic.single_photon_phase(grid.values, chain.n_emitters)
            r = np.zeros_like(t)
        for w, tv, rv in zip(grid.values, t, r):
            table.add(w, method, tv.real, tv.imag, rv.real, rv.imag)
    return [table], {"n_points": grid.n_points}


def analytic_output_map(psi: TwoPhotonState, n_emitters: int) -> TwoPhotonState:
    w1 = psi.grid1.values[:, None]
    w2 = psi.grid2.values[None, :]
    factor = (analytic.single_photon_phase(w1, n_emitters)
              * analytic.single_photon_phase(w2, n_emitters) * analytic.t_elastic(w1, w2))
    return psi.with_amplitudes(factor * psi.amplitudes)


def map_metrics(exact: TwoPhotonState, model: TwoPhotonState, psi_in: TwoPhotonState) -> dict:
    """Relative L2 discrepancy and the population outside the input support ("jets")."""
    density = np.abs(psi_in.amplitudes) ** 2
    outside = density < JET_THRESHOLD * density.max()
    return {
        "relative_discrepancy": exact.l2_distance(model) / np.sqrt(model.norm),
        "jet_population": exact.probability(outside),
        "output_norm": exact.norm,
    }


def run_two_photon_map(config: dict) -> tuple:
    chain = build_chain(config)
    setup = build_setup(config, chain)
    g1, g2 = setup.grids()
    psi = TwoPhotonState.product(setup.pulse_right, setup.pulse_left, g1, g2)
    maps = {"analytic": analytic_output_map(psi, chain.n_emitters)}
    if config["method"] in ("exact", "both"):
        maps["exact"] = TwoPhotonScatterer(chain).scatter(psi)
    tables = []
    for method, state in maps.items():
        if config["method"] != "both" and method != config["method"]:
            continue
        table = Table(f"map_{method}", ["omega1", "omega2", "re", "im"],
                      {"omega1": "gamma0", "omega2": "gamma0"})
        for i, w1 in enumerate(g1.values):
            for j, w2 in enumerate(g2.values):
                a = state.amplitudes[i, j]
                table.add(w1, w2, a.real, a.imag)
        tables.append(table)
    summary = {"grid_points": g1.n_points}
    if "exact" in maps:
        summary.update(map_metrics(maps["exact"], maps["analytic"], psi))
    return tables, summary


def run_fidelity_vs_width(config: dict) -> tuple:
    sw = config["sweep"]
    table = Table("fidelity_vs_width", ["N", "sigma", "method", "F", "R", "F_unfiltered"],
                  {"sigma": "gamma0"})
    best = {}
    for n in sorted(int(x) for x in sw["n_emitters"]):
        chain = build_chain(config, n_emitters=n)
        for width in sorted(sw["widths"]):
            for method in _methods(config):
                r = evaluate(build_setup(config, chain, width), method)
                table.add(n, width, method, r.fidelity, r.success_probability,
                          r.fidelity_unfiltered)
                key = f"N{n}_{method}"
                if key not in best or r.fidelity > best[key]["F"]:
                    best[key] = {"sigma": width, "F": r.fidelity, "R": r.success_probability}
    return [table], {"best_on_grid": best}


def run_chirality(config: dict) -> tuple:
    sw = config["sweep"]
    f = sw["loss_fraction"]
    rate = f / (1.0 - 2.0 * f)  # gamma_b = gamma_s = f * gamma_tot
    setup = build_setup(config, build_chain(config), sw["width_range"][0])
    method = "exact" if config["method"] == "both" else config["method"]
    result = chirality_sweep(setup, sorted(int(n) for n in sw["n_emitters"]), rate, rate,
                             tuple(sw["width_range"]), method)
    table = Table("chirality_vs_N", ["N", "sigma_opt", "F", "R", "F_unfiltered"],
                  {"sigma_opt": "gamma0"})
    for p in result.points:
        table.add(int(p.coordinate), p.width, p.result.fidelity, p.result.success_probability,
                  p.result.fidelity_unfiltered)
    return [table], {"log_success_slope": result.log_success_slope,
                     "log_success_r_squared": result.log_success_r_squared,
                     "fidelity_non_decreasing": result.fidelity_non_decreasing}


def run_phase_sweep(config: dict) -> tuple:
    sw = config["sweep"]
    chain = build_chain(config)
    table = Table("phase_sweep", ["alpha_over_pi", "method", "sigma_opt", "F", "R", "infidelity"],
                  {"alpha_over_pi": "pi rad", "sigma_opt": "gamma0"})
    worst = {}
    for a in sorted(sw["alphas_over_pi"]):
        for method in _methods(config):
            template = ChoiSetup.create(chain, sw["width_range"][0], target_phase=a * np.pi,
                                        filter_sigmas=config["filter_sigmas"],
                                        n_points=config["grid"]["n_points"],
                                        span=config["grid"]["span"])
            width, r = optimize_width(template, tuple(sw["width_range"]), method)
            table.add(a, method, width, r.fidelity, r.success_probability, r.infidelity)
            worst[method] = max(worst.get(method, 0.0), r.infidelity)
    return [table], {"max_infidelity": worst}


def run_disorder_heatmap(config: dict) -> tuple:
    sw = config["sweep"]
    setup = build_setup(config, build_chain(config))
    table = Table("disorder_heatmap",
                  ["sigma_gamma_db", "sigma_delta", "mean_F", "sem_F", "mean_R", "sem_R"],
                  {"sigma_gamma_db": "dB", "sigma_delta": "gamma_tot"})
    cells = []
    for db in sorted(sw["sigma_gamma_db"]):
        for delta in sorted(sw["sigma_delta"]):
            spec = DisorderSpec(db, delta, (0.5, 1.5) if sw["random_spacing"] else None,
                                0.0, int(sw["n_realizations"]), config["seed"])
            m = monte_carlo_fidelity(setup, spec, "exact")
            table.add(db, delta, m.mean_fidelity, m.sem_fidelity, m.mean_success, m.sem_success)
            cells.append(m.mean_fidelity)
    return [table], {"min_mean_F": min(cells), "max_mean_F": max(cells)}


def run_delay_sweep(config: dict) -> tuple:
    setup = build_setup(config, build_chain(config))
    method = "exact" if config["method"] == "both" else config["method"]
    points = delay_sweep(setup, sorted(config["sweep"]["delays"]), method)
    table = Table("delay_sweep", ["tau", "F", "R"], {"tau": "1/gamma0"})
    for p in points:
        table.add(p.coordinate, p.result.fidelity, p.result.success_probability)
    return [table], {"F_at_max_delay": points[-1].result.fidelity,
                     "R_at_max_delay": points[-1].result.success_probability}


RUNNERS: dict[str, Callable] = {
    "single-photon-spectrum": run_single_photon_spectrum,
    "two-photon-map": run_two_photon_map,
    "fidelity-vs-width": run_fidelity_vs_width,
    "chirality-vs-N": run_chirality,
    "phase-sweep": run_phase_sweep,
    "disorder-heatmap": run_disorder_heatmap,
    "delay-sweep": run_delay_sweep,
}


# ---------------------------------------------------------------- output


def _header(config: dict, units: dict, timestamp: bool) -> str:
    lines = [f"# chiralgate {__version__}", f"# experiment: {config['experiment']}",
             f"# seed: {config['seed']}",
             f"# config: {json.dumps(config, sort_keys=True)}"]
    if units:
        lines.append("# units: " + ", ".join(f"{k} [{v}]" for k, v in units.items()))
    if timestamp:
        lines.append(f"# generated: {_dt.datetime.now(_dt.timezone.utc).isoformat()}")
    return "\n".join(lines) + "\n"


def _format(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def render_table(table: Table, config: dict, timestamp: bool) -> str:
    buf = io.StringIO()
    buf.write(_header(config, table.units, timestamp))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_format(v) for v in row])
    return buf.getvalue()


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def write_outputs(out_dir: Path, tables: list, summary: dict, config: dict,
                  timestamp: bool) -> list:
    out_dir.mkdir(parents=True, exist_ok=True)
    payloads = {f"{t.name}.csv": render_table(t, config, timestamp) for t in tables}
    doc = {"version": __version__, "experiment": config["experiment"], "seed": config["seed"],
           "config": config, "results": _jsonable(summary)}
    if timestamp:
        doc["generated"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    payloads["summary.json"] = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    written = []
    try:
        for name, text in payloads.items():
            path = out_dir / name
            path.write_text(text)
            written.append(path)
    except OSError:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return written


def run(config: dict, out_dir: Path, timestamp: bool = True) -> list:
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        tables, summary = RUNNERS[config["experiment"]](config)
    return write_outputs(out_dir, tables, summary, config, timestamp)


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chiralgate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run one experiment from a JSON config")
    run_p.add_argument("config", type=Path)
    run_p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a dotted config key")
    run_p.add_argument("--out", type=Path, default=Path("results"))
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--no-timestamp", action="store_true")
    sub.add_parser("list", help="list available experiments")
    return parser


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print("\n".join(EXPERIMENT_DEFAULTS))
        return EXIT_OK
    try:
        config = load_config(args.config, args.overrides, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        written = run(config, args.out, timestamp=not args.no_timestamp)
    except ValueError as exc:
        # parameters that parse but make no physical sense (e.g. window too narrow)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, QuadratureNotConverged, ArithmeticError, RuntimeWarning,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
