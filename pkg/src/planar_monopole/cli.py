"""Command-line front end: configuration, figure data and bit-stable CSV/JSON output.

Every subcommand has a parameter table giving type, default and range check.
Values come from, in increasing priority, the table defaults, a flat
``key = value`` config file and command-line flags.  Output starts with a
``#`` provenance block that :meth:`RunConfig.from_header` turns back into the
configuration that produced it.
"""

from __future__ import annotations

import os
import sys

# numba reads its pool size on import, so honour MONOPOLE_THREADS before any
# numerical module is loaded
_THREADS_ENV = "MONOPOLE_THREADS"
if os.environ.get(_THREADS_ENV, "").strip().isdigit() and "numba" not in sys.modules:
    os.environ.setdefault("NUMBA_NUM_THREADS", str(max(1, int(os.environ[_THREADS_ENV]))))

import argparse  # noqa: E402
import io  # noqa: E402
import json  # noqa: E402
import math  # noqa: E402
import warnings  # noqa: E402
from dataclasses import dataclass, field  # noqa: E402
from pathlib import Path  # noqa: E402
from typing import Any, Callable, Sequence  # noqa: E402

import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from . import classical, fdm, model, scattering, semiclassical  # noqa: E402
from .errors import FitError, MonopoleError, NotQuasiBoundError, UsageError  # noqa: E402
from .fdm import RadialGrid  # noqa: E402
from .model import MonopoleConfig, PotentialKind  # noqa: E402
from .scattering import ScatteringConfig  # noqa: E402
from .semiclassical import Method  # noqa: E402

SIG_DIGITS = 12
FIGURE_IDS = ("2a", "2b", "3a", "3b", "3c", "4a", "4b", "4c", "5a", "5b", "6a", "6b", "7",
              "8a", "8b", "9a", "9b", "10", "11a", "11b", "13", "14", "15", "16")
PRESETS = ("desk", "full")


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class Param:
    type: type
    default: Any
    check: Callable[[Any], bool] | None = None
    requirement: str = ""
    choices: tuple[str, ...] | None = None
    help: str = ""


def _positive(x):
    return x > 0


def _non_negative(x):
    return x >= 0


def _at_least(k):
    return lambda x: x >= k


def _lam(default=100.0):
    return Param(float, default, _positive, "lambda > 0", help="monopole strength in units of 2 Q_D")


def _grid(a=0.0, b=20.0, n=4000):
    return {
        "a": Param(float, a, _non_negative, "a >= 0", help="left grid end"),
        "b": Param(float, b, _positive, "b > a", help="right grid end"),
        "n_points": Param(int, n, _at_least(3), "n_points >= 3", help="grid points including ends"),
    }


_THRESHOLD = Param(float, fdm.WEIGHT_THRESHOLD, lambda x: 0 < x <= 1, "0 < threshold <= 1",
                   help="minimum probability inside the barrier peak")
_M_INT = Param(int, 1, help="angular momentum quantum number")

COMMANDS: dict[str, dict[str, Param]] = {
    "potential": {
        "lambda": _lam(),
        "m": Param(float, 1.0, help="angular momentum (real values allowed)"),
        "kind": Param(str, "quantum", choices=("classical", "quantum")),
        "rho_min": Param(float, 0.01, _positive, "rho_min > 0"),
        "rho_max": Param(float, 5.0, _positive, "rho_max > rho_min"),
        "n_points": Param(int, 500, _at_least(2), "n_points >= 2"),
    },
    "orbit": {
        "lambda": _lam(),
        "m": Param(float, -1.0, help="angular momentum (real values allowed)"),
        "epsilon": Param(float, 400.0, _positive, "epsilon > 0"),
        "start": Param(str, "well", choices=("well", "outside"),
                       help="start at the well minimum or at the outer turning point"),
        "t_end": Param(float, 0.25, _positive, "t_end > 0"),
        "dt": Param(float, 0.0, _non_negative, "dt >= 0", help="time step, 0 for automatic"),
        "sample_every": Param(int, 10, _at_least(1), "sample_every >= 1"),
    },
    "spectrum": {
        "lambda": _lam(),
        "m": _M_INT,
        "method": Param(str, "fd", choices=("fd", "wkb", "bs-classical", "bs-quantum")),
        **_grid(),
        "threshold": _THRESHOLD,
    },
    "count": {
        "lambda": _lam(60.0),
        "m_min": Param(int, None, help="lowest M (default: range covering the well)"),
        "m_max": Param(int, None, help="highest M (default: range covering the well)"),
        **_grid(),
        "threshold": _THRESHOLD,
    },
    "threshold": {
        "m_min": Param(int, -3),
        "m_max": Param(int, 3),
        **_grid(),
        "threshold": _THRESHOLD,
        "lambda_max": Param(float, 80.0, _positive, "lambda_max > 0"),
        "tol": Param(float, 0.05, _positive, "tol > 0"),
    },
    "lifetime-wkb": {
        "lambda": _lam(),
        "m": _M_INT,
        "distance": Param(float, 0.0, _non_negative, "distance >= 0",
                          help="plane-monopole distance in metres for SI half-lives, 0 to omit"),
    },
    "lifetime-fd": {
        "lambda": _lam(),
        "m": _M_INT,
        "n": Param(int, 5, _non_negative, "n >= 0"),
        **_grid(0.0, 160.0, 10_000),
        "samples": Param(int, fdm.SURVIVAL_SAMPLES, _at_least(3), "samples >= 3"),
    },
    "phase-scan": {
        "lambda": Param(float, 100.0, _non_negative, "lambda >= 0"),
        "m": _M_INT,
        "eps_min": Param(float, 1.0, _positive, "eps_min > 0"),
        "eps_max": Param(float, 950.0, _positive, "eps_max > eps_min"),
        "n_points": Param(int, scattering.SCAN_POINTS, _at_least(2), "n_points >= 2"),
    },
    "resonances": {
        "lambda": Param(float, 100.0, _non_negative, "lambda >= 0"),
        "m": _M_INT,
        "eps_min": Param(float, 1.0, _positive, "eps_min > 0"),
        "eps_max": Param(float, 950.0, _positive, "eps_max > eps_min"),
        "n_points": Param(int, scattering.SCAN_POINTS, _at_least(2), "n_points >= 2"),
    },
    "figure-data": {
        "figure": Param(str, None, choices=FIGURE_IDS),
        "preset": Param(str, "desk", choices=PRESETS,
                        help="desk: reduced lambda for figures 9, 10 and 15"),
    },
}

# ordered pairs that must be strictly increasing
_ORDERED = (("a", "b"), ("rho_min", "rho_max"), ("eps_min", "eps_max"))
_OUTPUT_KEYS = ("output", "json")


def _convert(command: str, key: str, raw: Any) -> Any:
    spec = COMMANDS[command][key]
    if raw is None:
        return None
    try:
        if spec.type is int:
            value = int(raw) if not isinstance(raw, float) or raw.is_integer() else None
            if value is None:
                raise ValueError
        elif spec.type is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
        else:
            value = str(raw)
    except (TypeError, ValueError):
        raise UsageError(f"{key}: expected {spec.type.__name__}, got {raw!r}") from None
    if spec.choices is not None and value not in spec.choices:
        raise UsageError(f"{key}: must be one of {', '.join(spec.choices)}, got {value!r}")
    if spec.check is not None and not spec.check(value):
        raise UsageError(f"{key}: out of range ({spec.requirement}), got {value!r}")
    return value


def _normalise_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


@dataclass(frozen=True)
class RunConfig:
    """A subcommand with a complete, validated parameter set."""

    command: str
    parameters: dict[str, Any]
    output: str | None = None
    json: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        table = COMMANDS[self.command]
        unknown = set(self.parameters) - set(table)
        if unknown:
            raise UsageError(f"unknown key {sorted(unknown)[0]!r} for {self.command}")
        params = {}
        for key, spec in table.items():
            params[key] = _convert(self.command, key, self.parameters.get(key, spec.default))
            if params[key] is None and spec.default is None and key == "figure":
                raise UsageError("figure: required")
        for lo, hi in _ORDERED:
            if lo in params and not params[lo] < params[hi]:
                raise UsageError(f"{hi}: must exceed {lo} ({params[lo]!r} >= {params[hi]!r})")
        if self.command in ("count", "threshold"):
            if params["m_min"] is not None and params["m_max"] is not None \
                    and params["m_min"] > params["m_max"]:
                raise UsageError(f"m_max: must not be below m_min ({params['m_min']} > {params['m_max']})")
        object.__setattr__(self, "parameters", params)

    def header_items(self) -> list[tuple[str, str]]:
        return [("command", self.command)] + [(k, _fmt(v)) for k, v in self.parameters.items()]

    @classmethod
    def from_header(cls, text: str) -> "RunConfig":
        """Rebuild the configuration recorded in an output file's ``#`` block."""
        values = {}
        for line in text.splitlines():
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if " = " not in body:
                continue
            key, value = (s.strip() for s in body.split(" = ", 1))
            if not key.startswith("result."):
                values[key] = value
        if "command" not in values:
            raise UsageError("no provenance header found")
        command = values.pop("command")
        params = {k: (None if v == "none" else v) for k, v in values.items()}
        return cls(command, params)


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    """Flat ``key = value`` pairs, one per line; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"config: cannot read {path}: {exc.strerror}") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _normalise_key(key)
        if key in out:
            raise UsageError(f"{key}: set twice in config file")
        out[key] = value
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="planar-monopole",
                     description="Orbits, quasi-bound spectra and lifetimes of an electron "
                                 "on a plane above a magnetic monopole.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for command, table in COMMANDS.items():
        p = sub.add_parser(command)
        for key, spec in table.items():
            default = "none" if spec.default is None else spec.default
            text = f"{spec.help} (default {default})".strip()
            p.add_argument(_flag(key), dest=key, default=None, help=text,
                           choices=spec.choices, metavar=key.upper())
        p.add_argument("--config", default=None, help="key = value file; flags take precedence")
        p.add_argument("--output", "-o", default=None, help="output path (default stdout)")
        p.add_argument("--json", action="store_true", default=None, help="emit JSON instead of CSV")
    return parser


def parse_config(args: Sequence[str], config_file: str | os.PathLike | None = None) -> RunConfig:
    """Parse a command line, layering flags over an optional config file."""
    ns = build_parser().parse_args(list(args))
    command = ns.command
    file_path = ns.config if ns.config is not None else config_file
    merged: dict[str, Any] = {}
    if file_path is not None:
        for key, value in read_config_file(file_path).items():
            if key == "command":
                if value != command:
                    raise UsageError(f"command: config file says {value!r}, command line {command!r}")
                continue
            if key not in COMMANDS[command] and key not in _OUTPUT_KEYS:
                raise UsageError(f"unknown key {key!r} for {command}")
            merged[key] = value
    for key in COMMANDS[command]:
        value = getattr(ns, key)
        if value is not None:
            merged[key] = value
    output = ns.output if ns.output is not None else merged.pop("output", None)
    merged.pop("output", None)
    as_json = merged.pop("json", "false")
    if ns.json:
        as_json = True
    elif isinstance(as_json, str):
        if as_json.lower() not in ("true", "false"):
            raise UsageError(f"json: expected true or false, got {as_json!r}")
        as_json = as_json.lower() == "true"
    return RunConfig(command, merged, output, bool(as_json))


# ---------------------------------------------------------------- data sets

def _fmt(x: Any) -> str:
    """12 significant digits, shortest decimal that round-trips."""
    if x is None:
        return "none"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(float(f"{x:.{SIG_DIGITS}g}"))
    return str(x)


def _json_value(x: Any):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(f"{x:.{SIG_DIGITS}g}") if math.isfinite(x) else None
    return x


@dataclass
class DataSet:
    """Named columns, ordered rows, provenance and scalar results."""

    columns: list[str]
    rows: list[tuple]
    provenance: list[tuple[str, str]] = field(default_factory=list)
    results: dict[str, Any] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# planar-monopole {__version__}\n")
        for key, value in self.provenance:
            buf.write(f"# {key} = {value}\n")
        for key, value in self.results.items():
            buf.write(f"# result.{key} = {_fmt(value)}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "version": __version__,
            "provenance": dict(self.provenance),
            "results": {k: _json_value(v) for k, v in self.results.items()},
            "columns": self.columns,
            "rows": [[_json_value(v) for v in row] for row in self.rows],
        }
        return json.dumps(doc, indent=1) + "\n"


def _long_rows(*cols) -> list[tuple]:
    return list(zip(*cols))


def _grid_of(p) -> RadialGrid:
    return RadialGrid(p["a"], p["b"], p["n_points"])


# ---------------------------------------------------------------- commands

def run_potential(p) -> DataSet:
    cfg = MonopoleConfig(p["lambda"], p["m"])
    rho = np.linspace(p["rho_min"], p["rho_max"], p["n_points"])
    v = model.potential(rho, cfg, PotentialKind(p["kind"]))
    return DataSet(["rho", "v"], _long_rows(rho, v))


def _orbit_start(cfg: MonopoleConfig, eps: float, start: str) -> classical.ClassicalState:
    v = lambda r: float(model.potential(r, cfg, PotentialKind.CLASSICAL))  # noqa: E731
    if start == "outside":
        tp = model.turning_points(cfg, PotentialKind.CLASSICAL, eps)
        return classical.ClassicalState(tp[len(tp) - 1], 0.0)
    bottom = model.well_bottom(cfg, PotentialKind.CLASSICAL)
    if bottom is None:
        raise NotQuasiBoundError(f"no potential well for m/lambda={cfg.ratio:.6g}")
    rho0 = bottom.rho
    if rho0 == 0.0:
        # M = 0: the well bottom is the origin; start halfway to the outer wall
        tp = model.turning_points(cfg, PotentialKind.CLASSICAL, eps)
        rho0 = 0.5 * tp[0]
    if eps <= v(rho0):
        raise NotQuasiBoundError(f"epsilon={eps} lies below the well bottom")
    return classical.ClassicalState(rho0, math.sqrt(eps - v(rho0)))


def _orbit_rows(cfg, eps, start, t_end, dt, every):
    init = _orbit_start(cfg, eps, start)
    orbit = classical.integrate_orbit(cfg, init, t_end, dt=dt or None, sample_every=every)
    return orbit, orbit.csv_rows()


def run_orbit(p) -> DataSet:
    cfg = MonopoleConfig(p["lambda"], p["m"])
    orbit, rows = _orbit_rows(cfg, p["epsilon"], p["start"], p["t_end"], p["dt"], p["sample_every"])
    drift = np.max(np.abs(orbit.energies() - orbit.energy)) / orbit.energy
    return DataSet(["t", "rho", "phi", "p_rho", "x", "y"], [tuple(r) for r in rows],
                   results={"classification": orbit.classification.value,
                            "energy": orbit.energy, "energy_drift": float(drift)})


def _levels(cfg: MonopoleConfig, method: str, grid: RadialGrid, threshold: float):
    if method == "fd":
        qb = fdm.quasibound_states(cfg, grid, threshold)
        return [(s.n, s.epsilon, s.method.value, w) for s, w in zip(qb.states, qb.well_weight)]
    m = {"wkb": Method.WKB, "bs-classical": Method.BOHR_SOMMERFELD_CLASSICAL,
         "bs-quantum": Method.BOHR_SOMMERFELD_QUANTUM}[method]
    return [(s.n, s.epsilon, s.method.value, math.nan) for s in semiclassical.quantise(cfg, m)]


def run_spectrum(p) -> DataSet:
    cfg = MonopoleConfig(p["lambda"], p["m"])
    rows = _levels(cfg, p["method"], _grid_of(p), p["threshold"])
    top = model.barrier_top(cfg, PotentialKind.QUANTUM)
    return DataSet(["n", "epsilon", "method", "well_weight"], rows,
                   results={"count": len(rows), "barrier_top": top.value if top else math.nan})


def run_count(p) -> DataSet:
    lam = p["lambda"]
    default = fdm.m_range_for(lam)
    lo = default.start if p["m_min"] is None else p["m_min"]
    hi = default.stop - 1 if p["m_max"] is None else p["m_max"]
    counts = fdm.count_map(lam, range(lo, hi + 1), _grid_of(p), p["threshold"])
    total = sum(counts.values())
    return DataSet(["m", "count"], sorted(counts.items()),
                   results={"total": total, "total_over_lambda2": total / lam**2})


def run_threshold(p) -> DataSet:
    grid = _grid_of(p)
    rows = []
    for m in range(p["m_min"], p["m_max"] + 1):
        try:
            lam = fdm.min_lambda(m, grid, p["threshold"], lam_stop=p["lambda_max"], tol=p["tol"])
        except NotQuasiBoundError:
            lam = math.nan
        rows.append((m, lam, 2.0 * lam))
    finite = [r for r in rows if math.isfinite(r[1])]
    best = min(finite, key=lambda r: r[1]) if finite else (None, math.nan, math.nan)
    return DataSet(["m", "lambda_min", "q_over_qd"], rows,
                   results={"m_at_min": best[0], "q_min_over_qd": best[2]})


def run_lifetime_wkb(p) -> DataSet:
    cfg = MonopoleConfig(p["lambda"], p["m"])
    cols = ["n", "epsilon", "tau"]
    scales = model.PhysicalScales(p["distance"]) if p["distance"] > 0 else None
    if scales:
        cols.append("tau_seconds")
    rows = []
    for s in semiclassical.quasibound_levels(cfg):
        tau = semiclassical.wkb_half_life(cfg, s)
        row = (s.n, s.epsilon, tau)
        rows.append(row + (model.to_si_halflife(tau, scales),) if scales else row)
    return DataSet(cols, rows)


def _lifetime_fd(cfg, n, grid, samples):
    s = fdm.survival_probability(cfg, n, grid, samples=samples)
    return fdm.fd_half_life(cfg, n, grid, s)


def _survival_set(life: fdm.FdLifetime) -> DataSet:
    s = life.survival
    fit = np.exp(life.intercept - life.rate * s.times)
    return DataSet(["t", "probability", "fit"], _long_rows(s.times, s.probability, fit),
                   results={"rate": life.rate, "tau": life.tau,
                            "tau_crossing": math.nan if life.tau_crossing is None else life.tau_crossing,
                            "epsilon_n": s.epsilon_n, "echo_time": s.echo_time,
                            "completeness": s.completeness, "n_modes": s.n_modes})


def run_lifetime_fd(p) -> DataSet:
    cfg = MonopoleConfig(p["lambda"], p["m"])
    return _survival_set(_lifetime_fd(cfg, p["n"], _grid_of(p), p["samples"]))


def _phase_config(p):
    return ScatteringConfig(p["lambda"], p["m"])


def run_phase_scan(p) -> DataSet:
    eps = np.linspace(p["eps_min"], p["eps_max"], p["n_points"])
    delta = scattering.phase_shifts(_phase_config(p), eps)
    return DataSet(["epsilon", "delta"], _long_rows(eps, delta))


def _fitted_resonances(cfg, lo, hi, n_points):
    brackets, eps, delta = scattering.scan_resonances(cfg, lo, hi, n_points)
    fits, skipped = [], 0
    for b in brackets:
        try:
            fits.append(scattering.fit_resonance(cfg, b))
        except FitError:
            skipped += 1
    return fits, skipped, eps, delta


def run_resonances(p) -> DataSet:
    fits, skipped, _, _ = _fitted_resonances(_phase_config(p), p["eps_min"], p["eps_max"], p["n_points"])
    rows = [(p["m"], r.epsilon_n, r.gamma, r.tau, r.delta_offset, r.residual) for r in fits]
    return DataSet(["m", "epsilon_n", "gamma", "tau", "delta_offset", "residual"], rows,
                   results={"found": len(fits), "unresolved": skipped})


# ---------------------------------------------------------------- figures

LAMBDA_REF = 100.0
EPS_ORBIT = 400.0
ORBIT_T_END = 0.25
ORBIT_EVERY = 20


def _fig2(ratios):
    rho = np.linspace(0.01, 4.0, 400)
    rows = []
    for x in ratios:
        v = model.potential(rho, MonopoleConfig.from_ratio(float(x)), PotentialKind.CLASSICAL)
        rows += [(float(x), r, vv) for r, vv in zip(rho, v)]
    return DataSet(["m_over_lambda", "rho", "v_over_lambda2"], rows)


def _fig3(m):
    cfg = MonopoleConfig(LAMBDA_REF, m)
    rho = np.linspace(0.01, 4.0, 400)
    v = model.potential(rho, cfg, PotentialKind.CLASSICAL)
    tp = model.turning_points(cfg, PotentialKind.CLASSICAL, EPS_ORBIT)
    results = {"epsilon": EPS_ORBIT}
    results.update({f"turning_point_{i + 1}": r for i, r in enumerate(tp.roots)})
    return DataSet(["rho", "v_classical"], _long_rows(rho, v), results=results)


def _fig4(m):
    cfg = MonopoleConfig(LAMBDA_REF, m)
    rows, results = [], {"epsilon": EPS_ORBIT}
    for start in ("well", "outside"):
        orbit, data = _orbit_rows(cfg, EPS_ORBIT, start, ORBIT_T_END, 0.0, ORBIT_EVERY)
        rows += [(start, *r) for r in data]
        results[f"{start}.classification"] = orbit.classification.value
    return DataSet(["orbit", "t", "rho", "phi", "p_rho", "x", "y"], rows, results=results)


def _fig5a():
    rows = []
    for x in np.linspace(-0.995, model.m_over_lambda_max() - 1e-3, 200):
        for rho, stability in classical.circular_orbits(float(x)):
            rows.append((float(x), rho, stability))
    return DataSet(["m_over_lambda", "rho_circular", "stability"], rows)


def _fig5b():
    x = np.linspace(-1.0, model.m_over_lambda_max(), 201)[1:-1]
    n_full = classical.state_count_curve(x, "full")
    n_half = classical.state_count_curve(x, "half")
    return DataSet(["m_over_lambda", "n_over_lambda_full", "n_over_lambda_half"],
                   _long_rows(x, n_full, n_half))


def _fig6(ms):
    rho = np.linspace(0.02, 3.0, 300)
    rows = []
    for m in ms:
        cfg = MonopoleConfig(LAMBDA_REF, m)
        vc = model.potential(rho, cfg, PotentialKind.CLASSICAL)
        vq = model.potential(rho, cfg, PotentialKind.QUANTUM)
        rows += [(m, r, a, b) for r, a, b in zip(rho, vc, vq)]
    return DataSet(["m", "rho", "v_classical", "v_quantum"], rows)


def _fig7():
    cfg = MonopoleConfig(LAMBDA_REF, 1)
    grid = fdm.DEFAULT_GRID
    top = model.barrier_top(cfg, PotentialKind.QUANTUM)
    spec = fdm.eigensolve(fdm.build_hamiltonian(grid, cfg), below=top.value)
    qb = fdm.select_quasibound(spec, cfg)
    wkb = semiclassical.quantise(cfg, Method.WKB)
    rho = grid.interior
    keep = rho <= 2.0 * top.rho
    rows = []
    eps_all = list(spec.eigenvalues)
    for state in qb.states:
        if state.n >= len(wkb):
            break
        vec = spec.eigenvectors[:, eps_all.index(state.epsilon)] / math.sqrt(grid.h)
        _, _, psi_w, branch = semiclassical.wkb_wavefunction(cfg, wkb[state.n], rho[keep])
        ok = np.isfinite(psi_w)
        if np.dot(vec[keep][ok], psi_w[ok]) < 0:
            vec = -vec
        rows += [(state.n, state.epsilon, wkb[state.n].epsilon, r, a, b, int(c))
                 for r, a, b, c in zip(rho[keep], vec[keep], psi_w, branch)]
    return DataSet(["n", "epsilon_fd", "epsilon_wkb", "rho", "psi_fd", "psi_wkb", "branch"], rows,
                   results={"barrier_top": top.value})


def _fig8(subset=None):
    cfg = MonopoleConfig(LAMBDA_REF, 1)
    series = {
        "wkb": [s.epsilon for s in semiclassical.quantise(cfg, Method.WKB)],
        "bs_quantum": [s.epsilon for s in semiclassical.quantise(cfg, Method.BOHR_SOMMERFELD_QUANTUM)],
        "bs_classical": [s.epsilon for s in semiclassical.quantise(cfg, Method.BOHR_SOMMERFELD_CLASSICAL)],
        "fd": [s.epsilon for s in fdm.quasibound_states(cfg).states],
    }
    n_max = max(len(v) for v in series.values())
    rows = []
    for n in range(n_max):
        if subset is not None and n not in subset:
            continue
        rows.append((n, *(v[n] if n < len(v) else math.nan for v in series.values())))
    return DataSet(["n", *series], rows)


def _fig9_lambdas(preset):
    return (40.0, 70.0, 100.0) if preset == "full" else (20.0, 30.0, 40.0)


def _fig9a(preset):
    rows = []
    for lam in _fig9_lambdas(preset):
        counts = fdm.count_map(lam, fdm.m_range_for(lam))
        rows += [(lam, m, c) for m, c in sorted(counts.items())]
    return DataSet(["lambda", "m", "count"], rows)


HARMONIC_SCALE = 4.3


def _fig9b(preset):
    base = _fig9a(preset)
    rows = [(f"lambda={_fmt(lam)}", m / lam, c / lam) for lam, m, c in base.rows]
    x = np.linspace(-1.0, model.m_over_lambda_max(), 201)[1:-1]
    curve = classical.state_count_curve(x, "full") / HARMONIC_SCALE
    rows += [("harmonic", float(a), float(b)) for a, b in zip(x, curve)]
    return DataSet(["series", "m_over_lambda", "count_over_lambda"], rows,
                   results={"harmonic_scale": HARMONIC_SCALE})


def _fig10(preset):
    ms = range(-10, 6) if preset == "full" else range(-3, 4)
    p = {**{k: s.default for k, s in COMMANDS["threshold"].items()},
         "m_min": ms.start, "m_max": ms.stop - 1}
    return run_threshold(p)


def _fig11a():
    rows = []
    for m in range(-9, 6):
        cfg = MonopoleConfig(LAMBDA_REF, m)
        for s in semiclassical.quasibound_levels(cfg):
            rows.append((m, s.n, s.epsilon, semiclassical.wkb_half_life(cfg, s)))
    return DataSet(["m", "n", "epsilon", "tau"], rows)


def _phase_levels(m: int, lam: float, top_only: bool = False):
    """Resonances matched to the semiclassical levels of one M.

    Narrow levels come from the jump scan; the top level, usually too broad
    for a jump between neighbouring scan points, from the background fit.
    """
    cfg = MonopoleConfig(lam, m)
    levels = semiclassical.quasibound_levels(cfg)
    if not levels:
        return []
    eps_lv = np.array([s.epsilon for s in levels])
    spacing = float(eps_lv[-1] - eps_lv[-2]) if len(levels) > 1 else float(eps_lv[0])
    matched = {}
    if not top_only:
        top = model.barrier_top(cfg, PotentialKind.QUANTUM)
        fits, _, _, _ = _fitted_resonances(ScatteringConfig(lam, m), 1.0, top.value,
                                           scattering.SCAN_POINTS)
        for r in fits:
            n = int(np.argmin(np.abs(eps_lv - r.epsilon_n)))
            if abs(eps_lv[n] - r.epsilon_n) < 0.5 * spacing and n not in matched:
                matched[n] = r
    n_top = len(levels) - 1
    if n_top not in matched:
        try:
            matched[n_top] = scattering.fit_broad_resonance(
                ScatteringConfig(lam, m), float(eps_lv[-1]), 0.5 * spacing)
        except FitError:
            pass
    return [(n, levels[n], matched[n]) for n in sorted(matched)]


def _fig11b(preset):
    ms = range(-9, 6) if preset == "full" else (1,)
    rows = []
    for m in ms:
        for n, _, r in _phase_levels(m, LAMBDA_REF):
            rows.append((m, n, r.epsilon_n, r.gamma, r.tau))
    return DataSet(["m", "n", "epsilon_n", "gamma", "tau"], rows)


def _fig13():
    life = _lifetime_fd(MonopoleConfig(LAMBDA_REF, 1), 5, fdm.SURVIVAL_GRID, fdm.SURVIVAL_SAMPLES)
    return _survival_set(life)


FIG14_RANGE = (1.0, 950.0)


def _fig14():
    cfg = ScatteringConfig(LAMBDA_REF, 1)
    fits, skipped, eps, delta = _fitted_resonances(cfg, *FIG14_RANGE, scattering.SCAN_POINTS)
    points = {float(e): float(d) for e, d in zip(eps, delta)}
    results: dict[str, Any] = {"resonances": len(fits), "unresolved": skipped}
    if fits:
        # the sharpest resolvable jump is the one shown in detail
        best = min(fits, key=lambda r: r.gamma)
        results.update({"epsilon_n": best.epsilon_n, "gamma": best.gamma, "tau": best.tau,
                        "delta_offset": best.delta_offset, "fit_residual": best.residual})
        for e, d in zip(*best.samples):
            points[float(e)] = float(d)
    rows = sorted(points.items())
    return DataSet(["epsilon", "delta"], rows, results=results)


def _fig15(preset):
    lam, ms = (LAMBDA_REF, range(-9, 6)) if preset == "full" else (40.0, range(-3, 3))
    rows = []
    for m in ms:
        cfg = MonopoleConfig(lam, m)
        levels = semiclassical.quasibound_levels(cfg)
        if not levels:
            continue
        top = levels[-1]
        tau_wkb = semiclassical.wkb_half_life(cfg, top)
        phase = _phase_levels(m, lam, top_only=True)
        tau_phase = phase[-1][2].tau if phase else math.nan
        try:
            tau_fd = fdm.fd_half_life(cfg, top.n).tau
        except MonopoleError:
            tau_fd = math.nan
        rows.append((m, top.n, top.epsilon, tau_wkb, tau_phase, tau_fd))
    return DataSet(["m", "n", "epsilon", "tau_wkb", "tau_phase", "tau_fd"], rows,
                   results={"lambda": lam})


def _fig16():
    z = np.arange(5.0, 2000.0 + 1.0, 5.0)
    rows = []
    for m in range(0, 5):
        trace = scattering.integrate_phase(ScatteringConfig(0.0, m), 1.0, z_samples=z)
        rows += [(m, a, b) for a, b in zip(trace.z, trace.mu)]
    return DataSet(["m", "z", "mu"], rows)


_FIGURES: dict[str, Callable[[str], DataSet]] = {
    "2a": lambda _: _fig2(-0.1 * np.arange(11)),
    "2b": lambda _: _fig2(0.02 * np.arange(11)),
    "3a": lambda _: _fig3(-1), "3b": lambda _: _fig3(0), "3c": lambda _: _fig3(1),
    "4a": lambda _: _fig4(-1), "4b": lambda _: _fig4(0), "4c": lambda _: _fig4(1),
    "5a": lambda _: _fig5a(), "5b": lambda _: _fig5b(),
    "6a": lambda _: _fig6(range(-7, 1)), "6b": lambda _: _fig6(range(0, 4)),
    "7": lambda _: _fig7(),
    "8a": lambda _: _fig8(), "8b": lambda _: _fig8((0, 5)),
    "9a": _fig9a, "9b": _fig9b, "10": _fig10,
    "11a": lambda _: _fig11a(), "11b": _fig11b,
    "13": lambda _: _fig13(), "14": lambda _: _fig14(),
    "15": _fig15, "16": lambda _: _fig16(),
}


def figure_data(figure_id: str, preset: str = "desk") -> DataSet:
    """Numerical content of one figure, with the provenance of a figure-data run."""
    config = RunConfig("figure-data", {"figure": str(figure_id), "preset": preset})
    return run(config)


def _run_figure(p) -> DataSet:
    return _FIGURES[p["figure"]](p["preset"])


_RUNNERS: dict[str, Callable[[dict], DataSet]] = {
    "potential": run_potential, "orbit": run_orbit, "spectrum": run_spectrum,
    "count": run_count, "threshold": run_threshold, "lifetime-wkb": run_lifetime_wkb,
    "lifetime-fd": run_lifetime_fd, "phase-scan": run_phase_scan,
    "resonances": run_resonances, "figure-data": _run_figure,
}


def run(config: RunConfig) -> DataSet:
    data = _RUNNERS[config.command](config.parameters)
    data.provenance = config.header_items()
    return data


# ---------------------------------------------------------------- entry point

def _configure_threads():
    raw = os.environ.get(_THREADS_ENV)
    if raw is None:
        return
    if not raw.strip().isdigit() or int(raw) < 1:
        raise UsageError(f"{_THREADS_ENV}: expected a positive integer, got {raw!r}")
    import numba

    numba.set_num_threads(min(int(raw), numba.config.NUMBA_NUM_THREADS))


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        _configure_threads()
        config = parse_config(argv)
    except UsageError as exc:
        print(f"planar-monopole: usage error: {exc}", file=sys.stderr)
        return 1
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            data = run(config)
    except MonopoleError as exc:
        print(f"planar-monopole: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for w in caught:
        print(f"planar-monopole: warning: {w.message}", file=sys.stderr)
    text = data.to_json() if config.json else data.to_csv()
    if config.output:
        try:
            Path(config.output).write_text(text)
        except OSError as exc:
            print(f"planar-monopole: usage error: output: {exc.strerror}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
