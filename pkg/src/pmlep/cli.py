"""Batch command line: ``pmlep <command> [flags]``.

Frequencies and rates are entered in MHz and mean ``value = rate / 2pi``;
internally every rate is the angular value ``2pi * MHz`` in rad/us. Times
are in microseconds. Output eigenvalues are reported in the same MHz
convention (``lambda / 2pi``).

Exit codes: 0 success, 2 bad arguments, 3 refusal by the model (near the
exceptional point, bracket miss), 4 numerical failure.
"""

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .dynamics import decompose_amplitudes, evolve_expm, initial_superposition, observables
from .errors import DomainError, ModelDomainError, NumericalError
from .model import SystemParams, analytic_spectrum, build_liouvillian, classify_ep, locate_ep
from .sideband import SidebandParams, fluctuation_study, invert_effective_coupling, scan_couplings
from .spectroscopy import N_FITTED, NoiseSpec, sweep

TWO_PI = 2.0 * math.pi
COMMANDS = ("spectrum", "evolve", "fit-spectrum", "ep-locate", "sideband", "fluctuation")
EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_NUMERIC = 0, 2, 3, 4

# flags accepted by each command, beyond kappa_mhz / format / out / config
_GRID = ("g_mhz", "g_min", "g_max", "g_steps")
_TIME = ("t_max_us", "points")
_SIDEBAND = ("gr_mhz", "nu_over_gr", "n_max")
COMMAND_KEYS = {
    "spectrum": _GRID,
    "evolve": ("g_mhz",) + _TIME,
    "fit-spectrum": _GRID + _TIME + ("noise_sigma", "seed"),
    "ep-locate": ("g_min", "g_max"),
    "sideband": _GRID + _TIME + _SIDEBAND,
    "fluctuation": _GRID + _TIME + _SIDEBAND + ("delta_eps_frac",),
}
KEY_TYPES = {
    "kappa_mhz": float, "g_mhz": float, "g_min": float, "g_max": float, "g_steps": int,
    "t_max_us": float, "points": int, "noise_sigma": float, "seed": int, "gr_mhz": float,
    "nu_over_gr": float, "n_max": int, "delta_eps_frac": float, "format": str,
}
TABLE_MARKER = "# pmlep-table"
_META_LINE = re.compile(r"^#\s*([a-z_]+)=(.*)$")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    values: Dict[str, object] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def kappa(self) -> float:
        return TWO_PI * self["kappa_mhz"]

    def items(self):
        """Resolved keys in a fixed order (``command`` first)."""
        yield "command", self.command
        for key in sorted(self.values):
            yield key, self.values[key]


@dataclass
class OutputTable:
    columns: List[str]
    rows: List[List[object]]
    meta: Dict[str, object]


# ---------------------------------------------------------------- config


def _coerce(key, raw):
    kind = KEY_TYPES.get(key)
    if kind is None:
        raise UsageError(f"unknown key {key!r}")
    try:
        if kind is int:
            value = int(raw)
        elif kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
        else:
            value = str(raw)
    except (TypeError, ValueError):
        raise UsageError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None
    return value


def load_config(path: str) -> Dict[str, str]:
    """Flat ``key = value`` file; an emitted CSV or JSON table also works.

    In an emitted table only the ``# key=value`` metadata lines are read
    (result lines such as ``# result.*`` are skipped).
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path}: {exc}") from None
        config = doc.get("meta", {}).get("config") if isinstance(doc, dict) else None
        if not isinstance(config, dict):
            raise UsageError(f"config {path}: JSON input needs a meta.config object")
        return {str(k): str(v) for k, v in config.items()}
    table = stripped.startswith(TABLE_MARKER)
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if table:
            # only "# key=value" metadata; result.* and data rows are skipped
            match = _META_LINE.match(line)
            if match:
                out[match.group(1)] = match.group(2).strip()
            continue
        if line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config {path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _grid_defaults(command, kappa_mhz):
    if command == "spectrum":
        return {"g_min": 0.0, "g_max": 0.6 * kappa_mhz, "g_steps": 61}
    if command == "fit-spectrum":
        return {"g_min": 0.05 * kappa_mhz, "g_max": 0.6 * kappa_mhz, "g_steps": 56}
    return {"g_min": 0.1 * kappa_mhz, "g_max": 0.5 * kappa_mhz, "g_steps": 9}


def resolve(command: str, given: Dict[str, object]) -> RunConfig:
    """Fill defaults and validate; ``given`` holds raw file values overlaid by flags."""
    allowed = set(COMMAND_KEYS[command]) | {"kappa_mhz", "format"}
    raw = dict(given)
    file_command = raw.pop("command", None)
    if file_command is not None and file_command != command:
        raise UsageError(f"config is for command {file_command!r}, not {command!r}")
    extra = sorted(set(raw) - allowed)
    if extra:
        raise UsageError(f"{command} does not accept: {', '.join(extra)}")
    vals = {k: _coerce(k, v) for k, v in raw.items()}
    vals.setdefault("kappa_mhz", 4.7)
    vals.setdefault("format", "csv")
    if vals["format"] not in ("csv", "json"):
        raise UsageError("format must be csv or json")
    if not vals["kappa_mhz"] > 0:
        raise UsageError("kappa-mhz must be > 0")
    kappa_mhz = vals["kappa_mhz"]

    if "g_steps" in COMMAND_KEYS[command]:
        ranged = [k for k in ("g_min", "g_max", "g_steps") if k in vals]
        if "g_mhz" in vals and ranged:
            raise UsageError("--g-mhz excludes --g-min/--g-max/--g-steps")
        if "g_mhz" not in vals:
            for key, value in _grid_defaults(command, kappa_mhz).items():
                vals.setdefault(key, value)
            if vals["g_steps"] < 1:
                raise UsageError("g-steps must be >= 1")
            if vals["g_steps"] > 1 and not vals["g_max"] > vals["g_min"]:
                raise UsageError("g-max must exceed g-min")
    elif command == "evolve":
        vals.setdefault("g_mhz", 1.242)
    elif command == "ep-locate":
        vals.setdefault("g_min", 0.2 * kappa_mhz)
        vals.setdefault("g_max", 0.3 * kappa_mhz)
        if not vals["g_max"] > vals["g_min"]:
            raise UsageError("g-max must exceed g-min")
    if vals.get("g_mhz", 0.0) < 0 or vals.get("g_min", 0.0) < 0:
        raise UsageError("couplings must be >= 0")

    if "points" in COMMAND_KEYS[command]:
        vals.setdefault("t_max_us", 10.0 / (TWO_PI * kappa_mhz))
        vals.setdefault("points", 501)
        if not vals["t_max_us"] > 0 or vals["points"] < 4:
            raise UsageError("need t-max-us > 0 and points >= 4")
    if command == "fit-spectrum":
        vals.setdefault("noise_sigma", 0.0)
        vals.setdefault("seed", 0)
        if vals["noise_sigma"] < 0:
            raise UsageError("noise-sigma must be >= 0")
        if not 0 <= vals["seed"] < 2**64:
            raise UsageError("seed must fit in 64 bits")
    if "gr_mhz" in COMMAND_KEYS[command]:
        vals.setdefault("gr_mhz", kappa_mhz)
        vals.setdefault("nu_over_gr", 50.0)
        vals.setdefault("n_max", 5)
        if not (vals["gr_mhz"] > 0 and vals["nu_over_gr"] > 0 and vals["n_max"] >= 1):
            raise UsageError("need gr-mhz > 0, nu-over-gr > 0, n-max >= 1")
    if command == "fluctuation":
        vals.setdefault("delta_eps_frac", 0.003)
        if vals["delta_eps_frac"] < 0:
            raise UsageError("delta-eps-frac must be >= 0")
    return RunConfig(command, vals)


def g_grid_mhz(cfg: RunConfig) -> np.ndarray:
    if cfg.get("g_mhz") is not None:
        return np.array([cfg["g_mhz"]], dtype=float)
    return np.linspace(cfg["g_min"], cfg["g_max"], cfg["g_steps"])


def time_grid_us(cfg: RunConfig) -> np.ndarray:
    return np.linspace(0.0, cfg["t_max_us"], cfg["points"])


# ---------------------------------------------------------------- commands


def _lam_columns(prefix, count):
    cols = []
    for j in range(count):
        cols += [f"{prefix}{j}.re", f"{prefix}{j}.im"]
    return cols


def _lam_values(lams):
    out = []
    for lam in lams:
        z = complex(lam) / TWO_PI
        out += [z.real, z.imag]
    return out


def cmd_spectrum(cfg: RunConfig) -> OutputTable:
    kappa = cfg.kappa
    columns = ["g_mhz"] + _lam_columns("lam", 9) + ["residual_max", "at_ep", "ep2_groups", "ep3_groups"]
    rows = []
    for g_mhz in g_grid_mhz(cfg):
        p = SystemParams(TWO_PI * g_mhz, kappa)
        spec = analytic_spectrum(p)
        L = build_liouvillian(p).m
        basis = spec.basis
        residual = float(np.max(np.linalg.norm(L @ basis - basis * spec.eigenvalues, axis=0))) / TWO_PI
        report = classify_ep(p)
        rows.append([g_mhz] + _lam_values(spec.eigenvalues)
                    + [residual, int(spec.at_ep), len(report.ep2_groups), len(report.ep3_groups)])
    return OutputTable(columns, rows, {})


def cmd_evolve(cfg: RunConfig) -> OutputTable:
    p = SystemParams(TWO_PI * cfg["g_mhz"], cfg.kappa)
    times = time_grid_us(cfg)
    trace = evolve_expm(p, initial_superposition(), times)
    amps = decompose_amplitudes(p, trace)
    columns = (["t_us"] + _lam_columns("A", N_FITTED)
               + ["rho_uu", "rho_ll", "p_pm", "rho_ul.re", "rho_ul.im", "c_q", "c_pm"])
    rows = []
    for k, rec in enumerate(observables(trace)):
        a = []
        for z in amps.amplitudes[k, :N_FITTED]:
            a += [z.real, z.imag]
        rows.append([rec.t] + a + [rec.rho_uu, rec.rho_ll, rec.p_pm, rec.rho_ul.real,
                                   rec.rho_ul.imag, rec.c_q, rec.c_pm])
    return OutputTable(columns, rows, {"result.basis_condition": amps.condition})


def _scan_table(scan, g_mhz, extra_cols=(), extra=None) -> OutputTable:
    columns = (["g_mhz"] + list(extra_cols) + _lam_columns("fit", N_FITTED)
               + _lam_columns("ana", N_FITTED) + [f"flag{j}" for j in range(N_FITTED)] + ["refused"])
    rows = []
    for i, g in enumerate(g_mhz):
        row = [g] + (list(extra[i]) if extra is not None else [])
        row += _lam_values(scan.fitted[i]) + _lam_values(scan.analytic[i])
        row += [int(f) for f in scan.flags[i]] + [int(i in scan.errors)]
        rows.append(row)
    return OutputTable(columns, rows, {})


def cmd_fit_spectrum(cfg: RunConfig) -> OutputTable:
    g_mhz = g_grid_mhz(cfg)
    noise = NoiseSpec(cfg["noise_sigma"], cfg["seed"]) if cfg["noise_sigma"] > 0 else None
    scan = sweep(cfg.kappa, TWO_PI * g_mhz, cfg["t_max_us"], cfg["points"], noise)
    table = _scan_table(scan, g_mhz)
    table.meta["result.max_relative_error"] = scan.max_relative_error()
    table.meta["result.rms_deviation_kappa"] = scan.rms_deviation()
    return table


def cmd_ep_locate(cfg: RunConfig) -> OutputTable:
    loc = locate_ep(cfg.kappa, TWO_PI * cfg["g_min"], TWO_PI * cfg["g_max"])
    columns = ["g_star_mhz", "offset_mhz", "separation", "kernel_dimension", "iterations"]
    rows = [[loc.g / TWO_PI, abs(loc.offset) / TWO_PI, loc.separation, loc.kernel_dimension, loc.iterations]]
    return OutputTable(columns, rows, {})


def _sideband_base(cfg: RunConfig) -> SidebandParams:
    return SidebandParams.resonant(TWO_PI * cfg["gr_mhz"], cfg.kappa, nu_over_gr=cfg["nu_over_gr"],
                                   n_max=cfg["n_max"])


def _eps_ratio(base, g):
    try:
        return invert_effective_coupling(g, base) / base.nu
    except DomainError:
        return math.nan


def cmd_sideband(cfg: RunConfig) -> OutputTable:
    base = _sideband_base(cfg)
    g_mhz = g_grid_mhz(cfg)
    scan = scan_couplings(base, TWO_PI * g_mhz, 0.0, cfg["t_max_us"], cfg["points"])
    ratios = [[_eps_ratio(base, TWO_PI * g)] for g in g_mhz]
    return _scan_table(scan, g_mhz, ["eps_over_nu"], ratios)


def cmd_fluctuation(cfg: RunConfig) -> OutputTable:
    base = _sideband_base(cfg)
    g_mhz = g_grid_mhz(cfg)
    study = fluctuation_study(base, cfg["delta_eps_frac"] * base.nu, TWO_PI * g_mhz,
                              cfg["t_max_us"], cfg["points"])
    columns = (["g_eff_mhz"] + _lam_columns("base", N_FITTED) + _lam_columns("pert", N_FITTED)
               + _lam_columns("ana", N_FITTED) + ["shift_max_mhz", "flagged", "refused"])
    rows = []
    b, q = study.baseline, study.perturbed
    for i, g in enumerate(g_mhz):
        flagged = bool(np.any(b.flags[i]) or np.any(q.flags[i]))
        shift = float(np.max(np.abs(q.fitted[i] - b.fitted[i]))) / TWO_PI
        rows.append([g] + _lam_values(b.fitted[i]) + _lam_values(q.fitted[i]) + _lam_values(b.analytic[i])
                    + [shift, int(flagged), int(i in b.errors or i in q.errors)])
    meta = {"result.max_shift_mhz": study.max_shift() / TWO_PI}
    try:
        meta["result.ep_shift_mhz"] = study.ep_shift() / TWO_PI
    except (ModelDomainError, NumericalError):
        meta["result.ep_shift_mhz"] = math.nan
    return OutputTable(columns, rows, meta)


HANDLERS = {
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "fit-spectrum": cmd_fit_spectrum,
    "ep-locate": cmd_ep_locate,
    "sideband": cmd_sideband,
    "fluctuation": cmd_fluctuation,
}


# ---------------------------------------------------------------- output


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def metadata(cfg: RunConfig, table: OutputTable) -> Dict[str, object]:
    meta = {"version": __version__, "command": cfg.command, "units": "MHz = rate/2pi; us"}
    # repr round-trips floats exactly and reads better than %.17g
    config = {k: (repr(v) if isinstance(v, float) else str(v)) for k, v in cfg.items()}
    return {"meta": meta, "config": config, "result": dict(sorted(table.meta.items()))}


def render(cfg: RunConfig, table: OutputTable) -> str:
    md = metadata(cfg, table)
    if cfg["format"] == "json":
        doc = {
            "meta": {**md["meta"], "config": md["config"],
                     "result": {k: _json_value(v) for k, v in md["result"].items()}},
            "columns": table.columns,
            "rows": [[_json_value(v) for v in row] for row in table.rows],
        }
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"
    lines = [f"{TABLE_MARKER} version={md['meta']['version']}",
             f"# units: {md['meta']['units']}"]
    lines += [f"# {k}={v}" for k, v in md["config"].items()]
    lines += [f"# {k}={_fmt(v)}" for k, v in md["result"].items()]
    lines.append(",".join(table.columns))
    lines += [",".join(_fmt(v) for v in row) for row in table.rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- entry point


def _add_common(sub, command):
    keys = COMMAND_KEYS[command]
    sub.add_argument("--kappa-mhz", type=float, help="PM width kappa/2pi in MHz (default 4.7)")
    if "g_mhz" in keys:
        sub.add_argument("--g-mhz", type=float, help="single coupling g/2pi in MHz")
    if "g_min" in keys:
        sub.add_argument("--g-min", type=float, help="grid start (MHz)")
        sub.add_argument("--g-max", type=float, help="grid end (MHz)")
    if "g_steps" in keys:
        sub.add_argument("--g-steps", type=int, help="number of grid points")
    if "t_max_us" in keys:
        sub.add_argument("--t-max-us", type=float, help="trace length in us (default 10/kappa)")
        sub.add_argument("--points", type=int, help="time samples (default 501)")
    if "noise_sigma" in keys:
        sub.add_argument("--noise-sigma", type=float, help="per-element tomography noise")
        sub.add_argument("--seed", type=int, help="noise seed")
    if "gr_mhz" in keys:
        sub.add_argument("--gr-mhz", type=float, help="bare coupling g_r/2pi in MHz (default kappa)")
        sub.add_argument("--nu-over-gr", type=float, help="modulation frequency in units of g_r (default 50)")
        sub.add_argument("--n-max", type=int, help="sideband truncation order (default 5)")
    if "delta_eps_frac" in keys:
        sub.add_argument("--delta-eps-frac", type=float, help="amplitude offset in units of nu (default 0.003)")
    sub.add_argument("--format", choices=("csv", "json"))
    sub.add_argument("--out", help="output path (default stdout)")
    sub.add_argument("--config", help="flat key = value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmlep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pmlep {__version__}")
    subs = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "spectrum": "analytic Liouvillian spectrum over a g grid",
        "evolve": "state trajectory and eigenvector amplitudes",
        "fit-spectrum": "spectrum reconstructed by exponential fits",
        "ep-locate": "locate the exceptional point inside a bracket",
        "sideband": "spectrum of the full sideband-modulated model",
        "fluctuation": "spectral shift under a modulation amplitude offset",
    }
    for name in COMMANDS:
        _add_common(subs.add_parser(name, help=helps[name]), name)
    return parser


def run(argv: Optional[Sequence[str]] = None):
    """Parse, execute and render without touching stdout.

    Returns ``(exit_code, text, out_path)``; ``text`` is the table on
    success and the error message otherwise.
    """
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_OK if exc.code == 0 else EXIT_USAGE), "", None
    flags = {k: v for k, v in vars(ns).items() if v is not None and k not in ("command", "config", "out")}
    try:
        given = load_config(ns.config) if ns.config else {}
        given.update(flags)
        cfg = resolve(ns.command, given)
        table = HANDLERS[ns.command](cfg)
    except UsageError as exc:
        return EXIT_USAGE, f"pmlep: error: {exc}\n", None
    except ModelDomainError as exc:
        return EXIT_MODEL, f"pmlep: refused: {exc}\n", None
    except NumericalError as exc:
        return EXIT_NUMERIC, f"pmlep: numerical failure: {exc}\n", None
    except DomainError as exc:
        return EXIT_USAGE, f"pmlep: error: {exc}\n", None
    return EXIT_OK, render(cfg, table), ns.out


def main(argv: Optional[Sequence[str]] = None) -> int:
    code, text, out_path = run(argv)
    if code != EXIT_OK:
        sys.stderr.write(text)
        return code
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
