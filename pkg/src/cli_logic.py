"""
Command-line front end.

    python app.py eec --nu 3 --box 1 --levels -3:5:101
    python app.py crit --nu 3 --dim 1 --domain euclidean
    python app.py validate --quick --format json --output report.json

Every command produces one table. CSV headers are fixed per command; JSON
is the same table as a list of records.
"""
import argparse
import logging
import math
import sys
from dataclasses import dataclass, fields
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from src.config import DEFAULT_LEVEL_GRID, get_settings, resolve_output_path
from src.critical_logic import AUTO, EXACT, OUTER_MODES, expected_crit, expected_crit_above, height_curve
from src.ec_logic import ec_curve
from src.errors import ConfigError, CrestError, UsageError
from src.geometry_logic import box, sphere
from src.goi_engine import MC, QUADRATURE, GOIParams, crossing_functional, goi_expectation
from src.matern_engine import (
    EUCLIDEAN,
    SPHERE,
    MaternParams,
    rho_derivatives_fd,
    spectral_summary_euclidean,
    spectral_summary_sphere,
    sphere_rho_derivatives,
)
from src.simulation_pipeline import FieldSampler, box_grid, sphere_mesh
from src.validation_report import report_frame, run_validation, standard_scenarios

logger = logging.getLogger(__name__)

COMMANDS = ("eec", "crit", "height", "goi", "simulate", "validate", "spectral")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VALIDATION = 2

COLUMNS = {
    "eec": ["u", "eec"],
    "crit": ["domain", "dim", "index", "level", "density", "stderr", "method"],
    "height": ["domain", "dim", "index", "u", "F"],
    "goi": ["dim", "c", "index", "shift", "value", "stderr", "method", "samples_or_nodes"],
    "validate": ["scenario", "quantity", "analytic", "empirical", "stderr", "replications", "budget", "passed", "error"],
    "spectral": ["geometry", "rho1", "rho2", "kappa", "eta", "rho1_fd", "rho2_fd"],
}

# flags that take a value starting with "-"
_SIGNED_FLAGS = ("--levels", "--u", "--shift", "--c")


@dataclass(frozen=True)
class RunConfig:
    command: str
    sigma2: float = 1.0
    ell: float = 1.0
    nu: Optional[float] = None
    box: Optional[Tuple[float, ...]] = None
    sphere: Optional[int] = None
    domain: str = EUCLIDEAN
    dim: Optional[int] = None
    index: Optional[int] = None
    u: Optional[float] = None
    levels: Optional[Tuple[float, float, int]] = None
    method: str = AUTO
    outer: str = EXACT
    samples: Optional[int] = None
    seed: Optional[int] = None
    threads: Optional[int] = None
    c: float = 0.0
    shift: float = 0.0
    resolution: float = 32.0
    vertices: int = 642
    replications: int = 1
    quick: bool = False
    output: str = "-"
    format: str = "csv"
    verbose: bool = False

    @classmethod
    def from_namespace(cls, ns):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in vars(ns).items() if k in names})

    def matern_params(self):
        if self.nu is None:
            raise ConfigError("nu", "is required")
        if not self.nu > 2:
            raise ConfigError("nu", "smoothness parameter must exceed 2")
        if not self.sigma2 > 0:
            raise ConfigError("sigma2", "must be positive")
        if not self.ell > 0:
            raise ConfigError("ell", "must be positive")
        return MaternParams(sigma2=self.sigma2, ell=self.ell, nu=self.nu)

    def geometry(self):
        if (self.box is None) == (self.sphere is None):
            raise ConfigError("box", "give exactly one of --box SIDES or --sphere N")
        if self.box is not None:
            return box(self.box)
        if self.sphere < 1:
            raise ConfigError("sphere", "dimension must be at least 1")
        return sphere(self.sphere)

    def level_values(self, params):
        lo, hi, count = self.levels or (
            DEFAULT_LEVEL_GRID[0] * params.sigma,
            DEFAULT_LEVEL_GRID[1] * params.sigma,
            DEFAULT_LEVEL_GRID[2],
        )
        return np.linspace(lo, hi, count)

    def require(self, name):
        value = getattr(self, name)
        if value is None:
            raise ConfigError(name, f"is required for '{self.command}'")
        return value


def parse_levels(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected lo:hi:count, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:count, got {text!r}")
    if count < 1 or (count > 1 and not hi > lo):
        raise argparse.ArgumentTypeError(f"need count >= 1 and hi > lo, got {text!r}")
    return lo, hi, count


def parse_sides(text):
    try:
        sides = tuple(float(s) for s in text.replace("x", ",").split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected side lengths like 1 or 1,2, got {text!r}")
    if not sides or any(not s > 0 for s in sides):
        raise argparse.ArgumentTypeError(f"side lengths must be positive, got {text!r}")
    return sides


def parse_bool(text):
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _field_args(p):
    g = p.add_argument_group("field")
    g.add_argument("--nu", type=float, help="smoothness, must exceed 2")
    g.add_argument("--ell", type=float, default=1.0, help="length-scale")
    g.add_argument("--sigma2", type=float, default=1.0, help="variance")


def _mc_args(p, default_method=AUTO):
    g = p.add_argument_group("numerics")
    g.add_argument("--method", choices=(AUTO, MC, QUADRATURE), default=default_method)
    g.add_argument("--samples", type=int, help="Monte Carlo sample count")
    g.add_argument("--seed", type=int, help="base seed (default: fixed constant)")
    g.add_argument("--threads", type=int, help="worker cap; results do not depend on it")


def _output_args(p):
    g = p.add_argument_group("output")
    g.add_argument("--output", default="-", help="file path, '-' for stdout")
    g.add_argument("--format", choices=("csv", "json"), default="csv")


def _global_args(p, default=None):
    # repeated on each subcommand with SUPPRESS so they may follow it
    p.add_argument("--config", default=default, help="key = value file with defaults for any flag")
    p.add_argument("--dump-config", dest="dump_config", default=default, help="write the resolved config to this file")
    p.add_argument("--verbose", action="store_true", default=default or False, help="debug logging")


def build_parser():
    parser = _Parser(prog="crest", description="Critical points and Euler characteristics of smooth Matérn fields")
    _global_args(parser)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("eec", help="expected Euler characteristic curve")
    _field_args(p)
    p.add_argument("--box", type=parse_sides, help="box side lengths, e.g. 1 or 1,2")
    p.add_argument("--sphere", type=int, help="sphere dimension N")
    p.add_argument("--levels", type=parse_levels, help="lo:hi:count")
    _output_args(p)

    p = sub.add_parser("crit", help="expected critical-point densities for every index")
    _field_args(p)
    p.add_argument("--domain", choices=(EUCLIDEAN, SPHERE), default=EUCLIDEAN)
    p.add_argument("--dim", type=int)
    p.add_argument("--u", type=float, help="count only critical values >= u")
    p.add_argument("--outer", choices=OUTER_MODES, default=EXACT)
    _mc_args(p)
    _output_args(p)

    p = sub.add_parser("height", help="height distribution F_i over a level grid")
    _field_args(p)
    p.add_argument("--domain", choices=(EUCLIDEAN, SPHERE), default=EUCLIDEAN)
    p.add_argument("--dim", type=int)
    p.add_argument("--index", type=int)
    p.add_argument("--levels", type=parse_levels, help="lo:hi:count")
    _mc_args(p)
    _output_args(p)

    p = sub.add_parser("goi", help="raw GOI crossing expectation")
    p.add_argument("--dim", type=int)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--index", type=int)
    p.add_argument("--shift", type=float, default=0.0)
    _mc_args(p, default_method=QUADRATURE)
    _output_args(p)

    p = sub.add_parser("simulate", help="joint field draws on a grid or sphere mesh")
    _field_args(p)
    p.add_argument("--box", type=parse_sides, help="box side lengths")
    p.add_argument("--sphere", type=int, help="sphere dimension (meshes exist for 2)")
    p.add_argument("--resolution", type=float, default=32.0, help="box grid points per unit length")
    p.add_argument("--vertices", type=int, default=642, help="target sphere mesh vertex count")
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    _output_args(p)

    p = sub.add_parser("validate", help="analytic vs simulated checks")
    _field_args(p)
    p.add_argument("--quick", type=parse_bool, nargs="?", const=True, default=False, help="reduced sizes")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    _output_args(p)

    p = sub.add_parser("spectral", help="derivative summaries with finite-difference check")
    _field_args(p)
    p.add_argument("--domain", choices=(EUCLIDEAN, SPHERE), default=EUCLIDEAN)
    _output_args(p)

    for subparser in sub.choices.values():
        _global_args(subparser, default=argparse.SUPPRESS)

    return parser, sub


def read_config_file(path):
    """`key = value` lines; '#' starts a comment; '-' and '_' are interchangeable in keys."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if len(value) == 3 and isinstance(value[2], int) and not isinstance(value[2], bool):
            return f"{value[0]!r}:{value[1]!r}:{value[2]}"
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(config, path):
    """Writes the settings the active command reads, in field order."""
    _, sub = build_parser()
    active = {a.dest for a in sub.choices[config.command]._actions}
    skip = {"output", "verbose"}
    lines = [f"command = {config.command}"]
    for f in fields(config):
        value = getattr(config, f.name)
        if f.name == "command" or f.name in skip or f.name not in active or value is None:
            continue
        lines.append(f"{f.name} = {_format_value(value)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _normalize_argv(argv):
    out = []
    i = 0
    while i < len(argv):
        token = argv[i]
        if token in _SIGNED_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{token}={argv[i + 1]}")
            i += 2
            continue
        out.append(token)
        i += 1
    return out


def _leading_global_count(argv):
    # the command goes after any leading --config/--dump-config/--verbose
    k = 0
    while k < len(argv):
        token = argv[k]
        if token in ("--config", "--dump-config"):
            k += 2
        elif token == "--verbose" or token.startswith(("--config=", "--dump-config=")):
            k += 1
        else:
            break
    return min(k, len(argv))


def parse_config(argv=None):
    argv = _normalize_argv(list(sys.argv[1:] if argv is None else argv))

    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    file_values = read_config_file(known.config) if known.config else {}
    if "verbose" in file_values:
        try:
            file_values["verbose"] = parse_bool(file_values["verbose"])
        except argparse.ArgumentTypeError as exc:
            raise ConfigError("verbose", str(exc))

    parser, sub = build_parser()
    command = file_values.pop("command", None)
    if command and not any(tok in COMMANDS for tok in argv):
        argv.insert(_leading_global_count(argv), command)

    if file_values:
        for subparser in sub.choices.values():
            dests = {a.dest for a in subparser._actions}
            subparser.set_defaults(**{k: v for k, v in file_values.items() if k in dests})
        all_dests = {a.dest for sp in sub.choices.values() for a in sp._actions}
        unknown = sorted(set(file_values) - all_dests)
        if unknown:
            raise ConfigError("config", f"unknown key {unknown[0]!r}")

    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError(f"a command is required: {', '.join(COMMANDS)}")
    config = RunConfig.from_namespace(ns)
    return config, ns.dump_config


def _configure_logging(verbose):
    level = "DEBUG" if verbose else get_settings().log_level
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _run_eec(config):
    params = config.matern_params()
    curve = ec_curve(params, config.geometry(), config.level_values(params))
    return curve.to_frame()


def _numeric_kwargs(config):
    return {"method": config.method, "samples": config.samples, "seed": config.seed, "threads": config.threads}


def _run_crit(config):
    params = config.matern_params()
    dim = config.require("dim")
    rows = []
    for i in range(dim + 1):
        if config.u is None:
            res = expected_crit(params, config.domain, dim, i, **_numeric_kwargs(config))
        else:
            res = expected_crit_above(params, config.domain, dim, i, config.u, outer=config.outer,
                                      **_numeric_kwargs(config))
        level = math.nan if config.u is None else config.u
        rows.append([config.domain, dim, i, level, res.density, res.stderr, res.method])
    return pd.DataFrame(rows, columns=COLUMNS["crit"])


def _run_height(config):
    params = config.matern_params()
    dim = config.require("dim")
    index = config.require("index")
    frame = height_curve(params, config.domain, dim, index, config.level_values(params), **_numeric_kwargs(config))
    frame.insert(0, "index", index)
    frame.insert(0, "dim", dim)
    frame.insert(0, "domain", config.domain)
    return frame


def _run_goi(config):
    dim = config.require("dim")
    index = config.require("index")
    method = QUADRATURE if config.method == AUTO else config.method
    res = goi_expectation(
        GOIParams(dim, config.c),
        crossing_functional(index, config.shift, dim=dim),
        method=method,
        samples=config.samples,
        seed=config.seed,
        threads=config.threads,
    )
    row = [dim, config.c, index, config.shift, res.value, res.stderr, res.method, res.samples_or_nodes]
    return pd.DataFrame([row], columns=COLUMNS["goi"])


def _run_simulate(config):
    params = config.matern_params()
    geom = config.geometry()
    if geom.kind == SPHERE:
        if geom.dim != 2:
            raise ConfigError("sphere", "simulation meshes exist for the 2-sphere only")
        grid = sphere_mesh(config.vertices)
    else:
        if geom.dim > 2:
            raise ConfigError("box", "simulation stays at one or two dimensions")
        grid = box_grid(geom, config.resolution, params)
    if config.replications < 1:
        raise ConfigError("replications", "must be at least 1")

    seed = get_settings().seed if config.seed is None else config.seed
    samples = FieldSampler(params, grid).draw_many(seed, config.replications, threads=config.threads)

    coords = ["x", "y", "z"][: grid.points.shape[1]]
    n = grid.size
    frame = pd.DataFrame(
        {
            "replication": np.repeat(np.arange(len(samples)), n),
            "point": np.tile(np.arange(n), len(samples)),
        }
    )
    for k, name in enumerate(coords):
        frame[name] = np.tile(grid.points[:, k], len(samples))
    frame["value"] = np.concatenate([s.values for s in samples])
    return frame


def _run_validate(config):
    params = config.matern_params()
    reports = run_validation(standard_scenarios(quick=config.quick, params=params), seed=config.seed,
                             threads=config.threads)
    return report_frame(reports)


def _run_spectral(config):
    params = config.matern_params()
    if config.domain == SPHERE:
        s = spectral_summary_sphere(params)
        rho1_fd, rho2_fd = sphere_rho_derivatives(params)
    else:
        s = spectral_summary_euclidean(params)
        rho1_fd, rho2_fd = rho_derivatives_fd(params)
    row = [config.domain, s.rho1, s.rho2, s.kappa, s.eta, rho1_fd, rho2_fd]
    return pd.DataFrame([row], columns=COLUMNS["spectral"])


_HANDLERS = {
    "eec": _run_eec,
    "crit": _run_crit,
    "height": _run_height,
    "goi": _run_goi,
    "simulate": _run_simulate,
    "validate": _run_validate,
    "spectral": _run_spectral,
}


def write_frame(frame, output, fmt):
    if output in (None, "-"):
        target = sys.stdout
    else:
        target = resolve_output_path(output)
    if fmt == "json":
        text = frame.to_json(orient="records", indent=2)
        if target is sys.stdout:
            sys.stdout.write(text + "\n")
        else:
            with open(target, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
    else:
        frame.to_csv(target, index=False)
    return "stdout" if target is sys.stdout else target


def run(config):
    """Runs one command; returns the process exit status."""
    try:
        frame = _HANDLERS[config.command](config)
        where = write_frame(frame, config.output, config.format)
    except (CrestError, ValueError) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_INPUT

    print(f"✅ Wrote {len(frame)} rows to {where}", file=sys.stderr)
    if config.command == "validate" and not frame["passed"].all():
        failed = int((~frame["passed"]).sum())
        print(f"⚠️ {failed} of {len(frame)} comparisons failed", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def main(argv=None):
    try:
        config, dump_path = parse_config(argv)
    except (CrestError, ValueError) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_INPUT

    _configure_logging(config.verbose)
    if dump_path:
        dump_config(config, resolve_output_path(dump_path))
        print(f"📝 Config written to {dump_path}", file=sys.stderr)
    return run(config)
