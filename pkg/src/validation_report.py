"""
Analytic-vs-simulated comparisons.

A scenario names one kind of check, the field parameters, the domain and
its discretisation, and a Monte Carlo budget. run_validation turns each
scenario into report rows; a scenario that raises becomes a failed row
instead of stopping the batch.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from src.config import get_settings
from src.critical_logic import expected_crit_euclidean, height_curve
from src.ec_logic import excursion_prob_approx, expected_ec
from src.errors import CrestError, DomainError
from src.geometry_logic import box
from src.matern_engine import EUCLIDEAN, MaternParams
from src.simulation_pipeline import FieldSampler, box_grid, sphere_mesh
from src.topology_logic import critical_values, empirical_ec, peak_height_histogram

logger = logging.getLogger(__name__)

EEC_BOX = "eec-box"
EEC_SPHERE = "eec-sphere"
CRIT_BOX = "crit-box"
HEIGHT_BOX = "height-box"
EXCURSION_BOX = "excursion-box"
SCENARIO_KINDS = (EEC_BOX, EEC_SPHERE, CRIT_BOX, HEIGHT_BOX, EXCURSION_BOX)

MIN_REPLICATIONS = 30
DEFAULT_REL_BUDGET = 0.05
EC_ABS_BUDGET = 0.02

REPORT_COLUMNS = [
    "scenario",
    "quantity",
    "analytic",
    "empirical",
    "stderr",
    "replications",
    "budget",
    "passed",
    "error",
]


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str
    params: MaternParams
    replications: int
    sides: Tuple[float, ...] = (1.0,)
    resolution: float = 32.0
    vertices: int = 642
    levels: Tuple[float, ...] = ()
    index: Optional[int] = None
    rel_budget: float = DEFAULT_REL_BUDGET
    abs_budget: Optional[float] = None

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise DomainError(f"unknown scenario kind {self.kind!r}")
        if self.replications < MIN_REPLICATIONS:
            raise DomainError(f"scenario {self.name!r} needs at least {MIN_REPLICATIONS} replications")

    @property
    def absolute_budget(self):
        if self.abs_budget is not None:
            return self.abs_budget
        return EC_ABS_BUDGET if self.kind in (EEC_BOX, EEC_SPHERE) else 0.0


@dataclass(frozen=True)
class EmpiricalReport:
    scenario: str
    quantity: str
    analytic: float
    empirical: float
    stderr: float
    replications: int
    budget: float = 0.0
    passed: bool = False
    error: str = ""


def _compare(scenario, quantity, analytic, empirical, stderr):
    budget = scenario.rel_budget * abs(analytic) + scenario.absolute_budget
    passed = bool(abs(analytic - empirical) <= 3.0 * stderr + budget)
    return EmpiricalReport(
        scenario=scenario.name,
        quantity=quantity,
        analytic=float(analytic),
        empirical=float(empirical),
        stderr=float(stderr),
        replications=scenario.replications,
        budget=float(budget),
        passed=passed,
    )


def _mean_stderr(values):
    values = np.asarray(values, dtype=float)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def _draws(scenario, params, grid, seed, stream, threads):
    sampler = FieldSampler(params, grid)
    return sampler.draw_many(seed, scenario.replications, threads=threads, stream=stream)


def _eec_rows(scenario, params, seed, stream, threads):
    if scenario.kind == EEC_SPHERE:
        grid = sphere_mesh(scenario.vertices)
    else:
        grid = box_grid(box(scenario.sides), scenario.resolution, params)
    samples = _draws(scenario, params, grid, seed, stream, threads)
    rows = []
    for u in scenario.levels:
        mean, se = _mean_stderr([empirical_ec(s, u) for s in samples])
        rows.append(_compare(scenario, f"eec(u={u:g})", float(expected_ec(params, grid.extent, u)), mean, se))
    return rows


def _crit_rows(scenario, params, seed, stream, threads):
    geom = box(scenario.sides)
    grid = box_grid(geom, scenario.resolution, params)
    samples = _draws(scenario, params, grid, seed, stream, threads)
    per_rep = [critical_values(s)[0] for s in samples]
    indices = range(geom.dim + 1) if scenario.index is None else [scenario.index]
    rows = []
    for i in indices:
        densities = [np.sum(idx == i) / geom.volume for idx in per_rep]
        mean, se = _mean_stderr(densities)
        analytic = expected_crit_euclidean(params, geom.dim, i).density
        rows.append(_compare(scenario, f"crit_density(i={i})", analytic, mean, se))
    return rows


def _height_rows(scenario, params, seed, stream, threads):
    geom = box(scenario.sides)
    grid = box_grid(geom, scenario.resolution, params)
    index = geom.dim if scenario.index is None else scenario.index
    curve = peak_height_histogram(
        params, grid, scenario.levels, scenario.replications, seed, index=index, threads=threads, stream=stream
    )
    analytic = height_curve(params, EUCLIDEAN, geom.dim, index, scenario.levels)["F"].tolist()
    return [
        _compare(scenario, f"F_{index}(u={u:g})", a, e, se)
        for u, a, e, se in zip(curve.levels, analytic, curve.survival, curve.stderr)
    ]


def _excursion_rows(scenario, params, seed, stream, threads):
    geom = box(scenario.sides)
    grid = box_grid(geom, scenario.resolution, params)
    samples = _draws(scenario, params, grid, seed, stream, threads)
    maxima = np.array([np.max(s.values) for s in samples])
    rows = []
    for u in scenario.levels:
        hits = (maxima >= u).astype(float)
        mean, se = _mean_stderr(hits)
        analytic = excursion_prob_approx(params, geom, u).probability
        rows.append(_compare(scenario, f"P(sup>=u={u:g})", analytic, mean, se))
    return rows


_RUNNERS = {
    EEC_BOX: _eec_rows,
    EEC_SPHERE: _eec_rows,
    CRIT_BOX: _crit_rows,
    HEIGHT_BOX: _height_rows,
    EXCURSION_BOX: _excursion_rows,
}


def run_validation(scenarios, seed=None, threads=None, params=None):
    """
    Runs every scenario; scenario k draws its replications from stream k,
    so one seed covers the whole batch. `params` overrides the field
    parameters of every scenario when given.
    """
    settings = get_settings()
    seed = settings.seed if seed is None else int(seed)
    reports = []
    for stream, scenario in enumerate(scenarios):
        scenario_params = params if params is not None else scenario.params
        logger.info("Scenario %s (%s, %d replications)", scenario.name, scenario.kind, scenario.replications)
        try:
            reports.extend(_RUNNERS[scenario.kind](scenario, scenario_params, seed, stream, threads))
        except (CrestError, ValueError, np.linalg.LinAlgError) as exc:
            logger.error("Scenario %s failed: %s", scenario.name, exc)
            reports.append(
                EmpiricalReport(
                    scenario=scenario.name,
                    quantity="error",
                    analytic=math.nan,
                    empirical=math.nan,
                    stderr=math.nan,
                    replications=scenario.replications,
                    budget=math.nan,
                    passed=False,
                    error=str(exc),
                )
            )
    return reports


def standard_scenarios(quick=False, params=None):
    params = params or MaternParams(sigma2=1.0, ell=1.0, nu=3.0)
    sigma = params.sigma
    eec_levels = tuple(sigma * x for x in (-40.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0))
    height_levels = tuple(sigma * x for x in (0.0, 1.0, 2.0))
    if quick:
        return [
            Scenario("crit-1d", CRIT_BOX, params, replications=200, sides=(5.0,), resolution=40.0),
            Scenario("height-1d", HEIGHT_BOX, params, replications=200, sides=(5.0,), resolution=40.0,
                     levels=height_levels, index=1),
            Scenario("eec-box-2d", EEC_BOX, params, replications=60, sides=(1.0, 1.0), resolution=16.0,
                     levels=eec_levels),
            Scenario("eec-sphere", EEC_SPHERE, params, replications=60, vertices=642, levels=(-40.0, 0.0, sigma)),
        ]
    return [
        Scenario("crit-1d", CRIT_BOX, params, replications=2000, sides=(5.0,), resolution=80.0),
        Scenario("height-1d", HEIGHT_BOX, params, replications=2000, sides=(5.0,), resolution=80.0,
                 levels=height_levels, index=1),
        Scenario("eec-box-2d", EEC_BOX, params, replications=500, sides=(1.0, 1.0), resolution=32.0,
                 levels=eec_levels),
        Scenario("eec-sphere", EEC_SPHERE, params, replications=500, vertices=642,
                 levels=tuple(sigma * x for x in (-40.0, 0.0, 1.0, 2.0))),
        Scenario("excursion-1d", EXCURSION_BOX, params, replications=10000, sides=(1.0,), resolution=80.0,
                 levels=(2.5 * sigma,)),
    ]


def report_frame(reports):
    return pd.DataFrame([asdict(r) for r in reports], columns=REPORT_COLUMNS)
