"""Seeded data-generating processes and the two Monte Carlo harnesses.

Every replication draws from its own Philox stream keyed by
``(seed, dgp tag, n, replication, attempt)``, so results do not depend on
the order or the process in which replications run.
"""
from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .analysis import UNIT_TABLE_COLUMNS, ScoredUnits, misallocation_area, unit_table_rows
from .core import ProblemInstance, coverage_from_share, is_instance_feasible
from .exact import solve_exact
from .exceptions import TooManyInfeasibleDraws
from .glc import GlcConfig, glc_solve
from .lp import round_lp_to_feasible, solve_lp
from .rc import rc_with_target_count

logger = logging.getLogger(__name__)

MC1_COLUMNS = ("n", "opt_value", "glc_value", "glc_regret", "lp_gap", "lp_frac")
MC2_COLUMNS = ("scenario", "cost_het", "rho", "mean_nu", "status", "misallocation_area")
SERIES_COLUMNS = ("series", "n", "mean", "q25", "q75")
NU_BINDING_THRESHOLD = 1e-6
MAX_ATTEMPTS = 1000

_DGP1_TAG, _DGP2_TAG = 1, 2


def _rng(seed: int, tag: int, n: int, replication: int, attempt: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, tag, n, replication, attempt])
    return np.random.Generator(np.random.Philox(ss))


def max_workers(requested: Optional[int] = None) -> int:
    cap = os.environ.get("COVERLOCK_THREADS")
    jobs = requested if requested is not None else 1
    if cap:
        jobs = min(jobs, max(1, int(cap)))
    return max(1, jobs)


@dataclass(frozen=True)
class Dgp1Config:
    """Gaussian covariates, linear effect ``X1 + 0.5*X2``, cost ``exp(gamma*X1)``.

    ``C`` and ``rho`` are per-capita budget and coverage share. The defaults
    make both constraints matter.
    """

    n: int = 100
    d: int = 2
    gamma: float = 2.0
    C: float = 0.6
    rho: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 2:
            raise ValueError("need n >= 1 and d >= 2")
        if self.gamma < 0 or self.C <= 0 or not 0 < self.rho < 1:
            raise ValueError("need gamma >= 0, C > 0 and rho in (0, 1)")


@dataclass(frozen=True)
class Dgp2Config:
    """Scalar covariate, effect ``(b1-b0)X + g X^2``, cost ``c0 + delta|X|``."""

    n: int = 500
    beta0: float = 0.0
    beta1: float = 1.0
    gamma_sq: float = 0.5
    c0: float = 1.0
    delta: float = 1.0
    B: float = 0.8
    rho: float = 0.5
    replications: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.c0 <= 0 or self.delta < 0 or not 0 < self.rho < 1 or self.B <= 0:
            raise ValueError("need c0 > 0, delta >= 0, B > 0 and rho in (0, 1)")


def dgp1_sample(cfg: Dgp1Config, replication: int, attempt: int = 0) -> ProblemInstance:
    rng = _rng(cfg.seed, _DGP1_TAG, cfg.n, replication, attempt)
    X = rng.standard_normal((cfg.n, cfg.d))
    values = X[:, 0] + 0.5 * X[:, 1]
    costs = np.exp(cfg.gamma * X[:, 0])
    return ProblemInstance(values, costs, cfg.n * cfg.C, coverage_from_share(cfg.n, cfg.rho))


def dgp2_sample(cfg: Dgp2Config, replication: int, attempt: int = 0) -> Tuple[ProblemInstance, np.ndarray]:
    # scenarios share draws: the stream ignores delta and rho
    rng = _rng(cfg.seed, _DGP2_TAG, cfg.n, replication, attempt)
    X = rng.standard_normal(cfg.n)
    tau = (cfg.beta1 - cfg.beta0) * X + cfg.gamma_sq * X ** 2
    cost = cfg.c0 + cfg.delta * np.abs(X)
    inst = ProblemInstance(tau, cost, cfg.n * cfg.B, coverage_from_share(cfg.n, cfg.rho))
    return inst, X


def _feasible_draw(sample, replication: int):
    """Resample on a shifted substream until feasible; return (draw, resamples)."""
    for attempt in range(MAX_ATTEMPTS):
        draw = sample(replication, attempt)
        inst = draw[0] if isinstance(draw, tuple) else draw
        if is_instance_feasible(inst):
            return draw, attempt
    raise TooManyInfeasibleDraws(f"replication {replication}: {MAX_ATTEMPTS} infeasible draws")


def _check_resamples(resamples: int, reps: int, label) -> None:
    if resamples > reps:  # more than half of all draws were infeasible
        raise TooManyInfeasibleDraws(
            f"{label}: {resamples} of {resamples + reps} draws infeasible; "
            "budget and coverage settings are incompatible")


@dataclass(frozen=True)
class Mc1Record:
    n: int
    replication: int
    opt: float
    glc: float
    lp: float
    lp_frac: int
    v_max: float
    resamples: int
    exact_optimal: bool

    @property
    def regret(self) -> float:
        return self.opt - self.glc

    @property
    def gap(self) -> float:
        return self.lp - self.opt


@dataclass(frozen=True)
class Mc1Row:
    """Replication means at one ``n``; regret and gap are per capita."""

    n: int
    opt_value: float
    glc_value: float
    glc_regret: float
    lp_gap: float
    lp_frac: float
    mean_v_max: float = 0.0
    resamples: int = 0
    regrets: Tuple[float, ...] = field(default=(), repr=False)
    gaps: Tuple[float, ...] = field(default=(), repr=False)

    def csv_row(self) -> list:
        return [self.n] + [f"{x:.10g}" for x in
                           (self.opt_value, self.glc_value, self.glc_regret, self.lp_gap, self.lp_frac)]


def mc1_replication(cfg: Dgp1Config, replication: int, glc_cfg: GlcConfig = GlcConfig(),
                    sampler=None) -> Mc1Record:
    """One MC1 replication; ``sampler(cfg, replication, attempt)`` overrides the DGP."""
    sampler = sampler or dgp1_sample
    inst, resamples = _feasible_draw(lambda r, a: sampler(cfg, r, a), replication)
    exact = solve_exact(inst)
    lp = solve_lp(inst)
    glc, _ = glc_solve(inst, glc_cfg)
    return Mc1Record(cfg.n, replication, exact.objective, glc.objective, lp.objective,
                     len(lp.fractional_indices), inst.v_max, resamples, exact.optimal)


def _mc1_task(args):
    return mc1_replication(*args)


def aggregate_mc1(records: Sequence[Mc1Record]) -> List[Mc1Row]:
    rows = []
    for n in sorted({r.n for r in records}):
        rs = sorted((r for r in records if r.n == n), key=lambda r: r.replication)
        _check_resamples(sum(r.resamples for r in rs), len(rs), f"n={n}")
        regrets = tuple(r.regret / n for r in rs)
        gaps = tuple(r.gap / n for r in rs)
        rows.append(Mc1Row(
            n=n,
            opt_value=float(np.mean([r.opt / n for r in rs])),
            glc_value=float(np.mean([r.glc / n for r in rs])),
            glc_regret=float(np.mean(regrets)),
            lp_gap=float(np.mean(gaps)),
            lp_frac=float(np.mean([r.lp_frac for r in rs])),
            mean_v_max=float(np.mean([r.v_max for r in rs])),
            resamples=sum(r.resamples for r in rs),
            regrets=regrets,
            gaps=gaps,
        ))
    return rows


def run_mc1(ns: Sequence[int], template: Dgp1Config = Dgp1Config(), replications: int = 50,
            glc_cfg: GlcConfig = GlcConfig(), n_jobs: Optional[int] = None,
            return_records: bool = False, sampler=None):
    """Exact, LP and GLC on ``replications`` draws for each ``n`` in ``ns``.

    Returns the per-``n`` rows sorted by ``n`` (and the raw per-replication
    records when ``return_records`` is set). A custom ``sampler`` must be
    picklable when running with more than one worker.
    """
    tasks = [(replace(template, n=int(n)), r, glc_cfg, sampler) for n in sorted(set(ns)) for r in range(replications)]
    jobs = max_workers(n_jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_mc1_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_mc1_task(t) for t in tasks]
    rows = aggregate_mc1(records)
    return (rows, records) if return_records else rows


def regret_curve_data(rows: Sequence[Mc1Row]) -> List[tuple]:
    """Tidy ``(series, n, mean, q25, q75)`` rows for the regret/gap plot."""
    if len(rows) < 2:
        raise ValueError("need at least two sample sizes for a curve")
    out = []
    for series, attr, mean_attr in (("glc_regret", "regrets", "glc_regret"), ("lp_gap", "gaps", "lp_gap")):
        for row in rows:
            vals = np.asarray(getattr(row, attr) or (getattr(row, mean_attr),))
            q25, q75 = np.quantile(vals, [0.25, 0.75])
            out.append((series, row.n, getattr(row, mean_attr), float(q25), float(q75)))
    return out


@dataclass(frozen=True)
class Scenario:
    label: str
    delta: float
    rho: float


def default_scenarios(delta_high: float = 1.0, rho_high: float = 0.5, rho_low: float = 0.1) -> List[Scenario]:
    return [
        Scenario("(1)", delta_high, rho_high),
        Scenario("(2)", delta_high, rho_low),
        Scenario("(3)", 0.0, rho_high),
        Scenario("(4)", 0.0, rho_low),
    ]


@dataclass(frozen=True)
class Mc2Record:
    replication: int
    nu: float
    lam: float
    area: float
    lp_count: int
    resamples: int


@dataclass(frozen=True)
class Mc2Row:
    scenario: str
    delta: float
    rho: float
    mean_nu: float
    status: str
    misallocation_area: float
    mean_lambda: float = 0.0
    resamples: int = 0

    def csv_row(self) -> list:
        return [self.scenario, f"{self.delta:g}", f"{self.rho:g}", f"{self.mean_nu:.10g}",
                self.status, f"{self.misallocation_area:.6f}"]


def lp_vs_rc(inst: ProblemInstance):
    """LP policy (rounded extreme point) and RC calibrated to its treated count."""
    lp = solve_lp(inst)
    pi_lp = round_lp_to_feasible(lp, inst)
    pi_rc = rc_with_target_count(inst, pi_lp.count).allocation
    return lp, pi_lp, pi_rc


def mc2_replication(cfg: Dgp2Config, replication: int) -> Mc2Record:
    (inst, _), resamples = _feasible_draw(lambda r, a: dgp2_sample(cfg, r, a), replication)
    lp, pi_lp, pi_rc = lp_vs_rc(inst)
    return Mc2Record(replication, lp.prices.nu, lp.prices.lam,
                     misallocation_area(pi_lp, pi_rc), pi_lp.count, resamples)


def _mc2_task(args):
    return mc2_replication(*args)


def run_mc2(scenarios: Sequence[Scenario] = None, template: Dgp2Config = Dgp2Config(),
            n_jobs: Optional[int] = None) -> List[Mc2Row]:
    """Mean coverage price and LP-vs-RC misallocation for each scenario."""
    scenarios = list(scenarios) if scenarios is not None else default_scenarios()
    cfgs = [replace(template, delta=s.delta, rho=s.rho) for s in scenarios]
    tasks = [(c, r) for c in cfgs for r in range(template.replications)]
    jobs = max_workers(n_jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_mc2_task, tasks))
    else:
        records = [_mc2_task(t) for t in tasks]
    rows = []
    R = template.replications
    for k, (s, c) in enumerate(zip(scenarios, cfgs)):
        recs = records[k * R:(k + 1) * R]
        resamples = sum(r.resamples for r in recs)
        _check_resamples(resamples, R, s.label)
        mean_nu = float(np.mean([r.nu for r in recs]))
        rows.append(Mc2Row(
            scenario=s.label, delta=s.delta, rho=s.rho, mean_nu=mean_nu,
            status="Binding" if mean_nu > NU_BINDING_THRESHOLD else "Slack",
            misallocation_area=float(np.mean([r.area for r in recs])),
            mean_lambda=float(np.mean([r.lam for r in recs])),
            resamples=resamples,
        ))
    return rows


def mc2_unit_table(cfg: Dgp2Config, replication: int = 0) -> list:
    """Per-unit LP/RC diagnostics for one replication (rows of ``UNIT_TABLE_COLUMNS``)."""
    (inst, _), _ = _feasible_draw(lambda r, a: dgp2_sample(cfg, r, a), replication)
    lp, pi_lp, pi_rc = lp_vs_rc(inst)
    return unit_table_rows(ScoredUnits.from_instance(inst, lp.prices), pi_lp, pi_rc)


def write_csv(path_or_fh, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

    if hasattr(path_or_fh, "write"):
        _write(path_or_fh)
    else:
        with open(path_or_fh, "w", newline="") as fh:
            _write(fh)


def write_mc1_csv(path_or_fh, rows: Sequence[Mc1Row]) -> None:
    write_csv(path_or_fh, MC1_COLUMNS, [r.csv_row() for r in rows])


def write_series_csv(path_or_fh, series: Sequence[tuple]) -> None:
    write_csv(path_or_fh, SERIES_COLUMNS,
              [(s, n, f"{m:.10g}", f"{a:.10g}", f"{b:.10g}") for s, n, m, a, b in series])


def write_mc2_csv(path_or_fh, rows: Sequence[Mc2Row]) -> None:
    write_csv(path_or_fh, MC2_COLUMNS, [r.csv_row() for r in rows])


def write_unit_table_csv(path_or_fh, rows: Sequence[tuple]) -> None:
    write_csv(path_or_fh, UNIT_TABLE_COLUMNS,
              [[r[0]] + [f"{x:.10g}" for x in r[1:6]] + list(r[6:]) for r in rows])
