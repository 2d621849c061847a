"""Misallocation geometry between an affine-threshold policy and a ratio cut.

With shadow prices ``(lam, nu)`` the optimal rule treats ``x`` when its
margin ``m = tau - lam*c + nu`` is non-negative, i.e. when the ratio
``r = tau/c`` clears the cost-dependent boundary ``b(c) = lam - nu/c``. A
rank-and-cut rule instead uses a constant cut ``t*`` on ``r``. Units where
the two disagree have ``|m| <= c * |t* - b(c)|``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from .core import BinaryAllocation, DualPrices, ProblemInstance
from .exceptions import LengthMismatch

UNIT_TABLE_COLUMNS = ("index", "tau", "cost", "ratio", "margin", "b_lp", "pi_lp", "pi_rc", "disagree")


@dataclass(frozen=True, eq=False)
class ScoredUnits:
    tau: np.ndarray
    cost: np.ndarray
    prices: DualPrices

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        cost = np.asarray(self.cost, dtype=float)
        if tau.shape != cost.shape:
            raise LengthMismatch("tau and cost must have equal length")
        if np.any(cost <= 0):
            raise ValueError("costs must be > 0")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "cost", cost)

    @classmethod
    def from_instance(cls, inst: ProblemInstance, prices: DualPrices) -> "ScoredUnits":
        return cls(inst.values, inst.costs, prices)

    @property
    def n(self) -> int:
        return int(self.tau.shape[0])

    @property
    def ratio(self) -> np.ndarray:
        return self.tau / self.cost

    @property
    def margin(self) -> np.ndarray:
        return self.tau - self.prices.lam * self.cost + self.prices.nu

    @property
    def boundary(self) -> np.ndarray:
        return lp_boundary(self.prices, self.cost)


@dataclass(frozen=True)
class MisallocationReport:
    area: float
    disagreeing: Tuple[int, ...]
    band_radius: float
    band_containment: bool
    welfare_loss: Optional[float] = None
    loss_bound: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "misallocation_area": self.area,
            "disagreeing": list(self.disagreeing),
            "delta_n": self.band_radius,
            "band_containment": self.band_containment,
            "welfare_loss": self.welfare_loss,
            "loss_bound": self.loss_bound,
        }


def lp_boundary(prices: DualPrices, cost):
    """Ratio threshold ``lam - nu/c`` implied by the prices at cost ``c``."""
    if np.any(np.asarray(cost) <= 0):
        raise ValueError("cost must be > 0")
    return prices.lam - prices.nu / cost


def crossing_cost(prices: DualPrices, t_star: float) -> Optional[float]:
    """Cost at which the price boundary meets a constant cut ``t_star``.

    ``None`` when ``lam <= t_star``: the boundary stays below the cut for
    every positive cost (or coincides with it when ``nu == 0``).
    """
    if prices.lam <= t_star:
        return None
    return prices.nu / (prices.lam - t_star)


def _decisions(a) -> np.ndarray:
    if isinstance(a, BinaryAllocation):
        return a.decisions
    return np.asarray(a)


def disagreement(a, b) -> np.ndarray:
    da, db = _decisions(a), _decisions(b)
    if da.shape != db.shape:
        raise LengthMismatch(f"allocations have lengths {da.shape[0]} and {db.shape[0]}")
    return np.flatnonzero(da != db)


def misallocation_area(a, b) -> float:
    """Share of units on which two allocations disagree."""
    idx = disagreement(a, b)
    return idx.shape[0] / _decisions(a).shape[0]


def margin_band_check(units: ScoredUnits, prices: DualPrices, t_star: float,
                      disagreeing: Iterable[int]) -> Tuple[float, bool]:
    """Return ``(delta_n, contained)``.

    ``delta_n`` is ``max_i |t* - b(c_i)|``; ``contained`` says whether every
    disagreeing unit has ``|m_i| <= max(c) * delta_n + 1e-9``.
    """
    b = lp_boundary(prices, units.cost)
    delta = float(np.max(np.abs(t_star - b))) if units.n else 0.0
    idx = np.fromiter((int(i) for i in disagreeing), dtype=np.int64)
    if idx.size == 0:
        return delta, True
    m = units.tau[idx] - prices.lam * units.cost[idx] + prices.nu
    radius = float(np.max(units.cost)) * delta + 1e-9
    return delta, bool(np.all(np.abs(m) <= radius))


def welfare_loss_and_bound(units: ScoredUnits, pi_star, pi_rc, prices: DualPrices,
                           t_star: float, margin_constant: float,
                           tau_bound: float) -> Tuple[float, float]:
    """Per-capita welfare loss of ``pi_rc`` against ``pi_star`` and its bound.

    The bound is ``tau_bound * margin_constant * mean(c_i |t* - b(c_i)|)``.
    It only holds if ``margin_constant`` really bounds the margin density of
    the population, which cannot be checked here, so it is reported and
    never asserted.
    """
    if margin_constant <= 0:
        raise ValueError("margin_constant must be > 0")
    ds, dr = _decisions(pi_star), _decisions(pi_rc)
    if not (ds.shape == dr.shape == units.tau.shape):
        raise LengthMismatch("policies and units must have equal length")
    n = units.n
    loss = math.fsum(units.tau * (ds.astype(float) - dr.astype(float))) / n
    gapw = units.cost * np.abs(t_star - lp_boundary(prices, units.cost))
    bound = tau_bound * margin_constant * math.fsum(gapw) / n
    return loss, bound


def rc_threshold(units_or_inst, alloc) -> Optional[float]:
    """Constant ratio cut of a policy: the smallest ratio it treats."""
    d = _decisions(alloc).astype(bool)
    if not d.any():
        return None
    if isinstance(units_or_inst, ProblemInstance):
        ratio = units_or_inst.values / units_or_inst.costs
    else:
        ratio = units_or_inst.ratio
    return float(np.min(ratio[d]))


def compare_policies(units: ScoredUnits, pi_lp, pi_rc, t_star: Optional[float] = None,
                     margin_constant: Optional[float] = None,
                     tau_bound: Optional[float] = None) -> MisallocationReport:
    """Bundle area, band containment and (optionally) the welfare-loss bound."""
    if t_star is None:
        t_star = rc_threshold(units, pi_rc)
        if t_star is None:
            t_star = float(np.max(units.ratio))
    idx = disagreement(pi_lp, pi_rc)
    area = idx.shape[0] / units.n
    delta, contained = margin_band_check(units, units.prices, t_star, idx)
    loss = bound = None
    if margin_constant is not None:
        tb = tau_bound if tau_bound is not None else float(np.max(np.abs(units.tau)))
        loss, bound = welfare_loss_and_bound(units, pi_lp, pi_rc, units.prices, t_star,
                                             margin_constant, tb)
    return MisallocationReport(area, tuple(int(i) for i in idx), delta, contained, loss, bound)


def unit_table_rows(units: ScoredUnits, pi_lp, pi_rc) -> list:
    dl, dr = _decisions(pi_lp), _decisions(pi_rc)
    ratio, margin, b = units.ratio, units.margin, units.boundary
    rows = []
    for i in range(units.n):
        rows.append((i, float(units.tau[i]), float(units.cost[i]), float(ratio[i]),
                     float(margin[i]), float(b[i]), int(dl[i]), int(dr[i]), int(dl[i] != dr[i])))
    return rows


def write_unit_table(fh, units: ScoredUnits, pi_lp, pi_rc) -> None:
    """Per-unit diagnostics as CSV (the data behind a boundary plot)."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(UNIT_TABLE_COLUMNS)
    for row in unit_table_rows(units, pi_lp, pi_rc):
        writer.writerow([row[0]] + [repr(x) for x in row[1:6]] + list(row[6:]))


def unit_table_csv(units: ScoredUnits, pi_lp, pi_rc) -> str:
    buf = io.StringIO()
    write_unit_table(buf, units, pi_lp, pi_rc)
    return buf.getvalue()
