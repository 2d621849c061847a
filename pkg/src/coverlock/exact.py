"""Exact 0-1 optimum by branch and bound, plus a brute-force oracle.

The search branches over units in decreasing ``v/w`` order. Every node is
bounded with the Lagrangian of the LP relaxation at the root shadow prices
``(lam, nu)``::

    bound = lam*W - nu*K + sum_i max(0, a_i) - penalty,   a_i = v_i - lam*w_i + nu

where ``penalty`` sums ``|a_i|`` over units fixed against the sign of
``a_i``. Budget slack and coverage surplus that a node already commits to are
charged at ``lam`` and ``nu`` as well. The bound is valid for any
non-negative prices, and it makes every unit with ``|a_i|`` above the
current gap a forced decision, so the search only branches on the handful of
units near the LP decision boundary. Nodes that survive this screen are also
bounded by a budget-only fractional knapsack over the free band units, which
is what cuts the search when the budget effectively caps the count, and by
the sum of the largest free values that the remaining room can hold.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BUDGET_RTOL,
    BinaryAllocation,
    ProblemInstance,
    SolveReport,
    budget_ok,
    is_instance_feasible,
    validate_instance,
)
from .exceptions import Infeasible, RoundingInfeasible, TooLarge
from .lp import ratio_order, round_lp_to_feasible, solve_lp

logger = logging.getLogger(__name__)

DEFAULT_NODE_LIMIT = 10_000_000
EXHAUSTIVE_MAX_N = 25


@dataclass(frozen=True)
class PruneRecord:
    """A pruned node, kept in debug mode for admissibility checks.

    ``fixed`` maps unit index -> decision for every unit decided at the node;
    ``bound`` is ``-inf`` for nodes cut because no completion is feasible.
    """

    fixed: dict
    bound: float
    incumbent: float
    reason: str


def _check(inst):
    validate_instance(inst)
    if not is_instance_feasible(inst):
        raise Infeasible("the cheapest coverage core already exceeds the budget")


def _better(val, dec, best_val, best_dec):
    if val > best_val:
        return True
    return val == best_val and best_dec is not None and tuple(dec) < tuple(best_dec)


def _local_search(inst, d):
    """Improve a feasible allocation by single adds, drops and swaps."""
    v, w, W, K = inst.values, inst.costs, inst.budget, inst.coverage_floor
    d = d.astype(bool).copy()
    for _ in range(4 * inst.n):
        cost, count = math.fsum(w[d]), int(d.sum())
        inn, out = np.flatnonzero(d), np.flatnonzero(~d)
        best_gain, move = 1e-12, None
        if out.size:
            fits = out[cost + w[out] <= W]
            if fits.size and v[fits].max() > best_gain:
                j = fits[np.argmax(v[fits])]
                best_gain, move = v[j], ((), (j,))
        if inn.size and count > K:
            i = inn[np.argmin(v[inn])]
            if -v[i] > best_gain:
                best_gain, move = -v[i], ((i,), ())
        if inn.size and out.size:
            gain = v[out][None, :] - v[inn][:, None]
            ok = cost - w[inn][:, None] + w[out][None, :] <= W
            gain = np.where(ok, gain, -np.inf)
            r, c = np.unravel_index(np.argmax(gain), gain.shape)
            if gain[r, c] > best_gain:
                best_gain, move = gain[r, c], ((inn[r],), (out[c],))
        if move is None:
            break
        d[list(move[0])] = False
        d[list(move[1])] = True
    return d.astype(np.int8)


def _initial_incumbent(inst, lp):
    cands = []
    try:
        cands.append(round_lp_to_feasible(lp, inst).decisions)
    except RoundingInfeasible:
        pass
    cheapest = np.zeros(inst.n, dtype=np.int8)
    cheapest[inst.cost_order[: inst.coverage_floor]] = 1
    cands.append(cheapest)
    best = None
    for d in cands:
        d = _local_search(inst, d)
        a = BinaryAllocation.from_decisions(inst, d)
        if budget_ok(a.cost, inst.budget) and a.count >= inst.coverage_floor:
            if best is None or _better(a.value, a.decisions, best.value, best.decisions):
                best = a
    return best


class _BandSearch:
    """Depth-first search over the units whose ``|a_i|`` fits inside the gap.

    Units outside the band are fixed to the sign pattern of ``a``: flipping
    any of them costs more than ``root - incumbent`` and could never beat the
    incumbent. ``restart`` is set when the incumbent improves enough that a
    narrower band would be worth rebuilding.
    """

    def __init__(self, inst, order, a, prices, root, margin, best_val, best_dec, debug):
        self.inst, self.order, self.root, self.margin = inst, order, root, margin
        self.lam, self.nu = prices.lam, prices.nu
        self.best_val, self.best_dec = best_val, best_dec
        self.debug = debug
        self.prunes = []
        self.restart = False
        n, v, w = inst.n, inst.values, inst.costs
        self.pat = (a[order] > 0).astype(np.int8)
        self.pen = np.abs(a[order])
        self.band = np.flatnonzero(self.pen <= root - best_val + margin)
        self.nbands = self.band.shape[0]
        nb = np.ones(n, dtype=bool)
        nb[self.band] = False
        self.nb = nb
        forced = nb & (self.pat == 1)
        self.forced_units = order[forced]
        fw = np.where(forced, w[order], 0.0)
        fv = np.where(forced, v[order], 0.0)
        # suffix sums of the forced pattern, in branching order
        self.suf_w = np.concatenate([np.cumsum(fw[::-1])[::-1], [0.0]])
        self.suf_v = np.concatenate([np.cumsum(fv[::-1])[::-1], [0.0]])
        self.suf_c = np.concatenate([np.cumsum(forced[::-1])[::-1], [0]])
        band_w = w[order[self.band]]
        # band units are in ratio order, so a budget-only fractional knapsack
        # over band[b:] is a prefix of its positive-value units
        band_v = v[order[self.band]]
        pos = band_v > 0
        self.kn_w = np.concatenate([[0.0], np.cumsum(np.where(pos, band_w, 0.0))])
        self.kn_v = np.concatenate([[0.0], np.cumsum(np.where(pos, band_v, 0.0))])
        self.band_w, self.band_v = band_w, band_v
        self.band_suf_w = np.concatenate([np.cumsum(band_w[::-1])[::-1], [0.0]])
        # cheapest-r cost among band units b.. for the coverage cut
        self.cheap = [np.concatenate([[0.0], np.cumsum(np.sort(band_w[b:]))])
                      for b in range(self.nbands + 1)]
        # at most q more band units fit; they add at most the q largest positive values
        self.top_v = [np.concatenate([[0.0], np.cumsum(-np.sort(-band_v[b:][band_v[b:] > 0]))])
                      for b in range(self.nbands + 1)]

    def band_size_for(self, best_val):
        return int(np.count_nonzero(self.pen <= self.root - best_val + self.margin))

    def fixed_map(self, b, choices):
        upto = self.band[b] if b < self.nbands else self.inst.n
        dec = {int(self.order[p]): int(self.pat[p]) for p in range(upto) if self.nb[p]}
        for bb, c in enumerate(choices):
            dec[int(self.order[self.band[bb]])] = c
        return dec

    def leaf(self, choices):
        inst = self.inst
        d = np.zeros(inst.n, dtype=np.int8)
        d[self.forced_units] = 1
        if self.nbands:
            d[self.order[self.band]] = choices
        mask = d.astype(bool)
        if int(mask.sum()) < inst.coverage_floor or not budget_ok(math.fsum(inst.costs[mask]), inst.budget):
            return
        val = math.fsum(inst.values[mask])
        if _better(val, d, self.best_val, self.best_dec):
            self.best_val, self.best_dec = val, d
            if self.band_size_for(val) < 0.75 * self.nbands:
                self.restart = True

    def knapsack_bound(self, b, room):
        """Fractional knapsack value of band units ``b..`` within ``room``."""
        if room <= 0:
            return 0.0
        cw = self.kn_w[b:] - self.kn_w[b]
        k = int(np.searchsorted(cw, room, side="right")) - 1
        val = self.kn_v[b + k] - self.kn_v[b]
        if b + k < self.nbands and self.band_v[b + k] > 0:
            val += self.band_v[b + k] * (room - cw[k]) / self.band_w[b + k]
        return val

    def viable(self, b, cost, cnt, penalty, choices, value):
        start = self.band[b] if b < self.nbands else self.inst.n
        W, K = self.inst.budget, self.inst.coverage_floor
        # value = root - flips - lam*(budget slack) - nu*(coverage surplus);
        # both slacks are bounded below by what the node already commits to
        lo_cost = cost + self.suf_w[start]
        lo_cnt = cnt + self.suf_c[start]
        bound = (self.root - penalty
                 - self.lam * max(0.0, W - lo_cost - self.band_suf_w[b])
                 - self.nu * max(0, lo_cnt - K))
        if bound >= self.best_val - self.margin:
            # residual budget-only relaxation on the band units still free
            room = W - lo_cost + BUDGET_RTOL * W
            q = int(np.searchsorted(self.cheap[b], room, side="right")) - 1
            top = self.top_v[b]
            bound = min(bound, value + self.suf_v[start]
                        + min(self.knapsack_bound(b, room), top[min(q, top.shape[0] - 1)]))
        if bound < self.best_val - self.margin:
            if self.debug:
                self.prunes.append(PruneRecord(self.fixed_map(b, choices), bound, self.best_val, "bound"))
            return False
        need = K - lo_cnt
        if not budget_ok(lo_cost, W) or need > self.nbands - b or (
                need > 0 and not budget_ok(lo_cost + self.cheap[b][need], W)):
            if self.debug:
                self.prunes.append(PruneRecord(self.fixed_map(b, choices), -math.inf, self.best_val, "infeasible"))
            return False
        return True

    def run(self, node_limit):
        """Return the number of nodes explored (stops early on restart)."""
        w, n, order, pat, band = self.inst.costs, self.inst.n, self.order, self.pat, self.band
        # a node is (band index b, cost and count of units before band[b],
        # penalty, band choices so far)
        first = band[0] if self.nbands else n
        head = np.arange(first)
        v = self.inst.values
        c0 = math.fsum(w[order[head]][pat[head] == 1])
        v0 = math.fsum(v[order[head]][pat[head] == 1])
        stack = []
        if self.viable(0, c0, int(pat[head].sum()), 0.0, (), v0):
            stack.append((0, c0, int(pat[head].sum()), 0.0, (), v0))
        nodes = 0
        while stack and nodes < node_limit and not self.restart:
            b, cost, cnt, penalty, choices, value = stack.pop()
            nodes += 1
            if b == self.nbands:
                self.leaf(choices)
                continue
            p = band[b]
            nxt = band[b + 1] if b + 1 < self.nbands else n
            gap = np.arange(p + 1, nxt)
            gap_w = math.fsum(w[order[gap]][pat[gap] == 1])
            gap_c = int(pat[gap].sum())
            gap_v = math.fsum(v[order[gap]][pat[gap] == 1])
            kids = []
            for c in (1 - pat[p], pat[p]):  # pattern child pushed last, popped first
                c = int(c)
                pn = penalty + (self.pen[p] if c != pat[p] else 0.0)
                cc = cost + c * w[order[p]] + gap_w
                cn = cnt + c + gap_c
                cv = value + c * v[order[p]] + gap_v
                if self.viable(b + 1, cc, cn, pn, choices + (c,), cv):
                    kids.append((b + 1, cc, cn, pn, choices + (c,), cv))
            stack.extend(kids)
        self.exhausted = not stack
        return nodes


def solve_exact(inst: ProblemInstance, node_limit: int = DEFAULT_NODE_LIMIT,
                debug: bool = False) -> SolveReport:
    """Maximum-value feasible 0-1 allocation.

    Among equal-value optima the lexicographically smallest decision vector
    (original unit order) is returned. If more than ``node_limit`` nodes are
    explored the best allocation found so far is returned with
    ``optimal=False``.

    Raises
    ------
    Infeasible
        If no allocation satisfies both constraints.
    """
    _check(inst)
    v, w, W, K = inst.values, inst.costs, inst.budget, inst.coverage_floor
    lp = solve_lp(inst)
    lam, nu = lp.prices.lam, lp.prices.nu
    a = v - lam * w + nu
    root = lam * W - nu * K + math.fsum(np.maximum(a, 0.0))
    margin = 1e-9 * (1.0 + math.fsum(np.abs(v)) + lam * W + nu * K)
    order = ratio_order(v, w)

    inc = _initial_incumbent(inst, lp)
    best_val, best_dec = inc.value, np.array(inc.decisions)
    nodes, restarts, prunes = 0, 0, []
    while True:
        search = _BandSearch(inst, order, a, lp.prices, root, margin, best_val, best_dec, debug)
        nodes += search.run(node_limit - nodes)
        best_val, best_dec = search.best_val, search.best_dec
        prunes.extend(search.prunes)
        if not search.restart:
            break
        restarts += 1
    optimal = search.exhausted
    if not optimal:
        logger.warning("node limit %d reached; returning best found", node_limit)

    alloc = BinaryAllocation.from_decisions(inst, best_dec)
    diag = {"nodes": nodes, "band": int(search.nbands), "restarts": restarts, "root_bound": root}
    if debug:
        diag["prunes"] = prunes
    return SolveReport.build("exact", inst, alloc, iterations=nodes,
                             dual_prices=lp.prices, optimal=optimal, diagnostics=diag)


def solve_exhaustive(inst: ProblemInstance) -> SolveReport:
    """Brute-force optimum over all ``2**n`` subsets (``n <= 25``).

    Same contract and tie-break as :func:`solve_exact`; used as a test oracle.
    """
    validate_instance(inst)
    n = inst.n
    if n > EXHAUSTIVE_MAX_N:
        raise TooLarge(f"exhaustive search limited to n <= {EXHAUSTIVE_MAX_N}, got {n}")
    if not is_instance_feasible(inst):
        raise Infeasible("instance is infeasible")
    v, w, W, K = inst.values, inst.costs, inst.budget, inst.coverage_floor
    low = min(n, 16)
    high = n - low
    # unit 0 is the most significant bit, so integer order == lexicographic order
    codes = np.arange(2 ** low, dtype=np.int64)
    lbits = ((codes[:, None] >> np.arange(low - 1, -1, -1)) & 1).astype(float)
    lv, lw, lc = lbits @ v[high:], lbits @ w[high:], lbits.sum(axis=1)
    best_val, best_code = -math.inf, None
    for h in range(2 ** high):
        hb = np.array([(h >> (high - 1 - k)) & 1 for k in range(high)], dtype=float)
        tv = lv + hb @ v[:high]
        tw = lw + hb @ w[:high]
        tc = lc + hb.sum()
        ok = (tw <= W + 1e-9 * W) & (tc >= K)
        if not ok.any():
            continue
        vals = np.where(ok, tv, -np.inf)
        r = int(np.argmax(vals))
        if vals[r] > best_val:
            best_val, best_code = vals[r], (h << low) | r
    d = np.array([(best_code >> (n - 1 - k)) & 1 for k in range(n)], dtype=np.int8)
    alloc = BinaryAllocation.from_decisions(inst, d)
    return SolveReport.build("exhaustive", inst, alloc, iterations=2 ** n)
