"""Baseline schemes built from max-SINR association, a heuristic mode rule
and a simple bandwidth split.

Scheme ids read ``maxsinr+<ms>+<ba>`` where ``ms1`` picks SemCom for MUs with
a high knowledge-matching degree, ``ms2`` picks BitCom on strong links,
``ba1`` is water-filling over linear mean SINR and ``ba2`` an even split.
The baselines know nothing of the QoS targets beyond using thresholds as
water-filling floors; whether each MU actually meets its targets is judged
afterwards by the shared audit in :mod:`hsbnet.experiments`.
"""
from __future__ import annotations

import logging

import numpy as np

from .ba_solver import water_fill
from .dual_solver import Assignment
from .errors import InfeasibleBudget

log = logging.getLogger(__name__)

TAU_CUT = 0.8
SINR_CUT_DB = 6.0

SCHEMES = ("maxsinr+ms1+ba1", "maxsinr+ms1+ba2", "maxsinr+ms2+ba1", "maxsinr+ms2+ba2")


def ua_max_sinr(scenario) -> np.ndarray:
    """Serving BS per MU by strongest mean SINR (lowest index on ties)."""
    return np.argmax(np.asarray(scenario.mean_sinr_db), axis=1)


def ms_knowledge_threshold(scenario, tau_cut=TAU_CUT) -> np.ndarray:
    """Mode index per MU: 0 (SemCom) iff ``tau > tau_cut``, else 1."""
    return np.where(np.asarray(scenario.tau) > tau_cut, 0, 1)


def ms_sinr_threshold(scenario, bs, gamma_cut_db=SINR_CUT_DB) -> np.ndarray:
    """Mode index per MU: 1 (BitCom) iff the serving link's mean SINR
    exceeds ``gamma_cut_db``, else 0."""
    g = np.asarray(scenario.mean_sinr_db)[np.arange(len(bs)), bs]
    return np.where(g > gamma_cut_db, 1, 0)


def ba_water_filling(gains_db, budget, floors=None) -> np.ndarray:
    """Water-filling of one BS's budget over its MUs' linear mean SINRs.

    ``floors`` are lower bounds (threshold bandwidths). When they do not fit
    in the budget the split falls back to plain water-filling, since a
    baseline has no repair step.
    """
    gains = 10.0 ** (np.asarray(gains_db, dtype=float) / 10.0)
    if floors is not None:
        try:
            return water_fill(gains, budget, floors)
        except InfeasibleBudget:
            log.info("water-filling floors exceed the budget; splitting without floors")
    return water_fill(gains, budget)


def ba_even(n, budget, thresholds=None):
    """Equal split of ``budget`` over ``n`` MUs.

    Returns ``(z, flagged)`` where ``flagged`` marks MUs whose threshold
    exceeds the even share.
    """
    z = np.full(n, budget / n)
    if thresholds is None:
        return z, np.zeros(n, dtype=bool)
    return z, np.asarray(thresholds, dtype=float) > z


def benchmark_assignment(scheme, scenario, table) -> Assignment:
    """Full (UA, MS, BA) pipeline of a baseline ``scheme`` id."""
    try:
        ua, ms, ba = scheme.split("+")
    except ValueError:
        raise ValueError(f"unknown scheme {scheme!r}") from None
    if ua != "maxsinr" or ms not in ("ms1", "ms2") or ba not in ("ba1", "ba2"):
        raise ValueError(f"unknown scheme {scheme!r}")
    bs = ua_max_sinr(scenario)
    mode = ms_knowledge_threshold(scenario) if ms == "ms1" else ms_sinr_threshold(scenario, bs)
    U = scenario.num_mus
    z = np.zeros(U)
    for j in range(scenario.num_bss):
        members = np.flatnonzero(bs == j)
        if not len(members):
            continue
        budget = float(scenario.bandwidth[j])
        th = table.z[members, j, mode[members]]
        if ba == "ba1":
            floors = np.where(np.isfinite(th), th, 0.0)
            z[members] = ba_water_filling(scenario.mean_sinr_db[members, j], budget, floors)
        else:
            z[members], _ = ba_even(len(members), budget, th)
    return Assignment(bs=bs, mode=mode, bandwidth=z)
