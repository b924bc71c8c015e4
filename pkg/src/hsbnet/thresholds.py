"""Minimum per-link bandwidths that meet the latency, loss and rate targets.

Delay and loss are non-increasing in bandwidth and the message rate is
increasing, so each target maps to a single threshold that is found by a
bracketing search on ``(FLOOR_HZ, budget]``. ``math.inf`` marks a target that
cannot be met within the budget.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .b2m import Mode
from .queueing import LinkParams, departure_pmf, ptq_kernel

INFEASIBLE = math.inf
FLOOR_HZ = 1e3
REL_TOL = 1e-4


class Metric(str, enum.Enum):
    DELAY = "delay"
    LOSS = "loss"
    RATE = "rate"


@dataclass(frozen=True)
class BandwidthThresholds:
    sem_delay: float
    sem_loss: float
    sem_rate: float
    bit_delay: float
    bit_loss: float
    bit_rate: float

    @property
    def sem_th(self) -> float:
        return max(self.sem_delay, self.sem_loss, self.sem_rate)

    @property
    def bit_th(self) -> float:
        return max(self.bit_delay, self.bit_loss, self.bit_rate)

    def threshold(self, mode) -> float:
        return self.sem_th if Mode(mode) is Mode.SEM else self.bit_th

    def components(self, mode):
        if Mode(mode) is Mode.SEM:
            return {Metric.DELAY: self.sem_delay, Metric.LOSS: self.sem_loss,
                    Metric.RATE: self.sem_rate}
        return {Metric.DELAY: self.bit_delay, Metric.LOSS: self.bit_loss,
                Metric.RATE: self.bit_rate}


class _QueueProbe:
    """Memoised (loss, delay) evaluations of one link in one mode."""

    def __init__(self, mode, link: LinkParams):
        self.mode = Mode(mode)
        self.link = link
        self.kernel = ptq_kernel(mode, link)
        self.scq = link.scq_delay() if self.mode is Mode.SEM else 0.0
        self._cache = {}

    def __call__(self, z):
        out = self._cache.get(z)
        if out is None:
            lk = self.link
            dep = departure_pmf(z, lk.gamma_db, lk.sigma_db, lk.slot, lk.packet_bits)
            theta, ptq = self.kernel.metrics(dep)
            out = self._cache[z] = (theta, self.scq + ptq)
        return out

    def evaluated(self):
        return self._cache.keys()


def _search(excess, floor, budget, guess=None, known=()):
    """Smallest z in [floor, budget] with ``excess(z) <= 0``, or inf.

    ``excess`` must be non-increasing. A bracket is taken from ``known``
    (already evaluated points) or grown geometrically from ``guess``; the
    root is then located in log-bandwidth with Brent's method and nudged up
    until the target holds, so the returned point always satisfies it and
    sits within ``REL_TOL`` of the boundary.
    """
    lo, hi = floor, budget
    for z in known:
        if excess(z) <= 0:
            hi = min(hi, z)
        else:
            lo = max(lo, z)
    if lo == floor and excess(floor) <= 0:
        return floor
    if hi == budget and excess(budget) > 0:
        return INFEASIBLE
    if guess is not None and lo < guess < hi:
        z = guess
        if excess(z) > 0:
            lo = z
            while 2 * z < hi and excess(2 * z) > 0:
                z *= 2
                lo = z
            hi = min(hi, 2 * z)
        else:
            hi = z
            while z / 2 > lo and excess(z / 2) <= 0:
                z /= 2
                hi = z
            lo = max(lo, z / 2)
    step = math.log1p(REL_TOL / 4)
    ulo, uhi = math.log(lo), math.log(hi)
    if uhi - ulo <= step:
        return hi
    u = brentq(lambda v: excess(math.exp(v)), ulo, uhi, xtol=step, rtol=1e-15)
    u = min(u + step, uhi)
    while excess(math.exp(u)) > 0 and u < uhi:
        u = min(u + step, uhi)
    return math.exp(u)


def _log_excess(value, cap):
    if value <= 0:
        return -745.0
    if not math.isfinite(value):
        return 745.0
    return math.log(value) - math.log(cap)


def min_bandwidth_for(metric, mode, link: LinkParams, *, budget, latency_cap=None,
                      loss_cap=None, rate_min=None, probe=None) -> float:
    """Smallest bandwidth (Hz) meeting a single target on one link.

    ``metric`` selects which of ``latency_cap`` (s), ``loss_cap`` or
    ``rate_min`` (msg/s) applies. Returns ``INFEASIBLE`` if the target is
    unmet at ``budget``.
    """
    metric, mode = Metric(metric), Mode(mode)
    if metric is Metric.RATE:
        return _rate_threshold(mode, link, rate_min, budget)
    probe = probe or _QueueProbe(mode, link)
    # twice the bandwidth whose mean transmit capacity equals the arrival rate
    guess = 2.0 * probe.kernel.arrival_rate * link.packet_bits / link.spectral_eff
    known = sorted(probe.evaluated())
    if metric is Metric.DELAY:
        if probe.scq > latency_cap:
            return INFEASIBLE
        return _search(lambda z: _log_excess(probe(z)[1], latency_cap), FLOOR_HZ, budget,
                       guess, known)
    return _search(lambda z: _log_excess(probe(z)[0], loss_cap), FLOOR_HZ, budget,
                   guess, known)


def _rate_threshold(mode, link, rate_min, budget):
    if link.rate(mode, FLOOR_HZ) >= rate_min:
        return FLOOR_HZ
    if link.rate(mode, budget) < rate_min:
        return INFEASIBLE
    lo, hi = FLOOR_HZ, float(budget)
    while hi - lo > REL_TOL * 0.1 * hi:
        mid = 0.5 * (lo + hi)
        if link.rate(mode, mid) >= rate_min:
            hi = mid
        else:
            lo = mid
    return hi


def link_thresholds(link: LinkParams, *, budget, latency_cap, loss_cap, rate_min) -> BandwidthThresholds:
    """All six thresholds of one link."""
    out = {}
    for mode in Mode:
        tag = mode.value
        out[f"{tag}_rate"] = _rate_threshold(mode, link, rate_min, budget)
        if out[f"{tag}_rate"] == INFEASIBLE:
            # no point solving queues for a link that can never carry M_o
            out[f"{tag}_loss"] = out[f"{tag}_delay"] = INFEASIBLE
            continue
        probe = _QueueProbe(mode, link)
        kw = dict(budget=budget, latency_cap=latency_cap, loss_cap=loss_cap, probe=probe)
        out[f"{tag}_loss"] = min_bandwidth_for(Metric.LOSS, mode, link, **kw)
        out[f"{tag}_delay"] = min_bandwidth_for(Metric.DELAY, mode, link, **kw)
    return BandwidthThresholds(**out)


@dataclass(frozen=True)
class ThresholdTable:
    """Thresholds and threshold-bandwidth rates for every (MU, BS) link.

    ``z[i, j, m]`` and ``rate[i, j, m]`` use mode index ``m`` = 0 for SemCom,
    1 for BitCom. Infeasible links carry ``z = inf`` and ``rate = -inf``.
    """

    entries: tuple  # entries[i][j] -> BandwidthThresholds
    z: np.ndarray
    rate: np.ndarray

    @property
    def num_mus(self):
        return self.z.shape[0]

    @property
    def num_bss(self):
        return self.z.shape[1]

    def feasible(self):
        return np.isfinite(self.z)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mu", "bs", "mode", "z_delta", "z_theta", "z_M", "z_th", "feasible"])
            for i, row in enumerate(self.entries):
                for j, th in enumerate(row):
                    for mode in Mode:
                        c = th.components(mode)
                        zt = th.threshold(mode)
                        w.writerow([i, j, mode.value, *(f"{c[m]:.9g}" for m in Metric),
                                    f"{zt:.9g}", int(math.isfinite(zt))])


def all_thresholds(scenario, mus=None) -> ThresholdTable:
    """Threshold table for every link of ``scenario``.

    ``mus`` restricts the computation to a subset of MUs; other rows are
    marked infeasible.
    """
    U, S = scenario.num_mus, scenario.num_bss
    z = np.full((U, S, 2), INFEASIBLE)
    rate = np.full((U, S, 2), -np.inf)
    entries = [[None] * S for _ in range(U)]
    rows = range(U) if mus is None else mus
    for i in rows:
        for j in range(S):
            link = scenario.link(i, j)
            th = link_thresholds(
                link, budget=float(scenario.bandwidth[j]),
                latency_cap=scenario.latency_cap, loss_cap=scenario.loss_cap,
                rate_min=float(scenario.throughput_min[i]))
            entries[i][j] = th
            for m, mode in enumerate(Mode):
                zt = th.threshold(mode)
                if math.isfinite(zt):
                    z[i, j, m] = zt
                    rate[i, j, m] = link.rate(mode, zt)
    empty = BandwidthThresholds(*([INFEASIBLE] * 6))
    entries = tuple(tuple(e if e is not None else empty for e in row) for row in entries)
    return ThresholdTable(entries=entries, z=z, rate=rate)
