"""Monte Carlo simulators used as independent checks of the analytic queues.

Nothing here imports the analytic engine: the SCQ is simulated packet by
packet as a FIFO single server, and the PTQ slot by slot from sampled
arrivals and sampled SINR values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScqSimResult:
    mean_sojourn: float
    stderr: float
    n_packets: int


@dataclass(frozen=True)
class PtqSimResult:
    loss_ratio: float
    mean_queue: float
    mean_delay: float
    loss_stderr: float
    queue_stderr: float
    delay_stderr: float
    arrivals: int
    drops: int
    n_slots: int


def _batch_stderr(x, n_batches=50):
    """Standard error of the mean of a correlated series by batch means."""
    x = np.asarray(x, dtype=float)
    m = len(x) // n_batches
    if m == 0:
        return float("nan")
    means = x[: m * n_batches].reshape(n_batches, m).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


def simulate_scq(lam, tau, mu_mat, mu_mis, n_packets=1_000_000, seed=0,
                 chunk=1_000_000) -> ScqSimResult:
    """Mean time in system of an M/G/1 queue with mixture-exponential service.

    Each packet's service is Exp(mu_mat) with probability ``tau`` and
    Exp(mu_mis) otherwise. Departure times follow the FIFO recursion
    ``D_n = max(D_{n-1}, a_n) + s_n``, evaluated chunk-wise in closed form.
    """
    rng = np.random.default_rng(seed)
    sojourn = np.empty(n_packets)
    t0 = 0.0  # arrival clock
    d_last = 0.0  # last departure, same clock
    done = 0
    while done < n_packets:
        n = min(chunk, n_packets - done)
        arrivals = t0 + np.cumsum(rng.exponential(1.0 / lam, n))
        matched = rng.random(n) < tau
        service = np.where(matched, rng.exponential(1.0 / mu_mat, n),
                           rng.exponential(1.0 / mu_mis, n))
        # shift the clock so times stay small
        base = t0
        a = arrivals - base
        c = np.cumsum(service)
        c_prev = c - service
        start = np.maximum.accumulate(np.maximum(a - c_prev, d_last - base))
        departures = c + start
        sojourn[done:done + n] = departures - a
        d_last = departures[-1] + base
        t0 = arrivals[-1]
        done += n
    return ScqSimResult(float(sojourn.mean()), _batch_stderr(sojourn), n_packets)


# --------------------------------------------------------------------------
# Samplers: callables ``(rng, n) -> int array``
# --------------------------------------------------------------------------

def poisson_sampler(mean_per_slot):
    return lambda rng, n: rng.poisson(mean_per_slot, n)


def bernoulli_sampler(p):
    return lambda rng, n: (rng.random(n) < p).astype(np.int64)


def constant_sampler(k):
    return lambda rng, n: np.full(n, k, dtype=np.int64)


def sinr_departure_sampler(z, gamma_db, sigma_db, T, L):
    """Packets sent per slot, floor(T z log2(1 + gamma) / L), gamma ~ N(dB)."""
    def sample(rng, n):
        g = rng.normal(gamma_db, sigma_db, n)
        return np.floor(T * z * np.log2(1.0 + 10.0 ** (g / 10.0)) / L).astype(np.int64)
    return sample


def simulate_ptq(arr_sampler, dep_sampler, F, n_slots=1_000_000, seed=0, T=1e-3,
                 warmup=1000) -> PtqSimResult:
    """Slot-level simulation of the finite packet-transmission queue.

    Each slot, up to ``D`` queued packets leave first, then ``A`` packets
    arrive and those beyond the buffer ``F`` are dropped. A packet admitted
    in slot ``s`` and sent in slot ``d`` waits ``(d - s) * T`` seconds.
    Statistics exclude the first ``warmup`` slots.
    """
    rng = np.random.default_rng(seed)
    total = n_slots + warmup
    arr = arr_sampler(rng, total).tolist()
    dep = dep_sampler(rng, total).tolist()
    q_start = [0] * total
    admitted = [0] * total
    departed = [0] * total
    dropped = [0] * total
    q = 0
    for t in range(total):
        q_start[t] = q
        d = dep[t]
        post = q - d if q > d else 0
        departed[t] = q - post
        a = arr[t]
        room = F - post
        if a > room:
            admitted[t] = room
            dropped[t] = a - room
            q = F
        else:
            admitted[t] = a
            q = post + a

    sl = slice(warmup, None)
    arr_np = np.asarray(arr[sl])
    drop_np = np.asarray(dropped[sl])
    q_np = np.asarray(q_start[sl], dtype=float)
    n_arr = int(arr_np.sum())
    n_drop = int(drop_np.sum())

    # FIFO matching of admissions to departures by cumulative counts
    cum_adm = np.cumsum(admitted)
    cum_dep = np.cumsum(departed)
    first = int(cum_adm[warmup - 1]) + 1 if warmup else 1
    last = int(cum_dep[-1])
    if last >= first:
        ids = np.arange(first, last + 1)
        s_slot = np.searchsorted(cum_adm, ids, side="left")
        d_slot = np.searchsorted(cum_dep, ids, side="left")
        delays = (d_slot - s_slot) * T
        mean_delay = float(delays.mean())
        delay_se = _batch_stderr(delays)
    else:
        mean_delay = delay_se = float("nan")

    loss_ratio = n_drop / n_arr if n_arr else 0.0
    # per-slot drop/arrival ratio estimator's error via batch means
    m = len(arr_np) // 50
    if m and n_arr:
        b_arr = arr_np[: m * 50].reshape(50, m).sum(axis=1)
        b_drop = drop_np[: m * 50].reshape(50, m).sum(axis=1)
        resid = b_drop - loss_ratio * b_arr
        loss_se = float(resid.std(ddof=1) / np.sqrt(50) / b_arr.mean())
    else:
        loss_se = float("nan")
    return PtqSimResult(
        loss_ratio=loss_ratio, mean_queue=float(q_np.mean()), mean_delay=mean_delay,
        loss_stderr=loss_se, queue_stderr=_batch_stderr(q_np), delay_stderr=delay_se,
        arrivals=n_arr, drops=n_drop, n_slots=n_slots,
    )
