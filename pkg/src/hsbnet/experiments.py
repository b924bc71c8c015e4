"""End-to-end runs, parameter sweeps, rate CDFs and queue validation.

Every scheme, proposed or baseline, ends in an :class:`Assignment` that is
checked by the same :func:`audit`. An MU whose link misses a QoS target at
its allocated bandwidth contributes no throughput.
"""
from __future__ import annotations

import csv
import io
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ba_solver import BAUser, solve_ba_for_bs
from .benchmarks import SCHEMES as BENCHMARKS, benchmark_assignment
from .dual_solver import MODES, Assignment, bandwidth_price, solve_ua_ms
from .errors import DegenerateLink, MUDropError
from .mc_oracle import poisson_sampler, simulate_ptq, simulate_scq, sinr_departure_sampler
from .queueing import (PtqKernel, arrival_pmf, departure_pmf, link_metrics, scq_delay,
                       semcom_ptq_rate)
from .scenario import ScenarioConfig, generate_scenario
from .thresholds import all_thresholds

log = logging.getLogger(__name__)

PROPOSED = "proposed"
SCHEME_IDS = (PROPOSED,) + BENCHMARKS
AXES = ("num_bs", "num_mus", "tau_mean")
BUDGET_RTOL = 1e-9  # float slack on the per-BS budget sums


def _fmt(x) -> str:
    return f"{x:.9g}"


# --------------------------------------------------------------------------
# Proposed pipeline
# --------------------------------------------------------------------------

def allocate_bandwidth(scenario, table, assignment: Assignment) -> np.ndarray:
    """Per-BS bandwidth split of the proposed scheme for a fixed (UA, MS)."""
    z = np.zeros(assignment.num_mus)
    for j in range(scenario.num_bss):
        members = np.flatnonzero(assignment.bs == j)
        if not len(members):
            continue
        users = []
        for i in members:
            link = scenario.link(i, j)
            m = int(assignment.mode[i])
            users.append(BAUser(
                mu=int(i), mode=MODES[m], floor=float(table.z[i, j, m]),
                spectral_eff=link.spectral_eff, tau=link.tau, scale=link.b2m.scale,
                knee=link.b2m.knee, rho=link.rho))
        z[members] = solve_ba_for_bs(users, float(scenario.bandwidth[j]))
    return z


def total_rate(scenario, assignment: Assignment) -> float:
    """Sum of served MUs' message rates at their allocated bandwidth."""
    tot = 0.0
    for i in np.flatnonzero(assignment.served()):
        link = scenario.link(i, assignment.bs[i])
        tot += link.rate(MODES[assignment.mode[i]], float(assignment.bandwidth[i]))
    return tot


def full_objective(scenario, table, assignment: Assignment) -> float:
    """Throughput once the per-BS allocation is applied to ``assignment``."""
    a = assignment.copy()
    a.bandwidth = allocate_bandwidth(scenario, table, a)
    return total_rate(scenario, a)


def proposed_assignment(scenario, table, max_iters=500, schedule=None, allow_drops=False,
                        rank_by="full", init="price"):
    """Dual UA/MS followed by per-BS allocation. Returns (Assignment, DualState).

    ``rank_by`` picks how iterates of the dual loop are compared: ``"full"``
    scores each candidate by its throughput after allocation, ``"threshold"``
    by the sum of rates at threshold bandwidths. ``init`` starts the
    multipliers at the per-BS bandwidth price (``"price"``) or at zero.
    """
    if init not in ("price", "zero"):
        raise ValueError(f"unknown init {init!r}")
    eta0 = bandwidth_price(scenario) if init == "price" else None
    if rank_by == "full":
        objective = lambda a: full_objective(scenario, table, a)  # noqa: E731
    elif rank_by == "threshold":
        objective = None
    else:
        raise ValueError(f"unknown rank_by {rank_by!r}")
    a, state = solve_ua_ms(scenario, table, max_iters=max_iters, schedule=schedule,
                           exclude_infeasible=allow_drops, objective=objective,
                           eta0=eta0)
    if a.dropped and not allow_drops:
        raise MUDropError(list(a.dropped))
    a.bandwidth = allocate_bandwidth(scenario, table, a)
    return a, state


def brute_force_assignment(scenario, table, rank_by="full"):
    """Exhaustive search over every (BS, mode) choice per MU.

    Only budget-feasible choices on finite thresholds count. Returns
    ``(best Assignment with bandwidth, best value)`` or ``(None, -inf)``.
    Meant for tiny instances (``(2J)^U`` candidates).
    """
    U, J = scenario.num_mus, scenario.num_bss
    budgets = np.asarray(scenario.bandwidth, dtype=float)
    opts = [[(j, m) for m in (0, 1) for j in range(J) if np.isfinite(table.z[i, j, m])]
            for i in range(U)]
    per_bs = {}

    def bs_value(j, members):
        key = (j, members)
        if key not in per_bs:
            idx = np.array([i for i, _ in members], dtype=int)
            modes = np.array([m for _, m in members], dtype=int)
            a = Assignment(bs=np.full(U, -1), mode=np.zeros(U, dtype=int))
            a.bs[idx], a.mode[idx] = j, modes
            if rank_by == "full":
                per_bs[key] = full_objective(scenario, table, a)
            else:
                per_bs[key] = float(table.rate[idx, j, modes].sum())
        return per_bs[key]

    best, best_val = None, -math.inf
    for combo in itertools.product(*opts):
        loads = np.zeros(J)
        for i, (j, m) in enumerate(combo):
            loads[j] += table.z[i, j, m]
        if np.any(loads > budgets):
            continue
        val = sum(bs_value(j, tuple((i, m) for i, (jj, m) in enumerate(combo) if jj == j))
                  for j in range(J))
        if val > best_val:
            best_val = val
            best = Assignment(bs=np.array([j for j, _ in combo]),
                              mode=np.array([m for _, m in combo]))
    if best is not None:
        best.bandwidth = allocate_bandwidth(scenario, table, best)
    return best, best_val


# --------------------------------------------------------------------------
# Audit
# --------------------------------------------------------------------------

@dataclass
class AuditReport:
    """Constraint checks of one assignment.

    ``checks`` maps P1a..P1f to a pass flag. ``qos_ok[i]`` says whether MU
    ``i`` is served and meets its delay, loss and rate targets.
    """

    checks: dict
    qos_ok: np.ndarray
    delay: np.ndarray
    loss: np.ndarray
    rate: np.ndarray
    loads: np.ndarray

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def violators(self):
        return tuple(int(i) for i in np.flatnonzero(~self.qos_ok))


def audit(scenario, assignment: Assignment) -> AuditReport:
    U, J = scenario.num_mus, scenario.num_bss
    bs, mode, z = assignment.bs, assignment.mode, assignment.bandwidth
    served = assignment.served()
    delay = np.full(U, math.inf)
    loss = np.full(U, math.inf)
    rate = np.zeros(U)
    for i in np.flatnonzero(served):
        link = scenario.link(i, bs[i])
        m = MODES[mode[i]]
        rate[i] = link.rate(m, float(z[i]))
        if z[i] <= 0:
            continue
        try:
            delay[i], loss[i], _ = link_metrics(m, float(z[i]), link)
        except DegenerateLink:
            pass
    x, y = assignment.indicators(J)
    loads = np.bincount(bs[served], weights=z[served], minlength=J)
    budgets = np.asarray(scenario.bandwidth, dtype=float)
    ok_delay = served & (delay <= scenario.latency_cap)
    ok_loss = served & (loss <= scenario.loss_cap)
    ok_rate = served & (rate >= scenario.throughput_min)
    checks = {
        "P1a": bool(np.all(x.sum(axis=1) == 1)),
        "P1b": bool(np.all(loads <= budgets * (1 + BUDGET_RTOL))),
        "P1c": bool(ok_delay.all()),
        "P1d": bool(ok_loss.all()),
        "P1e": bool(ok_rate.all()),
        "P1f": bool(np.isin(x, (0, 1)).all() and np.isin(y, (0, 1)).all()
                    and np.all(y <= x)),
    }
    return AuditReport(checks=checks, qos_ok=ok_delay & ok_loss & ok_rate, delay=delay,
                       loss=loss, rate=rate, loads=loads)


# --------------------------------------------------------------------------
# Runs
# --------------------------------------------------------------------------

@dataclass
class RunResult:
    scheme: str
    seed: object
    total_throughput: float
    rates: np.ndarray  # msg/s per MU; zero where QoS is missed
    assignment: Assignment
    audit: AuditReport
    timing: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        """Per-MU rows; timing is left out so the text is reproducible."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mu", "bs", "mode", "z_hz", "rate_msg_s", "delay_s", "loss", "qos_ok"])
        a, rep = self.assignment, self.audit
        for i in range(a.num_mus):
            served = a.bs[i] >= 0
            w.writerow([i, int(a.bs[i]), MODES[a.mode[i]].value if served else "",
                        _fmt(a.bandwidth[i]), _fmt(self.rates[i]), _fmt(rep.delay[i]),
                        _fmt(rep.loss[i]), int(rep.qos_ok[i])])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def run(scheme, scenario, seed=None, table=None, *, max_iters=500, schedule=None,
        allow_drops=False) -> RunResult:
    """Run one scheme on one scenario and audit the outcome.

    ``table`` can carry precomputed thresholds. For the proposed scheme an
    MU with no feasible link raises :class:`~hsbnet.errors.NoFeasibleLink`
    unless ``allow_drops`` is set, in which case it is left unserved.
    """
    if scheme not in SCHEME_IDS:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEME_IDS)}")
    timing = {}
    t0 = time.perf_counter()
    if table is None:
        table = all_thresholds(scenario)
        timing["thresholds_s"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    if scheme == PROPOSED:
        a, _ = proposed_assignment(scenario, table, max_iters=max_iters, schedule=schedule,
                                   allow_drops=allow_drops)
    else:
        a = benchmark_assignment(scheme, scenario, table)
    timing["solve_s"] = time.perf_counter() - t1
    rep = audit(scenario, a)
    rates = np.where(rep.qos_ok, rep.rate, 0.0)
    timing["total_s"] = time.perf_counter() - t0
    return RunResult(scheme=scheme, seed=seed, total_throughput=float(rates.sum()),
                     rates=rates, assignment=a, audit=rep, timing=timing)


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

SWEEP_HEADER = ["axis", "value", "scheme", "seed", "throughput_msg_s", "qos_ok_mus", "num_mus"]


def config_for(axis, value, base: ScenarioConfig) -> ScenarioConfig:
    if axis == "num_bs":
        return base.replace(num_bss=int(value))
    if axis == "num_mus":
        return base.replace(num_mus=int(value))
    if axis == "tau_mean":
        # same seed -> same uniforms, so every MU's tau shifts by the same step
        return base.replace(tau_range=(float(value) - 0.1, float(value) + 0.1))
    raise ValueError(f"unknown axis {axis!r}; choose from {', '.join(AXES)}")


def _sweep_cell(args):
    axis, value, schemes, seed, base, max_iters = args
    scenario = generate_scenario(config_for(axis, value, base), seed)
    table = all_thresholds(scenario)
    rows = []
    for s in schemes:
        r = run(s, scenario, seed, table, max_iters=max_iters, allow_drops=True)
        rows.append((axis, value, s, seed, r.total_throughput, int(r.audit.qos_ok.sum()),
                     scenario.num_mus))
    return rows


def sweep(axis, values, schemes=SCHEME_IDS, seeds=range(5), base=None, workers=1,
          max_iters=500):
    """Throughput of each scheme at each (axis value, seed).

    Rows come back ordered by (value, scheme, seed) regardless of
    ``workers``. The proposed scheme leaves MUs without any feasible link
    unserved here rather than aborting the sweep.
    """
    base = base or ScenarioConfig(num_mus=50, num_bss=5)
    schemes = tuple(schemes)
    for s in schemes:
        if s not in SCHEME_IDS:
            raise ValueError(f"unknown scheme {s!r}")
    tasks = [(axis, v, schemes, int(seed), base, max_iters) for v in values for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sweep_cell, tasks))
    else:
        chunks = [_sweep_cell(t) for t in tasks]
    rows = [r for c in chunks for r in c]
    order = {s: k for k, s in enumerate(schemes)}
    value_order = {v: k for k, v in enumerate(values)}
    rows.sort(key=lambda r: (value_order[r[1]], order[r[2]], r[3]))
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for axis, value, scheme, seed, thr, ok, n in rows:
        w.writerow([axis, _fmt(value), scheme, seed, _fmt(thr), ok, n])
    return buf.getvalue()


def sweep_means(rows):
    """{(value, scheme): mean throughput} over seeds."""
    acc = {}
    for _, value, scheme, _, thr, _, _ in rows:
        acc.setdefault((value, scheme), []).append(thr)
    return {k: float(np.mean(v)) for k, v in acc.items()}


# --------------------------------------------------------------------------
# Rate CDF
# --------------------------------------------------------------------------

def rate_cdf(results) -> np.ndarray:
    """Empirical CDF of per-link message rates over served, QoS-meeting MUs.

    Returns an (n, 2) array of (rate, cumulative probability).
    """
    if isinstance(results, RunResult):
        results = [results]
    rates = np.concatenate([r.rates[r.audit.qos_ok] for r in results]) if results else np.zeros(0)
    rates = np.sort(rates)
    n = len(rates)
    return np.column_stack((rates, np.arange(1, n + 1) / n)) if n else np.zeros((0, 2))


def cdf_csv(cdf) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rate_msg_s", "cum_prob"])
    for r, p in cdf:
        w.writerow([_fmt(r), _fmt(p)])
    return buf.getvalue()


# --------------------------------------------------------------------------
# Queue validation
# --------------------------------------------------------------------------

VALIDATION_HEADER = ["case", "quantity", "analytic", "monte_carlo", "stderr", "rel_err"]


@dataclass(frozen=True)
class QueueCase:
    name: str
    arrival_rate: float
    tau: float = 1.0
    mu_mat: float = 1250.0
    mu_mis: float = 1000.0
    # PTQ part; z=None skips it
    z: float = None
    gamma_db: float = 10.0
    sigma_db: float = 4.0
    slot: float = 1e-3
    packet_bits: float = 800.0
    buffer: int = 20


DEFAULT_CASES = (
    QueueCase("mm1", arrival_rate=1000.0, tau=1.0),
    QueueCase("default_tau0.7", arrival_rate=1000.0, tau=0.7, z=3.0e5),
    QueueCase("bitcom_link", arrival_rate=1000.0, z=5.5e5, gamma_db=5.0, sigma_db=4.0),
    QueueCase("no_arrivals", arrival_rate=0.0, z=1e6),
)


def _rel(a, b):
    if a == b:
        return 0.0
    return abs(b - a) / abs(a) if a else math.inf


def validate_queue(cases=DEFAULT_CASES, packets=1_000_000, slots=1_000_000, seed=0):
    """Analytic vs simulated SCQ sojourn and PTQ loss, queue length and delay."""
    rows = []
    for k, c in enumerate(cases):
        semcom = c.tau < 1.0
        if c.arrival_rate > 0 and (c.z is None or semcom):
            d = scq_delay(c.arrival_rate, c.tau, c.mu_mat, c.mu_mis)
            sim = simulate_scq(c.arrival_rate, c.tau, c.mu_mat, c.mu_mis, packets, seed + k)
            rows.append((c.name, "scq_delay_s", d, sim.mean_sojourn, sim.stderr,
                         _rel(d, sim.mean_sojourn)))
        if c.z is not None:
            rate_in = semcom_ptq_rate(c.tau, c.mu_mat, c.mu_mis) if semcom else c.arrival_rate
            rows.extend(_ptq_rows(c, rate_in, slots, seed + 1000 + k))
    return rows


def _ptq_rows(c: QueueCase, rate_in, slots, seed):
    kernel = PtqKernel(arrival_pmf(rate_in, c.slot), c.buffer, rate_in, c.slot)
    dep = departure_pmf(c.z, c.gamma_db, c.sigma_db, c.slot, c.packet_bits)
    _, alpha, G, mean_q = kernel.solve(dep)
    theta = kernel.loss(G)
    lam_eff = (1 - theta) * rate_in
    delay = mean_q / lam_eff if lam_eff > 0 else 0.0
    sim = simulate_ptq(poisson_sampler(rate_in * c.slot),
                       sinr_departure_sampler(c.z, c.gamma_db, c.sigma_db, c.slot, c.packet_bits),
                       c.buffer, n_slots=slots, seed=seed, T=c.slot)
    sim_delay = 0.0 if math.isnan(sim.mean_delay) else sim.mean_delay
    return [
        (c.name, "loss_ratio", theta, sim.loss_ratio, sim.loss_stderr, _rel(theta, sim.loss_ratio)),
        (c.name, "mean_queue", mean_q, sim.mean_queue, sim.queue_stderr, _rel(mean_q, sim.mean_queue)),
        (c.name, "ptq_delay_s", delay, sim_delay, sim.delay_stderr, _rel(delay, sim_delay)),
    ]


def validation_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VALIDATION_HEADER)
    for name, q, a, m, se, rel in rows:
        w.writerow([name, q, _fmt(a), _fmt(m), _fmt(se), _fmt(rel)])
    return buf.getvalue()
