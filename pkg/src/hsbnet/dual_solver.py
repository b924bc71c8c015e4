"""User association and mode selection by Lagrangian dual decomposition.

With every link's bandwidth pinned at its threshold, association and mode
selection become an assignment problem coupled only through the per-BS
budgets. Relaxing the budgets with multipliers ``eta_j`` leaves a per-MU
choice over ``2J`` options (SemCom or BitCom at each BS), scored by

    xi[i, j']   = rate_S[i, j]  - eta_j * z_S[i, j]   for j' = j < J
    xi[i, J+j]  = rate_B[i, j]  - eta_j * z_B[i, j]

Each iteration picks the best option per MU, repairs budget overruns by
moving the heaviest MUs of an overloaded BS to their next-best option that
fits, and takes a projected subgradient step on ``eta``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .b2m import Mode
from .errors import MUDropError, NoFeasibleLink

log = logging.getLogger(__name__)

MODES = (Mode.SEM, Mode.BIT)


@dataclass
class Assignment:
    """Per-MU serving BS, mode and bandwidth.

    ``bs[i] == -1`` marks an MU left unserved. ``mode`` holds 0 for SemCom
    and 1 for BitCom.
    """

    bs: np.ndarray
    mode: np.ndarray
    bandwidth: Optional[np.ndarray] = None
    dropped: tuple = ()

    @property
    def num_mus(self) -> int:
        return len(self.bs)

    def modes(self) -> List[Mode]:
        return [MODES[m] for m in self.mode]

    def served(self) -> np.ndarray:
        return self.bs >= 0

    def indicators(self, num_bss):
        """Binary (x, y) matrices of shape (U, J)."""
        U = self.num_mus
        x = np.zeros((U, num_bss), dtype=int)
        y = np.zeros((U, num_bss), dtype=int)
        for i in np.flatnonzero(self.served()):
            x[i, self.bs[i]] = 1
            y[i, self.bs[i]] = int(self.mode[i] == 0)
        return x, y

    def demand(self, z_table) -> np.ndarray:
        d = np.zeros(self.num_mus)
        s = self.served()
        d[s] = z_table[np.flatnonzero(s), self.bs[s], self.mode[s]]
        return d

    def loads(self, z_table, num_bss) -> np.ndarray:
        s = self.served()
        return np.bincount(self.bs[s], weights=self.demand(z_table)[s], minlength=num_bss)

    def copy(self) -> "Assignment":
        bw = None if self.bandwidth is None else self.bandwidth.copy()
        return Assignment(self.bs.copy(), self.mode.copy(), bw, tuple(self.dropped))


class HarmonicStep:
    """Stepsize ``scale / l``."""

    def __init__(self, scale=1e-6):
        self.scale = scale

    def __call__(self, l):
        return self.scale / l


class NormalizedStep:
    """Stepsize ``eps0 / (l * z_max)``, insensitive to the bandwidth unit."""

    def __init__(self, eps0, z_max):
        self.eps0 = eps0
        self.z_max = z_max

    def __call__(self, l):
        return self.eps0 / (l * self.z_max)


def xi_coefficients(eta, rate_table, z_table) -> np.ndarray:
    """Option scores, shape (U, 2J); infeasible options are ``-inf``."""
    eta = np.asarray(eta, dtype=float)
    feas = np.isfinite(z_table)
    with np.errstate(invalid="ignore"):
        score = rate_table - eta[None, :, None] * z_table
    score = np.where(feas, score, -np.inf)
    return np.concatenate((score[:, :, 0], score[:, :, 1]), axis=1)


def assign(xi):
    """Best option per MU; ties go to the smallest option index."""
    xi = np.asarray(xi)
    J = xi.shape[1] // 2
    dead = ~np.isfinite(xi).any(axis=1)
    if dead.any():
        raise NoFeasibleLink(np.flatnonzero(dead).tolist())
    best = np.argmax(xi, axis=1)
    return best % J, best // J


def subgradient_step(eta, loads, budgets, l, schedule) -> np.ndarray:
    """Projected step ``max(eta - eps(l) * (Z - load), 0)``."""
    grad = np.asarray(budgets, dtype=float) - loads
    return np.maximum(np.asarray(eta, dtype=float) - schedule(l) * grad, 0.0)


def repair(assignment: Assignment, xi, z_table, budgets, on_drop="raise") -> Assignment:
    """Move MUs off overloaded BSs until every budget holds.

    For the lowest-indexed overloaded BS, its MU with the largest bandwidth
    demand (lowest index on ties) moves to its best remaining option by
    ``xi`` that fits in the target BS's residual budget. An MU is never
    offered an option it already held. If nothing fits, the MU is either
    reported through :class:`MUDropError` (``on_drop="raise"``) or left
    unserved and listed in ``dropped``.
    """
    a = assignment.copy()
    budgets = np.asarray(budgets, dtype=float)
    J = len(budgets)
    loads = a.loads(z_table, J)
    tried = [set() for _ in range(a.num_mus)]
    dropped = list(a.dropped)
    slack = 1e-12 * budgets
    while True:
        over = np.flatnonzero(loads > budgets + slack)
        if not len(over):
            break
        j = over[0]
        members = np.flatnonzero(a.bs == j)
        demand = z_table[members, j, a.mode[members]]
        i = members[np.argmax(demand)]  # argmax picks the lowest index on ties
        d_old = z_table[i, j, a.mode[i]]
        tried[i].add(j + J * a.mode[i])
        order = np.argsort(-xi[i], kind="stable")
        moved = False
        for opt in order:
            if opt in tried[i] or not np.isfinite(xi[i, opt]):
                continue
            j2, m2 = opt % J, opt // J
            d_new = z_table[i, j2, m2]
            base = loads[j2] - (d_old if j2 == j else 0.0)
            if base + d_new <= budgets[j2] + slack[j2]:
                loads[j] -= d_old
                loads[j2] += d_new
                a.bs[i], a.mode[i] = j2, m2
                tried[i].add(opt)
                moved = True
                break
        if not moved:
            if on_drop == "raise":
                raise MUDropError([int(i)])
            log.debug("MU %d cannot be placed within any BS budget; leaving it unserved", i)
            loads[j] -= d_old
            a.bs[i] = -1
            dropped.append(int(i))
    a.dropped = tuple(dropped)
    return a


def bandwidth_price(scenario) -> np.ndarray:
    """Per-BS opportunity cost of bandwidth, msg/s per Hz.

    Spare bandwidth at BS ``j`` is worth at most the steepest BitCom rate
    slope ``rho_ij * log2(1 + gamma_ij)`` among the MUs. Starting the
    multipliers here makes the relaxed assignment weigh threshold rates
    against the throughput the consumed bandwidth could otherwise earn.
    """
    se = np.log2(1.0 + 10.0 ** (np.asarray(scenario.mean_sinr_db) / 10.0))
    return (np.asarray(scenario.rho) * se).max(axis=0, initial=0.0)


def primal_value(assignment: Assignment, rate_table) -> float:
    s = assignment.served()
    idx = np.flatnonzero(s)
    return float(rate_table[idx, assignment.bs[s], assignment.mode[s]].sum())


@dataclass
class DualState:
    eta: np.ndarray
    iteration: int = 0
    trace: list = field(default_factory=list)  # (iter, F_eta, primal, max_violation_hz)
    eta_history: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "F_eta", "primal", "max_violation_hz"])
            for it, f, p, v in self.trace:
                w.writerow([it, f"{f:.9g}", f"{p:.9g}", f"{v:.9g}"])


def solve_ua_ms(scenario, table, max_iters=500, schedule=None, tol=1e-6,
                exclude_infeasible=False, objective=None, eta0=None):
    """Run the dual loop and return ``(best Assignment, DualState)``.

    ``table`` is a :class:`~hsbnet.thresholds.ThresholdTable`. The returned
    assignment is the best budget-feasible one seen over all iterations,
    ranked first by the number of unserved MUs and then by ``objective``
    (an ``Assignment -> float`` callable, evaluated once per distinct
    assignment). The default objective is the sum of threshold-bandwidth
    rates. MUs with no feasible option at all raise :class:`NoFeasibleLink`
    unless ``exclude_infeasible`` is set, in which case they are left
    unserved. ``eta0`` sets the starting multipliers (zeros by default).
    """
    budgets = np.asarray(scenario.bandwidth, dtype=float)
    J = len(budgets)
    schedule = schedule or HarmonicStep()
    z_table, rate_table = table.z, table.rate
    dead = ~np.isfinite(z_table).any(axis=(1, 2))
    if dead.any() and not exclude_infeasible:
        raise NoFeasibleLink(np.flatnonzero(dead).tolist())
    live = np.flatnonzero(~dead)

    if objective is None:
        objective = lambda a: primal_value(a, rate_table)  # noqa: E731
    seen = {}
    state = DualState(eta=np.zeros(J) if eta0 is None else np.array(eta0, dtype=float))
    best, best_key = None, None
    for l in range(1, max_iters + 1):
        xi = xi_coefficients(state.eta, rate_table, z_table)
        bs = np.full(len(z_table), -1)
        mode = np.zeros(len(z_table), dtype=int)
        bs[live], mode[live] = assign(xi[live])
        relaxed = Assignment(bs, mode, dropped=tuple(np.flatnonzero(dead).tolist()))
        loads = relaxed.loads(z_table, J)
        f_eta = float(xi[live].max(axis=1).sum() + state.eta @ budgets)
        violation = float(max(0.0, (loads - budgets).max()))

        fixed = repair(relaxed, xi, z_table, budgets, on_drop="exclude")
        tag = fixed.bs.tobytes() + fixed.mode.tobytes()
        primal = seen.get(tag)
        if primal is None:
            primal = seen[tag] = objective(fixed)
        key = (-len(fixed.dropped), primal)
        if best_key is None or key > best_key:
            best, best_key = fixed, key
        state.trace.append((l, f_eta, best_key[1], violation))
        state.iteration = l

        new_eta = subgradient_step(state.eta, loads, budgets, l, schedule)
        change = np.abs(new_eta - state.eta).max()
        state.eta = new_eta
        state.eta_history.append(new_eta)
        if change <= tol * max(np.abs(new_eta).max(), 0.0):
            break
    if best.dropped:
        log.warning("MUs %s left unserved", list(best.dropped))
    return best, state
