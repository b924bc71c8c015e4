"""Per-BS bandwidth allocation for a fixed association and mode selection.

Each BS splits its whole budget among its MUs to maximise total message
rate, with every MU held at or above its threshold bandwidth. SemCom rates
``tau * beta * ln(1 + z s / c)`` are concave in ``z`` and BitCom rates
``rho * s * z`` are linear, so the optimum equalises marginal rates: a
shared multiplier ``nu`` sets ``z_i = max(t_i, tau beta / nu - c / s)`` for
SemCom MUs, and any budget left once ``nu`` reaches the best BitCom slope
goes to that BitCom MU.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .b2m import Mode
from .errors import InfeasibleBudget


@dataclass(frozen=True)
class BAUser:
    """One MU as seen by a BS's allocation problem."""

    mu: int
    mode: Mode
    floor: float  # threshold bandwidth, Hz
    spectral_eff: float  # log2(1 + mean SINR)
    tau: float = 1.0
    scale: float = 1.0  # B2M beta
    knee: float = 1.0  # B2M c, bit/s
    rho: float = 0.0

    def rate(self, z):
        bits = np.asarray(z, dtype=float) * self.spectral_eff
        if self.mode is Mode.SEM:
            return self.tau * self.scale * np.log1p(bits / self.knee)
        return self.rho * bits

    def marginal(self, z):
        """d rate / d z in msg/s per Hz."""
        if self.mode is Mode.SEM:
            return self.tau * self.scale * self.spectral_eff / (
                self.knee + np.asarray(z, dtype=float) * self.spectral_eff)
        return np.full(np.shape(z), self.rho * self.spectral_eff)

    def demand_at(self, nu):
        """SemCom bandwidth whose marginal rate equals ``nu`` (floored)."""
        return max(self.floor, self.tau * self.scale / nu - self.knee / self.spectral_eff)


def objective(users, z) -> float:
    return float(sum(u.rate(zi) for u, zi in zip(users, z)))


def _check_budget(users, budget):
    need = sum(u.floor for u in users)
    if need > budget * (1 + 1e-12):
        raise InfeasibleBudget(f"thresholds need {need:.6g} Hz, budget is {budget:.6g} Hz")


def solve_ba_for_bs(users, budget, rel_tol=1e-8) -> np.ndarray:
    """Optimal split of ``budget`` (Hz) among ``users``.

    Returns bandwidths in the order of ``users``; they sum to ``budget`` and
    respect every floor. Raises :class:`InfeasibleBudget` if the floors alone
    exceed the budget.
    """
    users = list(users)
    n = len(users)
    if n == 0:
        return np.zeros(0)
    _check_budget(users, budget)
    floors = np.array([u.floor for u in users])
    sem = [k for k, u in enumerate(users) if u.mode is Mode.SEM]
    bit = [k for k, u in enumerate(users) if u.mode is Mode.BIT]

    def sem_total(nu):
        return sum(users[k].demand_at(nu) for k in sem)

    bit_floor = floors[bit].sum() if bit else 0.0
    best_bit = max((users[k].marginal(0.0).item() for k in bit), default=0.0)

    z = floors.copy()
    if bit and sem_total(best_bit) + bit_floor <= budget:
        # SemCom MUs stop at the BitCom slope; the rest is linear gain
        for k in sem:
            z[k] = users[k].demand_at(best_bit)
        slopes = np.array([users[k].marginal(0.0).item() for k in bit])
        winners = [bit[m] for m in np.flatnonzero(slopes >= best_bit * (1 - 1e-12))]
        z[winners] += (budget - z.sum()) / len(winners)
        return z

    # every SemCom MU sits at its floor once nu reaches its floor marginal
    room = budget - bit_floor
    hi = max(users[k].marginal(users[k].floor).item() for k in sem)
    lo = best_bit
    if lo <= 0:
        lo = hi
        while sem_total(lo) <= room:
            lo /= 2.0
    while hi - lo > 1e-14 * hi:
        mid = 0.5 * (lo + hi)
        if sem_total(mid) > room:
            lo = mid
        else:
            hi = mid
    nu = hi
    for k in sem:
        z[k] = users[k].demand_at(nu)
    active = [k for k in sem if z[k] > users[k].floor]
    if not active:
        return z
    # close the budget exactly on the active set found by bisection
    fixed = bit_floor + sum(z[k] for k in sem if k not in active)
    num = sum(users[k].tau * users[k].scale for k in active)
    den = (budget - fixed) + sum(users[k].knee / users[k].spectral_eff for k in active)
    nu = num / den
    for k in active:
        z[k] = max(users[k].floor,
                   users[k].tau * users[k].scale / nu - users[k].knee / users[k].spectral_eff)
    resid = budget - z.sum()
    if abs(resid) > rel_tol * budget:
        raise AssertionError(f"allocation misses the budget by {resid:.3g} Hz")
    z[active] += resid / len(active)
    return z


def kkt_residual(users, z) -> float:
    """Largest relative spread of marginal rates among MUs above their floor.

    Also folds in floor-bound MUs whose marginal exceeds the common value,
    which would signal a missed improvement.
    """
    users = list(users)
    marg = np.array([u.marginal(zi).item() for u, zi in zip(users, z)])
    free = [k for k, u in enumerate(users) if z[k] > u.floor * (1 + 1e-9) + 1e-9]
    if not free:
        return 0.0
    common = marg[free]
    ref = common.max()
    spread = (ref - common.min()) / ref
    bound = [k for k in range(len(users)) if k not in free]
    excess = max(((marg[k] - ref) / ref for k in bound), default=0.0)
    return float(max(spread, excess, 0.0))


def brute_force_ba(users, budget, grid_steps=10_000) -> np.ndarray:
    """Exhaustive grid search over splits, for at most three users.

    The surplus above the floors is split in units of ``budget / grid_steps``;
    the last user takes whatever is left. Test oracle only.
    """
    users = list(users)
    n = len(users)
    if n > 3:
        raise ValueError("brute force is limited to three users")
    if n == 0:
        return np.zeros(0)
    _check_budget(users, budget)
    floors = np.array([u.floor for u in users])
    surplus = budget - floors.sum()
    if n == 1:
        return np.array([budget])
    step = budget / grid_steps
    units = int(math.floor(surplus / step + 1e-9))
    grid = np.arange(units + 1) * step
    best, best_z = -np.inf, None
    if n == 2:
        z0 = floors[0] + grid
        z1 = budget - z0
        val = users[0].rate(z0) + users[1].rate(z1)
        k = int(np.argmax(val))
        return np.array([z0[k], z1[k]])
    for a in grid:
        z0 = floors[0] + a
        b = grid[grid <= surplus - a + 1e-9 * budget]
        z1 = floors[1] + b
        z2 = budget - z0 - z1
        val = users[0].rate(z0) + users[1].rate(z1) + users[2].rate(z2)
        k = int(np.argmax(val))
        if val[k] > best:
            best, best_z = val[k], np.array([z0, z1[k], z2[k]])
    return best_z


def water_fill(gains, budget, floors=None):
    """Classic water-filling of ``budget`` over parallel channels.

    Shares are ``max(floor_i, budget * (level - 1 / g_i))`` with the water
    level chosen so they sum to ``budget``. Raises :class:`InfeasibleBudget`
    when the floors exceed the budget.
    """
    g = np.asarray(gains, dtype=float)
    n = len(g)
    if n == 0:
        return np.zeros(0)
    floors = np.zeros(n) if floors is None else np.asarray(floors, dtype=float)
    if floors.sum() > budget * (1 + 1e-12):
        raise InfeasibleBudget(f"floors need {floors.sum():.6g} Hz, budget is {budget:.6g} Hz")
    inv = 1.0 / np.maximum(g, 1e-300)

    def alloc(level):
        return np.maximum(floors, budget * (level - inv))

    lo = 0.0
    hi = inv.max() + 1.0
    for _ in itertools.count():
        if alloc(hi).sum() >= budget:
            break
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if alloc(mid).sum() > budget:
            hi = mid
        else:
            lo = mid
    z = alloc(0.5 * (lo + hi))
    above = z > floors
    if above.any():
        z[above] += (budget - z.sum()) / above.sum()
    else:
        z += (budget - z.sum()) / n
    return z
