"""Analytic queueing engine for SemCom/BitCom uplinks.

A SemCom MU feeds a semantic-coding queue (SCQ, M/G/1 with a two-branch
exponential service mixture) into a finite packet-transmission queue (PTQ).
A BitCom MU only has the PTQ. The PTQ is a slotted chain on {0, ..., F}:
packets due for transmission leave first, then arrivals enter and anything
beyond the buffer is dropped,

    Q(t+1) = min(max(Q(t) - D(t), 0) + A(t), F).

Per-slot arrival counts are Poisson with mean ``rate * T``; per-slot
departures are ``floor(T z log2(1 + gamma) / L)`` with gamma log-normal
(Gaussian in dB).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import special
from scipy.linalg import lapack
from scipy.sparse.csgraph import connected_components

from .b2m import B2MSurrogateParams, Mode
from .errors import DegenerateLink, InstabilityError, SingularChain

log = logging.getLogger(__name__)

TAIL_MASS = 1e-12
# standard-normal quantile beyond which the upper tail is < TAIL_MASS
_Z_TAIL = float(-special.ndtri(TAIL_MASS))
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class Pmf:
    """Probability mass function on {0, 1, ..., len(p) - 1}."""

    p: np.ndarray

    @classmethod
    def point(cls, k: int) -> "Pmf":
        p = np.zeros(k + 1)
        p[k] = 1.0
        return cls(p)

    @classmethod
    def from_weights(cls, w) -> "Pmf":
        w = np.clip(np.asarray(w, dtype=float), 0.0, None)
        nz = np.flatnonzero(w)
        w = w[: nz[-1] + 1] if nz.size else w[:1]
        return cls(w / w.sum())

    @property
    def k_max(self) -> int:
        return len(self.p) - 1

    def mean(self) -> float:
        return float(np.arange(len(self.p)) @ self.p)

    def survival(self, n: int) -> np.ndarray:
        """Pr{X >= k} for k = 0..n-1 (zero-padded past the support)."""
        tail = np.cumsum(self.p[::-1])[::-1]
        out = np.zeros(n)
        m = min(n, len(tail))
        out[:m] = tail[:m]
        return out

    def padded(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        m = min(n, len(self.p))
        out[:m] = self.p[:m]
        return out


# --------------------------------------------------------------------------
# Semantic-coding queue
# --------------------------------------------------------------------------

def scq_moments(tau, mu_mat, mu_mis):
    """First and second moments of the mixture service time."""
    m1 = tau / mu_mat + (1.0 - tau) / mu_mis
    m2 = 2.0 * tau / mu_mat**2 + 2.0 * (1.0 - tau) / mu_mis**2
    return m1, m2


def scq_delay(lam, tau, mu_mat, mu_mis, literal=False):
    """Mean SCQ sojourn time (s) from the Pollaczek-Khinchine formula.

    Service is Exp(mu_mat) with probability ``tau`` and Exp(mu_mis)
    otherwise. ``literal=True`` instead evaluates the expanded form that
    treats the service time as the weighted sum
    ``tau * I_mat + (1 - tau) * I_mis`` of independent exponentials; it gives
    a smaller second moment and is kept only for side-by-side comparison.
    """
    m1, m2 = scq_moments(tau, mu_mat, mu_mis)
    load = lam * m1
    if load >= 1.0:
        raise InstabilityError(f"SCQ load lambda*E[I] = {load:.6g} >= 1")
    if literal:
        num = lam * (tau * (1 - tau) / (mu_mat * mu_mis) + (tau / mu_mat) ** 2
                     + ((1 - tau) / mu_mis) ** 2)
        return num / (1.0 - load) + m1
    return lam * m2 / (2.0 * (1.0 - load)) + m1


def semcom_ptq_rate(tau, mu_mat, mu_mis):
    """Poisson rate of packets entering a SemCom PTQ from its SCQ."""
    return tau * mu_mat + (1.0 - tau) * mu_mis


# --------------------------------------------------------------------------
# PTQ PMFs
# --------------------------------------------------------------------------

def departure_pmf(z, gamma_db, sigma_db, T, L) -> Pmf:
    """PMF of packets sent per slot, ``floor(T z log2(1 + gamma) / L)``."""
    if z <= 0:
        return Pmf.point(0)
    w = T * z / L  # packets per slot per bit/s/Hz
    if sigma_db <= 0:
        k = math.floor(w * math.log2(1.0 + 10.0 ** (gamma_db / 10.0)))
        return Pmf.point(k)
    top_db = gamma_db + _Z_TAIL * sigma_db
    k_top = int(math.floor(w * math.log2(1.0 + 10.0 ** (top_db / 10.0)))) + 1
    k = np.arange(1, k_top + 2)
    # SINR (dB) needed to send at least k packets; capped exponent keeps
    # expm1 finite while pushing the survival term to exactly zero
    g = 10.0 * np.log10(np.expm1(np.minimum(k * (_LN2 / w), 700.0)))
    # P(D >= k) and P(D < k); each interval is differenced on the side of
    # the median where both ends are small, so tail masses keep their
    # relative precision instead of cancelling against 1
    x = (gamma_db - g) / sigma_db
    surv = np.concatenate(([1.0], special.ndtr(x)))
    cdf = np.concatenate(([0.0], special.ndtr(-x)))
    lower = x >= 0  # interval k ends at x[k]; below the median use the CDF
    p = np.where(lower, cdf[1:] - cdf[:-1], surv[:-1] - surv[1:])
    p = np.maximum(p, 0.0)
    return Pmf(p / p.sum())


def arrival_pmf(rate, T) -> Pmf:
    """Poisson PMF of per-slot arrivals with mean ``rate * T``."""
    m = rate * T
    if m <= 0:
        return Pmf.point(0)
    k_top = int(math.ceil(m + 14.0 * math.sqrt(m) + 30.0))
    k = np.arange(k_top + 1)
    p = np.exp(k * math.log(m) - m - special.gammaln(k + 1))
    tail = np.cumsum(p[::-1])[::-1]
    keep = np.flatnonzero(tail >= TAIL_MASS)
    n = keep[-1] + 1 if keep.size else 1
    return Pmf.from_weights(p[:n])


# --------------------------------------------------------------------------
# PTQ chain
# --------------------------------------------------------------------------

def _post_departure(dep: Pmf, F: int) -> np.ndarray:
    """P[a, m] = Pr{max(a - D, 0) = m}."""
    n = F + 1
    a = np.arange(n)
    idx = a[:, None] - a[None, :]
    dep_pad = dep.padded(n)
    post = np.where(idx >= 0, dep_pad[np.clip(idx, 0, F)], 0.0)
    post[:, 0] = dep.survival(n)
    return post


def _admission(arr: Pmf, F: int) -> np.ndarray:
    """P[m, b] = Pr{min(m + A, F) = b}."""
    n = F + 1
    a = np.arange(n)
    idx = a[None, :] - a[:, None]
    arr_pad = arr.padded(n)
    adm = np.where(idx >= 0, arr_pad[np.clip(idx, 0, F)], 0.0)
    adm[:, F] = arr.survival(n + 1)[F - a]
    return adm


def _overflow(arr: Pmf, F: int) -> np.ndarray:
    """E[(m + A - F)^+] for each post-departure length m."""
    room = F - np.arange(F + 1)
    k = np.arange(len(arr.p))
    return np.maximum(k[None, :] - room[:, None], 0) @ arr.p


def transition_matrix(arr: Pmf, dep: Pmf, F: int) -> np.ndarray:
    """One-step transition matrix of the PTQ length, shape (F+1, F+1)."""
    return _post_departure(dep, F) @ _admission(arr, F)


def _closed_class_from_empty(omega: np.ndarray) -> Optional[np.ndarray]:
    adj = omega > 0
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    reach = np.zeros(len(omega), bool)
    frontier = [0]
    reach[0] = True
    while frontier:
        s = frontier.pop()
        for t in np.flatnonzero(adj[s] & ~reach):
            reach[t] = True
            frontier.append(t)
    closed = []
    for c in np.unique(labels[reach]):
        members = labels == c
        if not adj[members][:, ~members].any():
            closed.append(members)
    return closed[0] if len(closed) == 1 else None


# below this, LU components carry mostly rounding noise; refine with GTH
GTH_BELOW = 1e-10


def _gth(omega: np.ndarray) -> Optional[np.ndarray]:
    """Grassmann-Taksar-Heyman elimination: subtraction free, so even tiny
    stationary probabilities keep full relative precision. Returns None if
    some state cannot step down (censored chain undefined) or the
    elimination overflows on a near-saturated chain."""
    A = np.array(omega, dtype=float, order="F")
    n = len(A)
    for k in range(n - 1, 0, -1):
        row = A[k, :k]
        s = row.sum()
        if not s > 0:
            return None
        col = A[:k, k]
        with np.errstate(over="ignore"):
            col /= s
        A[:k, :k] += col[:, None] * row
    pi = np.empty(n)
    pi[0] = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n):
            pi[k] = pi[:k].dot(A[:k, k])
        pi /= pi.sum()
    return pi if np.all(np.isfinite(pi)) else None


def steady_state(omega: np.ndarray) -> np.ndarray:
    """Stationary vector of a row-stochastic matrix.

    Solves ``(Omega^T - I) alpha = 0`` with the last equation replaced by the
    normalisation. When the chain has several closed classes the one
    reachable from the empty queue is used. If some probabilities come out
    below ``GTH_BELOW`` the vector is recomputed by GTH elimination, which
    keeps small tail masses (and hence tiny loss ratios) accurate.
    """
    alpha = _lu_steady_state(omega)
    if alpha.min() < GTH_BELOW:
        refined = _gth(omega)
        if refined is not None:
            return refined
    return alpha


def _lu_steady_state(omega: np.ndarray) -> np.ndarray:
    n = len(omega)
    A = omega.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    _, _, alpha, info = lapack.dgesv(A, b)
    ok = (info == 0 and alpha.min() > -1e-9
          and np.abs(omega.T @ alpha - alpha).max() < 1e-10)
    if not ok:
        members = _closed_class_from_empty(omega)
        if members is None:
            raise SingularChain("no unique closed class reachable from the empty queue")
        sub = _lu_steady_state(omega[np.ix_(members, members)])
        alpha = np.zeros(n)
        alpha[members] = sub
    alpha = np.maximum(alpha, 0.0)
    return alpha / alpha.sum()


def power_iteration(omega: np.ndarray, squarings: int = 64) -> np.ndarray:
    """Long-run distribution started from the empty queue.

    Repeatedly squares the lazy chain ``(Omega + I) / 2`` (same stationary
    vector, aperiodic) and reads off the row for state 0.
    """
    P = 0.5 * (omega + np.eye(len(omega)))
    for _ in range(squarings):
        P = P @ P
        P /= P.sum(axis=1, keepdims=True)
    return P[0] / P[0].sum()


def expected_drops(alpha, arr: Pmf, dep: Pmf, F: int) -> float:
    """Mean packets dropped per slot in steady state."""
    return float(alpha @ _post_departure(dep, F) @ _overflow(arr, F))


def expected_drops_literal(alpha, arr: Pmf, dep: Pmf, F: int) -> float:
    """Closed-form drop count with ``W(m)`` read as the queue-length CDF.

    Equal to :func:`expected_drops` up to rounding; kept as a cross-check.
    """
    W = np.cumsum(alpha)
    dep_cdf = np.cumsum(dep.padded(F + len(arr.p) + 1))
    total = 0.0
    for f in range(1, len(arr.p)):
        pf = arr.p[f]
        if f <= F:
            inner = sum(dep_cdf[k] * (1.0 - W[F - f + k]) for k in range(f))
        else:
            inner = (f - F) + sum(dep_cdf[k] * (1.0 - W[k]) for k in range(F))
        total += pf * inner
    return float(total)


def loss_ratio(G, arrival_rate, T) -> float:
    theta = G / (arrival_rate * T)
    if not 0.0 <= theta <= 1.0:
        log.debug("loss ratio %.3g clamped to [0, 1]", theta)
        theta = min(max(theta, 0.0), 1.0)
    return theta


def ptq_delay(alpha, arrival_rate, theta, T) -> float:
    """Mean PTQ delay (s) via Little's law with the admitted arrival rate."""
    lam_eff = (1.0 - theta) * arrival_rate
    if lam_eff <= 0:
        raise DegenerateLink("effective PTQ arrival rate is zero")
    mean_q = float(np.arange(len(alpha)) @ alpha)
    return mean_q / lam_eff


# --------------------------------------------------------------------------
# Per-link model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkParams:
    """Everything needed to evaluate one MU-BS link in either mode."""

    gamma_db: float
    sigma_db: float
    slot: float
    packet_bits: float
    buffer: int
    arrival_rate: float
    tau: float
    mu_mat: float
    mu_mis: float
    rho: float
    b2m: B2MSurrogateParams

    @cached_property
    def spectral_eff(self) -> float:
        return math.log2(1.0 + 10.0 ** (self.gamma_db / 10.0))

    def ptq_arrival_rate(self, mode) -> float:
        if Mode(mode) is Mode.SEM:
            return semcom_ptq_rate(self.tau, self.mu_mat, self.mu_mis)
        return self.arrival_rate

    def scq_delay(self) -> float:
        return scq_delay(self.arrival_rate, self.tau, self.mu_mat, self.mu_mis)

    def rate(self, mode, z) -> float:
        """Message rate (msg/s) at bandwidth ``z``; scalar form of :func:`link_rate`."""
        bits = z * self.spectral_eff
        if mode == Mode.SEM:
            return self.tau * self.b2m.scale * math.log1p(bits / self.b2m.knee)
        return self.rho * bits


@dataclass(frozen=True)
class LinkQueueModel:
    mode: Mode
    z: float
    departure_pmf: Pmf
    arrival_pmf: Pmf
    transition: np.ndarray
    steady_state: np.ndarray
    mean_queue: float
    drops_per_slot: float
    loss_ratio: float
    ptq_delay: float
    scq_delay: float
    total_delay: float
    rate: float

    def to_json(self) -> str:
        """Debug dump of the PMFs, transition matrix and stationary vector."""
        return json.dumps({
            "mode": self.mode.value,
            "z": self.z,
            "departure_pmf": self.departure_pmf.p.tolist(),
            "arrival_pmf": self.arrival_pmf.p.tolist(),
            "transition": self.transition.tolist(),
            "steady_state": self.steady_state.tolist(),
            "mean_queue": self.mean_queue,
            "drops_per_slot": self.drops_per_slot,
            "loss_ratio": self.loss_ratio,
            "ptq_delay": self.ptq_delay,
            "scq_delay": self.scq_delay,
            "total_delay": self.total_delay,
        })


class PtqKernel:
    """Bandwidth-independent parts of a PTQ chain, reused across ``z`` values."""

    def __init__(self, arr: Pmf, F: int, arrival_rate: float, T: float):
        self.arr = arr
        self.F = F
        self.arrival_rate = arrival_rate
        self.T = T
        n = F + 1
        a = np.arange(n)
        idx = a[:, None] - a[None, :]
        self._mask = idx >= 0
        self._idx = np.clip(idx, 0, F)
        self._adm = _admission(arr, F)
        self._overflow = _overflow(arr, F)
        self._states = a.astype(float)

    def post_departure(self, dep: Pmf) -> np.ndarray:
        n = self.F + 1
        p = dep.p
        dep_pad = np.zeros(n)
        m = min(n, len(p))
        dep_pad[:m] = p[:m]
        post = np.where(self._mask, dep_pad[self._idx], 0.0)
        tail = np.cumsum(p[::-1])[::-1]
        surv = np.zeros(n)
        surv[:m] = tail[:m]
        post[:, 0] = surv
        return post

    def solve(self, dep: Pmf):
        """(Omega, alpha, drops per slot, mean queue) for a departure PMF."""
        post = self.post_departure(dep)
        omega = post @ self._adm
        alpha = steady_state(omega)
        G = float(alpha @ post @ self._overflow)
        return omega, alpha, G, float(self._states @ alpha)

    def loss(self, G) -> float:
        """Drops over mean arrivals of the (truncated) arrival PMF, so a
        saturated queue gives exactly 1."""
        m = self.arr.mean()
        if m <= 0:
            return 0.0
        theta = loss_ratio(G, m / self.T, self.T)
        return 1.0 if theta > 1.0 - 1e-12 else theta

    def metrics(self, dep: Pmf):
        """(loss ratio, PTQ delay in s) without building a full model."""
        _, _, G, mean_q = self.solve(dep)
        theta = self.loss(G)
        lam_eff = (1.0 - theta) * self.arrival_rate
        return theta, (mean_q / lam_eff if lam_eff > 0 else math.inf)


def ptq_kernel(mode, link: "LinkParams") -> PtqKernel:
    rate_in = link.ptq_arrival_rate(mode)
    return PtqKernel(arrival_pmf(rate_in, link.slot), link.buffer, rate_in, link.slot)


def link_model(mode, z, link: LinkParams, kernel: Optional[PtqKernel] = None) -> LinkQueueModel:
    """Build the full analytic queue model for one link at bandwidth ``z``.

    ``kernel`` may be passed to reuse the bandwidth-independent pieces.
    """
    mode = Mode(mode)
    if kernel is None:
        kernel = ptq_kernel(mode, link)
    scq = link.scq_delay() if mode is Mode.SEM else 0.0
    dep = departure_pmf(z, link.gamma_db, link.sigma_db, link.slot, link.packet_bits)
    omega, alpha, G, mean_q = kernel.solve(dep)
    rate_in = kernel.arrival_rate
    theta = kernel.loss(G)
    lam_eff = (1.0 - theta) * rate_in
    ptq = mean_q / lam_eff if lam_eff > 0 else math.inf
    return LinkQueueModel(
        mode=mode, z=float(z), departure_pmf=dep, arrival_pmf=kernel.arr,
        transition=omega, steady_state=alpha, mean_queue=mean_q,
        drops_per_slot=G, loss_ratio=theta, ptq_delay=ptq, scq_delay=scq,
        total_delay=scq + ptq, rate=link.rate(mode, z),
    )


def link_metrics(mode, z, link: LinkParams, kernel: Optional[PtqKernel] = None):
    """(total delay s, loss ratio, message rate msg/s) for one link."""
    m = link_model(mode, z, link, kernel)
    if not math.isfinite(m.ptq_delay):
        raise DegenerateLink(f"link saturated at z={z:g} Hz")
    return m.total_delay, m.loss_ratio, m.rate
