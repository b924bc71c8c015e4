"""Network scenarios: config validation, seeded generation and JSON I/O."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .b2m import B2MSurrogateParams
from .errors import ConfigError, StabilityViolation
from .queueing import LinkParams, scq_moments


@dataclass(frozen=True)
class PathLoss:
    """Log-distance path loss with a Gaussian-in-dB SINR around the mean."""

    tx_power_dbm: float = 20.0
    ref_loss_db: float = 38.0
    exponent: float = 3.5
    ref_distance_m: float = 1.0
    noise_dbm: float = -104.0
    interference_db: float = 0.0
    # extra interference per MU in the network, dB
    interference_db_per_mu: float = 0.0

    def mean_sinr_db(self, distance_m, num_mus: int):
        d = np.maximum(np.asarray(distance_m, dtype=float), self.ref_distance_m)
        i_agg = self.interference_db + self.interference_db_per_mu * num_mus
        return (self.tx_power_dbm - self.ref_loss_db
                - 10.0 * self.exponent * np.log10(d / self.ref_distance_m)
                - self.noise_dbm - i_agg)


@dataclass(frozen=True)
class ScenarioConfig:
    num_mus: int = 200
    num_bss: int = 10
    radius_m: float = 300.0
    bs_layout: str = "uniform"
    bandwidth_hz: float = 15e6
    path_loss: PathLoss = field(default_factory=PathLoss)
    sinr_std_db: float = 4.0
    slot_s: float = 1e-3
    packet_bits: float = 800.0
    buffer_packets: int = 20
    arrival_rate: float = 1000.0
    mean_service_match_s: float = 8e-4
    mean_service_mismatch_s: float = 1e-3
    tau_range: tuple = (0.6, 1.0)
    throughput_min_range: tuple = (50.0, 100.0)
    rho_range: tuple = (2e-5, 2e-4)
    b2m_scale_range: tuple = (50.0, 150.0)
    b2m_knee_range: tuple = (0.5e6, 2e6)
    latency_cap_s: float = 0.02
    loss_cap: float = 0.01
    stability_retries: int = 100

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


REQUIRED = ("num_mus", "num_bss")

_pos = (lambda v: v > 0, "must be > 0")
_nonneg = (lambda v: v >= 0, "must be >= 0")
_any = (lambda v: True, "")
_unit_open = (lambda v: 0 < v < 1, "must be in (0, 1)")

_FIELDS = {
    "num_mus": (int, (lambda v: v >= 0, "must be >= 0")),
    "num_bss": (int, (lambda v: v >= 1, "must be >= 1")),
    "radius_m": (float, _pos),
    "bs_layout": (str, (lambda v: v in ("uniform", "ring"), "must be 'uniform' or 'ring'")),
    "bandwidth_hz": (float, _pos),
    "sinr_std_db": (float, _nonneg),
    "slot_s": (float, _pos),
    "packet_bits": (float, _pos),
    "buffer_packets": (int, (lambda v: v >= 1, "must be >= 1")),
    "arrival_rate": (float, _pos),
    "mean_service_match_s": (float, _pos),
    "mean_service_mismatch_s": (float, _pos),
    "tau_range": ("range", (lambda v: 0 < v[0] <= v[1] <= 1, "must satisfy 0 < lo <= hi <= 1")),
    "throughput_min_range": ("range", (lambda v: 0 <= v[0] <= v[1], "must satisfy 0 <= lo <= hi")),
    "rho_range": ("range", (lambda v: 0 < v[0] <= v[1] < 1, "must satisfy 0 < lo <= hi < 1")),
    "b2m_scale_range": ("range", (lambda v: 0 < v[0] <= v[1], "must satisfy 0 < lo <= hi")),
    "b2m_knee_range": ("range", (lambda v: 0 < v[0] <= v[1], "must satisfy 0 < lo <= hi")),
    "latency_cap_s": (float, _pos),
    "loss_cap": (float, _unit_open),
    "stability_retries": (int, (lambda v: v >= 0, "must be >= 0")),
}

_PATH_LOSS_FIELDS = {
    "tx_power_dbm": _any,
    "ref_loss_db": _any,
    "exponent": _pos,
    "ref_distance_m": _pos,
    "noise_dbm": _any,
    "interference_db": _any,
    "interference_db_per_mu": _any,
}


def _coerce(kind, value):
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise TypeError("expected an integer")
        return int(value)
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError("expected a number")
        if not math.isfinite(value):
            raise TypeError("expected a finite number")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise TypeError("expected a string")
        return value
    if kind == "range":
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise TypeError("expected [lo, hi]")
        return tuple(_coerce(float, v) for v in value)
    raise AssertionError(kind)


def validate_config(raw: Mapping[str, Any]) -> ScenarioConfig:
    """Check a raw (JSON-decoded) config and fill defaults.

    Raises :class:`ConfigError` listing every problem found, each tagged with
    its field path.
    """
    problems = []
    if not isinstance(raw, Mapping):
        raise ConfigError([("$", "config must be a JSON object")])
    for name in REQUIRED:
        if name not in raw:
            problems.append((name, "missing required field"))
    values = {}
    for key, value in raw.items():
        if key == "path_loss":
            continue
        if key not in _FIELDS:
            problems.append((key, "unknown field"))
            continue
        kind, (check, msg) = _FIELDS[key]
        try:
            v = _coerce(kind, value)
        except TypeError as exc:
            problems.append((key, str(exc)))
            continue
        if not check(v):
            problems.append((key, f"{msg}, got {value!r}"))
            continue
        values[key] = v

    pl = raw.get("path_loss", {})
    if not isinstance(pl, Mapping):
        problems.append(("path_loss", "expected an object"))
        pl = {}
    pl_values = {}
    for key, value in pl.items():
        path = f"path_loss.{key}"
        if key not in _PATH_LOSS_FIELDS:
            problems.append((path, "unknown field"))
            continue
        check, msg = _PATH_LOSS_FIELDS[key]
        try:
            v = _coerce(float, value)
        except TypeError as exc:
            problems.append((path, str(exc)))
            continue
        if not check(v):
            problems.append((path, f"{msg}, got {value!r}"))
            continue
        pl_values[key] = v

    match = values.get("mean_service_match_s", ScenarioConfig.mean_service_match_s)
    mismatch = values.get("mean_service_mismatch_s", ScenarioConfig.mean_service_mismatch_s)
    if not match < mismatch:
        problems.append(("mean_service_match_s",
                         "matching packets must be served faster than mismatching ones"))
    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(path_loss=PathLoss(**pl_values), **values)


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError([("$", f"not valid JSON: {exc}")]) from None
    return validate_config(raw)


def default_config_dict() -> dict:
    return ScenarioConfig().to_dict()


# --------------------------------------------------------------------------
# Scenario
# --------------------------------------------------------------------------

_ARRAY_FIELDS = ("mu_positions", "bs_positions", "bandwidth", "mean_sinr_db",
                 "arrival_rate", "tau", "mu_mat", "mu_mis", "rho",
                 "throughput_min", "b2m_scale", "b2m_knee")


@dataclass(frozen=True, eq=False)
class NetworkScenario:
    """Immutable snapshot of one HSB network instance.

    Arrays are indexed ``[mu]``, ``[bs]`` or ``[mu, bs]``.
    """

    mu_positions: np.ndarray
    bs_positions: np.ndarray
    bandwidth: np.ndarray
    mean_sinr_db: np.ndarray
    arrival_rate: np.ndarray
    tau: np.ndarray
    mu_mat: np.ndarray
    mu_mis: np.ndarray
    rho: np.ndarray
    throughput_min: np.ndarray
    b2m_scale: np.ndarray
    b2m_knee: np.ndarray
    sinr_std_db: float
    slot: float
    packet_bits: float
    buffer: int
    latency_cap: float
    loss_cap: float
    radius_m: float
    path_loss: PathLoss = field(default_factory=PathLoss)

    def __post_init__(self):
        for name in _ARRAY_FIELDS:
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_mus(self) -> int:
        return len(self.tau)

    @property
    def num_bss(self) -> int:
        return len(self.bandwidth)

    def b2m(self, i, j) -> B2MSurrogateParams:
        return B2MSurrogateParams(float(self.b2m_scale[i, j]), float(self.b2m_knee[i, j]))

    def link(self, i, j) -> LinkParams:
        return LinkParams(
            gamma_db=float(self.mean_sinr_db[i, j]), sigma_db=self.sinr_std_db,
            slot=self.slot, packet_bits=self.packet_bits, buffer=self.buffer,
            arrival_rate=float(self.arrival_rate[i]), tau=float(self.tau[i]),
            mu_mat=float(self.mu_mat[i]), mu_mis=float(self.mu_mis[i]),
            rho=float(self.rho[i, j]), b2m=self.b2m(i, j),
        )

    def replace(self, **changes) -> "NetworkScenario":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v = v.tolist()
            elif isinstance(v, PathLoss):
                v = dataclasses.asdict(v)
            d[f.name] = v
        return d

    @classmethod
    def from_dict(cls, d) -> "NetworkScenario":
        d = dict(d)
        d["path_loss"] = PathLoss(**d["path_loss"])
        for name in _ARRAY_FIELDS:
            d[name] = np.array(d[name], dtype=float)
            if name in ("mu_positions", "bs_positions"):
                d[name] = d[name].reshape(-1, 2)
        n_bs = len(d["bandwidth"])
        for name in ("mean_sinr_db", "rho", "b2m_scale", "b2m_knee"):
            d[name] = d[name].reshape(-1, n_bs)
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "NetworkScenario":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __eq__(self, other):
        if not isinstance(other, NetworkScenario):
            return NotImplemented
        for f in dataclasses.fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray):
                if a.shape != b.shape or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


def mean_sinr(mu_index: int, bs_index: int, scenario: NetworkScenario) -> float:
    """Mean SINR (dB) of one link under the scenario's path-loss model."""
    d = np.linalg.norm(scenario.mu_positions[mu_index] - scenario.bs_positions[bs_index])
    return float(scenario.path_loss.mean_sinr_db(d, scenario.num_mus))


def _uniform_disc(rng, n, radius):
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    phi = rng.uniform(0.0, 2 * np.pi, n)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def _ring(rng, n, radius):
    if n == 1:
        return np.zeros((1, 2))
    phi = 2 * np.pi * (np.arange(n) + rng.uniform(-0.25, 0.25, n)) / n
    r = radius * rng.uniform(0.4, 0.7, n)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def generate_scenario(config: ScenarioConfig, seed: int) -> NetworkScenario:
    """Draw a scenario; a pure function of ``(config, seed)``."""
    rng = np.random.default_rng(seed)
    U, S = config.num_mus, config.num_bss
    mu_pos = _uniform_disc(rng, U, config.radius_m)
    if config.bs_layout == "ring":
        bs_pos = _ring(rng, S, config.radius_m)
    else:
        bs_pos = _uniform_disc(rng, S, config.radius_m)
    dist = np.linalg.norm(mu_pos[:, None, :] - bs_pos[None, :, :], axis=-1)
    sinr = config.path_loss.mean_sinr_db(dist, U)

    mu_mat = np.full(U, 1.0 / config.mean_service_match_s)
    mu_mis = np.full(U, 1.0 / config.mean_service_mismatch_s)
    lam = np.full(U, config.arrival_rate)
    tau = rng.uniform(*config.tau_range, U)
    for i in range(U):
        for _ in range(config.stability_retries + 1):
            if lam[i] * scq_moments(tau[i], mu_mat[i], mu_mis[i])[0] < 1.0:
                break
            tau[i] = rng.uniform(*config.tau_range)
        else:
            raise StabilityViolation(
                f"MU {i}: no stable knowledge-matching degree after "
                f"{config.stability_retries} redraws (lambda*E[I] >= 1)")
    m_min = rng.uniform(*config.throughput_min_range, U)
    rho = rng.uniform(*config.rho_range, (U, S))
    scale = rng.uniform(*config.b2m_scale_range, (U, S))
    knee = rng.uniform(*config.b2m_knee_range, (U, S))

    return NetworkScenario(
        mu_positions=mu_pos, bs_positions=bs_pos,
        bandwidth=np.full(S, config.bandwidth_hz), mean_sinr_db=sinr,
        arrival_rate=lam, tau=tau, mu_mat=mu_mat, mu_mis=mu_mis, rho=rho,
        throughput_min=m_min, b2m_scale=scale, b2m_knee=knee,
        sinr_std_db=config.sinr_std_db, slot=config.slot_s,
        packet_bits=config.packet_bits, buffer=config.buffer_packets,
        latency_cap=config.latency_cap_s, loss_cap=config.loss_cap,
        radius_m=config.radius_m, path_loss=config.path_loss,
    )
