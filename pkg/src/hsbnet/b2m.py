"""Bit-rate to message-rate (B2M) mappings for SemCom and BitCom links.

The semantic B2M function is a learned mapping in practice. Here it is
replaced by the surrogate ``Re(r) = beta * ln(1 + r / c)``, which is zero at
zero, strictly increasing, concave and slowly saturating.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Mode(str, enum.Enum):
    SEM = "sem"
    BIT = "bit"


@dataclass(frozen=True)
class B2MSurrogateParams:
    scale: float  # beta, msg/s
    knee: float  # c, bit/s

    def __post_init__(self):
        if not (self.scale > 0 and self.knee > 0):
            raise ValueError(f"B2M surrogate needs scale > 0 and knee > 0, got {self}")


def spectral_efficiency(gamma_db):
    """log2(1 + SINR) for a SINR given in dB."""
    return np.log2(1.0 + 10.0 ** (np.asarray(gamma_db, dtype=float) / 10.0))


def re_eval(bit_rate, params: B2MSurrogateParams):
    """Message rate (msg/s) delivered by a semantic link carrying ``bit_rate`` bit/s."""
    r = np.asarray(bit_rate, dtype=float)
    out = params.scale * np.log1p(r / params.knee)
    return float(out) if out.ndim == 0 else out


def re_derivative(bit_rate, params: B2MSurrogateParams):
    r = np.asarray(bit_rate, dtype=float)
    out = params.scale / (params.knee + r)
    return float(out) if out.ndim == 0 else out


def re_inverse(msg_rate, params: B2MSurrogateParams):
    """Bit rate needed to reach ``msg_rate``; inf when beyond the surrogate's reach."""
    m = np.asarray(msg_rate, dtype=float)
    with np.errstate(over="ignore"):
        out = params.knee * np.expm1(m / params.scale)
    return float(out) if out.ndim == 0 else out


def semantic_rate(z, gamma_db, tau, params: B2MSurrogateParams):
    """Time-averaged SemCom message rate ``tau * Re(z * log2(1 + gamma))``."""
    return tau * re_eval(np.asarray(z, dtype=float) * spectral_efficiency(gamma_db), params)


def bitcom_rate(z, gamma_db, rho):
    """Time-averaged BitCom message rate ``rho * z * log2(1 + gamma)``."""
    out = rho * np.asarray(z, dtype=float) * spectral_efficiency(gamma_db)
    return float(out) if np.ndim(out) == 0 else out


def link_rate(mode, z, gamma_db, tau, rho, params: B2MSurrogateParams):
    if Mode(mode) is Mode.SEM:
        return semantic_rate(z, gamma_db, tau, params)
    return bitcom_rate(z, gamma_db, rho)
