"""Effective SINDR and rate evaluation for the distortion-aware downlink.

The model: an M-antenna base station serves K single-antenna users over
``n_subcarriers`` OFDM subcarriers of width ``delta_f`` (bandwidth
``B = n_subcarriers * delta_f``).  Every antenna's amplifier clips at
per-antenna saturation power ``p_max``; the Bussgang decomposition turns
the clipping into a linear gain ``lam`` and an additive distortion of
power ``D = eta * dist_coeff * P`` at the transmitter, where ``eta`` is
the precoder efficiency (2/3 for the precoders considered here) and
``P`` the total transmit power split as ``p_k = omega_k * P``.

With large-scale channel gains ``beta_k`` and per-user noise powers
``sigma_k^2`` the resulting per-user effective SINDRs are closed-form:

* zero-forcing:       gamma_k = (M-K) lam p_k beta_k / (sigma_k^2 + beta_k D)
* maximum ratio:      gamma_k = M lam p_k beta_k
                                / (sigma_k^2 + beta_k D + beta_k lam (P - p_k))
* zero-forcing with imperfect CSI (error fraction delta_k):
                      gamma_k = (M-K) lam p_k beta_k (1 - delta_k)
                                / (sigma_k^2 + beta_k D
                                   + lam beta_k delta_k (P - p_k))

and the ergodic rate of user k is ``B * log2(1 + gamma_k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from dapalloc.numerics import DEFAULT_QUADRATURE, QuadratureSpec
from dapalloc.pa_model import (
    RAPP,
    SOFT_LIMITER,
    PaModel,
    PaOperatingPoint,
    bussgang_gain_rapp,
    bussgang_gain_soft,
    distortion_coeff_rapp,
    distortion_coeff_soft,
    effective_distortion,
    input_backoff,
)

__all__ = [
    "SystemConfig",
    "UeSet",
    "Allocation",
    "EvalReport",
    "operating_point",
    "operating_point_at",
    "sindr_zf",
    "sindr_mrt",
    "sindr_zf_icsi",
    "rates",
    "evaluate",
    "csi_error_factor",
]

_OMEGA_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SystemConfig:
    """Static system parameters shared by all solvers and metrics.

    Attributes:
        m_antennas: number of base-station antennas M.
        n_users: number of served users K (must satisfy K < M so the
            zero-forcing array gain M - K stays positive).
        p_max: per-antenna amplifier saturation power in watts.
        bandwidth_hz: total signal bandwidth B in Hz.
        eta: precoder efficiency scaling the radiated distortion; 2/3
            for both precoders used here.
        pa: amplifier law used when evaluating operating points.
    """

    m_antennas: int
    n_users: int
    p_max: float
    bandwidth_hz: float
    eta: float = 2.0 / 3.0
    pa: PaModel = field(default_factory=PaModel)

    def __post_init__(self) -> None:
        if self.n_users < 1:
            raise ValueError("need at least one user")
        if self.m_antennas <= self.n_users:
            raise ValueError("antenna count must exceed user count")
        if self.p_max <= 0:
            raise ValueError("p_max must be positive")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must be in (0, 1]")

    @classmethod
    def from_subcarriers(
        cls,
        m_antennas: int,
        n_users: int,
        p_max: float,
        n_subcarriers: int,
        delta_f_hz: float = 15e3,
        eta: float = 2.0 / 3.0,
        pa: Optional[PaModel] = None,
    ) -> "SystemConfig":
        """Build a config with bandwidth = n_subcarriers * delta_f."""
        if n_subcarriers < 1 or delta_f_hz <= 0:
            raise ValueError("need a positive subcarrier grid")
        return cls(
            m_antennas=m_antennas,
            n_users=n_users,
            p_max=p_max,
            bandwidth_hz=n_subcarriers * delta_f_hz,
            eta=eta,
            pa=pa if pa is not None else PaModel(),
        )


@dataclass(frozen=True)
class UeSet:
    """Large-scale state of the served users.

    Attributes:
        beta: length-K array of channel gains (linear, not dB).
        noise_w: length-K array of receiver noise powers in watts.
        csi_delta: optional length-K array of channel-estimation error
            fractions in [0, 1); required by :func:`sindr_zf_icsi`.
    """

    beta: np.ndarray
    noise_w: np.ndarray
    csi_delta: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        beta = np.atleast_1d(np.asarray(self.beta, dtype=np.float64))
        noise = np.atleast_1d(np.asarray(self.noise_w, dtype=np.float64))
        if noise.size == 1 and beta.size > 1:
            noise = np.full(beta.shape, noise.item())
        if beta.shape != noise.shape or beta.ndim != 1:
            raise ValueError("beta and noise_w must be 1-D arrays of equal length")
        if np.any(beta <= 0) or np.any(noise <= 0):
            raise ValueError("channel gains and noise powers must be positive")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "noise_w", noise)
        if self.csi_delta is not None:
            delta = np.atleast_1d(np.asarray(self.csi_delta, dtype=np.float64))
            if delta.shape != beta.shape:
                raise ValueError("csi_delta must match beta in length")
            if np.any(delta < 0) or np.any(delta >= 1):
                raise ValueError("csi_delta entries must lie in [0, 1)")
            object.__setattr__(self, "csi_delta", delta)

    @property
    def n_users(self) -> int:
        return int(self.beta.size)


@dataclass(frozen=True)
class Allocation:
    """A transmit-power decision: total power plus per-user fractions.

    ``omega`` must be nonnegative and sum to 1 within 1e-9.
    """

    total_power_p: float
    omega: np.ndarray

    def __post_init__(self) -> None:
        if self.total_power_p < 0:
            raise ValueError("total power must be nonnegative")
        omega = np.atleast_1d(np.asarray(self.omega, dtype=np.float64))
        if omega.ndim != 1:
            raise ValueError("omega must be one-dimensional")
        if np.any(omega < 0):
            raise ValueError("power fractions must be nonnegative")
        if abs(float(np.sum(omega)) - 1.0) > _OMEGA_SUM_TOL:
            raise ValueError("power fractions must sum to 1")
        object.__setattr__(self, "omega", omega)

    @property
    def per_user_power(self) -> np.ndarray:
        return self.omega * self.total_power_p


@dataclass(frozen=True)
class EvalReport:
    """Rates and diagnostics of one allocation on one user set."""

    sindr: np.ndarray
    rate: np.ndarray
    sum_rate: float
    ibo_db: float
    operating_point: PaOperatingPoint


def operating_point_at(
    cfg: SystemConfig,
    total_power_p: float,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
) -> PaOperatingPoint:
    """Amplifier gain/distortion state at a given total power.

    ``total_power_p = 0`` is the idle transmitter: infinite back-off,
    unit gain, zero distortion.
    """
    if total_power_p < 0:
        raise ValueError("total power must be nonnegative")
    if total_power_p == 0.0:
        return PaOperatingPoint(math.inf, 1.0, 0.0, 0.0)
    psi = input_backoff(total_power_p, cfg.m_antennas, cfg.p_max)
    if cfg.pa.kind == SOFT_LIMITER:
        lam = bussgang_gain_soft(psi)
        coeff = distortion_coeff_soft(psi)
    elif cfg.pa.kind == RAPP:
        lam = bussgang_gain_rapp(psi, cfg.pa.smoothness_p, quad)
        coeff = distortion_coeff_rapp(psi, cfg.pa.smoothness_p, quad)
    else:  # pragma: no cover - PaModel validates kind
        raise ValueError(f"unknown amplifier kind {cfg.pa.kind!r}")
    dist = effective_distortion(coeff, total_power_p, cfg.eta)
    return PaOperatingPoint(psi, float(lam), float(coeff), dist)


def operating_point(
    cfg: SystemConfig,
    alloc: Allocation,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
) -> PaOperatingPoint:
    """Amplifier gain/distortion state of an allocation.

    Only the total power matters (per-user fractions do not change the
    waveform statistics); :func:`operating_point_at` exposes the same
    computation keyed by power directly.
    """
    return operating_point_at(cfg, alloc.total_power_p, quad)


def _check_shapes(cfg: SystemConfig, ues: UeSet, alloc: Allocation) -> None:
    if ues.n_users != cfg.n_users:
        raise ValueError("user set size does not match SystemConfig.n_users")
    if alloc.omega.size != cfg.n_users:
        raise ValueError("allocation size does not match SystemConfig.n_users")


def sindr_zf(
    cfg: SystemConfig, ues: UeSet, alloc: Allocation, op: PaOperatingPoint
) -> np.ndarray:
    """Per-user effective SINDR under zero-forcing precoding."""
    _check_shapes(cfg, ues, alloc)
    p_k = alloc.per_user_power
    array_gain = cfg.m_antennas - cfg.n_users
    return (
        array_gain
        * op.lam
        * p_k
        * ues.beta
        / (ues.noise_w + ues.beta * op.effective_distortion)
    )


def sindr_mrt(
    cfg: SystemConfig, ues: UeSet, alloc: Allocation, op: PaOperatingPoint
) -> np.ndarray:
    """Per-user effective SINDR under maximum-ratio precoding.

    Unlike zero-forcing, maximum ratio leaves multi-user interference
    ``lam * beta_k * (P - p_k)`` in the denominator; no optimizer in this
    package targets it, but it can be evaluated on any allocation.
    """
    _check_shapes(cfg, ues, alloc)
    p_k = alloc.per_user_power
    interference = ues.beta * op.lam * (alloc.total_power_p - p_k)
    return (
        cfg.m_antennas
        * op.lam
        * p_k
        * ues.beta
        / (ues.noise_w + ues.beta * op.effective_distortion + interference)
    )


def sindr_zf_icsi(
    cfg: SystemConfig, ues: UeSet, alloc: Allocation, op: PaOperatingPoint
) -> np.ndarray:
    """Zero-forcing SINDR with imperfect channel knowledge.

    Each user's estimation-error fraction ``delta_k`` removes a factor
    ``1 - delta_k`` from the coherent gain and leaks the other users'
    power as residual interference.  With ``delta_k = 0`` this reduces
    exactly to :func:`sindr_zf`.
    """
    _check_shapes(cfg, ues, alloc)
    if ues.csi_delta is None:
        raise ValueError("UeSet.csi_delta is required for imperfect-CSI SINDR")
    delta = ues.csi_delta
    p_k = alloc.per_user_power
    array_gain = cfg.m_antennas - cfg.n_users
    leak = op.lam * ues.beta * delta * (alloc.total_power_p - p_k)
    return (
        array_gain
        * op.lam
        * p_k
        * ues.beta
        * (1.0 - delta)
        / (ues.noise_w + ues.beta * op.effective_distortion + leak)
    )


def rates(cfg: SystemConfig, sindr: np.ndarray) -> np.ndarray:
    """Per-user rates B * log2(1 + gamma) in bit/s."""
    return cfg.bandwidth_hz * np.log2(1.0 + np.asarray(sindr, dtype=np.float64))


_PRECODERS = {"zf": sindr_zf, "mrt": sindr_mrt, "zf_icsi": sindr_zf_icsi}


def evaluate(
    cfg: SystemConfig,
    ues: UeSet,
    alloc: Allocation,
    precoder: str = "zf",
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
) -> EvalReport:
    """Full rate evaluation of an allocation: SINDRs, rates, back-off.

    ``precoder`` is one of ``"zf"``, ``"mrt"``, ``"zf_icsi"``.  The
    amplifier law comes from ``cfg.pa``.  Everything is recomputed from
    the inputs on every call; there is no hidden state.
    """
    try:
        sindr_fn = _PRECODERS[precoder]
    except KeyError:
        raise ValueError(f"unknown precoder {precoder!r}") from None
    op = operating_point_at(cfg, alloc.total_power_p, quad)
    sindr = sindr_fn(cfg, ues, alloc, op)
    rate = rates(cfg, sindr)
    return EvalReport(
        sindr=sindr,
        rate=rate,
        sum_rate=float(np.sum(rate)),
        ibo_db=op.ibo_db,
        operating_point=op,
    )


def csi_error_factor(beta, pilot_len: int, rho_ul_w: float):
    """Channel-estimation error fraction from uplink pilot SNR.

    delta = 1 / (1 + pilot_len * rho_ul_w * beta)

    where ``pilot_len`` is the number of pilot symbols and ``rho_ul_w``
    the uplink pilot power in watts, with ``beta`` normalized the same
    way as in :class:`UeSet` (noise-power scale carried by beta).  The
    limits are delta -> 0 for strong channels and delta -> 1 for
    vanishing ones.
    """
    if pilot_len < 1:
        raise ValueError("pilot length must be >= 1")
    if rho_ul_w <= 0:
        raise ValueError("pilot power must be positive")
    arr = np.asarray(beta, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("beta must be nonnegative")
    out = 1.0 / (1.0 + pilot_len * rho_ul_w * arr)
    return float(out) if np.ndim(beta) == 0 else out
