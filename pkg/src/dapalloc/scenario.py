"""Cell geometry, path loss, noise, and deterministic user placement.

The simulated deployment is a circular cell: users drop uniformly over
the disk area between a configurable minimum distance and the cell
radius, the log-distance path-loss law maps distance to channel gain,
and the thermal noise floor follows from the occupied bandwidth.

Randomness is counter-based: each user's distance is produced by a
Philox generator keyed by ``(seed, drop_id)`` with the user index as
counter, so any drop (and any user within a drop) can be generated
independently, in any order, on any number of workers, with bit-identical
results.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from dapalloc.metrics import UeSet, csi_error_factor

__all__ = [
    "ScenarioConfig",
    "path_loss_db",
    "noise_power_w",
    "drop_ues",
    "homogeneous_sweep",
    "two_ue_grid",
]


@dataclass(frozen=True)
class ScenarioConfig:
    """Deployment and waveform parameters for scenario generation.

    Attributes:
        n_users: users per drop (K).
        m_antennas: base-station antennas (M).
        p_max: per-antenna amplifier saturation power, watts.
        cell_radius_m: cell radius in meters.
        min_distance_m: smallest allowed user distance in meters (the
            log-distance law diverges at 0; 10 m is the default guard).
        fc_ghz: carrier frequency in GHz (3.0 and 3.5 are the presets
            used by the shipped experiment configs).
        n_subcarriers: occupied subcarrier count.
        delta_f_hz: subcarrier spacing in Hz.
        seed: 64-bit master seed; all randomness derives from it.
        pilot_len: optional uplink pilot length; when set together with
            rho_ul_w, each generated user carries a channel-estimation
            error fraction.
        rho_ul_w: optional uplink pilot power in watts.
    """

    n_users: int
    m_antennas: int
    p_max: float
    cell_radius_m: float = 2000.0
    min_distance_m: float = 10.0
    fc_ghz: float = 3.0
    n_subcarriers: int = 1200
    delta_f_hz: float = 15e3
    seed: int = 0
    pilot_len: Optional[int] = None
    rho_ul_w: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n_users < 1 or self.m_antennas <= self.n_users:
            raise ValueError("need 1 <= n_users < m_antennas")
        if self.p_max <= 0:
            raise ValueError("p_max must be positive")
        if not 0 < self.min_distance_m < self.cell_radius_m:
            raise ValueError("need 0 < min_distance_m < cell_radius_m")
        if self.fc_ghz <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.n_subcarriers < 1 or self.delta_f_hz <= 0:
            raise ValueError("need a positive subcarrier grid")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if (self.pilot_len is None) != (self.rho_ul_w is None):
            raise ValueError("pilot_len and rho_ul_w must be set together")
        if self.pilot_len is not None and self.pilot_len < 1:
            raise ValueError("pilot_len must be >= 1")
        if self.rho_ul_w is not None and self.rho_ul_w <= 0:
            raise ValueError("rho_ul_w must be positive")

    @property
    def bandwidth_hz(self) -> float:
        return self.n_subcarriers * self.delta_f_hz

    @property
    def noise_w(self) -> float:
        return noise_power_w(self.n_subcarriers, self.delta_f_hz)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def path_loss_db(d_m, fc_ghz: float):
    """Log-distance path loss 22.7 + 36.7*log10(d) + 26*log10(fc) in dB.

    ``d_m`` in meters (scalar or array, each >= 1 -- the model is not
    defined closer in), ``fc_ghz`` in GHz.  The linear channel gain is
    ``beta = 10**(-PL/10)``.
    """
    d = np.asarray(d_m, dtype=np.float64)
    if np.any(d < 1.0):
        raise ValueError("path-loss model requires distance >= 1 m")
    if fc_ghz <= 0:
        raise ValueError("carrier frequency must be positive")
    out = 22.7 + 36.7 * np.log10(d) + 26.0 * np.log10(fc_ghz)
    return float(out) if np.ndim(d_m) == 0 else out


def noise_power_w(n_subcarriers: int, delta_f_hz: float) -> float:
    """Thermal noise power over the occupied bandwidth, in watts.

    -174 dBm/Hz + 10*log10(n_subcarriers * delta_f), converted to watts.
    """
    if n_subcarriers < 1 or delta_f_hz <= 0:
        raise ValueError("need a positive subcarrier grid")
    dbm = -174.0 + 10.0 * math.log10(n_subcarriers * delta_f_hz)
    return 10.0 ** ((dbm - 30.0) / 10.0)


def _user_distance(sc: ScenarioConfig, drop_id: int, ue_index: int) -> float:
    """Distance of one user, fully determined by (seed, drop_id, ue_index).

    Uniform over the annulus area: d^2 uniform on [min^2, radius^2].
    Generator identity (fixed for reproducibility): numpy Philox keyed
    with (seed, drop_id), counter set to the user index, first draw.
    """
    bits = np.random.Philox(
        key=np.array([sc.seed, drop_id], dtype=np.uint64),
        counter=np.array([0, 0, 0, ue_index], dtype=np.uint64),
    )
    u = np.random.Generator(bits).random()
    lo = sc.min_distance_m**2
    hi = sc.cell_radius_m**2
    return math.sqrt(lo + u * (hi - lo))


def drop_ues(sc: ScenarioConfig, drop_id: int) -> UeSet:
    """Generate one random drop of users.

    Distances are area-uniform over the cell (clipped below at the
    minimum distance), gains follow the path-loss law, and every user
    sees the same thermal noise.  When pilot parameters are configured,
    each user also carries its channel-estimation error fraction.
    Deterministic in (seed, drop_id): the same pair always produces the
    same UeSet, regardless of generation order or worker count.
    """
    if drop_id < 0 or drop_id >= 2**64:
        raise ValueError("drop_id must fit in 64 bits")
    d = np.array(
        [_user_distance(sc, drop_id, k) for k in range(sc.n_users)]
    )
    beta = 10.0 ** (-path_loss_db(d, sc.fc_ghz) / 10.0)
    noise = np.full(sc.n_users, sc.noise_w)
    delta = None
    if sc.pilot_len is not None:
        delta = csi_error_factor(beta, sc.pilot_len, sc.rho_ul_w)
    return UeSet(beta=beta, noise_w=noise, csi_delta=delta)


def homogeneous_sweep(pl_db_grid: Sequence[float], sc: ScenarioConfig) -> list[UeSet]:
    """One UeSet per grid value, all users at the same path loss."""
    out = []
    for pl in pl_db_grid:
        beta = np.full(sc.n_users, 10.0 ** (-float(pl) / 10.0))
        out.append(UeSet(beta=beta, noise_w=np.full(sc.n_users, sc.noise_w)))
    return out


def two_ue_grid(
    lo_db: float, hi_db: float, step_db: float, sc: ScenarioConfig
) -> tuple[np.ndarray, list[list[UeSet]]]:
    """All (path loss 1, path loss 2) combinations on a square dB grid.

    Returns the grid values and a nested list ``cells[i][j]`` holding the
    two-user set at (grid[i], grid[j]).  The grid is symmetric: swapping
    the users maps cell (i, j) to (j, i).
    """
    if sc.n_users != 2:
        raise ValueError("two_ue_grid requires a 2-user scenario config")
    if step_db <= 0 or hi_db < lo_db:
        raise ValueError("need step_db > 0 and hi_db >= lo_db")
    n = int(round((hi_db - lo_db) / step_db)) + 1
    grid = lo_db + step_db * np.arange(n)
    noise = np.full(2, sc.noise_w)
    cells: list[list[UeSet]] = []
    for pl1 in grid:
        row = []
        for pl2 in grid:
            beta = np.array([10.0 ** (-pl1 / 10.0), 10.0 ** (-pl2 / 10.0)])
            row.append(UeSet(beta=beta, noise_w=noise))
        cells.append(row)
    return grid, cells
