"""Uplink satellite channel: user geometry, Rician fading, array response.

The model is a per-subcarrier frequency-domain description of K single
antenna ground users transmitting to an M_x x M_y planar array on a LEO
satellite.  Each user sees one line-of-sight ray plus a handful of delayed
multipath rays, all scaled by free-space path loss, and three Doppler
contributions: a large satellite-motion term (common direction, per-user
magnitude) and small per-ray terms from user motion.

Angles follow the planar-array convention where the two axis phase
gradients are ``sin(theta_y) * cos(theta_x)`` and ``cos(theta_y)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import kronecker

SPEED_OF_LIGHT = 3e8  # m/s
EARTH_RADIUS_M = 6371e3

# Scenario sampling guards.  Two users closer than this in direction-cosine
# space make the steering matrix needlessly ill conditioned, so the second
# draw is rejected and retried.
MIN_COSINE_SEPARATION = 0.05
MAX_PLACEMENT_ATTEMPTS = 100
MAX_GRAM_CONDITION = 1e6

MIN_ELEVATION_RAD = np.pi / 6  # service starts at 30 degrees elevation


class ScenarioError(RuntimeError):
    """Scenario sampling could not produce a usable user constellation."""


@dataclass(frozen=True)
class ArrayConfig:
    """Receive array dimensions."""

    m_x: int
    m_y: int

    def __post_init__(self):
        if self.m_x < 1 or self.m_y < 1:
            raise ValueError(f"array dimensions must be >= 1, got {self.m_x}x{self.m_y}")

    @property
    def m(self) -> int:
        return self.m_x * self.m_y


@dataclass(frozen=True)
class UserGeometry:
    theta_x: float       # boresight angle against the array x axis [rad]
    theta_y: float       # boresight angle against the array y axis [rad]
    distance_m: float    # slant range to the satellite [m]
    nu_sat_hz: float     # satellite-motion Doppler shift seen by this user
    elevation_rad: float


@dataclass(frozen=True)
class FadingState:
    """Per-user small-scale fading draw."""

    rician_kappa: float        # linear Rician factor
    path_count: int            # number of NLoS rays
    gains: np.ndarray          # complex ray gains, unit variance per component
    tau_los_s: float           # LoS propagation delay
    tau_mp_s: np.ndarray       # per-ray excess delay on top of tau_los_s
    nu_ut_los_hz: float        # user-motion Doppler on the LoS ray
    nu_ut_nlos_hz: np.ndarray  # user-motion Doppler per NLoS ray
    beta_linear: float         # linear large-scale gain 10^(-PL_dB/10)


@dataclass(frozen=True)
class ChannelState:
    """One sampled scenario: geometry, fading, and the steering matrix."""

    geometry: tuple
    fading: tuple
    array: ArrayConfig
    steering: np.ndarray  # K x M, unit-norm rows

    @property
    def k_users(self) -> int:
        return len(self.geometry)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything sample_scenario needs, decoupled from the harness config."""

    array: ArrayConfig
    k_users: int
    fc_ghz: float
    altitude_m: float
    rician_kappa_db: float
    max_paths: int
    fixed_paths: bool = True          # False draws path_count uniform in {1..max_paths}
    sat_doppler_bound_hz: float = 788e3
    ut_doppler_bound_hz: float = 200.0
    mp_delay_max_s: float = 100e-9
    normalized_pathloss: bool = False  # True forces beta_linear = 1 (unit-scale debugging)


def upa_axis_vector(direction: float, m_d: int) -> np.ndarray:
    """Unit-norm axis steering vector; entry i is exp(-j*pi*i*direction)/sqrt(m_d)."""
    if m_d < 1:
        raise ValueError(f"axis length must be >= 1, got {m_d}")
    n = np.arange(m_d)
    return np.exp(-1j * np.pi * n * direction) / np.sqrt(m_d)


def array_response(theta_x: float, theta_y: float, array: ArrayConfig) -> np.ndarray:
    """Planar-array response, the Kronecker product of the two axis vectors."""
    vx = upa_axis_vector(np.sin(theta_y) * np.cos(theta_x), array.m_x)
    vy = upa_axis_vector(np.cos(theta_y), array.m_y)
    return kronecker(vx, vy)


def path_loss_db(fc_ghz: float, distance_m: float) -> float:
    """Free-space path loss in dB for carrier in GHz and distance in metres."""
    if fc_ghz <= 0.0 or distance_m <= 0.0:
        raise ValueError(f"carrier and distance must be positive, got {fc_ghz}, {distance_m}")
    return 32.45 + 20.0 * np.log10(fc_ghz) + 20.0 * np.log10(distance_m)


def slant_range_m(elevation_rad: float, altitude_m: float) -> float:
    """Slant range from a ground user to the satellite for a spherical Earth."""
    re = EARTH_RADIUS_M
    s = re * np.sin(elevation_rad)
    return float(np.sqrt(s * s + altitude_m * altitude_m + 2.0 * re * altitude_m) - s)


def sample_scenario(rng: np.random.Generator, cfg: ScenarioConfig) -> ChannelState:
    """Draw one complete scenario: user placement, fading, steering matrix.

    Users are placed by sampling the two direction cosines uniformly over
    the physically realizable unit disk; draws closer than
    MIN_COSINE_SEPARATION to an already placed user are rejected.  After
    placement the Gram matrix of the steering rows must be well conditioned
    or the whole scenario is rejected with ScenarioError.
    """
    if cfg.k_users < 1:
        raise ValueError(f"k_users must be >= 1, got {cfg.k_users}")
    if cfg.max_paths < 1:
        raise ValueError(f"max_paths must be >= 1, got {cfg.max_paths}")

    kappa = 10.0 ** (cfg.rician_kappa_db / 10.0)
    placed: list[tuple[float, float]] = []
    geoms = []
    fadings = []
    rows = []

    for k in range(cfg.k_users):
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            dx = rng.uniform(-1.0, 1.0)
            dy = rng.uniform(-1.0, 1.0)
            if dx * dx + dy * dy > 1.0:
                continue  # outside the realizable disk, no real angle pair
            if all((dx - px) ** 2 + (dy - py) ** 2 >= MIN_COSINE_SEPARATION**2
                   for px, py in placed):
                break
        else:
            raise ScenarioError(
                f"user {k}: no sufficiently separated steering direction "
                f"after {MAX_PLACEMENT_ATTEMPTS} attempts"
            )
        placed.append((dx, dy))

        theta_y = float(np.arccos(dy))
        sin_ty = np.sin(theta_y)
        theta_x = float(np.arccos(dx / sin_ty)) if sin_ty > 0.0 else 0.0

        elevation = rng.uniform(MIN_ELEVATION_RAD, np.pi / 2)
        distance = slant_range_m(elevation, cfg.altitude_m)
        nu_sat = rng.uniform(-cfg.sat_doppler_bound_hz, cfg.sat_doppler_bound_hz)
        geoms.append(UserGeometry(theta_x, theta_y, distance, float(nu_sat), float(elevation)))

        if cfg.fixed_paths:
            n_paths = cfg.max_paths
        else:
            n_paths = int(rng.integers(1, cfg.max_paths + 1))
        gains = rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)
        tau_mp = rng.uniform(0.0, cfg.mp_delay_max_s, n_paths)
        nu_los = float(rng.uniform(-cfg.ut_doppler_bound_hz, cfg.ut_doppler_bound_hz))
        nu_nlos = rng.uniform(-cfg.ut_doppler_bound_hz, cfg.ut_doppler_bound_hz, n_paths)

        if cfg.normalized_pathloss:
            beta = 1.0
        else:
            beta = 10.0 ** (-path_loss_db(cfg.fc_ghz, distance) / 10.0)

        fadings.append(FadingState(
            rician_kappa=kappa,
            path_count=n_paths,
            gains=gains,
            tau_los_s=distance / SPEED_OF_LIGHT,
            tau_mp_s=tau_mp,
            nu_ut_los_hz=nu_los,
            nu_ut_nlos_hz=nu_nlos,
            beta_linear=beta,
        ))
        rows.append(array_response(theta_x, theta_y, cfg.array))

    steering = np.vstack(rows)
    gram_evals = np.linalg.eigvalsh(steering @ steering.conj().T)
    if gram_evals[0] <= 0.0 or gram_evals[-1] / gram_evals[0] >= MAX_GRAM_CONDITION:
        raise ScenarioError(
            f"steering Gram matrix condition {gram_evals[-1] / max(gram_evals[0], 1e-300):.3e} "
            f"exceeds {MAX_GRAM_CONDITION:.0e}"
        )

    return ChannelState(tuple(geoms), tuple(fadings), cfg.array, steering)


def scalar_channel(state: ChannelState, k: int, t: float, f: float,
                   include_sat_doppler: bool = True) -> complex:
    """Scalar channel coefficient of user k at time t and frequency offset f."""
    geo = state.geometry[k]
    fad = state.fading[k]
    los = np.sqrt(fad.rician_kappa) * np.exp(
        2j * np.pi * (t * fad.nu_ut_los_hz - f * fad.tau_los_s))
    tau_nlos = fad.tau_los_s + fad.tau_mp_s
    nlos = np.sum(fad.gains * np.exp(
        2j * np.pi * (t * fad.nu_ut_nlos_hz - f * tau_nlos))) / np.sqrt(fad.path_count)
    out = np.sqrt(fad.beta_linear / (fad.rician_kappa + 1.0)) * (los + nlos)
    if include_sat_doppler:
        out = out * np.exp(2j * np.pi * t * geo.nu_sat_hz)
    return complex(out)


def channel_matrix(state: ChannelState, timing, subcarrier: int, symbols,
                   include_sat_doppler: bool = True) -> np.ndarray:
    """K x S channel matrix at one subcarrier across a set of symbol indices.

    Symbol index s maps to time s * (t_sl + t_cp) and the subcarrier index
    maps to frequency subcarrier / t_sl.
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.ndim != 1:
        raise ValueError("symbols must be a 1-D index array")
    if subcarrier < 0 or subcarrier >= timing.n_sc:
        raise ValueError(f"subcarrier {subcarrier} outside [0, {timing.n_sc})")
    t = symbols * timing.symbol_period
    f = subcarrier / timing.t_sl

    h = np.empty((state.k_users, symbols.size), dtype=np.complex128)
    for k in range(state.k_users):
        geo = state.geometry[k]
        fad = state.fading[k]
        los = np.sqrt(fad.rician_kappa) * np.exp(
            2j * np.pi * (t * fad.nu_ut_los_hz - f * fad.tau_los_s))
        tau_nlos = fad.tau_los_s + fad.tau_mp_s
        phases = np.exp(2j * np.pi * (
            np.outer(fad.nu_ut_nlos_hz, t) - f * tau_nlos[:, None]))
        nlos = (fad.gains @ phases) / np.sqrt(fad.path_count)
        row = np.sqrt(fad.beta_linear / (fad.rician_kappa + 1.0)) * (los + nlos)
        if include_sat_doppler:
            row = row * np.exp(2j * np.pi * t * geo.nu_sat_hz)
        h[k] = row
    return h


def reference_channel(state: ChannelState, timing, subcarrier: int, symbols) -> np.ndarray:
    """Channel with the satellite Doppler excluded.

    This is both the effective channel after transmit-side pre-compensation
    of the satellite Doppler and the reference that estimators are judged
    against.
    """
    return channel_matrix(state, timing, subcarrier, symbols, include_sat_doppler=False)
