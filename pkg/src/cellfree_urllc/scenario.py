"""Network geometry, large-scale fading and correlated Rayleigh channel draws.

APs sit at the centers of a rectangular grid; users are dropped uniformly in
the area, which is treated as a torus (wrap-around) when measuring distances.
AP ``l`` is at grid column ``l // rows`` and row ``l % rows`` (columns-first),
so contiguous AP index ranges are contiguous grid blocks.

Channel matrices have shape ``(L*N, K)``: column ``k`` stacks the per-AP
vectors ``h_k1, ..., h_kL`` of length ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import ConfigError, ScenarioConfig


@dataclass(frozen=True)
class NetworkGeometry:
    ap_positions: np.ndarray  # (L, 2) [m]
    user_positions: np.ndarray  # (K, 2) [m]
    area_width: float
    area_height: float
    grid_shape: tuple[int, int]  # (columns, rows)

    @property
    def L(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def K(self) -> int:
        return self.user_positions.shape[0]


@dataclass(frozen=True)
class LargeScaleFading:
    beta: np.ndarray  # (L, K) linear channel gains
    R: Optional[np.ndarray] = None  # (L, K, N, N) or None for beta * I_N
    N: int = 1

    def correlation(self, l: int, k: int) -> np.ndarray:
        if self.R is None:
            return self.beta[l, k] * np.eye(self.N)
        return self.R[l, k]


def grid_shape(config: ScenarioConfig) -> tuple[int, int]:
    cols = config.area_width / config.ap_spacing_x
    rows = config.area_height / config.ap_spacing_y
    if not (np.isclose(cols, round(cols)) and np.isclose(rows, round(rows))):
        raise ConfigError("AP spacing must tile the area exactly")
    return int(round(cols)), int(round(rows))


def ap_grid(config: ScenarioConfig) -> np.ndarray:
    cols, rows = grid_shape(config)
    if cols * rows != config.L:
        raise ConfigError(
            f"a {config.area_width:g}x{config.area_height:g} m area with "
            f"{config.ap_spacing_x:g}/{config.ap_spacing_y:g} m spacing hosts "
            f"{cols * rows} APs, not L={config.L}"
        )
    xs = (np.arange(cols) + 0.5) * config.ap_spacing_x
    ys = (np.arange(rows) + 0.5) * config.ap_spacing_y
    # columns-first ordering
    return np.array([(x, y) for x in xs for y in ys], dtype=float)


def build_geometry(config: ScenarioConfig, rng: np.random.Generator) -> NetworkGeometry:
    """Place APs on the grid and drop ``K`` users uniformly at random."""
    aps = ap_grid(config)
    users = rng.uniform(size=(config.K, 2)) * [config.area_width, config.area_height]
    return NetworkGeometry(aps, users, config.area_width, config.area_height, grid_shape(config))


def wrap_offsets(p, q, width: float, height: float) -> np.ndarray:
    """Per-axis torus offsets ``min(|d|, extent - |d|)``; broadcasts over points."""
    d = np.abs(np.asarray(q, dtype=float) - np.asarray(p, dtype=float))
    extent = np.array([width, height])
    d = np.mod(d, extent)
    return np.minimum(d, extent - d)


def wrap_distance(p, q, geometry: NetworkGeometry) -> float:
    """Wrap-around Euclidean distance between two points of the area."""
    off = wrap_offsets(p, q, geometry.area_width, geometry.area_height)
    return float(np.hypot(off[..., 0], off[..., 1]))


def pairwise_distances(geometry: NetworkGeometry) -> np.ndarray:
    """(L, K) wrap-around AP-user distances."""
    off = wrap_offsets(
        geometry.ap_positions[:, None, :],
        geometry.user_positions[None, :, :],
        geometry.area_width,
        geometry.area_height,
    )
    return np.hypot(off[..., 0], off[..., 1])


def pathloss_db(distance, config: ScenarioConfig) -> np.ndarray:
    d = np.maximum(np.asarray(distance, dtype=float), config.min_distance)
    return config.pathloss_intercept_db - 10.0 * config.pathloss_exponent * np.log10(d)


def local_scattering_correlation(
    N: int, angle: float, spread_rad: float, spacing: float = 0.5
) -> np.ndarray:
    """Gaussian local scattering model for a half-wavelength ULA (unit trace/N)."""
    diff = np.arange(N)[:, None] - np.arange(N)[None, :]
    arg = 2.0 * np.pi * spacing * diff
    return np.exp(1j * arg * np.sin(angle)) * np.exp(
        -0.5 * (spread_rad * arg * np.cos(angle)) ** 2
    )


def large_scale_fading(
    geometry: NetworkGeometry,
    config: ScenarioConfig,
    rng: Optional[np.random.Generator] = None,
) -> LargeScaleFading:
    """Channel gains from the log-distance model and, optionally, correlation.

    ``rng`` is only consumed when shadowing is enabled.
    """
    dist = pairwise_distances(geometry)
    gain_db = pathloss_db(dist, config)
    if config.shadowing_std_db > 0:
        if rng is None:
            raise ValueError("shadowing requires an rng")
        gain_db = gain_db + config.shadowing_std_db * rng.standard_normal(gain_db.shape)
    beta = 10.0 ** (gain_db / 10.0)

    R = None
    if config.correlation == "local_scattering":
        N = config.N
        spread = np.deg2rad(config.angular_spread_deg)
        # direction of the user seen from each AP, using the wrapped image
        delta = geometry.user_positions[None, :, :] - geometry.ap_positions[:, None, :]
        ext = np.array([geometry.area_width, geometry.area_height])
        delta = (delta + ext / 2) % ext - ext / 2
        angles = np.arctan2(delta[..., 1], delta[..., 0])
        R = np.empty((geometry.L, geometry.K, N, N), dtype=complex)
        for l in range(geometry.L):
            for k in range(geometry.K):
                R[l, k] = beta[l, k] * local_scattering_correlation(N, angles[l, k], spread)
    return LargeScaleFading(beta=beta, R=R, N=config.N)


def _psd_sqrt(R: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    vals, vecs = np.linalg.eigh(R)
    scale = max(np.abs(vals).max(), np.finfo(float).tiny)
    if vals.min() < -tol * scale:
        raise ValueError(f"correlation matrix is not PSD (min eigenvalue {vals.min():.3e})")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T


def sample_channel(fading: LargeScaleFading, rng: np.random.Generator) -> np.ndarray:
    """One block-fading realization ``h_kl = R_kl^{1/2} z``, ``z ~ CN(0, I)``."""
    L, K = fading.beta.shape
    N = fading.N
    z = (rng.standard_normal((L, K, N)) + 1j * rng.standard_normal((L, K, N))) / np.sqrt(2.0)
    if fading.R is None:
        h = np.sqrt(fading.beta)[:, :, None] * z
    else:
        h = np.empty_like(z)
        for l in range(L):
            for k in range(K):
                h[l, k] = _psd_sqrt(fading.R[l, k]) @ z[l, k]
    # (L, K, N) -> (L*N, K), AP-major rows
    return h.transpose(0, 2, 1).reshape(L * N, K)


def draw_scenario(config: ScenarioConfig, rng: np.random.Generator):
    """Geometry, fading and one channel realization from a single generator."""
    geometry = build_geometry(config, rng)
    fading = large_scale_fading(geometry, config, rng)
    H = sample_channel(fading, rng)
    return geometry, fading, H


def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, trial, stream)``.

    Stream 0 drives geometry and channels so every precoder mode sees the
    same realizations; stream 1 drives random precoder initialization.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, trial, stream]))
