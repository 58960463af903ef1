"""Scenario configuration.

All physical quantities are SI: seconds, Hz, Watts, meters. Defaults reproduce
the reference deployment (16 APs on a 4x4 grid in a 96 m x 48 m wrapped area,
t = 0.05 ms, B = 1 MHz, epsilon = 1e-5).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import yaml


class ConfigError(ValueError):
    """Raised for invalid or unreadable scenario configurations."""


def thermal_noise_power(bandwidth: float, noise_figure_db: float = 9.0) -> float:
    """Noise power in Watts for -174 dBm/Hz thermal density plus a noise figure."""
    noise_dbm = -174.0 + 10.0 * math.log10(bandwidth) + noise_figure_db
    return 10.0 ** (noise_dbm / 10.0) * 1e-3


@dataclass(frozen=True)
class ScenarioConfig:
    # network dimensions
    L: int = 16
    N: int = 4
    K: int = 6
    M: int = 16
    # deployment geometry [m]
    area_width: float = 96.0
    area_height: float = 48.0
    ap_spacing_x: float = 24.0
    ap_spacing_y: float = 12.0
    # URLLC link parameters
    t: float = 5e-5
    B: float = 1e6
    epsilon: float = 1e-5
    # powers [W]; sigma2=None derives it from B and the noise figure
    sigma2: Optional[float] = None
    noise_figure_db: float = 9.0
    p_max: float = 1.0
    mmse_power_per_user: Optional[float] = None
    # propagation
    pathloss_intercept_db: float = -30.5
    pathloss_exponent: float = 3.67
    min_distance: float = 1.0
    shadowing_std_db: float = 0.0
    correlation: str = "uncorrelated"
    angular_spread_deg: float = 10.0
    # pilot length; perfect CSI is assumed so this is recorded only
    tau_p: int = 3
    # explicit AP -> cluster map overriding the grid partition
    cluster_map: Optional[tuple[int, ...]] = None
    # Monte-Carlo and algorithm controls
    seed: int = 0
    trials: int = 200
    pfa_tol: float = 1e-4
    solver_tol: float = 1e-6
    pfa_max_iter: int = 50
    init_max_iter: int = 50
    phi_floor: float = 1e-6

    def __post_init__(self):
        if self.sigma2 is None:
            if not self.B > 0:
                raise ConfigError("B must be positive")
            object.__setattr__(
                self, "sigma2", thermal_noise_power(self.B, self.noise_figure_db)
            )
        if self.cluster_map is not None:
            object.__setattr__(self, "cluster_map", tuple(int(c) for c in self.cluster_map))
        self.validate()

    def validate(self) -> None:
        for name in ("L", "N", "K", "M"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.L % self.M != 0:
            raise ConfigError(f"cluster size M={self.M} does not divide L={self.L}")
        positive = (
            "area_width", "area_height", "ap_spacing_x", "ap_spacing_y", "t", "B",
            "sigma2", "p_max", "pfa_tol", "solver_tol", "min_distance", "phi_floor",
        )
        for name in positive:
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be positive and finite, got {value}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.mmse_power_per_user is not None and not self.mmse_power_per_user > 0:
            raise ConfigError("mmse_power_per_user must be positive")
        if self.pfa_max_iter < 1 or self.init_max_iter < 1 or self.trials < 0:
            raise ConfigError("iteration caps must be >= 1 and trials >= 0")
        if self.correlation not in ("uncorrelated", "local_scattering"):
            raise ConfigError(f"unknown correlation model {self.correlation!r}")
        if self.shadowing_std_db < 0:
            raise ConfigError("shadowing_std_db must be >= 0")
        if self.cluster_map is not None and len(self.cluster_map) != self.L:
            raise ConfigError("cluster_map must assign every AP")

    @property
    def blocklength(self) -> float:
        """Number of channel uses t*B."""
        return self.t * self.B

    @property
    def p_mmse(self) -> float:
        """Per-user power used by the MMSE baseline (p_max / K unless set)."""
        if self.mmse_power_per_user is not None:
            return self.mmse_power_per_user
        return self.p_max / self.K

    def replace(self, **changes) -> "ScenarioConfig":
        # sigma2 is re-derived when B changes unless given explicitly
        if "B" in changes and "sigma2" not in changes and self._sigma2_derived():
            changes["sigma2"] = None
        return dataclasses.replace(self, **changes)

    def _sigma2_derived(self) -> bool:
        return math.isclose(
            self.sigma2, thermal_noise_power(self.B, self.noise_figure_db), rel_tol=1e-12
        )

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        if d["cluster_map"] is not None:
            d["cluster_map"] = list(d["cluster_map"])
        return d

    def digest(self) -> str:
        """Short stable hash of all fields, used to tag reports."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        # YAML 1.1 reads exponents without a sign ("1.0e6") as strings
        for f in dataclasses.fields(cls):
            v = data.get(f.name)
            if isinstance(v, str) and "float" in str(f.type):
                try:
                    data[f.name] = float(v)
                except ValueError as exc:
                    raise ConfigError(f"{f.name}: expected a number, got {v!r}") from exc
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, overrides: Optional[dict[str, Any]] = None) -> ScenarioConfig:
    """Read a YAML (or JSON, which is valid YAML) config file.

    Keys mirror :class:`ScenarioConfig` fields; missing keys take defaults.
    """
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return ScenarioConfig.from_dict(data)


def cluster_sizes_for(L: int, counts: Sequence[int]) -> list[int]:
    """Convert cluster counts (e.g. 2, 4, 16) into APs-per-cluster values."""
    sizes = []
    for c in counts:
        if c < 1 or L % c:
            raise ConfigError(f"{c} clusters cannot partition {L} APs")
        sizes.append(L // c)
    return sizes
