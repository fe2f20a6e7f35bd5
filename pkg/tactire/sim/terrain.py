"""Ground textures seen by the waveguide's ground contact."""
import dataclasses
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from tactire.data.cycles import Terrain

PATTERNS = ("none", "sine", "ribs")
# fraction of each rib period that presses the tube
RIB_DUTY = 0.15


@dataclass(frozen=True)
class TerrainSpec:
    """Texture of a surface.

    roughness: amplitude of the echo modulation, ADC counts.
    spatial_period: texture wavelength along the ground, m.
    absorption: fraction of the ground echo lost to the material, 0-1.
    """

    name: Terrain
    roughness: float = 0.0
    spatial_period: float = 0.05
    absorption: float = 0.0
    pattern: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "name", Terrain(self.name))
        if self.roughness < 0:
            raise ValueError(f"roughness must be >= 0, got {self.roughness}")
        if self.spatial_period <= 0:
            raise ValueError(f"spatial_period must be > 0, got {self.spatial_period}")
        if not 0.0 <= self.absorption <= 1.0:
            raise ValueError(f"absorption must be within [0, 1], got {self.absorption}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}, got {self.pattern!r}")

    def texture(self, x: float) -> float:
        """Echo modulation in ADC counts at `x` m into the material."""
        if self.pattern == "none" or self.roughness == 0.0:
            return 0.0
        phase = x / self.spatial_period
        if self.pattern == "sine":
            return self.roughness * float(np.sin(2 * np.pi * phase))
        return self.roughness if phase - np.floor(phase) < RIB_DUTY else 0.0

    def to_dict(self) -> Dict[str, Any]:
        d = dataclasses.asdict(self)
        d["name"] = self.name.value
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "TerrainSpec":
        return cls(**d)


DEFAULT_TERRAINS: Dict[Terrain, TerrainSpec] = {
    Terrain.WOOD: TerrainSpec(Terrain.WOOD),
    Terrain.NFM: TerrainSpec(
        Terrain.NFM,
        roughness=120.0,
        spatial_period=0.015,
        absorption=0.2,
        pattern="sine",
    ),
    Terrain.RIBBED: TerrainSpec(
        Terrain.RIBBED,
        roughness=500.0,
        spatial_period=0.04,
        absorption=0.4,
        pattern="ribs",
    ),
    Terrain.OUTDOOR: TerrainSpec(
        Terrain.OUTDOOR,
        roughness=150.0,
        spatial_period=0.005,
        absorption=0.55,
        pattern="sine",
    ),
    Terrain.SOFT: TerrainSpec(
        Terrain.SOFT,
        roughness=200.0,
        spatial_period=0.12,
        absorption=0.75,
        pattern="sine",
    ),
}


def terrain_spec(name) -> TerrainSpec:
    return DEFAULT_TERRAINS[Terrain(name)]
