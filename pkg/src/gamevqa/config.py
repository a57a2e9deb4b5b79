"""Run configuration: defaults, TOML file loading, and config hashing.

Every artifact written by the pipeline embeds the hash of the extraction
configuration, so features, models, and reports produced under different
settings can never be silently mixed.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field, fields, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class RunConfig:
    sigma_spatial: float = 1.5
    sigma_temporal: float = 1.5
    seed: int = 0
    spatial_rate: int = 2
    temporal_rate: int = 8
    scales: tuple[int, ...] = (540, 270)
    display: tuple[int, int] | None = None  # (width, height) upscale before extraction
    jobs: int = 1
    deep_provider: str | None = None
    epsilon: float = 1.0
    splits: int = 1000
    timeout: float = 30.0

    # fields that change the extracted feature values
    _EXTRACTION_FIELDS = (
        "sigma_spatial",
        "sigma_temporal",
        "seed",
        "spatial_rate",
        "temporal_rate",
        "scales",
        "display",
    )

    def extraction_dict(self) -> dict:
        return {
            name: list(v) if isinstance(v := getattr(self, name), tuple) else v
            for name in self._EXTRACTION_FIELDS
        }

    def config_hash(self) -> bytes:
        payload = json.dumps(self.extraction_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).digest()

    def schema_hash(self, mask: str = "STD") -> bytes:
        """Hash binding a model to the feature layout, mask, and extraction config."""
        payload = json.dumps(
            {
                "layout": "spatial680|temporal476|deep1024",
                "mask": mask,
                "config": self.config_hash().hex(),
            },
            sort_keys=True,
        ).encode()
        return hashlib.sha256(payload).digest()


def load_config(path: str | None = None, **overrides) -> RunConfig:
    """Build a RunConfig from defaults, an optional TOML file, then overrides."""
    cfg = RunConfig()
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys in {path}: {sorted(unknown)}")
        for key in ("scales", "display"):
            if key in data and data[key] is not None:
                data[key] = tuple(data[key])
        cfg = replace(cfg, **data)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg
