"""Filter parameter files and run fingerprints.

One flat JSON document covers the filter parameters, the observation
weighting sigmas, and the motion-noise terms, so the CLI and the session
server share a single tunable surface.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

from .motion import MotionNoise
from .particle_filter import FilterParams
from .sensing import SensorConfig

_FILTER_FIELDS = ("particle_count", "group_link_distance",
                  "convergence_weight_fraction", "resample_ess_fraction")
_WEIGHTING_FIELDS = ("sigma_range_w", "sigma_bearing_w", "sigma_width_w",
                     "sigma_heading_w")
_MOTION_FIELDS = ("sigma_forward_per_meter", "sigma_forward_floor",
                  "sigma_dtheta_per_rad", "sigma_dtheta_floor")

PARAM_FIELDS = _FILTER_FIELDS + _WEIGHTING_FIELDS + _MOTION_FIELDS


@dataclass(frozen=True)
class Params:
    """Tunable filter surface: core parameters, weighting sigmas, and an
    optional motion-noise override (None keeps per-mode defaults)."""

    filter_params: FilterParams = FilterParams()
    weighting: dict | None = None
    motion_noise: MotionNoise | None = None

    def sensor_config(self, base: SensorConfig | None = None) -> SensorConfig:
        cfg = base if base is not None else SensorConfig()
        return replace(cfg, **self.weighting) if self.weighting else cfg

    def to_dict(self) -> dict:
        fp = self.filter_params
        out = {name: getattr(fp, name) for name in _FILTER_FIELDS}
        cfg = self.sensor_config()
        out.update({name: getattr(cfg, name) for name in _WEIGHTING_FIELDS})
        noise = self.motion_noise if self.motion_noise is not None else MotionNoise()
        out.update({name: getattr(noise, name) for name in _MOTION_FIELDS})
        return out


def params_from_dict(doc: dict) -> Params:
    unknown = set(doc) - set(PARAM_FIELDS)
    if unknown:
        raise ValueError(f"unknown parameter fields: {sorted(unknown)}")
    fkw = {k: doc[k] for k in _FILTER_FIELDS if k in doc}
    if "particle_count" in fkw:
        fkw["particle_count"] = int(fkw["particle_count"])
    weighting = {k: float(doc[k]) for k in _WEIGHTING_FIELDS if k in doc}
    motion = None
    if any(k in doc for k in _MOTION_FIELDS):
        mkw = {k: float(doc[k]) for k in _MOTION_FIELDS if k in doc}
        motion = replace(MotionNoise(), **mkw)
    params = Params(FilterParams(**fkw), weighting or None, motion)
    params.sensor_config()  # validate weighting values eagerly
    return params


def load_params(path) -> Params:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a parameter object")
    return params_from_dict(doc)


def save_params(params: Params, path) -> None:
    with open(path, "w") as f:
        json.dump(params.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def fingerprint(params: Params, mode: str, extra: dict | None = None) -> str:
    """Stable short hash identifying the effective tunables of a run."""
    doc = dict(params.to_dict(), odometry_mode=mode,
               motion_noise_overridden=params.motion_noise is not None)
    if extra:
        doc.update(extra)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
