"""Operator catalog, serializable distortion specs and seeded sampling."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable

import numpy as np

from featdistill.distortions import ops
from featdistill.errors import InvalidArgument
from featdistill.image import SeededRng, as_image, clamp

SEVERITIES = (1, 2, 3, 4, 5)


class PipelineMode(str, enum.Enum):
    OFFICIAL_ONLY = "official_only"
    EXTENDED_ONLY = "extended_only"
    MIXED_EQUAL = "mixed_equal"
    CLEAN = "clean"

    @classmethod
    def parse(cls, value) -> PipelineMode:
        if isinstance(value, cls):
            return value
        # accepts snake_case, kebab-case and CamelCase spellings
        norm = re.sub(r"(?<=[a-z])(?=[A-Z])", "_", str(value).strip()).lower().replace("-", "_")
        aliases = {"official": "official_only", "extended": "extended_only", "mixed": "mixed_equal"}
        try:
            return cls(aliases.get(norm, norm))
        except ValueError:
            raise InvalidArgument(f"unknown pipeline mode: {value!r}") from None


@dataclass(frozen=True)
class Operator:
    name: str
    catalog: str  # "official" or "extended"
    category: str
    fn: Callable[..., np.ndarray]
    params: tuple[str, ...]
    severity_rows: tuple[dict, ...]
    seeded: bool = False
    resampling: bool = False
    # Zero-strength setting that must reproduce the input, if one exists.
    identity: dict | None = None

    def params_for(self, severity: int) -> dict:
        return dict(self.severity_rows[severity - 1])


# name -> (fn, seeded, resampling, identity params)
_IMPLS: dict[str, tuple[Callable, bool, bool, dict | None]] = {
    "gaussian_blur": (ops.gaussian_blur, False, False, {"sigma": 0.0}),
    "motion_blur": (ops.motion_blur, False, False, {"kernel_len": 1, "angle": 0.0}),
    "defocus_blur": (ops.defocus_blur, False, False, {"radius": 0.0}),
    "atmospheric_blur": (ops.atmospheric_blur, False, False, {"sigma": 0.0}),
    "zoom_blur": (ops.zoom_blur, False, True, {"zoom": 0.0}),
    "gaussian_noise": (ops.gaussian_noise, True, False, {"sigma": 0.0}),
    "poisson_noise": (ops.poisson_noise, True, False, {"scale": 0.0}),
    "iso_noise": (ops.iso_noise, True, False, {"sigma": 0.0}),
    "salt_pepper": (ops.salt_pepper, True, False, {"amount": 0.0}),
    "banding_noise": (ops.banding_noise, True, False, {"amplitude": 0.0}),
    "jpeg_compress": (ops.jpeg_compress, False, False, None),
    "jpeg2000_wavelet": (ops.jpeg2000_wavelet, False, False, {"step": 0.0}),
    "ringing": (ops.ringing, False, False, {"cutoff": 1.0}),
    "chroma_subsample": (ops.chroma_subsample, False, False, {"factor": 1}),
    "color_cast": (ops.color_cast, False, False, {"gains": [1.0, 1.0, 1.0]}),
    "saturation_shift": (ops.saturation_shift, False, False, {"factor": 1.0}),
    "contrast_shift": (ops.contrast_shift, False, False, {"factor": 1.0}),
    "gamma_shift": (ops.gamma_shift, False, False, {"gamma": 1.0}),
    "posterize": (ops.posterize, False, False, None),
    "perspective_warp": (ops.perspective_warp, True, True, {"corner_jitter": 0.0}),
    "barrel_distortion": (ops.barrel_distortion, False, True, {"strength": 0.0}),
    "pincushion_distortion": (ops.pincushion_distortion, False, True, {"strength": 0.0}),
    "resize_down_up": (ops.resize_down_up, False, True, {"scale": 1.0}),
    "rotation_crop": (ops.rotation_crop, False, True, {"angle": 0.0}),
    "fog": (ops.fog, True, False, {"density": 0.0}),
    "rain": (ops.rain, True, False, {"density": 0.0}),
    "snow": (ops.snow, True, False, {"density": 0.0}),
    "shadow": (ops.shadow, True, False, {"strength": 0.0}),
    "sensor_blooming": (ops.sensor_blooming, False, False, {"threshold": 0.8, "spread": 0.0}),
    "vignette": (ops.vignette, False, False, {"strength": 0.0}),
    "hot_pixels": (ops.hot_pixels, True, False, {"fraction": 0.0}),
    "random_occlusion": (ops.random_occlusion, True, False, None),
    "text_overlay": (ops.text_overlay, True, False, {"count": 2, "opacity": 0.0}),
    "watermark_grid": (ops.watermark_grid, False, False, {"opacity": 0.0, "spacing": 8}),
    "screenshot_border": (ops.screenshot_border, False, True, {"border": 0.0}),
    "official_gaussian_blur": (ops.gaussian_blur, False, False, {"sigma": 0.0}),
    "official_gaussian_noise": (ops.gaussian_noise, True, False, {"sigma": 0.0}),
    "official_jpeg": (ops.jpeg_420, False, False, None),
    "official_resize": (ops.resize_down_up, False, True, {"scale": 1.0}),
    "official_color_adjust": (ops.color_adjust, False, False,
                              {"brightness": 0.0, "contrast": 1.0, "saturation": 1.0}),
    "official_lens_distortion": (ops.lens_distortion, False, True, {"k": 0.0}),
    "official_filter": (ops.sharpen_filter, False, False, {"amount": 0.0}),
    "official_motion_blur": (ops.motion_blur, False, False, {"kernel_len": 1, "angle": 0.0}),
    "official_recompress": (ops.jpeg_recompress, False, True, None),
}


def _load_catalog() -> dict[str, Operator]:
    raw = json.loads(resources.files("featdistill.distortions").joinpath("severity.json").read_text())
    out = {}
    for catalog in ("official", "extended"):
        for name, entry in raw[catalog].items():
            fn, seeded, resampling, identity = _IMPLS[name]
            rows = tuple(entry["rows"])
            if len(rows) != len(SEVERITIES):
                raise RuntimeError(f"{name}: severity table needs {len(SEVERITIES)} rows")
            keys = tuple(rows[0])
            out[name] = Operator(name, catalog, entry["category"], fn, keys, rows,
                                 seeded=seeded, resampling=resampling, identity=identity)
    return out


OPERATORS: dict[str, Operator] = _load_catalog()
OFFICIAL_OPS: tuple[str, ...] = tuple(n for n, op in OPERATORS.items() if op.catalog == "official")
EXTENDED_OPS: tuple[str, ...] = tuple(n for n, op in OPERATORS.items() if op.catalog == "extended")
CATEGORIES: tuple[str, ...] = tuple(dict.fromkeys(OPERATORS[n].category for n in EXTENDED_OPS))


def get_operator(name: str) -> Operator:
    try:
        return OPERATORS[name]
    except KeyError:
        raise InvalidArgument(f"unknown operator: {name!r}") from None


def _canon(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (tuple, list, np.ndarray)):
        return [_canon(v) for v in value]
    return value


@dataclass(frozen=True)
class DistortionSpec:
    """One fully determined corruption: operator, severity, parameters and seed."""

    op: str
    severity: int
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "params", {k: _canon(v) for k, v in self.params.items()})
        self.validate()

    def validate(self):
        info = get_operator(self.op)
        if isinstance(self.severity, bool) or int(self.severity) != self.severity \
                or self.severity not in SEVERITIES:
            raise InvalidArgument(f"severity must be an integer in 1..5, got {self.severity!r}")
        if set(self.params) != set(info.params):
            raise InvalidArgument(
                f"{self.op}: params {sorted(self.params)} do not match schema {sorted(info.params)}")
        if not 0 <= int(self.seed) < 1 << 64:
            raise InvalidArgument(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def operator(self) -> Operator:
        return OPERATORS[self.op]

    @property
    def catalog(self) -> str:
        return self.operator.catalog

    @classmethod
    def at_severity(cls, op: str, severity: int, seed: int = 0) -> DistortionSpec:
        info = get_operator(op)
        if severity not in SEVERITIES:
            raise InvalidArgument(f"severity must be an integer in 1..5, got {severity!r}")
        return cls(op, severity, info.params_for(severity), seed)

    def to_dict(self) -> dict:
        return {"op": self.op, "severity": int(self.severity),
                "params": {k: self.params[k] for k in sorted(self.params)}, "seed": int(self.seed)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> DistortionSpec:
        if not isinstance(d, dict) or set(d) != {"op", "severity", "params", "seed"}:
            raise InvalidArgument(f"distortion spec needs exactly op/severity/params/seed, got {d!r}")
        return cls(d["op"], d["severity"], dict(d["params"]), int(d["seed"]))

    @classmethod
    def from_json(cls, text: str) -> DistortionSpec:
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"malformed distortion spec: {exc}") from None
        return cls.from_dict(d)


def apply(spec: DistortionSpec, img) -> np.ndarray:
    """Apply ``spec`` to ``img``; the result is clamped and has the input shape."""
    if not isinstance(spec, DistortionSpec):
        raise InvalidArgument(f"expected a DistortionSpec, got {type(spec).__name__}")
    spec.validate()
    img = as_image(img)
    info = spec.operator
    kwargs = dict(spec.params)
    if info.seeded:
        kwargs["rng"] = SeededRng(spec.seed)
    out = clamp(info.fn(img, **kwargs))
    if out.shape != img.shape:
        raise AssertionError(f"{spec.op} changed shape {img.shape} -> {out.shape}")
    return out


def sample_spec(rng: SeededRng, mode) -> DistortionSpec | None:
    """Draw one spec. Mixed mode flips a fair coin between the two catalogs first."""
    mode = PipelineMode.parse(mode)
    if mode is PipelineMode.CLEAN:
        return None
    if mode is PipelineMode.MIXED_EQUAL:
        names = OFFICIAL_OPS if rng.random() < 0.5 else EXTENDED_OPS
    elif mode is PipelineMode.OFFICIAL_ONLY:
        names = OFFICIAL_OPS
    else:
        names = EXTENDED_OPS
    op = names[int(rng.integers(0, len(names)))]
    severity = int(rng.integers(1, 6))
    return DistortionSpec.at_severity(op, severity, rng.next_u64())
