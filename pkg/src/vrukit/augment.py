"""Seeded photometric and occlusion augmentations on 8-bit RGB images.

Images are ``uint8`` numpy arrays of shape ``(height, width, 3)``. Every
transform keeps the image shape and never moves pixels around, so boxes pass
through untouched. Randomness comes from a generator seeded with
``(master_seed, frame_seed)``; the same pair always reproduces the same
output, whatever order frames are processed in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import ConfigError, ValidationError
from .geometry import Annotation
from .stats import AugmentationLevel

_SEED_MASK = (1 << 64) - 1

Params = Mapping[str, Any]


def _uniform(rng: np.random.Generator, bounds: Sequence[float]) -> float:
    lo, hi = float(bounds[0]), float(bounds[1])
    return lo if lo == hi else float(rng.uniform(lo, hi))


def _randint(rng: np.random.Generator, bounds: Sequence[int]) -> int:
    lo, hi = int(bounds[0]), int(bounds[1])
    return lo if lo == hi else int(rng.integers(lo, hi + 1))


def _to_u8(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def brightness_contrast(img, rng, brightness=(-0.2, 0.2), contrast=(-0.2, 0.2)):
    b = _uniform(rng, brightness)
    c = _uniform(rng, contrast)
    lut = _to_u8(np.arange(256, dtype=np.float64) * (1.0 + c) + b * 255.0)
    return lut[img], {"brightness": b, "contrast": c}


def gaussian_blur(img, rng, sigma=(0.5, 2.0)):
    s = _uniform(rng, sigma)
    out = ndimage.gaussian_filter(img.astype(np.float64), sigma=(s, s, 0), mode="reflect")
    return _to_u8(out), {"sigma": s}


def gauss_noise(img, rng, sigma=(5.0, 25.0)):
    s = _uniform(rng, sigma)
    noise = rng.normal(0.0, s, size=img.shape)
    return _to_u8(img.astype(np.float64) + noise), {"sigma": s}


def rain(img, rng, density=(0.002, 0.006), length=(0.05, 0.15), slant=(-0.1, 0.1),
         brightness=(0.7, 0.9), color=(200, 200, 200)):
    h, w = img.shape[:2]
    d = _uniform(rng, density)
    drop_len = max(1, int(round(_uniform(rng, length) * h)))
    sl = _uniform(rng, slant)
    dim = _uniform(rng, brightness)
    n = max(1, int(d * h * w))
    xs = rng.integers(0, w, size=n)
    ys = rng.integers(0, h, size=n)
    out = img.astype(np.float64) * dim
    t = np.arange(drop_len)
    px = np.rint(xs[:, None] + sl * t[None, :]).astype(np.int64)
    py = ys[:, None] + t[None, :]
    keep = (px >= 0) & (px < w) & (py < h)
    out[py[keep], px[keep]] = np.asarray(color, dtype=np.float64)
    return _to_u8(out), {"drops": n, "length": drop_len, "slant": sl, "brightness": dim}


def fog(img, rng, intensity=(0.3, 0.7), grid=(3, 6), color=(230, 230, 230)):
    h, w = img.shape[:2]
    coef = _uniform(rng, intensity)
    g = _randint(rng, grid)
    coarse = rng.random((g, g))
    rows = np.linspace(0, g - 1, h)
    cols = np.linspace(0, g - 1, w)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    haze = ndimage.map_coordinates(coarse, [rr, cc], order=1, mode="nearest")
    alpha = (coef * haze)[..., None]
    out = img.astype(np.float64) * (1.0 - alpha) + np.asarray(color, dtype=np.float64) * alpha
    return _to_u8(out), {"intensity": coef, "grid": g}


def snow(img, rng, density=(0.005, 0.03), brighten=(1.0, 1.3)):
    h, w = img.shape[:2]
    d = _uniform(rng, density)
    gain = _uniform(rng, brighten)
    flakes = rng.random((h, w)) < d
    out = img.astype(np.float64) * gain
    out[flakes] = 255.0
    return _to_u8(out), {"density": d, "brighten": gain, "flakes": int(flakes.sum())}


def coarse_dropout(img, rng, holes=(1, 8), size=(0.05, 0.2), fill=0):
    h, w = img.shape[:2]
    n = _randint(rng, holes)
    out = img.copy()
    rects = []
    for _ in range(n):
        hh = max(1, int(round(_uniform(rng, size) * h)))
        ww = max(1, int(round(_uniform(rng, size) * w)))
        y = int(rng.integers(0, h - hh + 1))
        x = int(rng.integers(0, w - ww + 1))
        out[y:y + hh, x:x + ww] = fill
        rects.append([x, y, x + ww, y + hh])
    return out, {"holes": n, "rects": rects}


def grid_dropout(img, rng, ratio=0.5, unit=(0.1, 0.25), fill=0):
    h, w = img.shape[:2]
    u = max(2, int(round(_uniform(rng, unit) * min(h, w))))
    hole = max(1, int(round(u * float(ratio))))
    sx = int(rng.integers(0, u))
    sy = int(rng.integers(0, u))
    row_hit = ((np.arange(h) - sy) % u) < hole
    col_hit = ((np.arange(w) - sx) % u) < hole
    out = img.copy()
    out[np.outer(row_hit, col_hit)] = fill
    return out, {"unit": u, "hole": hole, "shift": [sx, sy]}


def to_gray(img, rng):
    luma = img.astype(np.float64) @ np.array([0.299, 0.587, 0.114])
    g = _to_u8(luma)
    return np.repeat(g[..., None], 3, axis=2), {}


def channel_dropout(img, rng, fill=0):
    ch = int(rng.integers(0, 3))
    out = img.copy()
    out[..., ch] = fill
    return out, {"channel": ch}


TRANSFORMS: dict[str, Callable] = {
    "brightness_contrast": brightness_contrast,
    "gaussian_blur": gaussian_blur,
    "gauss_noise": gauss_noise,
    "rain": rain,
    "fog": fog,
    "snow": snow,
    "coarse_dropout": coarse_dropout,
    "grid_dropout": grid_dropout,
    "to_gray": to_gray,
    "channel_dropout": channel_dropout,
}


@dataclass(frozen=True)
class Transform:
    name: str
    p: float = 1.0
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.name not in TRANSFORMS:
            raise ConfigError(f"unknown transform {self.name!r}")
        if not (0.0 <= self.p <= 1.0):
            raise ConfigError(f"{self.name}: probability {self.p} outside [0, 1]")


@dataclass(frozen=True)
class OneOf:
    options: tuple[Transform, ...]
    p: float = 1.0

    def __post_init__(self) -> None:
        if not self.options:
            raise ConfigError("one_of group is empty")
        if not (0.0 <= self.p <= 1.0):
            raise ConfigError(f"one_of probability {self.p} outside [0, 1]")


Step = Transform | OneOf


def _one_of(*names: str) -> OneOf:
    return OneOf(tuple(Transform(n) for n in names))


@dataclass(frozen=True)
class PipelineSpec:
    level: str
    steps: tuple[Step, ...]
    seed: int = 0

    @classmethod
    def none(cls, seed: int = 0) -> "PipelineSpec":
        return cls("none", (), seed)

    @classmethod
    def light(cls, seed: int = 0) -> "PipelineSpec":
        steps = (
            Transform("brightness_contrast"),
            Transform("gaussian_blur"),
            Transform("gauss_noise"),
            _one_of("rain", "fog", "snow"),
        )
        return cls("light", steps, seed)

    @classmethod
    def heavy(cls, seed: int = 0) -> "PipelineSpec":
        steps = (
            _one_of("coarse_dropout", "grid_dropout"),
            _one_of("to_gray", "channel_dropout"),
            Transform("brightness_contrast"),
            _one_of("gaussian_blur", "gauss_noise"),
            _one_of("rain", "fog", "snow"),
        )
        return cls("heavy", steps, seed)

    @classmethod
    def for_level(cls, level: AugmentationLevel | str, seed: int = 0) -> "PipelineSpec":
        level = AugmentationLevel(level)
        return {
            AugmentationLevel.NONE: cls.none,
            AugmentationLevel.LIGHT: cls.light,
            AugmentationLevel.HEAVY: cls.heavy,
        }[level](seed)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PipelineSpec":
        """Build from the JSON pipeline-spec shape.

        Either ``{"level": "light", "seed": 3}`` for a preset, or a custom
        ``steps`` list whose entries are ``{"name", "p", "params"}`` or
        ``{"one_of": [...], "p"}``.
        """
        if not isinstance(data, Mapping):
            raise ConfigError("pipeline spec must be a JSON object")
        seed = data.get("seed", 0)
        if not isinstance(seed, int):
            raise ConfigError("pipeline seed must be an integer")
        if "steps" not in data:
            try:
                return cls.for_level(str(data.get("level", "none")).lower(), seed)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

        def transform(entry: Mapping[str, Any]) -> Transform:
            try:
                return Transform(entry["name"], float(entry.get("p", 1.0)), dict(entry.get("params", {})))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad transform entry {entry!r}: {exc}") from None

        steps: list[Step] = []
        for entry in data["steps"]:
            if not isinstance(entry, Mapping):
                raise ConfigError(f"bad pipeline step {entry!r}")
            if "one_of" in entry:
                steps.append(OneOf(tuple(transform(e) for e in entry["one_of"]), float(entry.get("p", 1.0))))
            else:
                steps.append(transform(entry))
        return cls(str(data.get("level", "custom")), tuple(steps), seed)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineSpec":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"pipeline spec {path}: {exc}") from None


def frame_rng(master_seed: int, frame_seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed & _SEED_MASK, frame_seed & _SEED_MASK]))


def as_rgb(img: np.ndarray) -> np.ndarray:
    """Validate an image, replicating single-channel (thermal) input to RGB."""
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        raise ValidationError(f"expected uint8 pixels, got {arr.dtype}")
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValidationError("zero-sized image")
    return arr


def _plain(value: Any) -> Any:
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def apply_pipeline(
    img: np.ndarray,
    annos: Sequence[Annotation],
    spec: PipelineSpec,
    frame_seed: int,
) -> tuple[np.ndarray, list[Annotation], list[dict]]:
    """Run ``spec`` over one image; returns (image, annotations, transform log)."""
    out = as_rgb(img)
    log: list[dict] = []
    if not spec.steps:
        return out.copy(), list(annos), log
    rng = frame_rng(spec.seed, frame_seed)
    for step in spec.steps:
        roll = rng.random()
        if isinstance(step, OneOf):
            chosen = step.options[int(rng.integers(0, len(step.options)))]
            gate = step.p * chosen.p
        else:
            chosen = step
            gate = step.p
        if roll >= gate:
            continue
        out, sampled = TRANSFORMS[chosen.name](out, rng, **chosen.params)
        log.append({"transform": chosen.name, "params": {k: _plain(v) for k, v in sampled.items()}})
    return out, list(annos), log


def load_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def save_image(img: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    im = Image.fromarray(as_rgb(img))
    if path.suffix.lower() in (".jpg", ".jpeg"):
        im.save(path, quality=95)
    else:
        im.save(path)
