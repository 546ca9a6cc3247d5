"""Declarative stage pipelines for the two processing chains.

A PipelineConfig is an ordered stage list plus named output variants;
running it on one image yields one output per variant (or the bare chain
output when no variants are declared). Configs serialize to a stable JSON
document so an experiment is fully described by one file.

Luminance-only stages (clahe, sift_roi, threshold, laplacian) convert RGB
input to grayscale when first reached; normalize_stretch, sharpen and
dilate apply channelwise on RGB so photometric variants keep their colors.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import ops, sift
from .dataset import Manifest, SampleRecord
from .errors import ConfigError, ImageError, PipelineError
from .image import Image, StructuringElement, image_from_array, load_image, save_image
from .ops import Rect

log = logging.getLogger(__name__)

DEFAULT_SIFT_ROI_MARGIN = 12
DEFAULT_SIFT_MIN_KEYPOINTS = 5

# kind -> {param: (type, default)}; None default means required
_STAGE_PARAMS: dict[str, dict[str, tuple]] = {
    "normalize_stretch": {},
    "normalize_unit": {},
    "contrast": {"factor": (float, None)},
    "brightness": {"delta": (float, None)},
    "color": {"gains": (list, None)},
    "sharpen": {"amount": (float, None)},
    "clahe": {"clip_limit": (float, 2.0), "tiles": (list, [8, 8])},
    "sift_roi": {
        "margin": (int, DEFAULT_SIFT_ROI_MARGIN),
        "min_keypoints": (int, DEFAULT_SIFT_MIN_KEYPOINTS),
    },
    "threshold": {},
    "crop_roi": {"margin": (int, ops.DEFAULT_ROI_MARGIN)},
    "laplacian": {},
    "invert": {},
    "dilate": {"size": (int, 3), "shape": (str, "square"), "iterations": (int, 1)},
    "resize": {"width": (int, None), "height": (int, None)},
}

_ROI_PRODUCERS = {"sift_roi", "threshold"}


@dataclass(frozen=True)
class StageSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _STAGE_PARAMS:
            raise ConfigError(f"unknown stage kind {self.kind!r}")
        schema = _STAGE_PARAMS[self.kind]
        unknown = set(self.params) - set(schema)
        if unknown:
            raise ConfigError(f"stage {self.kind!r}: unknown parameter(s) {sorted(unknown)}")
        filled = {}
        for name, (typ, default) in schema.items():
            if name in self.params:
                value = self.params[name]
            elif default is not None:
                value = default
            else:
                raise ConfigError(f"stage {self.kind!r}: missing parameter {name!r}")
            try:
                if typ is float:
                    value = float(value)
                elif typ is int:
                    value = int(value)
                elif typ is list:
                    value = list(value)
            except (TypeError, ValueError):
                raise ConfigError(f"stage {self.kind!r}: bad value for {name!r}: {value!r}") from None
            filled[name] = value
        _validate_stage_params(self.kind, filled)
        object.__setattr__(self, "params", filled)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}


def _validate_stage_params(kind: str, p: dict) -> None:
    if kind == "contrast" and p["factor"] <= 0:
        raise ConfigError("contrast stage: factor must be > 0")
    if kind == "sharpen" and p["amount"] <= 0:
        raise ConfigError("sharpen stage: amount must be > 0")
    if kind == "color" and len(p["gains"]) != 3:
        raise ConfigError("color stage: gains must be [r, g, b]")
    if kind == "clahe":
        if len(p["tiles"]) != 2 or min(p["tiles"]) < 1:
            raise ConfigError("clahe stage: tiles must be two integers >= 1")
        if p["clip_limit"] < 1:
            raise ConfigError("clahe stage: clip_limit must be >= 1")
    if kind == "dilate":
        if p["size"] < 1 or p["size"] % 2 == 0:
            raise ConfigError("dilate stage: size must be an odd integer >= 1")
        if p["shape"] not in ("square", "cross"):
            raise ConfigError("dilate stage: shape must be 'square' or 'cross'")
        if p["iterations"] < 1:
            raise ConfigError("dilate stage: iterations must be >= 1")
    if kind == "resize" and (p["width"] < 1 or p["height"] < 1):
        raise ConfigError("resize stage: target size must be >= 1")
    if kind in ("sift_roi", "crop_roi") and p["margin"] < 0:
        raise ConfigError(f"{kind} stage: margin must be >= 0")


@dataclass(frozen=True)
class VariantSpec:
    name: str
    extra_stages: tuple = ()

    def __post_init__(self):
        if not self.name or "/" in self.name or os.sep in self.name:
            raise ConfigError(f"bad variant name {self.name!r}")
        object.__setattr__(self, "extra_stages", tuple(self.extra_stages))

    def to_dict(self) -> dict:
        return {"name": self.name, "extra_stages": [s.to_dict() for s in self.extra_stages]}


@dataclass(frozen=True)
class PipelineConfig:
    name: str
    stages: tuple = ()
    variants: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        object.__setattr__(self, "variants", tuple(self.variants))
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate variant names in config {self.name!r}")
        # crop_roi must be preceded by a roi/mask producer in the base chain
        seen_producer = False
        for i, stage in enumerate(self.stages):
            if stage.kind == "crop_roi" and not seen_producer:
                raise ConfigError(
                    f"config {self.name!r}: crop_roi at stage {i} has no prior sift_roi/threshold"
                )
            if stage.kind in _ROI_PRODUCERS:
                seen_producer = True
        for v in self.variants:
            for stage in v.extra_stages:
                if stage.kind == "crop_roi" and not seen_producer:
                    raise ConfigError(
                        f"config {self.name!r}: variant {v.name!r} uses crop_roi "
                        "with no prior sift_roi/threshold"
                    )

    @property
    def variant_count(self) -> int:
        return max(1, len(self.variants))

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "stages": [s.to_dict() for s in self.stages],
            "variants": [v.to_dict() for v in self.variants],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ConfigError("pipeline config must be a JSON object")
        unknown = set(doc) - {"name", "stages", "variants"}
        if unknown:
            raise ConfigError(f"pipeline config: unknown key(s) {sorted(unknown)}")
        if "name" not in doc or not isinstance(doc["name"], str):
            raise ConfigError("pipeline config: missing string 'name'")
        stages = [_stage_from_dict(s) for s in doc.get("stages", [])]
        variants = []
        for v in doc.get("variants", []):
            if not isinstance(v, dict):
                raise ConfigError("pipeline config: variant entries must be objects")
            vunknown = set(v) - {"name", "extra_stages"}
            if vunknown:
                raise ConfigError(f"pipeline config: variant unknown key(s) {sorted(vunknown)}")
            if "name" not in v:
                raise ConfigError("pipeline config: variant missing 'name'")
            variants.append(
                VariantSpec(v["name"], [_stage_from_dict(s) for s in v.get("extra_stages", [])])
            )
        return cls(doc["name"], tuple(stages), tuple(variants))

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"pipeline config is not valid JSON: {e}") from None
        return cls.from_json_dict(doc)


def _stage_from_dict(s) -> StageSpec:
    if not isinstance(s, dict):
        raise ConfigError("pipeline config: stage entries must be objects")
    unknown = set(s) - {"kind", "params"}
    if unknown:
        raise ConfigError(f"pipeline config: stage unknown key(s) {sorted(unknown)}")
    if "kind" not in s:
        raise ConfigError("pipeline config: stage missing 'kind'")
    return StageSpec(s["kind"], s.get("params", {}))


def load_config(path: str | os.PathLike) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return PipelineConfig.from_json(fh.read())


def default_direct_config() -> PipelineConfig:
    """Photometric augmentation: six output variants, no geometry changes."""
    return PipelineConfig(
        name="direct",
        stages=(),
        variants=(
            VariantSpec("original", ()),
            VariantSpec("normalized", (StageSpec("normalize_stretch"),)),
            VariantSpec("contrast", (StageSpec("contrast", {"factor": 1.5}),)),
            VariantSpec("color", (StageSpec("color", {"gains": [1.2, 1.0, 1.0]}),)),
            VariantSpec("brightness", (StageSpec("brightness", {"delta": 25.0}),)),
            VariantSpec("sharpened", (StageSpec("sharpen", {"amount": 1.0}),)),
        ),
    )


def default_indirect_config() -> PipelineConfig:
    """Ten-stage ridge enhancement chain plus three output variants."""
    return PipelineConfig(
        name="indirect",
        stages=(
            StageSpec("normalize_stretch"),
            StageSpec("clahe", {"clip_limit": 2.0, "tiles": [8, 8]}),
            StageSpec("sift_roi"),
            StageSpec("threshold"),
            StageSpec("crop_roi"),
            StageSpec("laplacian"),
            StageSpec("invert"),
            StageSpec("sharpen", {"amount": 1.0}),
            StageSpec("contrast", {"factor": 1.2}),
            StageSpec("dilate", {"size": 3, "shape": "square", "iterations": 1}),
        ),
        variants=(
            VariantSpec("enhanced", ()),
            VariantSpec("contrast", (StageSpec("contrast", {"factor": 1.3}),)),
            VariantSpec("sharpened", (StageSpec("sharpen", {"amount": 1.0}),)),
        ),
    )


@dataclass
class PipelineContext:
    image: Image
    roi: Rect | None = None
    mask: Image | None = None
    keypoints: list | None = None


def _channelwise(img: Image, fn) -> Image:
    if img.channels == 1:
        return fn(img)
    planes = [fn(Image(img.pixels[..., c].copy())).pixels for c in range(3)]
    return Image(np.stack(planes, axis=-1))


def _apply_stage(ctx: PipelineContext, stage: StageSpec) -> None:
    kind, p = stage.kind, stage.params
    img = ctx.image
    if kind == "normalize_stretch":
        ctx.image = _channelwise(img, ops.normalize_stretch)
    elif kind == "normalize_unit":
        # materialized outputs stay 8-bit: v/255 then exact re-quantization
        ctx.image = image_from_array((ops.normalize_unit(img) * 255.0).round())
    elif kind == "contrast":
        ctx.image = ops.photometric_adjust(img, "contrast", p["factor"])
    elif kind == "brightness":
        ctx.image = ops.photometric_adjust(img, "brightness", p["delta"])
    elif kind == "color":
        ctx.image = ops.photometric_adjust(img, "color", p["gains"])
    elif kind == "sharpen":
        ctx.image = _channelwise(img, lambda im: ops.sharpen(im, p["amount"]))
    elif kind == "clahe":
        ctx.image = ops.clahe(ops.to_grayscale(img), p["clip_limit"], tuple(p["tiles"]))
    elif kind == "sift_roi":
        _apply_sift_roi(ctx, p)
    elif kind == "threshold":
        binary, _ = ops.threshold_otsu(ops.to_grayscale(img))
        ctx.image = binary
        ctx.mask = binary
    elif kind == "crop_roi":
        _apply_crop_roi(ctx, p)
    elif kind == "laplacian":
        ctx.image = ops.laplacian(ops.to_grayscale(img))
    elif kind == "invert":
        ctx.image = ops.invert(img)
    elif kind == "dilate":
        se = StructuringElement.square(p["size"]) if p["shape"] == "square" else StructuringElement.cross(p["size"])
        ctx.image = _channelwise(img, lambda im: ops.dilate(im, se, p["iterations"]))
    elif kind == "resize":
        ctx.image = ops.resize_bilinear(img, p["width"], p["height"])
        ctx.roi = None
        ctx.mask = None
    else:  # pragma: no cover - kinds are validated at parse time
        raise PipelineError(f"unhandled stage kind {kind!r}")


def _apply_sift_roi(ctx: PipelineContext, p: dict) -> None:
    gray = ops.to_grayscale(ctx.image)
    if gray.width < sift.MIN_IMAGE_SIDE or gray.height < sift.MIN_IMAGE_SIDE:
        log.warning("sift_roi: image too small for scale space, skipping")
        return
    space = sift.build_scale_space(gray)
    kps = sift.detect_keypoints(space)
    ctx.keypoints = kps
    if len(kps) < p["min_keypoints"]:
        log.info("sift_roi: only %d keypoints, deferring to threshold mask", len(kps))
        return
    margin = p["margin"]
    x0 = max(0, int(min(k.x for k in kps)) - margin)
    y0 = max(0, int(min(k.y for k in kps)) - margin)
    x1 = min(gray.width - 1, int(max(k.x for k in kps)) + margin)
    y1 = min(gray.height - 1, int(max(k.y for k in kps)) + margin)
    ctx.roi = Rect(x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def _apply_crop_roi(ctx: PipelineContext, p: dict) -> None:
    rect = ctx.roi
    if rect is None and ctx.mask is not None:
        rect = ops.roi_from_mask(ctx.mask, p["margin"])
    if rect is None:
        return  # nothing to focus on: identity
    full = Rect(0, 0, ctx.image.width, ctx.image.height)
    if rect == full:
        return
    ctx.image = ops.crop(ctx.image, rect)
    if ctx.mask is not None:
        ctx.mask = ops.crop(ctx.mask, rect)
    ctx.roi = None  # consumed; coordinates are stale after cropping


def run_pipeline(img: Image, cfg: PipelineConfig) -> list[tuple[str, Image]]:
    """Apply the chain then emit one (variant_name, image) per variant."""
    ctx = PipelineContext(image=img)
    for i, stage in enumerate(cfg.stages):
        try:
            _apply_stage(ctx, stage)
        except (ImageError, ConfigError) as e:
            raise PipelineError(f"stage {i} ({stage.kind}): {e}") from e

    if not cfg.variants:
        return [(cfg.name or "output", ctx.image)]

    outputs = []
    for variant in cfg.variants:
        vctx = PipelineContext(ctx.image, ctx.roi, ctx.mask, ctx.keypoints)
        for j, stage in enumerate(variant.extra_stages):
            try:
                _apply_stage(vctx, stage)
            except (ImageError, ConfigError) as e:
                raise PipelineError(
                    f"variant {variant.name!r} stage {len(cfg.stages) + j} ({stage.kind}): {e}"
                ) from e
        outputs.append((variant.name, vctx.image))
    return outputs


def output_name(record: SampleRecord, variant: str) -> str:
    return f"{record.subject_id}_{record.sample_idx}_{variant}.png"


def _process_record(args):
    record, cfg, source_root, out_dir = args
    try:
        img = load_image(os.path.join(source_root, record.path))
        results = run_pipeline(img, cfg)
        names = []
        for variant, out_img in results:
            name = output_name(record, variant)
            save_image(out_img, os.path.join(out_dir, name))
            names.append(name)
        return record, names, None
    except (ImageError, PipelineError, ConfigError) as e:
        return record, [], str(e)


def run_batch(
    manifest: Manifest,
    cfg: PipelineConfig,
    out_dir: str | os.PathLike,
    jobs: int | None = None,
) -> tuple[Manifest, list[tuple[str, str]]]:
    """Process every record, writing `<subject>_<sample>_<variant>.png` files.

    Returns the derived manifest (one record per written image, ordered by
    input record then variant) and a list of (path, error) per-image
    failures. Unwritable output locations abort the whole batch.
    """
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)

    expected = set()
    for record in manifest.records:
        for variant in cfg.variants or [VariantSpec(cfg.name or "output")]:
            name = output_name(record, variant.name)
            if name in expected:
                raise PipelineError(
                    f"output name collision: {name} (filter the manifest to one modality?)"
                )
            expected.add(name)

    tasks = [(r, cfg, manifest.source_root, out_dir) for r in manifest.records]
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_process_record, tasks, chunksize=8))
    else:
        results = [_process_record(t) for t in tasks]

    derived = []
    failures = []
    for record, names, error in results:
        if error is not None:
            failures.append((record.path, error))
            log.error("failed %s: %s", record.path, error)
            continue
        for name in names:
            derived.append(replace(record, path=name))
    return Manifest(tuple(derived), source_root=out_dir, seed=manifest.seed), failures
