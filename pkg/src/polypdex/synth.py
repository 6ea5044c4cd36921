"""Synthetic lesion-like image corpus with paired segmentation masks.

Each instance is a grayscale image containing a single centered, axis-
aligned elliptical blob with a per-instance radial intensity profile on a
flat background. The class label controls the blob texture: class 1 blobs
are smooth and bright, higher classes carry concentric rings at increasing
radial frequency with a lower mean intensity.

The signature of an instance (blob area, aspect, center/edge intensity,
profile shape, background level) is symmetric under flips and stable under
small translations, and it survives averaging over the patch grid, so
re-identification stays learnable for encoders that pool patch features.
Intensities stay at or below 0.8 so the brightness augmentation never
clips, keeping views of one instance scalar multiples of each other up to
noise.

Augmented views are built from flips, integer translation with edge
replication, brightness scaling, and additive Gaussian noise; the paired
mask follows the geometric transforms only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import BadSpecError

BRIGHTNESS_RANGE = (0.8, 1.2)
NOISE_SIGMA = 0.02
TRANSLATION_FRACTION = 0.125


@dataclass(frozen=True)
class SynthSpec:
    image_size: int = 32
    patch_size: int = 8
    num_instances: int = 200
    num_classes: int = 2
    views_per_instance: int = 2
    seed: int = 0
    min_mask_fraction: float = 0.02
    max_mask_fraction: float = 0.6

    def __post_init__(self):
        if self.image_size <= 0 or self.image_size % self.patch_size:
            raise BadSpecError(
                f"image_size {self.image_size} must be a positive multiple of "
                f"patch_size {self.patch_size}"
            )
        if self.num_instances < 1 or self.num_classes < 1:
            raise BadSpecError("need at least one instance and one class")
        if self.views_per_instance != 2:
            raise BadSpecError("exactly two views per instance are supported")


@dataclass(frozen=True)
class SynthSample:
    instance_id: str
    class_label: int
    image: np.ndarray   # (H, W) float64 in [0, 1]
    mask: np.ndarray    # (H, W) uint8 in {0, 1}


def _elliptical_radius(size: int, a: float, b: float) -> np.ndarray:
    """Normalized distance field of a centered axis-aligned ellipse."""
    center = (size - 1) / 2.0
    ys, xs = np.mgrid[0:size, 0:size]
    return np.sqrt(((xs - center) / a) ** 2 + ((ys - center) / b) ** 2)


def _make_instance(size: int, label: int, rng: np.random.Generator,
                   min_frac: float, max_frac: float) -> tuple[np.ndarray, np.ndarray]:
    background = rng.uniform(0.15, 0.35)

    for _ in range(50):
        frac = rng.uniform(max(0.06, min_frac), min(0.35, max_frac))
        aspect = rng.uniform(0.6, 1.6)
        a = min(np.sqrt(frac * size * size * aspect / np.pi), 0.47 * size)
        b = min(a / aspect, 0.47 * size)
        rho = _elliptical_radius(size, a, b)
        mask = (rho <= 1.0).astype(np.uint8)
        realized = mask.mean()
        if min_frac <= realized <= max_frac:
            break
    else:
        raise BadSpecError(
            f"could not place a blob with mask fraction in [{min_frac}, {max_frac}]"
        )

    # Radial profile: per-instance center/edge intensities and falloff shape.
    shape = rng.uniform(0.5, 2.0)
    profile = np.clip(1.0 - rho * rho, 0.0, 1.0) ** shape
    if label == 1:
        i_center = rng.uniform(0.62, 0.8)
        i_edge = rng.uniform(0.45, 0.6)
        blob = i_edge + (i_center - i_edge) * profile
    else:
        i_center = rng.uniform(0.42, 0.6)
        i_edge = rng.uniform(0.3, 0.42)
        blob = i_edge + (i_center - i_edge) * profile
        # Concentric rings; radial period shrinks with the class index.
        period = max(2.0, 6.0 / (label - 1))
        rings = np.cos(2.0 * np.pi * rho * max(a, b) / period)
        blob = np.clip(blob + 0.1 * rings, 0.05, 0.8)

    image = np.where(mask.astype(bool), blob, background)
    image = image + rng.normal(0.0, 0.01, size=image.shape)
    return np.clip(image, 0.0, 1.0), mask


def generate(spec: SynthSpec) -> list[SynthSample]:
    """Deterministic corpus: labels balanced round-robin across classes."""
    streams = np.random.SeedSequence(spec.seed).spawn(spec.num_instances)
    samples = []
    for i, stream in enumerate(streams):
        label = 1 + i % spec.num_classes
        rng = np.random.default_rng(stream)
        image, mask = _make_instance(
            spec.image_size, label, rng, spec.min_mask_fraction, spec.max_mask_fraction
        )
        samples.append(
            SynthSample(
                instance_id=f"inst-{i:05d}",
                class_label=label,
                image=image,
                mask=mask,
            )
        )
    return samples


def _translate(arr: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Integer shift with edge replication; (dx, dy) moves content right/down."""
    h, w = arr.shape
    rows = np.clip(np.arange(h) - dy, 0, h - 1)
    cols = np.clip(np.arange(w) - dx, 0, w - 1)
    return arr[np.ix_(rows, cols)]


def augment(sample: SynthSample, rng_seed: int) -> SynthSample:
    """One randomized view of a sample; the mask follows geometry only."""
    rng = np.random.default_rng(rng_seed)
    h, w = sample.image.shape
    flip_h = rng.random() < 0.5
    flip_v = rng.random() < 0.5
    max_dx = int(round(TRANSLATION_FRACTION * w))
    max_dy = int(round(TRANSLATION_FRACTION * h))
    dx = int(rng.integers(-max_dx, max_dx + 1))
    dy = int(rng.integers(-max_dy, max_dy + 1))
    brightness = rng.uniform(*BRIGHTNESS_RANGE)

    image = sample.image
    mask = sample.mask
    if flip_h:
        image = image[:, ::-1]
        mask = mask[:, ::-1]
    if flip_v:
        image = image[::-1, :]
        mask = mask[::-1, :]
    image = _translate(image, dx, dy)
    mask = _translate(mask, dx, dy)

    image = np.clip(image * brightness, 0.0, 1.0)
    image = np.clip(image + rng.normal(0.0, NOISE_SIGMA, size=image.shape), 0.0, 1.0)

    return replace(sample, image=image, mask=np.ascontiguousarray(mask))


def twin_views(samples: list[SynthSample], seed: int) -> tuple[list[SynthSample], list[SynthSample]]:
    """Two deterministic augmented views per instance (the re-id protocol)."""
    rng = np.random.default_rng(seed)
    first, second = [], []
    for sample in samples:
        sa, sb = rng.integers(0, 2**63, size=2)
        first.append(augment(sample, int(sa)))
        second.append(augment(sample, int(sb)))
    return first, second


def save_samples(samples: list[SynthSample], out_dir) -> None:
    """Write images/masks as flat little-endian binaries plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in samples:
        img_name = f"{s.instance_id}.img.bin"
        mask_name = f"{s.instance_id}.mask.bin"
        (out / img_name).write_bytes(s.image.astype("<f4").tobytes())
        (out / mask_name).write_bytes(s.mask.astype(np.uint8).tobytes())
        entries.append(
            {"id": s.instance_id, "label": s.class_label, "image": img_name, "mask": mask_name}
        )
    h, w = samples[0].image.shape
    manifest = {"height": h, "width": w, "samples": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_samples(data_dir) -> list[SynthSample]:
    """Inverse of save_samples."""
    root = Path(data_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {root}")
    manifest = json.loads(manifest_path.read_text())
    h, w = manifest["height"], manifest["width"]
    samples = []
    for entry in manifest["samples"]:
        image = np.frombuffer((root / entry["image"]).read_bytes(), dtype="<f4")
        mask = np.frombuffer((root / entry["mask"]).read_bytes(), dtype=np.uint8)
        samples.append(
            SynthSample(
                instance_id=entry["id"],
                class_label=int(entry["label"]),
                image=image.astype(np.float64).reshape(h, w),
                mask=mask.copy().reshape(h, w),
            )
        )
    return samples
