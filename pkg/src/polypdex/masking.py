"""Adaptive patch masking driven by the lesion segmentation mask.

Background patches are masked more aggressively than foreground (lesion)
patches while the overall masked fraction stays pinned at ``ratio``. The
foreground target rate grows with the foreground patch fraction ``r``:

    p_f = clamp(fg_slope * r * ratio, fg_floor, ratio)

and the background rate absorbs the remainder of the fixed budget:

    p_b = clamp((ratio - r * p_f) / (1 - r), 0, 1)

so p_f <= ratio <= p_b always holds for the target rates. Small lesions
therefore keep nearly all of their patches visible while the background
soaks up the full masking budget. Counts are drawn exactly (no Bernoulli
sampling): the masked patch count equals round(ratio * P) for every plan,
which keeps the reconstruction loss scale constant across a batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError


def round_half_up(x: float) -> int:
    """Deterministic rounding for count targets (0.5 always rounds up)."""
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class MaskingConfig:
    ratio: float = 0.75
    fg_threshold: float = 0.25
    fg_slope: float = 1.0
    fg_floor: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(f"ratio must be in (0,1), got {self.ratio}")
        if not 0.0 <= self.fg_threshold <= 1.0:
            raise ValueError(f"fg_threshold must be in [0,1], got {self.fg_threshold}")
        if self.fg_floor > self.ratio:
            raise ValueError(f"fg_floor {self.fg_floor} exceeds ratio {self.ratio}")


@dataclass(frozen=True)
class MaskPlan:
    """Per-patch keep/mask assignment with its realized pool rates."""

    masked: np.ndarray          # bool per patch
    fg_patch: np.ndarray        # bool per patch
    overall_ratio: float
    fg_rate: float              # realized masked fraction of foreground pool
    bg_rate: float              # realized masked fraction of background pool

    @property
    def num_patches(self) -> int:
        return int(self.masked.size)

    @property
    def num_masked(self) -> int:
        return int(self.masked.sum())


def classify_patches(mask: np.ndarray, patch_size: int, fg_threshold: float = 0.25) -> np.ndarray:
    """Flag each patch foreground iff its in-mask pixel fraction >= threshold.

    Patches are enumerated row-major, matching patchify order.
    """
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.shape[0] % patch_size or mask.shape[1] % patch_size:
        raise DimMismatchError(
            f"mask shape {mask.shape} not divisible by patch size {patch_size}"
        )
    h, w = mask.shape
    tiles = mask.reshape(h // patch_size, patch_size, w // patch_size, patch_size)
    frac = tiles.mean(axis=(1, 3))
    return (frac >= fg_threshold).reshape(-1)


def plan_mask(fg_patches: np.ndarray, cfg: MaskingConfig, rng_seed: int) -> MaskPlan:
    """Draw an exact-count adaptive mask plan, deterministic given the seed.

    The masked total is always round(ratio * P). Foreground slots are
    n_f = round(p_f * P_f); the background receives the rest, with any
    overflow beyond the background pool returned to the foreground. After
    counting, slots migrate foreground-to-background until the realized
    background rate is at least the realized foreground rate (rounding can
    otherwise invert the two on tiny pools).
    """
    fg = np.asarray(fg_patches, dtype=bool).reshape(-1)
    total = int(fg.size)
    if total < 1:
        raise DimMismatchError("plan needs at least one patch")

    n_fg = int(fg.sum())
    n_bg = total - n_fg
    r = n_fg / total
    n_masked = round_half_up(cfg.ratio * total)

    if n_fg == 0 or n_bg == 0:
        # Degenerate: single pool, uniform masking at the overall ratio.
        n_f = n_masked if n_bg == 0 else 0
    else:
        p_f = min(max(cfg.fg_slope * r * cfg.ratio, cfg.fg_floor), cfg.ratio)
        n_f = min(round_half_up(p_f * n_fg), n_fg)
        if n_masked - n_f > n_bg:            # background pool overflow
            n_f = n_masked - n_bg
        n_f = min(max(n_f, 0), n_fg, n_masked)
        # Enforce bg_rate >= fg_rate against rounding artifacts.
        while n_f > 0 and (n_masked - n_f) < n_bg and n_f * n_bg > (n_masked - n_f) * n_fg:
            n_f -= 1
    n_b = n_masked - n_f

    rng = np.random.default_rng(rng_seed)
    masked = np.zeros(total, dtype=bool)
    fg_idx = np.flatnonzero(fg)
    bg_idx = np.flatnonzero(~fg)
    if n_f:
        masked[rng.choice(fg_idx, size=n_f, replace=False)] = True
    if n_b:
        masked[rng.choice(bg_idx, size=n_b, replace=False)] = True

    return MaskPlan(
        masked=masked,
        fg_patch=fg,
        overall_ratio=cfg.ratio,
        fg_rate=n_f / n_fg if n_fg else 0.0,
        bg_rate=n_b / n_bg if n_bg else 0.0,
    )


def empty_plan(num_patches: int) -> MaskPlan:
    """All-visible plan used at inference time."""
    return MaskPlan(
        masked=np.zeros(num_patches, dtype=bool),
        fg_patch=np.zeros(num_patches, dtype=bool),
        overall_ratio=0.0,
        fg_rate=0.0,
        bg_rate=0.0,
    )


def plan_to_dict(plan: MaskPlan) -> dict:
    """JSON-friendly view of a plan for the CLI dump."""
    return {
        "num_patches": plan.num_patches,
        "num_masked": plan.num_masked,
        "overall_ratio": plan.overall_ratio,
        "fg_rate": plan.fg_rate,
        "bg_rate": plan.bg_rate,
        "masked": plan.masked.astype(int).tolist(),
        "fg_patch": plan.fg_patch.astype(int).tolist(),
    }
