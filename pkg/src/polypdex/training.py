"""End-to-end training of the toy encoder on the combined objective.

Each step draws a batch of instances, builds two augmented views per
instance, plans an adaptive mask per view, runs encode/decode, evaluates the
combined loss, and backpropagates through the linear stacks by hand. Plain
momentum gradient descent keeps the update rule free of hidden state beyond
one velocity buffer; everything is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import EncoderParams, backward, decode, encode, init_params, patchify
from .errors import DivergenceError
from .losses import BatchPairing, LossConfig, loss_gradients
from .masking import MaskingConfig, classify_patches, plan_mask
from .synth import SynthSample, augment


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 0.05
    momentum: float = 0.9
    seed: int = 0
    patch_size: int = 8
    hidden_dim: int = 64
    embed_dim: int = 256
    loss: LossConfig = field(default_factory=LossConfig)
    masking: MaskingConfig = field(default_factory=MaskingConfig)

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")


def _batch_views(samples: list[SynthSample], idxs: np.ndarray, rng: np.random.Generator):
    """Two augmented views per drawn instance: first views then second views."""
    firsts, seconds = [], []
    for i in idxs:
        sa, sb = (int(s) for s in rng.integers(0, 2**63, size=2))
        firsts.append(augment(samples[i], sa))
        seconds.append(augment(samples[i], sb))
    return firsts + seconds


def train(samples: list[SynthSample], cfg: TrainConfig) -> tuple[EncoderParams, list[dict]]:
    """Optimize the combined objective; returns final params and an epoch log."""
    if len(samples) < 2:
        raise ValueError("training needs at least two instances")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg.patch_size, cfg.hidden_dim, cfg.embed_dim, rng)
    velocity = params.zeros_like()
    log: list[dict] = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(samples))
        sums = np.zeros(3)
        steps = 0
        for start in range(0, len(order), cfg.batch_size):
            idxs = order[start:start + cfg.batch_size]
            if idxs.size < 2:
                continue
            views = _batch_views(samples, idxs, rng)
            pairing = BatchPairing(n=idxs.size)

            plans, patch_stack, latents_stack, zs, recons = [], [], [], [], []
            for view in views:
                fg = classify_patches(view.mask, cfg.patch_size, cfg.masking.fg_threshold)
                plan = plan_mask(fg, cfg.masking, int(rng.integers(0, 2**63)))
                patches = patchify(view.image, cfg.patch_size)
                z, latents = encode(params, patches, plan)
                plans.append(plan)
                patch_stack.append(patches)
                latents_stack.append(latents)
                zs.append(z)
                recons.append(decode(params, latents))

            recon = np.stack(recons)
            orig = np.stack(patch_stack)
            z = np.stack(zs)
            loss, parts, grad_recon, grad_z = loss_gradients(
                recon, orig, plans, z, pairing, cfg.loss
            )
            if not np.isfinite(loss):
                raise DivergenceError(epoch, steps, loss)

            grads = params.zeros_like()
            for i in range(len(views)):
                backward(
                    params, patch_stack[i], plans[i], latents_stack[i],
                    grad_z[i], grad_recon[i], grads,
                )

            for name, value in params.field_arrays().items():
                vel = getattr(velocity, name)
                vel *= cfg.momentum
                vel += getattr(grads, name)
                value -= cfg.learning_rate * vel

            sums += (loss, parts["contrastive"], parts["mae"])
            steps += 1

        mean = sums / max(steps, 1)
        log.append({
            "epoch": epoch,
            "loss": float(mean[0]),
            "contrastive": float(mean[1]),
            "mae": float(mean[2]),
        })
    return params, log
