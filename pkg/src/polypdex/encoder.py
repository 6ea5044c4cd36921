"""Minimal differentiable encoder/decoder over image patches.

The model is deliberately small so its gradients stay hand-derivable:
a linear patch embedding (masked patches replaced by a learned token),
mean pooling over patch latents, a linear projection with L2 normalization
producing the retrieval embedding, and a linear per-patch decoder producing
the reconstruction that feeds the masked loss.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import DimMismatchError
from .masking import MaskPlan
from .vectors import l2_normalize


@dataclass
class EncoderParams:
    w_embed: np.ndarray      # (patch_pixels, hidden)
    b_embed: np.ndarray      # (hidden,)
    mask_token: np.ndarray   # (hidden,) latent substituted for masked patches
    w_proj: np.ndarray       # (hidden, embed_dim)
    b_proj: np.ndarray       # (embed_dim,)
    w_decode: np.ndarray     # (hidden, patch_pixels)
    b_decode: np.ndarray     # (patch_pixels,)

    @property
    def patch_pixels(self) -> int:
        return self.w_embed.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w_embed.shape[1]

    @property
    def embed_dim(self) -> int:
        return self.w_proj.shape[1]

    def field_arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "EncoderParams":
        return EncoderParams(**{k: v.copy() for k, v in self.field_arrays().items()})

    def zeros_like(self) -> "EncoderParams":
        return EncoderParams(**{k: np.zeros_like(v) for k, v in self.field_arrays().items()})


def init_params(patch_size: int, hidden_dim: int, embed_dim: int, rng: np.random.Generator) -> EncoderParams:
    """Uniform(-0.05, 0.05) init; the mask token starts at zero."""
    pp = patch_size * patch_size

    def u(*shape):
        return rng.uniform(-0.05, 0.05, size=shape)

    return EncoderParams(
        w_embed=u(pp, hidden_dim),
        b_embed=u(hidden_dim),
        mask_token=np.zeros(hidden_dim),
        w_proj=u(hidden_dim, embed_dim),
        b_proj=u(embed_dim),
        w_decode=u(hidden_dim, pp),
        b_decode=u(pp),
    )


def patchify(image: np.ndarray, patch_size: int) -> np.ndarray:
    """Split an image into non-overlapping patches, row-major patch order."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] % patch_size or image.shape[1] % patch_size:
        raise DimMismatchError(
            f"image shape {image.shape} not divisible by patch size {patch_size}"
        )
    h, w = image.shape
    tiles = image.reshape(h // patch_size, patch_size, w // patch_size, patch_size)
    return tiles.transpose(0, 2, 1, 3).reshape(-1, patch_size * patch_size)


def unpatchify(patches: np.ndarray, height: int, width: int, patch_size: int) -> np.ndarray:
    """Inverse of patchify."""
    patches = np.asarray(patches, dtype=np.float64)
    ph, pw = height // patch_size, width // patch_size
    if patches.shape != (ph * pw, patch_size * patch_size):
        raise DimMismatchError(
            f"patch matrix {patches.shape} does not tile a {height}x{width} image"
        )
    tiles = patches.reshape(ph, pw, patch_size, patch_size)
    return tiles.transpose(0, 2, 1, 3).reshape(height, width)


def encode(params: EncoderParams, patches: np.ndarray, plan: MaskPlan) -> tuple[np.ndarray, np.ndarray]:
    """Embed a patch matrix under a mask plan.

    Masked patches contribute the mask token instead of their content, so
    nothing behind the mask can leak into the embedding. Returns the unit
    embedding and the per-patch latents (the decoder's input).
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 2 or patches.shape[1] != params.patch_pixels:
        raise DimMismatchError(
            f"patches {patches.shape} incompatible with patch_pixels {params.patch_pixels}"
        )
    if plan.masked.size != patches.shape[0]:
        raise DimMismatchError(
            f"plan covers {plan.masked.size} patches, got {patches.shape[0]}"
        )
    latents = patches @ params.w_embed + params.b_embed
    latents[plan.masked] = params.mask_token
    pooled = latents.mean(axis=0)
    z = l2_normalize(pooled @ params.w_proj + params.b_proj)
    return z, latents


def decode(params: EncoderParams, latents: np.ndarray) -> np.ndarray:
    """Linear per-patch readout back to pixel space."""
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim != 2 or latents.shape[1] != params.hidden_dim:
        raise DimMismatchError(
            f"latents {latents.shape} incompatible with hidden_dim {params.hidden_dim}"
        )
    return latents @ params.w_decode + params.b_decode


def backward(
    params: EncoderParams,
    patches: np.ndarray,
    plan: MaskPlan,
    latents: np.ndarray,
    grad_z: np.ndarray,
    grad_recon: np.ndarray,
    grads: EncoderParams,
) -> None:
    """Accumulate parameter gradients for one view into ``grads``.

    ``grad_z`` is the loss gradient at the unit embedding and ``grad_recon``
    at the decoder output; the chain rule through the normalization,
    projection, pooling, decoding, and patch embedding is applied here.
    """
    num_patches = latents.shape[0]

    # decode: recon = latents @ w_decode + b_decode
    grads.w_decode += latents.T @ grad_recon
    grads.b_decode += grad_recon.sum(axis=0)
    grad_latents = grad_recon @ params.w_decode.T

    # z = u / ||u||  with  u = pooled @ w_proj + b_proj
    pooled = latents.mean(axis=0)
    u = pooled @ params.w_proj + params.b_proj
    norm = float(np.linalg.norm(u))
    z = u / norm
    grad_u = (grad_z - z * float(z @ grad_z)) / norm

    grads.w_proj += np.outer(pooled, grad_u)
    grads.b_proj += grad_u
    grad_pooled = params.w_proj @ grad_u

    # pooled = mean of latents: every patch latent shares the gradient
    grad_latents = grad_latents + grad_pooled / num_patches

    masked = plan.masked
    visible = ~masked
    if visible.any():
        grads.w_embed += patches[visible].T @ grad_latents[visible]
        grads.b_embed += grad_latents[visible].sum(axis=0)
    if masked.any():
        grads.mask_token += grad_latents[masked].sum(axis=0)
