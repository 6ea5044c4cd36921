"""Self-supervised training objectives with analytic gradients.

Three losses over a batch of 2N augmented views (view j of original i sits
at row i for the first view and row i+N for the second):

* reconstruction: mean squared error over the pixels of masked patches only,
  normalized per image by its masked pixel count;
* contrastive: InfoNCE over temperature-scaled cosine similarities of the
  positive pairs (i, i+N) and (i+N, i) against all in-batch rows, plus an
  entropy regularizer that pushes each embedding away from its nearest
  neighbor outside its own positive set;
* combined: contrastive + recon_weight * reconstruction.

Every loss has a closed-form gradient (w.r.t. reconstructed pixels and
embedding coordinates) exercised against central finite differences in the
test suite. The entropy term's min is resolved to the lowest index on ties
so gradients stay deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError, EmptyMaskError, NotNormalizedError

NORM_TOL = 1e-4


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 0.05
    entropy_weight: float = 1.0
    recon_weight: float = 1.0
    entropy_floor: float = 1e-6
    # The entropy sum runs over first-view rows only by default; set True to
    # extend it over all 2N rows.
    entropy_over_all_views: bool = False

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.entropy_weight < 0 or self.recon_weight < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class BatchPairing:
    """Positive-pair layout for a batch of 2N views."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("pairing needs at least one original image")

    @property
    def total(self) -> int:
        return 2 * self.n

    def partner(self, i: int) -> int:
        return i + self.n if i < self.n else i - self.n

    def pairs(self) -> list[tuple[int, int]]:
        """Ordered positive pairs: (i, i+N) and (i+N, i) for each original."""
        return [(i, i + self.n) for i in range(self.n)] + [
            (i + self.n, i) for i in range(self.n)
        ]


def _as_batch(recon, orig, plans):
    recon = np.asarray(recon, dtype=np.float64)
    orig = np.asarray(orig, dtype=np.float64)
    if recon.shape != orig.shape or recon.ndim != 3:
        raise DimMismatchError(
            f"recon {recon.shape} and orig {orig.shape} must both be (batch, patches, pixels)"
        )
    if len(plans) != recon.shape[0]:
        raise DimMismatchError(f"{len(plans)} plans for batch of {recon.shape[0]}")
    return recon, orig


def mae_loss(recon, orig, plans) -> float:
    """Masked-patch reconstruction error.

    Mean over images of the per-image mean squared error over masked pixels.
    Unmasked pixels contribute nothing.
    """
    recon, orig = _as_batch(recon, orig, plans)
    batch = recon.shape[0]
    total = 0.0
    for i, plan in enumerate(plans):
        m = plan.masked
        if not m.any():
            raise EmptyMaskError(f"image {i} has an empty masked set")
        diff = recon[i, m, :] - orig[i, m, :]
        total += float(np.sum(diff * diff)) / diff.size
    return total / batch


def mae_loss_grad(recon, orig, plans) -> tuple[float, np.ndarray]:
    """mae_loss plus its gradient w.r.t. every reconstructed pixel."""
    recon, orig = _as_batch(recon, orig, plans)
    batch = recon.shape[0]
    grad = np.zeros_like(recon)
    total = 0.0
    for i, plan in enumerate(plans):
        m = plan.masked
        if not m.any():
            raise EmptyMaskError(f"image {i} has an empty masked set")
        diff = recon[i, m, :] - orig[i, m, :]
        total += float(np.sum(diff * diff)) / diff.size
        grad[i, m, :] = 2.0 * diff / (batch * diff.size)
    return total / batch, grad


def _check_embeddings(z, pairing: BatchPairing) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise DimMismatchError(f"expected (2N, d) embeddings, got shape {z.shape}")
    if z.shape[0] != pairing.total:
        raise DimMismatchError(f"{z.shape[0]} embeddings for pairing of {pairing.total}")
    norms = np.linalg.norm(z, axis=1)
    off = np.abs(norms - 1.0)
    if np.any(off > NORM_TOL):
        worst = int(np.argmax(off))
        raise NotNormalizedError(f"embedding {worst} has norm {norms[worst]:.8f}")
    return z


def _contrastive(z, pairing: BatchPairing, cfg: LossConfig, want_grad: bool):
    z = _check_embeddings(z, pairing)
    total = pairing.total
    pairs = pairing.pairs()

    # InfoNCE over temperature-scaled similarities, diagonal excluded from
    # the denominator, computed with max-subtraction.
    s = (z @ z.T) / cfg.temperature
    np.fill_diagonal(s, -np.inf)
    row_max = s.max(axis=1)
    expn = np.exp(s - row_max[:, None])
    lse = row_max + np.log(expn.sum(axis=1))

    info = 0.0
    for i, j in pairs:
        info += lse[i] - s[i, j]
    info /= len(pairs)

    grad = np.zeros_like(z) if want_grad else None
    if want_grad:
        # d(info)/ds accumulated per ordered pair: softmax of row i minus the
        # indicator of the positive column.
        ds = np.zeros_like(s)
        softmax = expn / expn.sum(axis=1, keepdims=True)
        for i, j in pairs:
            ds[i] += softmax[i]
            ds[i, j] -= 1.0
        ds /= len(pairs)
        np.fill_diagonal(ds, 0.0)
        grad += (ds @ z + ds.T @ z) / cfg.temperature

    # Entropy regularizer: push each row away from its nearest neighbor
    # outside the positive set. Rows with no eligible neighbor (N = 1) are
    # skipped; the floor stops log(0) on duplicate embeddings.
    entropy = 0.0
    if cfg.entropy_weight > 0:
        rows = range(total) if cfg.entropy_over_all_views else range(pairing.n)
        rows = list(rows)
        diff_sq = np.sum((z[:, None, :] - z[None, :, :]) ** 2, axis=2)
        for i in rows:
            excluded = {i, pairing.partner(i)}
            cand = [j for j in range(total) if j not in excluded]
            if not cand:
                continue
            dists = np.sqrt(diff_sq[i, cand])
            pos = int(np.argmin(dists))  # first occurrence == lowest index
            j_star = cand[pos]
            m_i = float(dists[pos])
            entropy -= np.log(max(cfg.entropy_floor, m_i))
            if want_grad and m_i > cfg.entropy_floor:
                coef = -cfg.entropy_weight / (len(rows) * m_i * m_i)
                delta = z[i] - z[j_star]
                grad[i] += coef * delta
                grad[j_star] -= coef * delta
        entropy *= cfg.entropy_weight / len(rows)

    loss = info + entropy
    return (loss, grad) if want_grad else loss


def contrastive_loss(z, pairing: BatchPairing, cfg: LossConfig) -> float:
    """InfoNCE plus weighted entropy regularizer over a 2N-view batch."""
    return _contrastive(z, pairing, cfg, want_grad=False)


def contrastive_loss_grad(z, pairing: BatchPairing, cfg: LossConfig) -> tuple[float, np.ndarray]:
    """contrastive_loss plus its gradient w.r.t. every embedding coordinate."""
    return _contrastive(z, pairing, cfg, want_grad=True)


def combined_loss(recon, orig, plans, z, pairing: BatchPairing, cfg: LossConfig):
    """Total objective and its parts: contrastive + recon_weight * mae."""
    l_con = contrastive_loss(z, pairing, cfg)
    l_mae = mae_loss(recon, orig, plans)
    return l_con + cfg.recon_weight * l_mae, {"contrastive": l_con, "mae": l_mae}


def loss_gradients(recon, orig, plans, z, pairing: BatchPairing, cfg: LossConfig):
    """Analytic gradients of the combined loss.

    Returns (loss, parts, grad_recon, grad_z); the reconstruction gradient
    already carries recon_weight.
    """
    l_con, grad_z = contrastive_loss_grad(z, pairing, cfg)
    l_mae, grad_recon = mae_loss_grad(recon, orig, plans)
    loss = l_con + cfg.recon_weight * l_mae
    return loss, {"contrastive": l_con, "mae": l_mae}, cfg.recon_weight * grad_recon, grad_z
