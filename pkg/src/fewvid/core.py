"""Shared numeric primitives used across the pipeline.

Tensor conventions: videos, latents and denoiser feature maps are all
channels-last float tensors of shape [N, H, W, C] with N the frame axis.
Pixel-space videos live in [0, 1]; latents and features are unbounded.
"""

from __future__ import annotations

import hashlib
import math
from typing import NamedTuple, Optional, Sequence

import torch

Tensor = torch.Tensor


def validate_video(video: Tensor) -> Tensor:
    """Check the [N, H, W, C] pixel-video contract: finite values in [0, 1]."""
    if video.ndim != 4:
        raise ValueError(f"video must be [N, H, W, C], got shape {tuple(video.shape)}")
    if video.shape[0] < 1:
        raise ValueError("video must have at least one frame")
    if not torch.isfinite(video).all():
        raise ValueError("video contains non-finite values")
    if video.min() < 0.0 or video.max() > 1.0:
        raise ValueError("video values must lie in [0, 1]")
    return video


def validate_features(feats: Tensor, name: str = "features") -> Tensor:
    """Check the [N, h, w, c] feature/latent contract: 4-D and finite."""
    if feats.ndim != 4:
        raise ValueError(f"{name} must be [N, h, w, c], got shape {tuple(feats.shape)}")
    if feats.shape[0] < 1:
        raise ValueError(f"{name} must have at least one frame")
    if not torch.isfinite(feats).all():
        raise ValueError(f"{name} contains non-finite values")
    return feats


class TemporalStats(NamedTuple):
    """Per-position mean and population standard deviation over the frame axis."""

    mean: Tensor  # [h, w, c]
    std: Tensor  # [h, w, c], >= 0


def temporal_stats(feats: Tensor) -> TemporalStats:
    """Mean and population (divide-by-N) std of [N, h, w, c] over the frame axis.

    A single-frame input yields std = 0 everywhere.
    """
    validate_features(feats)
    mean = feats.mean(dim=0)
    std = feats.std(dim=0, correction=0)
    return TemporalStats(mean=mean, std=std)


def top_percentile_indices(scores: Tensor, tau: float) -> Tensor:
    """Indices of the k = ceil(c * (100 - tau) / 100) largest entries of ``scores``.

    Ties resolve toward the lower channel index (stable sort). Returns a
    sorted 1-D LongTensor of distinct indices.
    """
    if not 0.0 < tau < 100.0:
        raise ValueError(f"tau must lie in (0, 100), got {tau}")
    if scores.ndim != 1 or scores.numel() < 1:
        raise ValueError("scores must be a non-empty 1-D tensor")
    c = scores.numel()
    k = math.ceil(c * (100.0 - tau) / 100.0)
    order = torch.argsort(scores, descending=True, stable=True)
    return torch.sort(order[:k]).values


def _derive_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


class RngStream:
    """Deterministic named random stream.

    The same (seed, label) pair always produces the same sample sequence.
    Streams are not safe to share across concurrent callers; derive a child
    per worker or per pipeline stage instead (``child(label)``).
    """

    def __init__(self, seed: int, label: str = "root"):
        self.seed = int(seed)
        self.label = label
        self.generator = torch.Generator()
        self.generator.manual_seed(_derive_seed(self.seed, self.label))

    def child(self, label: str) -> "RngStream":
        return RngStream(self.seed, f"{self.label}/{label}")

    def uniform(self, lo: float, hi: float, shape: Optional[Sequence[int]] = None,
                dtype: torch.dtype = torch.float32):
        """Uniform draw on [lo, hi). Scalar float when shape is None."""
        if lo > hi:
            raise ValueError(f"uniform bounds out of order: lo={lo} > hi={hi}")
        if shape is None:
            u = torch.rand((), generator=self.generator, dtype=dtype)
            return float(lo + (hi - lo) * u)
        u = torch.rand(tuple(shape), generator=self.generator, dtype=dtype)
        return lo + (hi - lo) * u

    def normal(self, shape: Sequence[int], dtype: torch.dtype = torch.float32) -> Tensor:
        return torch.randn(tuple(shape), generator=self.generator, dtype=dtype)

    def randint(self, lo: int, hi: int) -> int:
        """Integer draw from [lo, hi)."""
        if lo >= hi:
            raise ValueError(f"randint needs lo < hi, got [{lo}, {hi})")
        return int(torch.randint(lo, hi, (), generator=self.generator))

    def bernoulli(self, p: float, shape: Optional[Sequence[int]] = None):
        if shape is None:
            return bool(torch.rand((), generator=self.generator) < p)
        return torch.rand(tuple(shape), generator=self.generator) < p

    def permutation(self, n: int) -> Tensor:
        return torch.randperm(n, generator=self.generator)

    def get_state(self) -> Tensor:
        return self.generator.get_state()

    def set_state(self, state: Tensor) -> None:
        self.generator.set_state(state)


def seeded_uniform(rng: RngStream, lo: float, hi: float,
                   shape: Optional[Sequence[int]] = None):
    """Uniform draw on [lo, hi) from a named stream (see RngStream.uniform)."""
    return rng.uniform(lo, hi, shape=shape)


class NoiseSchedule:
    """Cumulative signal-retention sequence alphabar_t for t = 0..T.

    alphabar[0] = 1, strictly decreasing, alphabar[T] close to 0. Stored in
    float64; query with ``alphabar_at``.
    """

    def __init__(self, alphabar: Tensor):
        alphabar = torch.as_tensor(alphabar, dtype=torch.float64)
        if alphabar.ndim != 1 or alphabar.numel() < 2:
            raise ValueError("alphabar must be a 1-D tensor of length T+1 >= 2")
        if abs(float(alphabar[0]) - 1.0) > 1e-12:
            raise ValueError("alphabar[0] must equal 1")
        if not (alphabar[1:] < alphabar[:-1]).all():
            raise ValueError("alphabar must be strictly decreasing")
        if float(alphabar[-1]) < 0.0 or float(alphabar[-1]) > 0.1:
            raise ValueError("alphabar[T] must be close to 0 (at most 0.1)")
        self.alphabar = alphabar
        self.T = alphabar.numel() - 1

    @classmethod
    def scaled_linear(cls, T: int = 1000, beta_start: float = 0.00085,
                      beta_end: float = 0.012) -> "NoiseSchedule":
        """Betas linear in sqrt-space, the common latent-diffusion default."""
        betas = torch.linspace(beta_start**0.5, beta_end**0.5, T, dtype=torch.float64) ** 2
        alphabar = torch.cumprod(1.0 - betas, dim=0)
        return cls(torch.cat([torch.ones(1, dtype=torch.float64), alphabar]))

    def alphabar_at(self, t: int) -> float:
        if not 0 <= t <= self.T:
            raise ValueError(f"timestep {t} outside [0, {self.T}]")
        return float(self.alphabar[t])
