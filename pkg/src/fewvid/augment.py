"""Appearance augmentation pipelines.

Two flavors: *strong augmentation* builds a training twin of a video that
keeps the motion but changes the appearance (shared parameters across all
frames, no per-frame randomness), and *distortion* degrades a video with
blur, regional color shifts and an elastic warp to train the detail
decoder to recover from corrupted latents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import torch
import torch.nn.functional as F
import torchvision.transforms.functional as TF

from .core import RngStream, Tensor, validate_video

_NOOP_KERNEL = 1
_STRONG_KERNELS = (3, 5, 7, 9, 11)  # even draws from [3, 10] rounded up to odd
_DISTORT_KERNELS = (_NOOP_KERNEL,) + _STRONG_KERNELS


@dataclass(frozen=True)
class StrongAugmentParams:
    """One sampled appearance change, applied uniformly to every frame.

    ``crop_box`` is (top, left, height, width) in normalized [0, 1] frame
    coordinates; the crop is resized back to the input resolution.
    ``blur_kernel`` = 1 means no blur.
    """

    blur_kernel: int
    brightness: float
    contrast: float
    saturation: float
    hue: float
    flip: bool
    crop_box: Tuple[float, float, float, float]

    def __post_init__(self):
        if self.blur_kernel != _NOOP_KERNEL and self.blur_kernel not in _STRONG_KERNELS:
            raise ValueError(f"blur_kernel must be 1 or odd in [3, 11], got {self.blur_kernel}")
        for name in ("brightness", "contrast", "saturation"):
            v = getattr(self, name)
            if not 0.5 <= v <= 1.5:
                raise ValueError(f"{name} must lie in [0.5, 1.5], got {v}")
        if not -0.25 <= self.hue <= 0.25:
            raise ValueError(f"hue must lie in [-0.25, 0.25], got {self.hue}")
        top, left, h, w = self.crop_box
        if not (0 <= top and 0 <= left and h > 0 and w > 0
                and top + h <= 1 + 1e-9 and left + w <= 1 + 1e-9):
            raise ValueError(f"crop_box out of bounds: {self.crop_box}")


def identity_strong_params() -> StrongAugmentParams:
    return StrongAugmentParams(blur_kernel=1, brightness=1.0, contrast=1.0,
                               saturation=1.0, hue=0.0, flip=False,
                               crop_box=(0.0, 0.0, 1.0, 1.0))


def sample_strong_params(rng: RngStream) -> StrongAugmentParams:
    """Draw strong-augmentation parameters from their documented ranges."""
    k = rng.randint(3, 11)  # [3, 10]
    if k % 2 == 0:
        k += 1
    brightness = rng.uniform(0.5, 1.5)
    contrast = rng.uniform(0.5, 1.5)
    saturation = rng.uniform(0.5, 1.5)
    hue = rng.uniform(-0.25, 0.25)
    flip = rng.bernoulli(0.5)
    fh = rng.uniform(0.8, 1.0)
    fw = rng.uniform(0.8, 1.0)
    top = rng.uniform(0.0, 1.0 - fh)
    left = rng.uniform(0.0, 1.0 - fw)
    return StrongAugmentParams(blur_kernel=k, brightness=brightness, contrast=contrast,
                               saturation=saturation, hue=hue, flip=bool(flip),
                               crop_box=(top, left, fh, fw))


@dataclass(frozen=True)
class DistortionParams:
    """One sampled video distortion for decoder training.

    Color adjustments apply only inside ``region_mask`` (roughly 80% of the
    pixels); the elastic displacement ``elastic_field`` [H, W, 2] is shared
    across frames. ``elastic_strength`` = 0 leaves geometry untouched.
    """

    blur_kernel: int
    brightness: float
    contrast: float
    saturation: float
    hue: float
    region_mask: Tensor  # bool [H, W]
    elastic_strength: float
    elastic_field: Tensor  # [H, W, 2]

    def __post_init__(self):
        if self.blur_kernel not in _DISTORT_KERNELS:
            raise ValueError(f"blur_kernel must be 1 or odd in [3, 11], got {self.blur_kernel}")
        for name in ("brightness", "contrast", "saturation"):
            v = getattr(self, name)
            if not 0.7 <= v <= 1.3:
                raise ValueError(f"{name} must lie in [0.7, 1.3], got {v}")
        if not -0.2 <= self.hue <= 0.2:
            raise ValueError(f"hue must lie in [-0.2, 0.2], got {self.hue}")
        frac = float(self.region_mask.float().mean())
        if not 0.75 <= frac <= 0.85:
            raise ValueError(f"region_mask must cover 75-85% of pixels, covers {frac:.3f}")
        if not 0.0 <= self.elastic_strength <= 20.0:
            raise ValueError(f"elastic_strength must lie in [0, 20], got {self.elastic_strength}")
        if self.elastic_field.shape != (*self.region_mask.shape, 2):
            raise ValueError("elastic_field must be [H, W, 2] matching region_mask")
        if self.elastic_field.abs().max() > self.elastic_strength + 1e-6:
            raise ValueError("elastic displacements exceed elastic_strength")


def identity_distortion_params(height: int, width: int) -> DistortionParams:
    mask = torch.zeros(height, width, dtype=torch.bool)
    mask[: max(1, round(height * 0.8))] = True
    return DistortionParams(blur_kernel=1, brightness=1.0, contrast=1.0, saturation=1.0,
                            hue=0.0, region_mask=mask, elastic_strength=0.0,
                            elastic_field=torch.zeros(height, width, 2))


def sample_region_mask(rng: RngStream, height: int, width: int,
                       lo: float = 0.75, hi: float = 0.85) -> Tensor:
    """Union of random rectangles grown until coverage lands in [lo, hi].

    Rectangle sides are at most a quarter of the frame, so a single step
    never overshoots past ``hi``.
    """
    mask = torch.zeros(height, width, dtype=torch.bool)
    total = height * width
    for _ in range(100_000):
        if mask.sum().item() / total >= lo:
            break
        rh = max(1, round(rng.uniform(0.05, 0.25) * height))
        rw = max(1, round(rng.uniform(0.05, 0.25) * width))
        top = rng.randint(0, height - rh + 1)
        left = rng.randint(0, width - rw + 1)
        mask[top:top + rh, left:left + rw] = True
    frac = mask.sum().item() / total
    if not lo <= frac <= hi:
        raise RuntimeError(f"region mask coverage {frac:.3f} escaped [{lo}, {hi}]")
    return mask


def sample_elastic_field(rng: RngStream, height: int, width: int,
                         strength: float, smooth_kernel: int = 9) -> Tensor:
    """Per-pixel displacements uniform in [-strength, strength], smoothed once
    with a Gaussian pass so the field is spatially coherent."""
    field = rng.uniform(-strength, strength, shape=(height, width, 2))
    if strength > 0 and min(height, width) > smooth_kernel // 2:
        field = gaussian_blur(field, smooth_kernel)
    return field


def sample_distortion_params(rng: RngStream, height: int, width: int) -> DistortionParams:
    k = _DISTORT_KERNELS[rng.randint(0, len(_DISTORT_KERNELS))]
    brightness = rng.uniform(0.7, 1.3)
    contrast = rng.uniform(0.7, 1.3)
    saturation = rng.uniform(0.7, 1.3)
    hue = rng.uniform(-0.2, 0.2)
    mask = sample_region_mask(rng.child("region"), height, width)
    strength = rng.uniform(0.0, 20.0)
    field = sample_elastic_field(rng.child("elastic"), height, width, strength)
    return DistortionParams(blur_kernel=k, brightness=brightness, contrast=contrast,
                            saturation=saturation, hue=hue, region_mask=mask,
                            elastic_strength=strength, elastic_field=field)


def gaussian_kernel1d(kernel_size: int, dtype: torch.dtype = torch.float32) -> Tensor:
    """Normalized 1-D Gaussian with sigma = 0.3*((k-1)/2 - 1) + 0.8."""
    if kernel_size < 3 or kernel_size % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 3, got {kernel_size}")
    sigma = 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8
    x = torch.arange(kernel_size, dtype=dtype) - (kernel_size - 1) / 2.0
    w = torch.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def gaussian_blur(frame: Tensor, kernel_size: int) -> Tensor:
    """Separable Gaussian blur of an [H, W, C] frame with reflect padding."""
    if frame.ndim != 3:
        raise ValueError(f"frame must be [H, W, C], got shape {tuple(frame.shape)}")
    kernel = gaussian_kernel1d(kernel_size, dtype=frame.dtype)
    pad = kernel_size // 2
    x = frame.permute(2, 0, 1).unsqueeze(1)  # [C, 1, H, W]
    x = F.pad(x, (pad, pad, pad, pad), mode="reflect")
    x = F.conv2d(x, kernel.view(1, 1, -1, 1))
    x = F.conv2d(x, kernel.view(1, 1, 1, -1))
    return x.squeeze(1).permute(1, 2, 0)


def blur_video(video: Tensor, kernel_size: int) -> Tensor:
    if kernel_size == _NOOP_KERNEL:
        return video
    return torch.stack([gaussian_blur(f, kernel_size) for f in video])


def color_adjust(frame: Tensor, brightness: float = 1.0, contrast: float = 1.0,
                 saturation: float = 1.0, hue: float = 0.0,
                 mask: Optional[Tensor] = None) -> Tensor:
    """Standard jitter semantics in the fixed order
    brightness -> contrast -> saturation -> hue, clamped to [0, 1].

    Identity factors short-circuit bitwise. A boolean [H, W] mask restricts
    the adjustment to the selected pixels.
    """
    if frame.ndim != 3 or frame.shape[-1] != 3:
        raise ValueError(f"frame must be [H, W, 3], got shape {tuple(frame.shape)}")
    img = frame.permute(2, 0, 1)
    out = img
    if brightness != 1.0:
        out = TF.adjust_brightness(out, brightness)
    if contrast != 1.0:
        out = TF.adjust_contrast(out, contrast)
    if saturation != 1.0:
        out = TF.adjust_saturation(out, saturation)
    if hue != 0.0:
        out = TF.adjust_hue(out, hue)
    if out is img:
        return frame
    out = out.permute(1, 2, 0).clamp(0.0, 1.0)
    if mask is not None:
        out = torch.where(mask.unsqueeze(-1), out, frame)
    return out


def bilinear_sample(values: Tensor, rows: Tensor, cols: Tensor) -> Tensor:
    """Sample [H, W, C] ``values`` at fractional (row, col) positions.

    Positions outside the grid clamp to the edge. Shapes of ``rows`` and
    ``cols`` must match; the output gains a trailing channel axis.
    Differentiable in both ``values`` and the sampling positions.
    """
    height, width = values.shape[0], values.shape[1]
    rows = rows.clamp(0.0, height - 1.0)
    cols = cols.clamp(0.0, width - 1.0)
    r0 = rows.floor()
    c0 = cols.floor()
    fr = (rows - r0).unsqueeze(-1)
    fc = (cols - c0).unsqueeze(-1)
    r0 = r0.long()
    c0 = c0.long()
    r1 = (r0 + 1).clamp(max=height - 1)
    c1 = (c0 + 1).clamp(max=width - 1)
    v00 = values[r0, c0]
    v01 = values[r0, c1]
    v10 = values[r1, c0]
    v11 = values[r1, c1]
    top = v00 * (1 - fc) + v01 * fc
    bottom = v10 * (1 - fc) + v11 * fc
    return top * (1 - fr) + bottom * fr


def elastic_transform(frame: Tensor, field: Tensor) -> Tensor:
    """Resample each output pixel (p, q) at (p + dp, q + dq), edge-clamped."""
    height, width = frame.shape[0], frame.shape[1]
    if field.shape != (height, width, 2):
        raise ValueError(f"field must be [H, W, 2], got {tuple(field.shape)}")
    rows = torch.arange(height, dtype=frame.dtype).view(-1, 1) + field[..., 0]
    cols = torch.arange(width, dtype=frame.dtype).view(1, -1) + field[..., 1]
    return bilinear_sample(frame, rows, cols)


def _crop_pixels(crop_box: Tuple[float, float, float, float],
                 height: int, width: int) -> Tuple[int, int, int, int]:
    top, left, fh, fw = crop_box
    ph = min(height, max(1, round(fh * height)))
    pw = min(width, max(1, round(fw * width)))
    ptop = min(height - ph, max(0, round(top * height)))
    pleft = min(width - pw, max(0, round(left * width)))
    return ptop, pleft, ph, pw


def geometric_augment(video: Tensor, params: StrongAugmentParams) -> Tensor:
    """Flip and crop stages only (shared by a training pair)."""
    validate_video(video)
    out = video
    if params.flip:
        out = torch.flip(out, dims=(2,))
    if params.crop_box != (0.0, 0.0, 1.0, 1.0):
        n, height, width, c = out.shape
        ptop, pleft, ph, pw = _crop_pixels(params.crop_box, height, width)
        out = out[:, ptop:ptop + ph, pleft:pleft + pw, :]
        out = F.interpolate(out.permute(0, 3, 1, 2), size=(height, width),
                            mode="bilinear", align_corners=False)
        out = out.permute(0, 2, 3, 1).clamp(0.0, 1.0)
    return out


def appearance_augment(video: Tensor, params: StrongAugmentParams) -> Tensor:
    """Blur and color stages only (the augmented twin's appearance change)."""
    validate_video(video)
    out = blur_video(video, params.blur_kernel)
    out = torch.stack([
        color_adjust(f, params.brightness, params.contrast, params.saturation, params.hue)
        for f in out
    ])
    return out.clamp(0.0, 1.0)


def strong_augment(video: Tensor, params: StrongAugmentParams) -> Tensor:
    """Full strong augmentation: flip -> crop -> blur -> color, every stage
    with the same parameters on every frame."""
    return appearance_augment(geometric_augment(video, params), params)


def map_points_through(params: StrongAugmentParams, points: Tensor,
                       height: int, width: int) -> Tensor:
    """Map (row, col) points from input-frame coordinates to the coordinates
    of the strong-augmented output (flip + crop + resize-back)."""
    pts = points.clone().to(torch.float64)
    if params.flip:
        pts[..., 1] = (width - 1) - pts[..., 1]
    if params.crop_box != (0.0, 0.0, 1.0, 1.0):
        ptop, pleft, ph, pw = _crop_pixels(params.crop_box, height, width)
        # inverse of align_corners=False resampling: in = (out + 0.5) * s - 0.5 + offset
        sr = ph / height
        sc = pw / width
        pts[..., 0] = (pts[..., 0] - ptop + 0.5) / sr - 0.5
        pts[..., 1] = (pts[..., 1] - pleft + 0.5) / sc - 0.5
    return pts


def distort_video(video: Tensor, params: DistortionParams) -> Tensor:
    """Blur -> regional color adjust -> elastic warp, mask and displacement
    field shared across frames."""
    validate_video(video)
    out = blur_video(video, params.blur_kernel)
    out = torch.stack([
        color_adjust(f, params.brightness, params.contrast, params.saturation,
                     params.hue, mask=params.region_mask)
        for f in out
    ])
    if params.elastic_strength > 0:
        field = params.elastic_field.to(out.dtype)
        out = torch.stack([elastic_transform(f, field) for f in out])
    return out.clamp(0.0, 1.0)
