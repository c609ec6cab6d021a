"""Panorama condition encoder: spherical convolutions plus CoordConv.

The convolution kernels are regular 3x3 grids on the tangent plane of each
output pixel; the inverse gnomonic projection maps the taps back onto the
equirectangular frame, so the receptive field stays angularly uniform
instead of stretching near the poles.  Tap positions are precomputed per
resolution (they depend on the row only, up to a column shift, but are
stored densely for simple gathers) and sampled bilinearly, which keeps the
whole encoder differentiable.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .dataset import Panorama
from .errors import ShapeMismatchError

__all__ = [
    "EncoderConfig",
    "SphereSamplingGrid",
    "build_sphere_grid",
    "add_coord_channels",
    "coordconv_augment",
    "SphereConv2d",
    "PanoramaEncoder",
    "panorama_to_tensor",
    "encode_panorama",
]


@dataclass(frozen=True)
class EncoderConfig:
    input_size: tuple[int, int] = (128, 256)
    channels: tuple[int, ...] = (16, 32, 64, 64)
    kernel: int = 3
    stride: int = 2
    embedding_dim: int = 64

    def __post_init__(self) -> None:
        h, w = self.input_size
        if w != 2 * h:
            raise ValueError("encoder input must be equirectangular (W = 2H)")
        if self.kernel % 2 != 1 or self.kernel < 1:
            raise ValueError("kernel size must be odd")
        if self.stride < 1:
            raise ValueError("stride must be positive")
        # Each block subsamples by slicing, so sizes shrink by ceil division;
        # every block must still see a grid at least one kernel wide.
        for i in range(len(self.channels)):
            if h < self.kernel or w < self.kernel:
                raise ValueError(
                    f"input {self.input_size} leaves a {h}x{w} grid for block "
                    f"{i + 1}, smaller than the {self.kernel}-tap kernel"
                )
            h = -(-h // self.stride)
            w = -(-w // self.stride)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, payload: str) -> "EncoderConfig":
        raw = json.loads(payload)
        raw["input_size"] = tuple(raw["input_size"])
        raw["channels"] = tuple(raw["channels"])
        return cls(**raw)


@dataclass(frozen=True)
class SphereSamplingGrid:
    """Fractional source (row, col) for each output pixel and kernel tap.

    ``positions`` has shape (H, W, k*k, 2); rows lie in [0, H], columns
    are wrapped into [0, W).
    """

    positions: np.ndarray
    height: int
    width: int
    kernel: int


def build_sphere_grid(height: int, width: int, kernel: int = 3) -> SphereSamplingGrid:
    """Tangent-plane kernel tap positions for every pixel of an H x W frame.

    A k x k kernel centred on pixel (r, c) lives on the gnomonic tangent
    plane at that pixel's latitude/longitude with a tap pitch of one pixel
    row (``tan(pi/H)``); the inverse gnomonic projection returns each tap
    to fractional equirectangular coordinates.  At the equator this
    reduces to the ordinary +-1-pixel neighbourhood; near the poles the
    horizontal spread grows like 1/cos(latitude) and taps may cross the
    pole onto the far meridian.
    """
    if height < kernel or width < kernel:
        raise ValueError("grid smaller than the kernel")
    if kernel % 2 != 1:
        raise ValueError("kernel size must be odd")
    half = kernel // 2
    phi0 = np.pi / 2 - np.arange(height) * np.pi / height  # (H,)
    lam0 = -np.pi + np.arange(width) * 2 * np.pi / width  # (W,)
    delta = math.tan(np.pi / height)

    offsets = np.arange(-half, half + 1) * delta
    xs = np.tile(offsets, kernel)  # east offsets, tap-major rows
    ys = -np.repeat(offsets, kernel)  # north offsets (+row is south)

    rho = np.hypot(xs, ys)  # (k2,)
    nu = np.arctan(rho)
    sin_nu, cos_nu = np.sin(nu), np.cos(nu)
    sin_phi0, cos_phi0 = np.sin(phi0), np.cos(phi0)

    with np.errstate(invalid="ignore"):
        y_over_rho = np.where(rho > 0, ys / np.where(rho > 0, rho, 1.0), 0.0)
    # phi/lam per (row, tap); the centre tap (rho = 0) falls out exactly.
    phi = np.arcsin(
        np.clip(
            cos_nu[None, :] * sin_phi0[:, None]
            + y_over_rho[None, :] * sin_nu[None, :] * cos_phi0[:, None],
            -1.0,
            1.0,
        )
    )
    dlam = np.arctan2(
        xs[None, :] * sin_nu[None, :],
        rho[None, :] * cos_phi0[:, None] * cos_nu[None, :]
        - ys[None, :] * sin_nu[None, :] * sin_phi0[:, None],
    )
    centre = rho == 0
    phi[:, centre] = phi0[:, None]
    dlam[:, centre] = 0.0

    rows = (np.pi / 2 - phi) * height / np.pi  # (H, k2)
    rows = np.clip(rows, 0.0, float(height))
    col_offsets = dlam * width / (2 * np.pi)  # relative to the centre pixel
    # Columns shift uniformly with the output column (longitudinal symmetry).
    cols = np.mod(
        col_offsets[:, None, :] + np.arange(width)[None, :, None], width
    )  # (H, W, k2)
    rows = np.broadcast_to(rows[:, None, :], cols.shape)
    positions = np.stack([rows, cols], axis=-1).astype(np.float64)
    return SphereSamplingGrid(positions=positions, height=height, width=width, kernel=kernel)


def add_coord_channels(x: torch.Tensor) -> torch.Tensor:
    """Append normalized row/col coordinate channels to a (B, C, H, W) batch."""
    b, _, h, w = x.shape
    rows = torch.linspace(-1.0, 1.0, h, dtype=x.dtype, device=x.device)
    cols = torch.linspace(-1.0, 1.0, w, dtype=x.dtype, device=x.device)
    row_channel = rows[None, None, :, None].expand(b, 1, h, w)
    col_channel = cols[None, None, None, :].expand(b, 1, h, w)
    return torch.cat([x, row_channel, col_channel], dim=1)


def panorama_to_tensor(img: Panorama) -> torch.Tensor:
    """Panorama to a (3, H, W) float32 tensor scaled to [0, 1]."""
    return torch.from_numpy(img.pixels.copy()).permute(2, 0, 1).float() / 255.0


def coordconv_augment(img: Panorama) -> torch.Tensor:
    """Pixels in [0, 1] plus coordinate channels, shape (5, H, W)."""
    return add_coord_channels(panorama_to_tensor(img)[None])[0]


class SphereConv2d(nn.Module):
    """Convolution gathering its receptive field through a sphere grid.

    The grid is built at the input resolution; ``stride`` subsamples the
    output locations by slicing the grid.  Vertical taps clamp at the
    poles (border), horizontal taps wrap.
    """

    def __init__(
        self, in_channels: int, out_channels: int, grid: SphereSamplingGrid, stride: int = 1
    ):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        k2 = grid.kernel * grid.kernel
        self.weight = nn.Parameter(torch.empty(out_channels, in_channels, k2))
        self.bias = nn.Parameter(torch.empty(out_channels))
        nn.init.kaiming_uniform_(self.weight, a=math.sqrt(5))
        bound = 1.0 / math.sqrt(in_channels * k2)
        nn.init.uniform_(self.bias, -bound, bound)

        pos = grid.positions[:: stride, :: stride]  # (H', W', k2, 2)
        h, w = grid.height, grid.width
        rows = np.clip(pos[..., 0], 0.0, h - 1.0)
        cols = pos[..., 1]
        r0 = np.floor(rows)
        c0 = np.floor(cols)
        wr = torch.from_numpy((rows - r0).astype(np.float32))
        wc = torch.from_numpy((cols - c0).astype(np.float32))
        r0 = r0.astype(np.int64)
        c0 = c0.astype(np.int64) % w
        self.register_buffer("_r0", torch.from_numpy(r0), persistent=False)
        self.register_buffer("_r1", torch.from_numpy(np.minimum(r0 + 1, h - 1)), persistent=False)
        self.register_buffer("_c0", torch.from_numpy(c0), persistent=False)
        self.register_buffer("_c1", torch.from_numpy((c0 + 1) % w), persistent=False)
        self.register_buffer("_wr", wr, persistent=False)
        self.register_buffer("_wc", wc, persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        wr, wc = self._wr, self._wc
        top = x[:, :, self._r0, self._c0] * (1 - wc) + x[:, :, self._r0, self._c1] * wc
        bottom = x[:, :, self._r1, self._c0] * (1 - wc) + x[:, :, self._r1, self._c1] * wc
        patches = top * (1 - wr) + bottom * wr  # (B, C_in, H', W', k2)
        out = torch.einsum("bchwk,ock->bohw", patches, self.weight)
        return out + self.bias[None, :, None, None]


class PanoramaEncoder(nn.Module):
    """CoordConv + spherical conv blocks + pooling to the condition vector."""

    def __init__(self, config: EncoderConfig = EncoderConfig()):
        super().__init__()
        self.config = config
        h, w = config.input_size
        blocks = []
        in_ch = 3 + 2
        for out_ch in config.channels:
            grid = build_sphere_grid(h, w, config.kernel)
            blocks.append(SphereConv2d(in_ch, out_ch, grid, stride=config.stride))
            in_ch = out_ch
            # Slicing by [::stride] keeps ceil(n / stride) positions.
            h, w = -(-h // config.stride), -(-w // config.stride)
        self.blocks = nn.ModuleList(blocks)
        self.project = nn.Linear(config.channels[-1], config.embedding_dim)

    @property
    def embedding_dim(self) -> int:
        return self.config.embedding_dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        expected = self.config.input_size
        if x.ndim != 4 or x.shape[1] != 3 or tuple(x.shape[2:]) != expected:
            raise ShapeMismatchError(
                f"encoder expects (B, 3, {expected[0]}, {expected[1]}), got {tuple(x.shape)}"
            )
        h = add_coord_channels(x)
        for block in self.blocks:
            h = torch.relu(block(h))
        pooled = h.mean(dim=(2, 3))
        return self.project(pooled)


def encode_panorama(img: Panorama, encoder: PanoramaEncoder) -> np.ndarray:
    """Embed one panorama with a frozen encoder; returns shape (m,)."""
    expected = encoder.config.input_size
    if img.size != expected:
        raise ShapeMismatchError(f"panorama is {img.size}, encoder expects {expected}")
    was_training = encoder.training
    encoder.eval()
    try:
        with torch.no_grad():
            emb = encoder(panorama_to_tensor(img)[None])[0]
    finally:
        encoder.train(was_training)
    return emb.numpy()
