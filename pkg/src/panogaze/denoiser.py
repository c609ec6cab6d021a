"""Noise-prediction network for gaze diffusion.

The network sees a noisy sequence as a (B, 1, K, L) grid (K = 3 vector
components, L = time), concatenates the panorama embedding as extra input
channels, and runs a stack of gated residual layers.  Each layer mixes
information along time with a dilated convolution and a transformer over
the L axis, and across the three vector components with a transformer over
the K axis; sinusoidal encodings of sample position and of the diffusion
step are injected so the same weights serve every step.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .errors import ShapeMismatchError, StepOutOfRangeError

__all__ = [
    "DenoiserConfig",
    "time_embedding",
    "DiffusionStepEmbedding",
    "ResidualLayer",
    "GazeDenoiser",
    "parameter_count",
]

TIME_EMBED_DIM = 128
STEP_EMBED_DIM = 128
EMBED_BASE = 10000.0


@dataclass(frozen=True)
class DenoiserConfig:
    residual_layers: int = 4
    channels: int = 64
    heads: int = 8
    dilation_cycle: tuple[int, ...] = (1, 2, 4, 8)
    condition_dim: int = 64
    features: int = 3
    feature_embed_dim: int = 16
    transformer_feedforward: int = 64
    dropout: float = 0.0
    diffusion_steps: int = 200

    def __post_init__(self) -> None:
        if self.residual_layers < 1:
            raise ValueError("need at least one residual layer")
        if self.channels < 1 or self.heads < 1:
            raise ValueError("channels and heads must be positive")
        if (2 * self.channels) % self.heads != 0:
            raise ValueError(
                f"transformer width {2 * self.channels} is not divisible by {self.heads} heads"
            )
        if not self.dilation_cycle or any(d < 1 for d in self.dilation_cycle):
            raise ValueError("dilation cycle must be non-empty and positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.diffusion_steps < 1:
            raise ValueError("diffusion step count must be positive")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, payload: str) -> "DenoiserConfig":
        raw = json.loads(payload)
        raw["dilation_cycle"] = tuple(raw["dilation_cycle"])
        return cls(**raw)


def time_embedding(
    positions: np.ndarray | torch.Tensor, dim: int = TIME_EMBED_DIM
) -> torch.Tensor:
    """Sinusoidal position encoding, sines first then cosines.

    Entry (l, k) is sin(S_l / base^(k/(dim/2))) for k < dim/2 and the
    matching cosine above; computed in float64 so large positions keep
    full precision, returned float32 as (L, dim).
    """
    if dim % 2 != 0:
        raise ValueError("embedding dimension must be even")
    pos = np.asarray(positions, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = EMBED_BASE ** (np.arange(half, dtype=np.float64) / half)
    args = pos[:, None] / freqs[None, :]
    table = np.concatenate([np.sin(args), np.cos(args)], axis=1)
    return torch.from_numpy(table.astype(np.float32))


class DiffusionStepEmbedding(nn.Module):
    """Lookup of sinusoidal step encodings refined by two SiLU MLP layers."""

    def __init__(self, steps: int, dim: int = STEP_EMBED_DIM):
        super().__init__()
        self.steps = steps
        table = time_embedding(np.arange(1, steps + 1), dim)
        self.register_buffer("table", table, persistent=False)
        self.fc1 = nn.Linear(dim, dim)
        self.fc2 = nn.Linear(dim, dim)

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        if t.ndim != 1:
            raise ShapeMismatchError(f"step index batch must be 1-D, got shape {tuple(t.shape)}")
        if torch.any(t < 1) or torch.any(t > self.steps):
            raise StepOutOfRangeError(
                f"diffusion step must lie in [1, {self.steps}], got {t.min().item()}..{t.max().item()}"
            )
        x = self.table[t - 1]
        x = torch.nn.functional.silu(self.fc1(x))
        return torch.nn.functional.silu(self.fc2(x))


def _transformer_layer(d_model: int, heads: int, feedforward: int, dropout: float):
    return nn.TransformerEncoderLayer(
        d_model=d_model,
        nhead=heads,
        dim_feedforward=feedforward,
        activation="gelu",
        dropout=dropout,
    )


class ResidualLayer(nn.Module):
    """One gated residual block over the (B, C, K, L) grid."""

    def __init__(self, config: DenoiserConfig, dilation: int):
        super().__init__()
        c = config.channels
        side_dim = TIME_EMBED_DIM + config.feature_embed_dim
        self.step_projection = nn.Linear(STEP_EMBED_DIM, c)
        self.dilated_conv = nn.Conv1d(c, 2 * c, 3, dilation=dilation, padding=dilation)
        self.temporal_transformer = _transformer_layer(
            2 * c, config.heads, config.transformer_feedforward, config.dropout
        )
        self.feature_transformer = _transformer_layer(
            2 * c, config.heads, config.transformer_feedforward, config.dropout
        )
        self.side_projection = nn.Conv1d(side_dim, 2 * c, 1)
        self.output_projection = nn.Conv1d(c, 2 * c, 1)

    def _along_time(self, y: torch.Tensor) -> torch.Tensor:
        # (B, 2C, K, L): attention over the L tokens of each (batch, feature) pair.
        b, c2, k, length = y.shape
        y = y.permute(0, 2, 1, 3).reshape(b * k, c2, length)
        y = self.temporal_transformer(y.permute(2, 0, 1)).permute(1, 2, 0)
        return y.reshape(b, k, c2, length).permute(0, 2, 1, 3)

    def _along_features(self, y: torch.Tensor) -> torch.Tensor:
        # (B, 2C, K, L): attention over the K tokens at each (batch, time) slot.
        b, c2, k, length = y.shape
        y = y.permute(0, 3, 1, 2).reshape(b * length, c2, k)
        y = self.feature_transformer(y.permute(2, 0, 1)).permute(1, 2, 0)
        return y.reshape(b, length, c2, k).permute(0, 2, 3, 1)

    def forward(
        self, x: torch.Tensor, step_emb: torch.Tensor, side: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        b, c, k, length = x.shape
        y = x + self.step_projection(step_emb)[:, :, None, None]
        y = self.dilated_conv(y.permute(0, 2, 1, 3).reshape(b * k, c, length))
        y = y.reshape(b, k, 2 * c, length).permute(0, 2, 1, 3)
        y = self._along_time(y)
        y = self._along_features(y)
        side = self.side_projection(side.reshape(b, -1, k * length)).reshape(b, 2 * c, k, length)
        y = y + side
        gate, filt = torch.chunk(y, 2, dim=1)
        y = torch.sigmoid(gate) * torch.tanh(filt)
        y = self.output_projection(y.reshape(b, c, k * length)).reshape(b, 2 * c, k, length)
        residual, skip = torch.chunk(y, 2, dim=1)
        return (x + residual) / math.sqrt(2.0), skip


class GazeDenoiser(nn.Module):
    """Predicts the noise component of a noisy gaze sequence.

    ``forward(x, t, c)`` takes the noisy sequence x as (B, 3, L), the
    integer step t in [1, T] as (B,) (or a scalar), and the panorama
    embedding c as (B, m); it returns the noise estimate with the shape
    of x.
    """

    def __init__(self, config: DenoiserConfig = DenoiserConfig()):
        super().__init__()
        self.config = config
        c = config.channels
        self.input_projection = nn.Conv1d(1 + config.condition_dim, c, 1)
        self.step_embedding = DiffusionStepEmbedding(config.diffusion_steps)
        self.feature_embedding = nn.Embedding(config.features, config.feature_embed_dim)
        self.layers = nn.ModuleList(
            ResidualLayer(config, config.dilation_cycle[i % len(config.dilation_cycle)])
            for i in range(config.residual_layers)
        )
        self.skip_projection = nn.Conv1d(c, c, 1)
        self.output_projection = nn.Conv1d(c, 1, 1)
        nn.init.zeros_(self.output_projection.weight)
        nn.init.zeros_(self.output_projection.bias)
        self._time_cache: dict[tuple[int, torch.device], torch.Tensor] = {}

    def _positional(self, length: int, device: torch.device) -> torch.Tensor:
        key = (length, device)
        cached = self._time_cache.get(key)
        if cached is None:
            cached = time_embedding(np.arange(1, length + 1)).to(device)
            self._time_cache[key] = cached
        return cached

    def _side_info(self, b: int, k: int, length: int, device: torch.device) -> torch.Tensor:
        pos = self._positional(length, device)  # (L, 128)
        side_t = pos.T[None, :, None, :].expand(b, TIME_EMBED_DIM, k, length)
        feat = self.feature_embedding.weight  # (K, 16)
        side_f = feat.T[None, :, :, None].expand(b, feat.shape[1], k, length)
        return torch.cat([side_t, side_f], dim=1)

    def forward(self, x: torch.Tensor, t: torch.Tensor | int, c: torch.Tensor) -> torch.Tensor:
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
            c = c[None] if c.ndim == 1 else c
        if x.ndim != 3 or x.shape[1] != self.config.features:
            raise ShapeMismatchError(
                f"expected sequences shaped (B, {self.config.features}, L), got {tuple(x.shape)}"
            )
        b, k, length = x.shape
        if isinstance(t, int):
            t = torch.full((b,), t, dtype=torch.long, device=x.device)
        elif t.ndim == 0:
            t = t.reshape(1).expand(b)
        if c.ndim != 2 or c.shape[0] != b or c.shape[1] != self.config.condition_dim:
            raise ShapeMismatchError(
                f"expected condition shaped ({b}, {self.config.condition_dim}), got {tuple(c.shape)}"
            )

        inp = torch.cat([x[:, None], c[:, :, None, None].expand(b, c.shape[1], k, length)], dim=1)
        h = self.input_projection(inp.reshape(b, 1 + c.shape[1], k * length))
        h = torch.relu(h).reshape(b, self.config.channels, k, length)

        step_emb = self.step_embedding(t)
        side = self._side_info(b, k, length, x.device)
        skips = []
        for layer in self.layers:
            h, skip = layer(h, step_emb, side)
            skips.append(skip)
        out = torch.stack(skips).sum(dim=0) / math.sqrt(len(self.layers))
        out = out.reshape(b, self.config.channels, k * length)
        out = torch.relu(self.skip_projection(out))
        out = self.output_projection(out).reshape(b, k, length)
        return out[0] if squeeze else out


def parameter_count(config: DenoiserConfig = DenoiserConfig()) -> int:
    """Exact learnable-parameter total of a denoiser built from ``config``."""
    model = GazeDenoiser(config)
    return sum(p.numel() for p in model.parameters() if p.requires_grad)
