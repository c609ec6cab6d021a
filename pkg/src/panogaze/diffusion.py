"""Denoising-diffusion model over gaze sequences, conditioned on a panorama.

Noise schedule: T steps with sqrt(beta) spaced linearly between
sqrt(beta_min) and sqrt(beta_max) (a quadratic ramp in beta).  Forward
corruption is the closed form

    x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps

with abar_t the running product of (1 - beta).  The reverse update divides
out one step's noise using the network's noise estimate and re-injects
fresh noise scaled by sqrt(beta_t); the final step (t = 1) is
deterministic.  Training draws a uniform step per example and regresses
the injected noise with an MSE loss.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

from .dataset import Panorama
from .denoiser import DenoiserConfig, GazeDenoiser
from .encoder import EncoderConfig, PanoramaEncoder, panorama_to_tensor
from .errors import (
    DataEmptyError,
    InvalidRangeError,
    ModelNotLoadedError,
    ShapeMismatchError,
    StepOutOfRangeError,
)
from .sequences import GazeSequence

__all__ = [
    "NoiseSchedule",
    "make_quadratic_schedule",
    "forward_sample",
    "reverse_step",
    "DiffusionConfig",
    "GazeDiffusion",
    "generate_sequences",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_FORMAT_VERSION",
]

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise variances and their running signal products."""

    betas: np.ndarray
    alphas_bar: np.ndarray

    def __post_init__(self) -> None:
        betas = np.asarray(self.betas, dtype=np.float64)
        abar = np.asarray(self.alphas_bar, dtype=np.float64)
        if betas.ndim != 1 or betas.shape != abar.shape:
            raise InvalidRangeError("schedule arrays must be matching 1-D vectors")
        betas.setflags(write=False)
        abar.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas_bar", abar)

    @property
    def steps(self) -> int:
        return self.betas.shape[0]

    def _check(self, t: int) -> None:
        if not 1 <= t <= self.steps:
            raise StepOutOfRangeError(f"step {t} outside [1, {self.steps}]")

    def beta(self, t: int) -> float:
        self._check(t)
        return float(self.betas[t - 1])

    def alpha_bar(self, t: int) -> float:
        self._check(t)
        return float(self.alphas_bar[t - 1])


def make_quadratic_schedule(
    steps: int = 200, beta_min: float = 1e-4, beta_max: float = 0.5
) -> NoiseSchedule:
    """Quadratic beta ramp; the endpoints are pinned exactly.

    Squaring a linspace leaves the last entry a few ulp off the requested
    bound, so both endpoints are snapped back after squaring.
    """
    if steps < 2:
        raise InvalidRangeError("schedule needs at least 2 steps")
    if not (0.0 < beta_min < beta_max < 1.0):
        raise InvalidRangeError(
            f"need 0 < beta_min < beta_max < 1, got ({beta_min}, {beta_max})"
        )
    betas = np.linspace(math.sqrt(beta_min), math.sqrt(beta_max), steps) ** 2
    betas[0] = beta_min
    betas[-1] = beta_max
    return NoiseSchedule(betas=betas, alphas_bar=np.cumprod(1.0 - betas))


def forward_sample(x0, t: int, eps, schedule: NoiseSchedule):
    """Closed-form corruption of x0 to step t with the given noise draw."""
    abar = schedule.alpha_bar(t)
    return math.sqrt(abar) * x0 + math.sqrt(1.0 - abar) * eps


def reverse_step(x_t, t: int, eps_hat, schedule: NoiseSchedule, rng=None, noise=None):
    """One ancestral update from step t to t - 1.

    The mean removes the estimated noise scaled by beta_t / sqrt(1 - abar_t)
    and rescales by 1 / sqrt(1 - beta_t); fresh noise scaled by
    sqrt(beta_t) is added except at the final step.  Works on numpy arrays
    or torch tensors; ``noise`` overrides ``rng`` when given.
    """
    beta = schedule.beta(t)
    mean = (x_t - (beta / math.sqrt(1.0 - schedule.alpha_bar(t))) * eps_hat) / math.sqrt(
        1.0 - beta
    )
    if t == 1:
        return mean
    if noise is None:
        if isinstance(x_t, torch.Tensor):
            noise = torch.randn(
                x_t.shape, generator=rng, dtype=x_t.dtype, device=x_t.device
            )
        else:
            gen = rng if rng is not None else np.random.default_rng()
            noise = gen.standard_normal(np.shape(x_t))
    return mean + math.sqrt(beta) * noise


@dataclass(frozen=True)
class DiffusionConfig:
    steps: int = 200
    beta_min: float = 1e-4
    beta_max: float = 0.5
    epochs: int = 500
    batch_size: int = 16
    learning_rate: float = 1e-3
    lr_decay_epochs: tuple[int, ...] = (375, 450)
    lr_decay_factor: float = 0.1
    checkpoint_every: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps < 2 or self.epochs < 1 or self.batch_size < 1:
            raise InvalidRangeError("steps, epochs, and batch size must be positive")
        if self.learning_rate <= 0 or not (0.0 < self.lr_decay_factor <= 1.0):
            raise InvalidRangeError("learning rate must be positive, decay factor in (0, 1]")
        if any(e < 1 for e in self.lr_decay_epochs) or list(self.lr_decay_epochs) != sorted(
            set(self.lr_decay_epochs)
        ):
            raise InvalidRangeError("decay epochs must be positive and strictly increasing")
        if self.checkpoint_every < 1:
            raise InvalidRangeError("checkpoint interval must be positive")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, payload: str) -> "DiffusionConfig":
        raw = json.loads(payload)
        raw["lr_decay_epochs"] = tuple(raw["lr_decay_epochs"])
        return cls(**raw)


def _lr_for_epoch(epoch: int, config: DiffusionConfig) -> float:
    lr = config.learning_rate
    for milestone in config.lr_decay_epochs:
        if epoch > milestone:
            lr *= config.lr_decay_factor
    return lr


class GazeDiffusion(nn.Module):
    """Encoder, denoiser, and schedule bundled for training and sampling."""

    def __init__(
        self,
        encoder: PanoramaEncoder,
        denoiser: GazeDenoiser,
        schedule: NoiseSchedule,
        sequence_length: int,
        sample_rate: float = 30.0,
    ):
        super().__init__()
        if denoiser.config.diffusion_steps != schedule.steps:
            raise ShapeMismatchError(
                f"denoiser expects {denoiser.config.diffusion_steps} steps, schedule has {schedule.steps}"
            )
        if encoder.embedding_dim != denoiser.config.condition_dim:
            raise ShapeMismatchError(
                f"encoder embeds to {encoder.embedding_dim}, denoiser conditions on {denoiser.config.condition_dim}"
            )
        if sequence_length < 1 or sample_rate <= 0:
            raise InvalidRangeError("sequence length and sample rate must be positive")
        self.encoder = encoder
        self.denoiser = denoiser
        self.schedule = schedule
        self.sequence_length = sequence_length
        self.sample_rate = float(sample_rate)
        self.register_buffer(
            "_alphas_bar", torch.from_numpy(schedule.alphas_bar.copy()), persistent=False
        )

    def training_loss(
        self,
        x0: torch.Tensor,
        images: torch.Tensor | None = None,
        c: torch.Tensor | None = None,
        generator: torch.Generator | None = None,
    ) -> torch.Tensor:
        """MSE between injected and predicted noise at a uniform random step."""
        if x0.ndim != 3:
            raise ShapeMismatchError(f"expected (B, 3, L) sequences, got {tuple(x0.shape)}")
        if (images is None) == (c is None):
            raise ValueError("pass exactly one of images= or c=")
        if c is None:
            c = self.encoder(images)
        b = x0.shape[0]
        t = torch.randint(1, self.schedule.steps + 1, (b,), generator=generator)
        abar = self._alphas_bar.to(x0.dtype)[t - 1]
        eps = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
        x_t = (
            torch.sqrt(abar)[:, None, None] * x0
            + torch.sqrt(1.0 - abar)[:, None, None] * eps
        )
        eps_hat = self.denoiser(x_t, t, c)
        return torch.mean((eps - eps_hat) ** 2)

    @torch.no_grad()
    def sample(
        self,
        image: Panorama | torch.Tensor,
        n: int = 1,
        length: int | None = None,
        seed: int | None = None,
        batch_size: int = 16,
    ) -> tuple[list[GazeSequence], dict]:
        """Draw n gaze sequences for one panorama.

        Each batch of at most ``batch_size`` sequences runs the full
        reverse chain from Gaussian noise; batch seeds are derived from
        ``seed`` so any prefix of the output is reproducible.  Returns the
        sequences (renormalized to unit vectors) and a diagnostics dict
        with the worst pre-renormalization norm deviation.
        """
        if n < 1:
            raise InvalidRangeError("need n >= 1")
        length = length or self.sequence_length
        was_training = self.training
        self.eval()
        try:
            img = panorama_to_tensor(image) if isinstance(image, Panorama) else image
            if img.ndim != 3:
                raise ShapeMismatchError(f"expected one (3, H, W) image, got {tuple(img.shape)}")
            c1 = self.encoder(img[None].float())
            image_id = image.image_id if isinstance(image, Panorama) else ""
            base = seed if seed is not None else torch.seed() % (2**31)
            chunks: list[torch.Tensor] = []
            worst = 0.0
            for start in range(0, n, batch_size):
                b = min(batch_size, n - start)
                gen = torch.Generator().manual_seed(int(base) + start // batch_size)
                x = torch.randn((b, 3, length), generator=gen)
                cb = c1.expand(b, -1)
                for t in range(self.schedule.steps, 0, -1):
                    eps_hat = self.denoiser(x, t, cb)
                    noise = (
                        torch.randn(x.shape, generator=gen) if t > 1 else torch.zeros_like(x)
                    )
                    x = reverse_step(x, t, eps_hat, self.schedule, noise=noise)
                chunks.append(x)
                norms = torch.linalg.vector_norm(x, dim=1)
                worst = max(worst, float(torch.max(torch.abs(norms - 1.0))))
            out = torch.cat(chunks).double().numpy()  # (n, 3, L)
            norms = np.linalg.norm(out, axis=1, keepdims=True)
            out = out / np.maximum(norms, 1e-12)
            seqs = [
                GazeSequence(
                    points=np.ascontiguousarray(x.T),
                    sample_rate=self.sample_rate,
                    image_id=image_id,
                )
                for x in out
            ]
            return seqs, {"max_norm_deviation": worst, "count": n, "length": length}
        finally:
            self.train(was_training)


def generate_sequences(
    model: GazeDiffusion,
    image: Panorama | torch.Tensor,
    n: int = 1,
    length: int | None = None,
    seed: int | None = None,
) -> tuple[list[GazeSequence], dict]:
    """Convenience wrapper around :meth:`GazeDiffusion.sample`."""
    return model.sample(image, n=n, length=length, seed=seed)


def _image_cache(pairs: Sequence[tuple[GazeSequence, Panorama]]):
    tensors: list[torch.Tensor] = []
    index_of: dict[int, int] = {}
    indices = []
    for _, pano in pairs:
        key = id(pano)
        if key not in index_of:
            index_of[key] = len(tensors)
            tensors.append(panorama_to_tensor(pano))
        indices.append(index_of[key])
    return torch.stack(tensors), torch.tensor(indices, dtype=torch.long)


def save_checkpoint(
    path: str | Path,
    model: GazeDiffusion,
    optimizer: torch.optim.Optimizer | None = None,
    epoch: int = 0,
    train_config: DiffusionConfig | None = None,
) -> Path:
    """Serialize the model (and optionally optimizer) so training can resume."""
    path = Path(path)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "encoder_config": model.encoder.config.to_json(),
        "denoiser_config": model.denoiser.config.to_json(),
        "sequence_length": model.sequence_length,
        "sample_rate": model.sample_rate,
        "betas": torch.from_numpy(model.schedule.betas.copy()),
        "encoder_state": model.encoder.state_dict(),
        "denoiser_state": model.denoiser.state_dict(),
        "epoch": int(epoch),
    }
    if optimizer is not None:
        payload["optimizer_state"] = optimizer.state_dict()
    if train_config is not None:
        payload["train_config"] = train_config.to_json()
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)
    return path


def load_checkpoint(path: str | Path) -> tuple[GazeDiffusion, dict]:
    """Rebuild a model from a checkpoint; also returns the resume state.

    The second element carries ``epoch``, ``optimizer_state`` (when
    saved), and ``train_config``.
    """
    path = Path(path)
    if not path.is_file():
        raise ModelNotLoadedError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise ModelNotLoadedError(f"could not read checkpoint {path}: {exc}") from exc
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ModelNotLoadedError(
            f"checkpoint format {version!r} unsupported (expected {CHECKPOINT_FORMAT_VERSION})"
        )
    encoder = PanoramaEncoder(EncoderConfig.from_json(payload["encoder_config"]))
    denoiser = GazeDenoiser(DenoiserConfig.from_json(payload["denoiser_config"]))
    betas = payload["betas"].double().numpy()
    schedule = NoiseSchedule(betas=betas, alphas_bar=np.cumprod(1.0 - betas))
    model = GazeDiffusion(
        encoder,
        denoiser,
        schedule,
        sequence_length=int(payload["sequence_length"]),
        sample_rate=float(payload["sample_rate"]),
    )
    encoder.load_state_dict(payload["encoder_state"])
    denoiser.load_state_dict(payload["denoiser_state"])
    state = {
        "epoch": int(payload.get("epoch", 0)),
        "optimizer_state": payload.get("optimizer_state"),
        "train_config": payload.get("train_config"),
    }
    return model, state


def train(
    pairs: Sequence[tuple[GazeSequence, Panorama]],
    encoder: PanoramaEncoder,
    denoiser: GazeDenoiser,
    config: DiffusionConfig,
    out_dir: str | Path,
    resume_from: str | Path | None = None,
    log_fn: Callable[[str], None] | None = None,
) -> Path:
    """Train the joint model; writes loss.csv and checkpoints under out_dir.

    One loss-CSV row per epoch (epoch, mean loss, learning rate).  Every
    ``checkpoint_every`` epochs and at the end the full state lands in
    ``checkpoint.pt`` (periodic copies keep their epoch in the name).
    Shuffling and noise draws are reseeded per epoch from ``config.seed``,
    so a resumed run reproduces the loss trace of an uninterrupted one.
    """
    if not pairs:
        raise DataEmptyError("no training pairs")
    lengths = {len(seq) for seq, _ in pairs}
    if len(lengths) != 1:
        raise ShapeMismatchError(f"training sequences must share one length, got {sorted(lengths)}")
    length = lengths.pop()
    rates = {seq.sample_rate for seq, _ in pairs}
    if len(rates) != 1:
        raise ShapeMismatchError(f"training sequences must share one sample rate, got {sorted(rates)}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    schedule = make_quadratic_schedule(config.steps, config.beta_min, config.beta_max)
    model = GazeDiffusion(
        encoder, denoiser, schedule, sequence_length=length, sample_rate=rates.pop()
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    start_epoch = 0
    if resume_from is not None:
        loaded, state = load_checkpoint(resume_from)
        if loaded.sequence_length != length:
            raise ShapeMismatchError(
                f"checkpoint was trained at length {loaded.sequence_length}, data has {length}"
            )
        encoder.load_state_dict(loaded.encoder.state_dict())
        denoiser.load_state_dict(loaded.denoiser.state_dict())
        if state["optimizer_state"] is not None:
            optimizer.load_state_dict(state["optimizer_state"])
        start_epoch = state["epoch"]

    x_all = torch.stack([torch.from_numpy(seq.points.T.copy()).float() for seq, _ in pairs])
    images, image_index = _image_cache(pairs)
    n = x_all.shape[0]

    loss_path = out_dir / "loss.csv"
    mode = "a" if (resume_from is not None and loss_path.exists()) else "w"
    final_path = out_dir / "checkpoint.pt"
    with open(loss_path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(["epoch", "loss", "lr"])
        for epoch in range(start_epoch + 1, config.epochs + 1):
            lr = _lr_for_epoch(epoch, config)
            for group in optimizer.param_groups:
                group["lr"] = lr
            gen = torch.Generator().manual_seed(config.seed * 1_000_003 + epoch)
            perm = torch.randperm(n, generator=gen)
            total, seen = 0.0, 0
            for start in range(0, n, config.batch_size):
                idx = perm[start : start + config.batch_size]
                loss = model.training_loss(
                    x_all[idx], images=images[image_index[idx]], generator=gen
                )
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total += float(loss.detach()) * len(idx)
                seen += len(idx)
            mean_loss = total / seen
            writer.writerow([epoch, repr(mean_loss), repr(lr)])
            fh.flush()
            if log_fn is not None:
                log_fn(f"epoch {epoch}/{config.epochs} loss {mean_loss:.6f} lr {lr:g}")
            if epoch % config.checkpoint_every == 0 and epoch != config.epochs:
                save_checkpoint(
                    out_dir / f"checkpoint_epoch_{epoch:04d}.pt",
                    model,
                    optimizer,
                    epoch,
                    config,
                )
            if epoch % config.checkpoint_every == 0 or epoch == config.epochs:
                save_checkpoint(final_path, model, optimizer, epoch, config)
    if not final_path.exists():
        save_checkpoint(final_path, model, optimizer, start_epoch, config)
    return final_path
