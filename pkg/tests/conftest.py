"""Shared synthetic-signal builders and the acceptance summary hook."""

from __future__ import annotations

import numpy as np
import pytest

from panogaze import GazeSequence


def hold_sweep_hold(
    rate: float = 30.0,
    hold_samples: int = 30,
    sweep_samples: int = 3,
    sweep_deg: float = 20.0,
) -> GazeSequence:
    """Fixate at the origin, sweep east, fixate at the landing point.

    With the defaults the sweep covers 20 degrees in 100 ms at 30 Hz, which
    is unambiguous saccade territory against perfectly still holds.
    """
    lam = np.concatenate(
        [
            np.zeros(hold_samples),
            np.linspace(0.0, np.radians(sweep_deg), sweep_samples + 2)[1:-1],
            np.full(hold_samples, np.radians(sweep_deg)),
        ]
    )
    return GazeSequence.from_angles(np.zeros_like(lam), lam, rate)


def multi_hold_sequence(
    hold_samples: tuple[int, ...],
    rate: float = 30.0,
    step_deg: float = 20.0,
    sweep_samples: int = 3,
) -> GazeSequence:
    """Alternate stationary holds with fast eastward sweeps between them.

    Hold i sits at longitude ``i * step_deg``; each sweep takes
    ``sweep_samples`` moving samples.  Useful for testing the minimum
    fixation-duration filter with holds of controlled lengths.
    """
    lam_parts = []
    for i, n in enumerate(hold_samples):
        lam_parts.append(np.full(n, np.radians(i * step_deg)))
        if i + 1 < len(hold_samples):
            ramp = np.linspace(
                np.radians(i * step_deg), np.radians((i + 1) * step_deg), sweep_samples + 2
            )[1:-1]
            lam_parts.append(ramp)
    lam = np.concatenate(lam_parts)
    return GazeSequence.from_angles(np.zeros_like(lam), lam, rate)


def random_walk_sequence(
    seed: int, length: int = 64, rate: float = 30.0, step_deg: float = 1.0
) -> GazeSequence:
    """Smooth random walk on the sphere, kept away from the poles."""
    rng = np.random.default_rng(seed)
    phi = np.clip(np.cumsum(rng.normal(0.0, np.radians(step_deg), length)), -1.3, 1.3)
    lam = np.cumsum(rng.normal(0.0, np.radians(step_deg), length))
    return GazeSequence.from_angles(phi, lam, rate)


def write_raw_dataset(
    root,
    n_images: int = 3,
    n_observers: int = 2,
    n_samples: int = 40,
    rate: float = 60.0,
    image_hw: tuple[int, int] = (32, 64),
) -> tuple[str, str]:
    """Write a tiny raw dataset tree (gaze CSVs + panorama PNGs).

    Layout matches the loader contract: ``gaze/<image_id>/<observer>.csv``
    and ``images/<image_id>.png``.  Returns (gaze_dir, image_dir) as strings.
    """
    import cv2

    gaze_dir = root / "gaze"
    image_dir = root / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n_images):
        image_id = f"scene{i:02d}"
        rng = np.random.default_rng(1000 + i)
        pixels = rng.integers(0, 256, (*image_hw, 3), dtype=np.uint8)
        cv2.imwrite(str(image_dir / f"{image_id}.png"), pixels[:, :, ::-1])
        rec_dir = gaze_dir / image_id
        rec_dir.mkdir(parents=True, exist_ok=True)
        for j in range(n_observers):
            seq = random_walk_sequence(seed=100 * i + j, length=n_samples, rate=rate)
            phi, lam = seq.to_angles()
            lines = ["timestamp_s,lat_rad,lon_rad"]
            for k in range(n_samples):
                lines.append(f"{float(k / rate)!r},{float(phi[k])!r},{float(lam[k])!r}")
            (rec_dir / f"obs{j:02d}.csv").write_text("\n".join(lines) + "\n")
    return str(gaze_dir), str(image_dir)


# ---------------------------------------------------------------------------
# acceptance summary
# ---------------------------------------------------------------------------

_ACCEPTANCE_MARKER = "test_acceptance.py::test_c"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL/SKIP line per acceptance criterion."""
    rows: dict[int, tuple[str, str]] = {}
    for status, label in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL"), ("skipped", "SKIP")):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if _ACCEPTANCE_MARKER not in nodeid:
                continue
            if status in ("passed", "failed") and getattr(report, "when", "call") != "call":
                continue
            name = nodeid.rsplit("::", 1)[1]
            number = int(name.split("_")[1][1:])
            title = name.split("_", 2)[2].replace("_", " ")
            rows[number] = (label, title)
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(rows):
        label, title = rows[number]
        terminalreporter.write_line(f"criterion {number:2d} {label}  {title}")
