"""Binary PGM rendering of snapshots.

Amplitudes map to gray levels 0..254 symmetrically about 127, so zero is
mid-gray and ``-u`` renders as ``254 - pixel``. Level 255 is reserved for
the known-region boundary line and never produced by data.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .signals import Snapshot

MID = 127
LINE = 255


def gray_levels(values: np.ndarray, scale: float | None = None) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty snapshot")
    s = float(np.max(np.abs(v))) if scale is None else float(scale)
    if s <= 0 or not np.isfinite(s):
        return np.full(v.shape, MID, dtype=np.uint8)
    # rint is odd-symmetric, which keeps the complement property exact.
    p = MID + np.rint(MID * np.clip(v / s, -1.0, 1.0))
    return p.astype(np.uint8)


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Mask nodes with a 4-neighbour outside the mask; the strip edges do not count."""
    m = np.asarray(mask, dtype=bool)
    p = np.pad(m, 1, constant_values=True)
    inner = p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]
    return m & ~inner


def _columns(snap: Snapshot, crop: float | None) -> slice:
    if crop is None:
        return slice(None)
    x = snap.spec.x
    cols = np.nonzero(np.abs(x) <= crop + 1e-9)[0]
    return slice(cols[0], cols[-1] + 1)


def snapshot_image(snap: Snapshot, scale: float | None = None, overlay: bool = True,
                   crop: float | None = None) -> np.ndarray:
    """8-bit image of a snapshot, surface at the top row."""
    img = gray_levels(snap.values, scale)
    if overlay and snap.mask is not None:
        img = img.copy()
        img[boundary_pixels(snap.mask)] = LINE
    return img[:, _columns(snap, crop)]


def write_pgm(path, image: np.ndarray) -> Path:
    img = np.asarray(image, dtype=np.uint8)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("image must be a non-empty 2-D array")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval > 255:
        raise ValueError("only 8-bit PGM is supported")
    pixels = parts[4]
    return np.frombuffer(pixels[: w * h], dtype=np.uint8).reshape(h, w)


def render_snapshot(snap: Snapshot, path, scale: float | None = None, overlay: bool = True,
                    crop: float | None = None) -> Path:
    return write_pgm(path, snapshot_image(snap, scale, overlay, crop))


def render_pair(left: Snapshot, right: Snapshot, path, overlay: bool = True,
                crop: float | None = None, gap: int = 4) -> Path:
    """Two snapshots side by side on one amplitude scale (max of both)."""
    scale = max(float(np.max(np.abs(left.values))), float(np.max(np.abs(right.values))))
    a = snapshot_image(left, scale, overlay, crop)
    b = snapshot_image(right, scale, overlay, crop)
    if a.shape[0] != b.shape[0]:
        raise ValueError("snapshots have different heights")
    sep = np.full((a.shape[0], gap), LINE, dtype=np.uint8)
    return write_pgm(path, np.hstack([a, sep, b]))
