"""Pixel-space handling: mirroring, the exponential lift, PSNR, file I/O.

Images are 2-D float arrays with entries in [0, 1], shape ``(p1, p2)`` with
``p_j >= 2``.  Mirroring extends them to double-even periodic fields of shape
``(2*(p1-1), 2*(p2-1))``; the exponential lift maps pixel values into the
strictly positive band [1, e] where the reconstruction machinery lives.
"""

from __future__ import annotations

import numpy as np


def validate_image(image) -> np.ndarray:
    arr = np.asarray(image, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError(f"image must be at least 2x2, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image intensities must lie in [0, 1]")
    return arr


def symmetric_extension(block) -> np.ndarray:
    """Whole-sample symmetric extension of an arbitrary real block.

    Rows come out as ``x1 .. xp, x(p-1) .. x2`` (no doubled edge samples), so
    the result has period ``2*(p-1)`` per axis and is exactly double-even.
    """
    arr = np.asarray(block, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError(f"block must be 2-D with both sides >= 2, got {arr.shape}")
    rows = np.r_[0 : arr.shape[0], arr.shape[0] - 2 : 0 : -1]
    cols = np.r_[0 : arr.shape[1], arr.shape[1] - 2 : 0 : -1]
    return arr[np.ix_(rows, cols)]


def mirror(image) -> np.ndarray:
    """Mirror a validated image to its double-even periodic extension."""
    return symmetric_extension(validate_image(image))


def lift(values) -> np.ndarray:
    """Exponential lift: strictly positive field, [0,1] maps onto [1, e]."""
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot lift non-finite values")
    return np.exp(arr)


def unlift(field) -> np.ndarray:
    """Invert the lift: crop the leading block, take log, clamp to [0, 1].

    The pixel dimensions are implied by the grid: ``p_j = N_j/2 + 1``.
    """
    arr = np.asarray(field, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"field must be 2-D, got shape {arr.shape}")
    if arr.shape[0] % 2 or arr.shape[1] % 2:
        raise ValueError(f"mirrored grids have even dimensions, got {arr.shape}")
    if arr.min() <= 0.0:
        raise ValueError("field must be strictly positive to unlift")
    p1 = arr.shape[0] // 2 + 1
    p2 = arr.shape[1] // 2 + 1
    return np.clip(np.log(arr[:p1, :p2]), 0.0, 1.0)


def psnr(reference, other) -> float:
    """Peak signal-to-noise ratio in dB with peak value 1; +inf when equal."""
    a = np.asarray(reference, dtype=float)
    b = np.asarray(other, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("psnr inputs must be finite")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


# ---------------------------------------------------------------------------
# file formats: binary PGM is the required bit-exact format, PNG via Pillow


def _parse_pgm(data: bytes) -> np.ndarray:
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            ch = data[pos : pos + 1]
            if ch == b"#":  # comment runs to end of line
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        return data[start:pos]

    if token() != b"P5":
        raise ValueError("not a binary PGM (P5) file")
    width = int(token())
    height = int(token())
    maxval = int(token())
    if maxval != 255:
        raise ValueError(f"only 8-bit PGM (maxval 255) is supported, got {maxval}")
    pos += 1  # single whitespace byte separates header from raster
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ValueError("PGM raster shorter than header promises")
    values = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return values.astype(float) / 255.0


def _encode_pgm(image: np.ndarray) -> bytes:
    quantized = np.rint(image * 255.0).astype(np.uint8)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii")
    return header + quantized.tobytes()


def _load_with_pillow(path: str) -> np.ndarray:
    from PIL import Image as PILImage

    with PILImage.open(path) as handle:
        if handle.mode == "P":
            handle = handle.convert("RGB")
        arr = np.asarray(handle)
    if arr.ndim == 3:
        # color inputs collapse to the equal-weight channel average
        gray = arr[..., :3].astype(float).mean(axis=2)
        return gray / 255.0
    arr = arr.astype(float)
    if arr.max() > 255.0:
        return arr / 65535.0
    return arr / 255.0


def load_image(path: str) -> np.ndarray:
    """Read a grayscale image as floats in [0, 1]; color collapses by channel mean."""
    text = str(path)
    if text.lower().endswith(".pgm"):
        with open(text, "rb") as handle:
            return validate_image(_parse_pgm(handle.read()))
    return validate_image(_load_with_pillow(text))


def save_image(path: str, image) -> None:
    """Write an image; format chosen by extension (.pgm bit-exact, .png via Pillow)."""
    arr = validate_image(image)
    text = str(path)
    lowered = text.lower()
    if lowered.endswith(".pgm"):
        with open(text, "wb") as handle:
            handle.write(_encode_pgm(arr))
        return
    if lowered.endswith(".png"):
        from PIL import Image as PILImage

        quantized = np.rint(arr * 255.0).astype(np.uint8)
        PILImage.fromarray(quantized, mode="L").save(text)
        return
    raise ValueError(f"unsupported image extension: {text} (use .pgm or .png)")
