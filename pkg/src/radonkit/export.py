"""16-bit grayscale PNG rendering of images."""
import numpy as np
from PIL import Image

from .npyio import atomic_write


def to_uint16(x, window_lo, window_hi):
    """``clamp((x - lo) / (hi - lo), 0, 1) * 65535`` rounded to nearest."""
    if not window_hi > window_lo:
        raise ValueError(f"window_hi must exceed window_lo, got [{window_lo}, {window_hi}]")
    x = np.asarray(x, dtype=np.float64)
    scaled = np.clip((x - window_lo) / (window_hi - window_lo), 0.0, 1.0) * 65535.0
    return np.rint(scaled).astype(np.uint16)


def png_export(x, path, window_lo=0.0, window_hi=1.0):
    """Write a 2-D image (or a batch of one) as a 16-bit grayscale PNG."""
    x = np.asarray(x)
    if x.ndim == 3 and x.shape[0] == 1:
        x = x[0]
    if x.ndim != 2:
        raise ValueError(f"expected a single 2-D image, got shape {x.shape}")
    img = Image.fromarray(to_uint16(x, window_lo, window_hi))
    atomic_write(path, lambda fh: img.save(fh, format="PNG"))
