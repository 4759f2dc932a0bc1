"""Canny edge detection turning sketch renders into binary visual prompts.

The detector runs four fixed stages:

1. Gaussian blur with standard deviation ``sigma``; kernel radius is
   ceil(3 * sigma) and the kernel is renormalized where it overhangs the
   image border. ``sigma = 0`` skips the blur.
2. 3x3 Sobel gradients on the blurred image (gx positive rightward, gy
   positive downward), magnitude sqrt(gx^2 + gy^2). Gradients are defined
   only on the interior; the 1-pixel border is never an edge.
3. Non-maximum suppression with the gradient direction quantized to four
   bins split at 22.5 and 67.5 degrees. A pixel survives when its
   magnitude is strictly greater than the neighbor on one side of the
   quantized direction and >= the neighbor on the other side (the
   asymmetry keeps exactly one pixel of a two-pixel plateau).
4. Double-threshold hysteresis: magnitudes >= high are strong edges;
   magnitudes in [low, high) survive iff 8-connected to a strong pixel
   through other surviving candidates.

The arithmetic is specified tap by tap (accumulation in row-major tap
order, scalar kernel weights) so independent implementations of the same
stages agree bit-exactly.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import InvalidThresholdError
from .renderer import GrayscaleImage

TAN_22_5 = math.tan(math.pi / 8.0)
TAN_67_5 = math.tan(3.0 * math.pi / 8.0)

DEFAULT_LOW = 100.0
DEFAULT_HIGH = 200.0
DEFAULT_SIGMA = 1.0

# Sobel taps in row-major order, zero coefficients omitted.
_SOBEL_X = [(-1, -1, -1.0), (-1, 1, 1.0), (0, -1, -2.0), (0, 1, 2.0), (1, -1, -1.0), (1, 1, 1.0)]
_SOBEL_Y = [(-1, -1, -1.0), (-1, 0, -2.0), (-1, 1, -1.0), (1, -1, 1.0), (1, 0, 2.0), (1, 1, 1.0)]


@dataclass(frozen=True, eq=False)
class EdgeMap:
    """Binary image; 255 marks an edge pixel, 0 everything else."""

    pixels: np.ndarray  # (height, width) uint8, values in {0, 255}

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.dtype != np.uint8:
            raise ValueError(f"expected 2-D uint8 array, got {px.dtype} shape {px.shape}")
        if not np.isin(px, (0, 255)).all():
            raise ValueError("edge map values must be exactly 0 or 255")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def save_png(self, path) -> None:
        Image.fromarray(self.pixels, mode="L").save(path, format="PNG")

    @classmethod
    def load_png(cls, path) -> "EdgeMap":
        with Image.open(path) as im:
            return cls(np.asarray(im.convert("L"), dtype=np.uint8))


def gaussian_kernel(sigma: float) -> list[list[float]]:
    """Unnormalized Gaussian taps; normalization happens against the in-bounds
    weight sum so border pixels are renormalized for free."""
    radius = math.ceil(3.0 * sigma)
    if radius <= 0:
        return [[1.0]]
    denom = 2.0 * sigma * sigma
    return [
        [math.exp(-(dx * dx + dy * dy) / denom) for dx in range(-radius, radius + 1)]
        for dy in range(-radius, radius + 1)
    ]


def _blur(img: np.ndarray, sigma: float) -> np.ndarray:
    h, w = img.shape
    src = img.astype(np.float64)
    kernel = gaussian_kernel(sigma)
    radius = (len(kernel) - 1) // 2
    if radius == 0:
        return src
    acc = np.zeros((h, w))
    wsum = np.zeros((h, w))
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            kw = kernel[dy + radius][dx + radius]
            dst_y = slice(max(0, -dy), h - max(0, dy))
            dst_x = slice(max(0, -dx), w - max(0, dx))
            src_y = slice(max(0, dy), h + min(0, dy))
            src_x = slice(max(0, dx), w + min(0, dx))
            acc[dst_y, dst_x] += kw * src[src_y, src_x]
            wsum[dst_y, dst_x] += kw
    return acc / wsum


def _sobel(img: np.ndarray):
    """Interior-only gradients; border rows/columns stay zero."""
    h, w = img.shape
    gx = np.zeros((h, w))
    gy = np.zeros((h, w))
    interior = (slice(1, h - 1), slice(1, w - 1))
    for dy, dx, coeff in _SOBEL_X:
        gx[interior] += coeff * img[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
    for dy, dx, coeff in _SOBEL_Y:
        gy[interior] += coeff * img[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
    mag = np.sqrt(gx * gx + gy * gy)
    return gx, gy, mag


def _suppress(gx: np.ndarray, gy: np.ndarray, mag: np.ndarray) -> np.ndarray:
    """Keep local maxima along the quantized gradient direction."""
    h, w = mag.shape
    ax = np.abs(gx)
    ay = np.abs(gy)
    horizontal = ay <= TAN_22_5 * ax
    vertical = ay > TAN_67_5 * ax
    diag_main = ~horizontal & ~vertical & (gx * gy >= 0.0)  # top-left / bottom-right
    diag_anti = ~horizontal & ~vertical & (gx * gy < 0.0)  # top-right / bottom-left

    def shifted(dy, dx):
        out = np.zeros((h, w))
        dst_y = slice(max(0, -dy), h - max(0, dy))
        dst_x = slice(max(0, -dx), w - max(0, dx))
        src_y = slice(max(0, dy), h + min(0, dy))
        src_x = slice(max(0, dx), w + min(0, dx))
        out[dst_y, dst_x] = mag[src_y, src_x]
        return out

    n1 = np.zeros((h, w))
    n2 = np.zeros((h, w))
    for mask, (oy1, ox1), (oy2, ox2) in (
        (horizontal, (0, -1), (0, 1)),
        (diag_main, (-1, -1), (1, 1)),
        (vertical, (-1, 0), (1, 0)),
        (diag_anti, (-1, 1), (1, -1)),
    ):
        n1 = np.where(mask, shifted(oy1, ox1), n1)
        n2 = np.where(mask, shifted(oy2, ox2), n2)

    keep = (mag > n1) & (mag >= n2)
    keep[0, :] = keep[-1, :] = False
    keep[:, 0] = keep[:, -1] = False
    return np.where(keep, mag, 0.0)


def _hysteresis(nms: np.ndarray, low: float, high: float) -> np.ndarray:
    h, w = nms.shape
    candidate = nms >= low
    strong = nms >= high
    visited = np.zeros((h, w), dtype=bool)
    queue = deque(zip(*np.nonzero(strong)))
    for y, x in queue:
        visited[y, x] = True
    while queue:
        y, x = queue.popleft()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and candidate[ny, nx] and not visited[ny, nx]:
                    visited[ny, nx] = True
                    queue.append((ny, nx))
    return visited


def canny(
    img: GrayscaleImage,
    low: float = DEFAULT_LOW,
    high: float = DEFAULT_HIGH,
    sigma: float = DEFAULT_SIGMA,
) -> EdgeMap:
    """Detect edges in a grayscale image; see the module docstring for stages."""
    if not (0.0 <= low <= high <= 255.0):
        raise InvalidThresholdError(f"need 0 <= low <= high <= 255, got low={low}, high={high}")
    if sigma < 0.0:
        raise InvalidThresholdError(f"sigma must be >= 0, got {sigma}")
    pixels = img.pixels
    if pixels.shape[0] < 3 or pixels.shape[1] < 3:
        raise InvalidThresholdError(f"image too small for edge detection: {pixels.shape}")

    blurred = _blur(pixels, sigma)
    gx, gy, mag = _sobel(blurred)
    nms = _suppress(gx, gy, mag)
    edges = _hysteresis(nms, low, high)
    return EdgeMap(np.where(edges, 255, 0).astype(np.uint8))
