"""Pixel-level primitives: color conversion, masking, morphology, blur,
connected components, and bilinear resampling.

Images are RGB with the origin at the top-left; hue is measured in degrees
on [0, 360). Heavy loops live in :mod:`chart2svg.kernels`.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import kernels

RGB = tuple[int, int, int]


@dataclass(frozen=True)
class RasterImage:
    """Owned RGB pixel grid, shape (height, width, 3) uint8."""

    px: np.ndarray

    def __post_init__(self):
        if self.px.ndim != 3 or self.px.shape[2] != 3 or self.px.dtype != np.uint8:
            raise ValueError("RasterImage needs an (H, W, 3) uint8 array")
        if self.px.shape[0] < 1 or self.px.shape[1] < 1:
            raise ValueError("RasterImage needs width, height >= 1")
        self.px.setflags(write=False)

    @property
    def width(self) -> int:
        return self.px.shape[1]

    @property
    def height(self) -> int:
        return self.px.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, color: RGB) -> "RasterImage":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:, :] = color
        return cls(px)

    @classmethod
    def load_png(cls, path) -> "RasterImage":
        with Image.open(path) as im:
            return cls.from_pil(im)

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "RasterImage":
        with Image.open(io.BytesIO(data)) as im:
            return cls.from_pil(im)

    @classmethod
    def from_pil(cls, im: Image.Image) -> "RasterImage":
        if im.mode in ("RGBA", "LA", "PA"):
            rgba = im.convert("RGBA")
            base = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
            im = Image.alpha_composite(base, rgba)
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        return cls(arr.copy())

    def to_pil(self) -> Image.Image:
        return Image.fromarray(self.px, mode="RGB")

    def save_png(self, path) -> None:
        self.to_pil().save(path, format="PNG")

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.to_pil().save(buf, format="PNG")
        return buf.getvalue()

    def same_pixels(self, other: "RasterImage") -> bool:
        return self.px.shape == other.px.shape and np.array_equal(self.px, other.px)


@dataclass(frozen=True)
class HsvRange:
    """Inclusive HSV box; a hue interval with h_min > h_max wraps through 0."""

    h_min: float
    h_max: float
    s_min: float
    s_max: float
    v_min: float
    v_max: float

    def __post_init__(self):
        if not (0.0 <= self.h_min < 360.0 and 0.0 <= self.h_max < 360.0):
            raise ValueError("hue bounds must lie in [0, 360)")
        if self.s_min > self.s_max or self.v_min > self.v_max:
            raise ValueError("s_min <= s_max and v_min <= v_max required")


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel boolean grid with the source image's dimensions."""

    bits: np.ndarray

    def __post_init__(self):
        if self.bits.ndim != 2 or self.bits.dtype != np.bool_:
            raise ValueError("BinaryMask needs an (H, W) bool array")
        self.bits.setflags(write=False)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class Component:
    """One 8-connected region: tight bbox (x, y, w, h), pixel area, centroid."""

    bbox: tuple[int, int, int, int]
    area_px: int
    centroid: tuple[float, float]
    label: int = field(default=-1, compare=False)


def rgb_to_hsv(pixel: RGB) -> tuple[float, float, float]:
    """Single-pixel hexcone HSV; H=0 for achromatic pixels."""
    arr = np.array([[pixel]], dtype=np.uint8)
    h, s, v = kernels.rgb_to_hsv_image(arr)[0, 0]
    return float(h), float(s), float(v)


def hsv_image(image: RasterImage) -> np.ndarray:
    return kernels.rgb_to_hsv_image(image.px)


def in_range(image: RasterImage, rng: HsvRange) -> BinaryMask:
    """Bit set iff the pixel's HSV lies in the (possibly hue-wrapped) box."""
    hsv = kernels.rgb_to_hsv_image(image.px)
    bits = kernels.hsv_in_range(
        hsv, rng.h_min, rng.h_max, rng.s_min, rng.s_max, rng.v_min, rng.v_max
    )
    return BinaryMask(bits)


def in_range_hsv(hsv: np.ndarray, rng: HsvRange) -> BinaryMask:
    """Same as :func:`in_range` for a precomputed HSV array."""
    bits = kernels.hsv_in_range(
        hsv, rng.h_min, rng.h_max, rng.s_min, rng.s_max, rng.v_min, rng.v_max
    )
    return BinaryMask(bits)


def morph_open(mask: BinaryMask, kernel_radius: int) -> BinaryMask:
    """Erosion then dilation with a square element of side 2r+1."""
    if kernel_radius < 1:
        raise ValueError("kernel_radius must be >= 1")
    return BinaryMask(kernels.dilate(kernels.erode(mask.bits, kernel_radius), kernel_radius))


def morph_close(mask: BinaryMask, kernel_radius: int) -> BinaryMask:
    """Dilation then erosion with a square element of side 2r+1."""
    if kernel_radius < 1:
        raise ValueError("kernel_radius must be >= 1")
    return BinaryMask(kernels.erode(kernels.dilate(mask.bits, kernel_radius), kernel_radius))


def gaussian_blur(image: RasterImage, sigma: float) -> RasterImage:
    """Separable Gaussian truncated at 3σ, channel-wise, edge-clamped."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    return RasterImage(kernels.blur_rgb(image.px, float(sigma)))


def connected_components(mask: BinaryMask) -> list[Component]:
    """8-connected components sorted by bbox left edge then top edge."""
    labels, count = kernels.label_components(mask.bits)
    if count == 0:
        return []
    ys, xs = np.nonzero(mask.bits)
    labs = labels[ys, xs]
    order = np.argsort(labs, kind="stable")
    ys, xs, labs = ys[order], xs[order], labs[order]
    starts = np.searchsorted(labs, np.arange(count))
    ends = np.append(starts[1:], len(labs))
    comps = []
    for lab in range(count):
        sl = slice(starts[lab], ends[lab])
        cy, cx = ys[sl], xs[sl]
        x0, x1 = int(cx.min()), int(cx.max())
        y0, y1 = int(cy.min()), int(cy.max())
        area = int(ends[lab] - starts[lab])
        comps.append(
            Component(
                bbox=(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
                area_px=area,
                centroid=(float(cx.mean()), float(cy.mean())),
                label=lab,
            )
        )
    comps.sort(key=lambda c: (c.bbox[0], c.bbox[1]))
    return comps


def resample(image: RasterImage, sx: float, sy: float) -> RasterImage:
    """Bilinear resampling to round(w*sx) x round(h*sy)."""
    if sx <= 0 or sy <= 0:
        raise ValueError("scale factors must be > 0")
    out_w = max(1, int(round(image.width * sx)))
    out_h = max(1, int(round(image.height * sy)))
    if out_w == image.width and out_h == image.height:
        return RasterImage(image.px.copy())
    return RasterImage(kernels.resample_bilinear(image.px, out_h, out_w))


def color_distance(a: RGB, b: RGB) -> float:
    """Euclidean distance in RGB space."""
    return float(
        np.sqrt(
            (float(a[0]) - b[0]) ** 2 + (float(a[1]) - b[1]) ** 2 + (float(a[2]) - b[2]) ** 2
        )
    )
