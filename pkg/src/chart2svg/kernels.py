"""Hot pixel kernels with two interchangeable backends.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
fallback. The active backend is chosen at import time from the
``CHART2SVG_KERNELS`` environment variable (``numba`` or ``numpy``,
default: numba when importable) and can be switched at runtime with
:func:`set_backend`. Both backends compute identical float64 expressions
so their outputs are bit-for-bit equal; ``tests/test_kernels.py`` asserts
this and ``benchmarks/bench_kernels.py`` compares their speed.

All kernels are pure functions over their array arguments.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


_VALID_BACKENDS = ("numba", "numpy")
_backend = os.environ.get("CHART2SVG_KERNELS", "").strip().lower()
if _backend not in _VALID_BACKENDS:
    _backend = "numba" if HAVE_NUMBA else "numpy"
if _backend == "numba" and not HAVE_NUMBA:
    _backend = "numpy"


def get_backend() -> str:
    """Name of the active kernel backend ("numba" or "numpy")."""
    return _backend


def set_backend(name: str) -> None:
    """Switch kernel backend at runtime (tests and benchmarks)."""
    global _backend
    if name not in _VALID_BACKENDS:
        raise ValueError(f"unknown backend {name!r}, expected one of {_VALID_BACKENDS}")
    if name == "numba" and not HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    _backend = name


# ---------------------------------------------------------------------------
# RGB -> HSV (hexcone model, H in degrees [0, 360), S/V in [0, 1])


def _rgb_to_hsv_numpy(rgb: np.ndarray) -> np.ndarray:
    f = rgb.astype(np.float64) / 255.0
    r, g, b = f[..., 0], f[..., 1], f[..., 2]
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    delta = mx - mn
    chromatic = delta > 0.0
    safe = np.where(chromatic, delta, 1.0)
    h = np.zeros_like(mx)
    is_r = chromatic & (mx == r)
    is_g = chromatic & ~is_r & (mx == g)
    is_b = chromatic & ~is_r & ~is_g
    h = np.where(is_r, (60.0 * (g - b) / safe) % 360.0, h)
    h = np.where(is_g, 60.0 * (b - r) / safe + 120.0, h)
    h = np.where(is_b, 60.0 * (r - g) / safe + 240.0, h)
    s = np.where(mx > 0.0, delta / np.where(mx > 0.0, mx, 1.0), 0.0)
    return np.stack([h, s, mx], axis=-1)


@njit(cache=True)
def _rgb_to_hsv_numba(rgb):  # pragma: no cover - exercised via dispatch
    height, width = rgb.shape[0], rgb.shape[1]
    out = np.zeros((height, width, 3), dtype=np.float64)
    for y in range(height):
        for x in range(width):
            r = rgb[y, x, 0] / 255.0
            g = rgb[y, x, 1] / 255.0
            b = rgb[y, x, 2] / 255.0
            mx = max(r, max(g, b))
            mn = min(r, min(g, b))
            delta = mx - mn
            h = 0.0
            if delta > 0.0:
                if mx == r:
                    h = (60.0 * (g - b) / delta) % 360.0
                elif mx == g:
                    h = 60.0 * (b - r) / delta + 120.0
                else:
                    h = 60.0 * (r - g) / delta + 240.0
            s = delta / mx if mx > 0.0 else 0.0
            out[y, x, 0] = h
            out[y, x, 1] = s
            out[y, x, 2] = mx
    return out


def rgb_to_hsv_image(rgb: np.ndarray) -> np.ndarray:
    """(H, W, 3) uint8 RGB → (H, W, 3) float64 HSV."""
    if _backend == "numba":
        return _rgb_to_hsv_numba(np.ascontiguousarray(rgb))
    return _rgb_to_hsv_numpy(rgb)


# ---------------------------------------------------------------------------
# inRange mask over an HSV box, hue interval may wrap


def _in_range_numpy(hsv, h_lo, h_hi, s_lo, s_hi, v_lo, v_hi):
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    if h_lo <= h_hi:
        h_ok = (h >= h_lo) & (h <= h_hi)
    else:
        h_ok = (h >= h_lo) | (h <= h_hi)
    return h_ok & (s >= s_lo) & (s <= s_hi) & (v >= v_lo) & (v <= v_hi)


@njit(cache=True)
def _in_range_numba(hsv, h_lo, h_hi, s_lo, s_hi, v_lo, v_hi):  # pragma: no cover
    height, width = hsv.shape[0], hsv.shape[1]
    out = np.zeros((height, width), dtype=np.bool_)
    wrap = h_lo > h_hi
    for y in range(height):
        for x in range(width):
            h = hsv[y, x, 0]
            if wrap:
                h_ok = h >= h_lo or h <= h_hi
            else:
                h_ok = h_lo <= h <= h_hi
            if (
                h_ok
                and s_lo <= hsv[y, x, 1] <= s_hi
                and v_lo <= hsv[y, x, 2] <= v_hi
            ):
                out[y, x] = True
    return out


def hsv_in_range(hsv, h_lo, h_hi, s_lo, s_hi, v_lo, v_hi) -> np.ndarray:
    if _backend == "numba":
        return _in_range_numba(
            np.ascontiguousarray(hsv),
            float(h_lo), float(h_hi), float(s_lo), float(s_hi), float(v_lo), float(v_hi),
        )
    return _in_range_numpy(hsv, h_lo, h_hi, s_lo, s_hi, v_lo, v_hi)


# ---------------------------------------------------------------------------
# Binary morphology, square structuring element of side 2r+1, border=background


def _dilate_numpy(mask: np.ndarray, r: int) -> np.ndarray:
    padded = np.zeros((mask.shape[0] + 2 * r, mask.shape[1] + 2 * r), dtype=bool)
    padded[r:-r, r:-r] = mask
    out = np.zeros_like(mask)
    h, w = mask.shape
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            out |= padded[dy : dy + h, dx : dx + w]
    return out


def _erode_numpy(mask: np.ndarray, r: int) -> np.ndarray:
    padded = np.zeros((mask.shape[0] + 2 * r, mask.shape[1] + 2 * r), dtype=bool)
    padded[r:-r, r:-r] = mask
    out = np.ones_like(mask)
    h, w = mask.shape
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            out &= padded[dy : dy + h, dx : dx + w]
    return out


@njit(cache=True)
def _dilate_numba(mask, r):  # pragma: no cover
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            hit = False
            for yy in range(max(0, y - r), min(h, y + r + 1)):
                for xx in range(max(0, x - r), min(w, x + r + 1)):
                    if mask[yy, xx]:
                        hit = True
                        break
                if hit:
                    break
            out[y, x] = hit
    return out


@njit(cache=True)
def _erode_numba(mask, r):  # pragma: no cover
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            if y - r < 0 or y + r >= h or x - r < 0 or x + r >= w:
                continue  # border counts as background
            keep = True
            for yy in range(y - r, y + r + 1):
                for xx in range(x - r, x + r + 1):
                    if not mask[yy, xx]:
                        keep = False
                        break
                if not keep:
                    break
            out[y, x] = keep
    return out


def dilate(mask: np.ndarray, r: int) -> np.ndarray:
    if _backend == "numba":
        return _dilate_numba(np.ascontiguousarray(mask), r)
    return _dilate_numpy(mask, r)


def erode(mask: np.ndarray, r: int) -> np.ndarray:
    if _backend == "numba":
        return _erode_numba(np.ascontiguousarray(mask), r)
    return _erode_numpy(mask, r)


# ---------------------------------------------------------------------------
# Separable Gaussian blur, kernel truncated at 3 sigma, edges clamped


def _gaussian_weights(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    offs = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(offs * offs) / (2.0 * sigma * sigma))
    return w / w.sum()


def _blur_numpy(img: np.ndarray, sigma: float) -> np.ndarray:
    weights = _gaussian_weights(sigma)
    radius = len(weights) // 2
    h, w = img.shape[0], img.shape[1]
    work = img.astype(np.float64)
    rows = np.arange(h)
    cols = np.arange(w)
    horizontal = np.zeros_like(work)
    for i, wt in enumerate(weights):
        idx = np.clip(cols + (i - radius), 0, w - 1)
        horizontal += wt * work[:, idx, :]
    vertical = np.zeros_like(work)
    for i, wt in enumerate(weights):
        idx = np.clip(rows + (i - radius), 0, h - 1)
        vertical += wt * horizontal[idx, :, :]
    return np.floor(vertical + 0.5).astype(np.uint8)


@njit(cache=True)
def _blur_numba(img, weights):  # pragma: no cover
    h, w, c = img.shape
    radius = weights.shape[0] // 2
    horizontal = np.zeros((h, w, c), dtype=np.float64)
    for i in range(weights.shape[0]):
        wt = weights[i]
        off = i - radius
        for y in range(h):
            for x in range(w):
                xx = min(max(x + off, 0), w - 1)
                for ch in range(c):
                    horizontal[y, x, ch] += wt * img[y, xx, ch]
    out = np.zeros((h, w, c), dtype=np.uint8)
    vertical = np.zeros((h, w, c), dtype=np.float64)
    for i in range(weights.shape[0]):
        wt = weights[i]
        off = i - radius
        for y in range(h):
            yy = min(max(y + off, 0), h - 1)
            for x in range(w):
                for ch in range(c):
                    vertical[y, x, ch] += wt * horizontal[yy, x, ch]
    for y in range(h):
        for x in range(w):
            for ch in range(c):
                out[y, x, ch] = np.uint8(math.floor(vertical[y, x, ch] + 0.5))
    return out


def blur_rgb(img: np.ndarray, sigma: float) -> np.ndarray:
    if _backend == "numba":
        return _blur_numba(np.ascontiguousarray(img), _gaussian_weights(sigma))
    return _blur_numpy(img, sigma)


# ---------------------------------------------------------------------------
# Connected-component labeling, 8-connectivity
#
# Returns (labels, count): labels[y, x] in [0, count) on set pixels, -1 off.
# Label ids follow first-encounter (row-major) order of component roots.


@njit(cache=True)
def _label_numba(mask):  # pragma: no cover
    h, w = mask.shape
    n = h * w
    parent = np.arange(n, dtype=np.int64)

    def find(parent, i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            nxt = parent[i]
            parent[i] = root
            i = nxt
        return root

    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            i = y * w + x
            if x > 0 and mask[y, x - 1]:
                a, b = find(parent, i), find(parent, y * w + x - 1)
                if a != b:
                    parent[max(a, b)] = min(a, b)
            if y > 0:
                for dx in range(-1, 2):
                    xx = x + dx
                    if 0 <= xx < w and mask[y - 1, xx]:
                        a, b = find(parent, i), find(parent, (y - 1) * w + xx)
                        if a != b:
                            parent[max(a, b)] = min(a, b)
    labels = np.full((h, w), -1, dtype=np.int32)
    remap = np.full(n, -1, dtype=np.int32)
    count = 0
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            root = find(parent, y * w + x)
            if remap[root] < 0:
                remap[root] = count
                count += 1
            labels[y, x] = remap[root]
    return labels, count


def _label_numpy(mask: np.ndarray):
    h, w = mask.shape
    n = h * w
    idx = np.arange(n, dtype=np.int64).reshape(h, w)
    pairs = []
    # rightward, downward, and the two diagonal neighbor directions cover
    # every 8-connected adjacency once
    if w > 1:
        m = mask[:, :-1] & mask[:, 1:]
        pairs.append((idx[:, :-1][m], idx[:, 1:][m]))
    if h > 1:
        m = mask[:-1, :] & mask[1:, :]
        pairs.append((idx[:-1, :][m], idx[1:, :][m]))
    if h > 1 and w > 1:
        m = mask[:-1, :-1] & mask[1:, 1:]
        pairs.append((idx[:-1, :-1][m], idx[1:, 1:][m]))
        m = mask[:-1, 1:] & mask[1:, :-1]
        pairs.append((idx[:-1, 1:][m], idx[1:, :-1][m]))
    parent = np.arange(n, dtype=np.int64)

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for aa, bb in pairs:
        for a, b in zip(aa.tolist(), bb.tolist()):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    labels = np.full((h, w), -1, dtype=np.int32)
    remap: dict[int, int] = {}
    ys, xs = np.nonzero(mask)
    flat = []
    for y, x in zip(ys.tolist(), xs.tolist()):
        root = find(y * w + x)
        lab = remap.get(root)
        if lab is None:
            lab = len(remap)
            remap[root] = lab
        flat.append(lab)
    labels[ys, xs] = flat
    return labels, len(remap)


def label_components(mask: np.ndarray):
    if _backend == "numba":
        return _label_numba(np.ascontiguousarray(mask))
    return _label_numpy(mask)


# ---------------------------------------------------------------------------
# Bilinear resampling, pixel-center aligned sample grid


def _resample_numpy(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = img.shape[0], img.shape[1]
    u = np.clip((np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    v = np.clip((np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (u - x0)[None, :, None]
    fy = (v - y0)[:, None, None]
    f = img.astype(np.float64)
    top = (1.0 - fx) * f[y0[:, None], x0[None, :], :] + fx * f[y0[:, None], x1[None, :], :]
    bot = (1.0 - fx) * f[y1[:, None], x0[None, :], :] + fx * f[y1[:, None], x1[None, :], :]
    return np.floor((1.0 - fy) * top + fy * bot + 0.5).astype(np.uint8)


@njit(cache=True)
def _resample_numba(img, out_h, out_w):  # pragma: no cover
    h, w, c = img.shape
    out = np.zeros((out_h, out_w, c), dtype=np.uint8)
    for oy in range(out_h):
        v = (oy + 0.5) * (h / out_h) - 0.5
        if v < 0.0:
            v = 0.0
        if v > h - 1.0:
            v = h - 1.0
        y0 = int(math.floor(v))
        y1 = min(y0 + 1, h - 1)
        fy = v - y0
        for ox in range(out_w):
            u = (ox + 0.5) * (w / out_w) - 0.5
            if u < 0.0:
                u = 0.0
            if u > w - 1.0:
                u = w - 1.0
            x0 = int(math.floor(u))
            x1 = min(x0 + 1, w - 1)
            fx = u - x0
            for ch in range(c):
                top = (1.0 - fx) * img[y0, x0, ch] + fx * img[y0, x1, ch]
                bot = (1.0 - fx) * img[y1, x0, ch] + fx * img[y1, x1, ch]
                out[oy, ox, ch] = np.uint8(math.floor((1.0 - fy) * top + fy * bot + 0.5))
    return out


def resample_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    if _backend == "numba":
        return _resample_numba(np.ascontiguousarray(img), out_h, out_w)
    return _resample_numpy(img, out_h, out_w)


# ---------------------------------------------------------------------------
# Exact template matching at explicit positions (glyph recognition)


def _match_numpy(img2d, tmpl, xs, ys, tol):
    th, tw = tmpl.shape
    n = len(xs)
    hits = np.zeros(n, dtype=bool)
    if n == 0:
        return hits
    dy = np.arange(th)
    dx = np.arange(tw)
    windows = img2d[
        ys[:, None, None] + dy[None, :, None], xs[:, None, None] + dx[None, None, :]
    ].astype(np.int16)
    diff = np.abs(windows - tmpl[None, :, :].astype(np.int16))
    return (diff <= tol).all(axis=(1, 2))


@njit(cache=True)
def _match_numba(img2d, tmpl, xs, ys, tol):  # pragma: no cover
    th, tw = tmpl.shape
    n = xs.shape[0]
    hits = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        x0 = xs[i]
        y0 = ys[i]
        ok = True
        for ty in range(th):
            for tx in range(tw):
                d = np.int16(img2d[y0 + ty, x0 + tx]) - np.int16(tmpl[ty, tx])
                if d > tol or d < -tol:
                    ok = False
                    break
            if not ok:
                break
        hits[i] = ok
    return hits


def match_template_at(
    img2d: np.ndarray, tmpl: np.ndarray, xs: np.ndarray, ys: np.ndarray, tol: int = 0
) -> np.ndarray:
    """Per-pixel |img - tmpl| <= tol over windows anchored at (xs, ys);
    tol=0 is exact equality. Positions must keep the window inside the
    image; callers filter first."""
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    ys = np.ascontiguousarray(ys, dtype=np.int64)
    if _backend == "numba":
        return _match_numba(
            np.ascontiguousarray(img2d), np.ascontiguousarray(tmpl), xs, ys, tol
        )
    return _match_numpy(img2d, tmpl, xs, ys, tol)


def warmup() -> None:
    """Force numba compilation of every kernel (no-op on the numpy backend)."""
    if _backend != "numba":
        return
    img = np.zeros((8, 8, 3), dtype=np.uint8)
    img[2:5, 2:5] = 200
    hsv = rgb_to_hsv_image(img)
    mask = hsv_in_range(hsv, 350.0, 10.0, 0.1, 1.0, 0.1, 1.0)
    dilate(mask, 1)
    erode(mask, 1)
    blur_rgb(img, 0.8)
    label_components(mask)
    resample_bilinear(img, 12, 12)
    match_template_at(
        img[..., 0], np.zeros((2, 2), dtype=np.uint8), np.array([0]), np.array([0])
    )
