"""Classical image-processing primitives for the sheet-image pipeline.

Images are float32 arrays in [0, 1] with 0 = black ink and 1 = white paper.
Erosion takes the whitest pixel in the neighborhood (removes dark structure
thinner than the element); dilation takes the blackest.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage

from .errors import InvalidArgumentError

LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def to_grayscale(rgb) -> np.ndarray:
    rgb = np.asarray(rgb)
    if rgb.size == 0:
        raise InvalidArgumentError("empty image")
    if rgb.ndim == 2:
        return (rgb.astype(np.float32) / 255.0).clip(0, 1)
    if rgb.ndim != 3 or rgb.shape[2] < 3:
        raise InvalidArgumentError(f"expected HxWx3 RGB image, got shape {rgb.shape}")
    gray = rgb[..., :3].astype(np.float32) @ LUMA
    gray /= 255.0
    return np.clip(gray, 0.0, 1.0, out=gray)


def blur(img: np.ndarray, radius: int) -> np.ndarray:
    """Box blur with a (2r+1)^2 window, replicating edge pixels."""
    if radius < 1:
        raise InvalidArgumentError("blur radius must be >= 1")
    out = ndimage.uniform_filter(np.asarray(img, dtype=np.float32), size=2 * radius + 1, mode="nearest")
    return np.clip(out, 0.0, 1.0, out=out)


@dataclass(frozen=True)
class Element:
    """Structuring element: 'disk' (diameter), 'horizontal' (length) or 'vertical' (height)."""

    kind: str
    size: int

    def __post_init__(self):
        if self.kind not in ("disk", "horizontal", "vertical"):
            raise InvalidArgumentError(f"unknown element kind {self.kind!r}")
        if self.size < 1:
            raise InvalidArgumentError("element size must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        if self.kind == "disk":
            return self.size, self.size
        if self.kind == "horizontal":
            return 1, self.size
        return self.size, 1

    def footprint(self) -> np.ndarray:
        if self.kind != "disk":
            return np.ones(self.shape, dtype=bool)
        c = (self.size - 1) / 2
        yy, xx = np.mgrid[:self.size, :self.size]
        return (yy - c) ** 2 + (xx - c) ** 2 <= (self.size / 2) ** 2


def disk(diameter: int) -> Element:
    return Element("disk", diameter)


def horizontal(length: int) -> Element:
    return Element("horizontal", length)


def vertical(height: int) -> Element:
    return Element("vertical", height)


def _check(img: np.ndarray, element: Element):
    h, w = element.shape
    if h > img.shape[0] or w > img.shape[1]:
        raise InvalidArgumentError(f"element {element} larger than image {img.shape}")


def _rank_filter(img, element: Element, fn1d, fn2d):
    img = np.asarray(img, dtype=np.float32)
    _check(img, element)
    if element.kind == "horizontal":
        return fn1d(img, element.size, axis=1, mode="nearest")
    if element.kind == "vertical":
        return fn1d(img, element.size, axis=0, mode="nearest")
    return fn2d(img, footprint=element.footprint(), mode="nearest")


def erode(img: np.ndarray, element: Element) -> np.ndarray:
    return _rank_filter(img, element, ndimage.maximum_filter1d, ndimage.maximum_filter)


def dilate(img: np.ndarray, element: Element) -> np.ndarray:
    return _rank_filter(img, element, ndimage.minimum_filter1d, ndimage.minimum_filter)


def open_dark(img: np.ndarray, element: Element) -> np.ndarray:
    """Erode then dilate: keeps dark regions that contain the element."""
    return dilate(erode(img, element), element)


def quantize(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255), 0, 255).astype(np.int64)


def otsu_from_histogram(hist: np.ndarray) -> int:
    """Bin index t maximizing between-class variance of bins [0, t) vs [t, 256).

    Returns the lowest maximizing t; 0 when no split separates two nonempty classes.
    """
    hist = np.asarray(hist, dtype=np.float64)
    bins = np.arange(len(hist), dtype=np.float64)
    w0 = np.cumsum(hist)[:-1]
    s0 = np.cumsum(hist * bins)[:-1]
    total, total_s = hist.sum(), (hist * bins).sum()
    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    if not valid.any():
        return 0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = s0 / w0
        mu1 = (total_s - s0) / w1
        var = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, -1.0)
    best = var.max()
    return int(np.flatnonzero(var >= best * (1 - 1e-12))[0]) + 1


def otsu_threshold(img: np.ndarray) -> tuple[float, np.ndarray]:
    """Otsu threshold on a 256-bin histogram; foreground (1) is ink darker than the threshold."""
    img = np.asarray(img)
    if img.size == 0:
        raise InvalidArgumentError("empty image")
    q = quantize(img)
    hist = np.bincount(q.ravel(), minlength=256)
    t = otsu_from_histogram(hist)
    if t == 0:
        # constant image: put the threshold just under its single level
        t = int(q.flat[0])
    threshold = (t - 0.5) / 255.0
    return threshold, (q < t).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class ConnectedComponent:
    bbox: tuple[int, int, int, int]  # rowMin, colMin, rowMax, colMax (inclusive)
    area: int
    _labels: np.ndarray = field(repr=False)
    _label: int = field(repr=False)

    @property
    def height(self) -> int:
        return self.bbox[2] - self.bbox[0] + 1

    @property
    def width(self) -> int:
        return self.bbox[3] - self.bbox[1] + 1

    @property
    def fill_ratio(self) -> float:
        return self.area / (self.height * self.width)

    @cached_property
    def pixels(self) -> np.ndarray:
        """(area, 2) array of (row, col) coordinates."""
        r0, c0, r1, c1 = self.bbox
        rr, cc = np.nonzero(self._labels[r0:r1 + 1, c0:c1 + 1] == self._label)
        return np.column_stack([rr + r0, cc + c0])


_EIGHT = np.ones((3, 3), dtype=bool)


def connected_components(binary: np.ndarray) -> list[ConnectedComponent]:
    """8-connected foreground components ordered by (rowMin, colMin)."""
    labels, n = ndimage.label(np.asarray(binary) != 0, structure=_EIGHT)
    if n == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    comps = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        bbox = (sl[0].start, sl[1].start, sl[0].stop - 1, sl[1].stop - 1)
        comps.append(ConnectedComponent(bbox, int(areas[i]), labels, i))
    comps.sort(key=lambda c: (c.bbox[0], c.bbox[1]))
    return comps


def detect_blobs(img: np.ndarray, min_area: float, max_area: float, min_fill: float = 0.55,
                 aspect_range: tuple[float, float] = (0.5, 2.0)) -> list[tuple[float, float]]:
    """Centers (row, col) of compact dark blobs with area in [min_area, max_area]."""
    if not 0 < min_area < max_area:
        raise InvalidArgumentError("need 0 < min_area < max_area")
    _, binary = otsu_threshold(img)
    centers = []
    for comp in connected_components(binary):
        if not min_area <= comp.area <= max_area:
            continue
        aspect = comp.height / comp.width
        if comp.fill_ratio < min_fill or not aspect_range[0] <= aspect <= aspect_range[1]:
            continue
        r0, c0, r1, c1 = comp.bbox
        centers.append(((r0 + r1) / 2, (c0 + c1) / 2))
    return centers


def kmeans(points, k: int, max_iter: int = 100, history: list | None = None, init=None):
    """Lloyd's k-means with deterministic quantile seeding (or explicit ``init`` centroids).

    Returns (centroids, assignments). Centroids come back sorted ascending
    (1-D) or by row (2-D), and assignments are relabeled to match. If
    ``history`` is a list, the objective after every step is appended to it.
    """
    pts = np.asarray(points, dtype=np.float64)
    one_d = pts.ndim == 1
    if one_d:
        pts = pts[:, None]
    n = len(pts)
    if k < 1 or k > n:
        raise InvalidArgumentError(f"k={k} must be in [1, {n}]")

    if init is not None:
        centroids = np.asarray(init, dtype=np.float64).reshape(k, -1).copy()
    else:
        order = np.lexsort(pts.T[::-1])
        seeds = order[((np.arange(k) + 0.5) * n / k).astype(int)]
        centroids = pts[seeds].copy()
    assign = None
    for _ in range(max_iter):
        d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        if history is not None:
            history.append(float(d2[np.arange(n), new_assign].sum()))
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        counts = np.bincount(assign, minlength=k)
        fit = d2[np.arange(n), assign]
        for j in np.flatnonzero(counts == 0):
            # reseed an empty cluster at the worst-fit point of a shared cluster
            movable = counts[assign] > 1
            far = int(np.flatnonzero(movable)[fit[movable].argmax()])
            counts[assign[far]] -= 1
            assign[far] = j
            counts[j] = 1
            fit[far] = 0.0
        for j in range(k):
            centroids[j] = pts[assign == j].mean(axis=0)
        if history is not None:
            history.append(float(((pts - centroids[assign]) ** 2).sum()))

    rank = np.lexsort(centroids.T[::-1])
    relabel = np.empty(k, dtype=int)
    relabel[rank] = np.arange(k)
    centroids = centroids[rank]
    assign = relabel[assign]
    return (centroids[:, 0] if one_d else centroids), assign
