"""Degradation and accuracy metrics.

KID is the unbiased squared maximum mean discrepancy between two feature
sets under the cubic polynomial kernel k(a, b) = (a.b/d + 1)^3, computed
as a single full-set estimate by default so results are deterministic.
Segmentation quality is the usual confusion-matrix trio aAcc/mAcc/mIoU.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .image import ImageBuffer


class MetricsError(ValueError):
    """Dimension mismatches, undersized sets, or degenerate inputs."""


# ---------------------------------------------------------------------------
# feature sets and KID


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """A stack of equal-dimension feature vectors with a provenance tag."""

    vectors: np.ndarray
    source_tag: str = ""

    def __post_init__(self):
        arr = np.asarray(self.vectors, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 1:
            raise MetricsError(f"need a (m>=2, d>=1) matrix of vectors, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise MetricsError("feature vectors must be finite")
        object.__setattr__(self, "vectors", arr)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, FeatureSet):
        return x.vectors
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise MetricsError(f"expected a 2-D feature matrix, got shape {arr.shape}")
    return arr


def _poly_kernel(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a.shape[1]
    return (a @ b.T / d + 1.0) ** 3


def mmd2_unbiased(x, y) -> float:
    """Unbiased squared MMD estimate; may be negative by construction."""
    xm, ym = _as_matrix(x), _as_matrix(y)
    if xm.shape[1] != ym.shape[1]:
        raise MetricsError(f"dimension mismatch: {xm.shape[1]} vs {ym.shape[1]}")
    m, n = xm.shape[0], ym.shape[0]
    if m < 2 or n < 2:
        raise MetricsError("unbiased MMD needs at least 2 vectors per set")
    kxx = _poly_kernel(xm, xm)
    kyy = _poly_kernel(ym, ym)
    kxy = _poly_kernel(xm, ym)
    sum_xx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    sum_yy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    return float(sum_xx + sum_yy - 2.0 * kxy.mean())


def kid(perturbed, clean, n_subsets: int | None = None, subset_size: int | None = None,
        seed: int = 0) -> float:
    """KID between a perturbed and a clean feature set.

    By default this is one full-set unbiased MMD^2 estimate. Passing
    n_subsets averages the estimator over that many seeded random
    subsamples of subset_size, which is how large validation sets can be
    thinned without biasing the value.
    """
    if n_subsets is None:
        return mmd2_unbiased(perturbed, clean)
    pm, cm = _as_matrix(perturbed), _as_matrix(clean)
    if subset_size is None or subset_size < 2:
        raise MetricsError("subset_size must be >= 2 when n_subsets is given")
    if subset_size > min(pm.shape[0], cm.shape[0]):
        raise MetricsError("subset_size exceeds the smaller feature set")
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    total = 0.0
    for _ in range(int(n_subsets)):
        pi = gen.choice(pm.shape[0], size=subset_size, replace=False)
        ci = gen.choice(cm.shape[0], size=subset_size, replace=False)
        total += mmd2_unbiased(pm[pi], cm[ci])
    return total / int(n_subsets)


def delta_ma(ma_prev: float, ma_i: float) -> float:
    """Accuracy increment MA(alpha_{i-1}) - MA(alpha_i); may be negative."""
    for v in (ma_prev, ma_i):
        if not 0.0 <= float(v) <= 1.0:
            raise MetricsError(f"accuracy values must lie in [0, 1], got {v}")
    return float(ma_prev) - float(ma_i)


def delta_kid_normalized(kid_at_alpha_i: float, kid_at_alpha_prev: float,
                         kid_at_alpha_max: float) -> float:
    """KID increment normalized by the full-range KID."""
    if not kid_at_alpha_max > 0.0:
        raise MetricsError(
            "non-positive normalizer: augmentation produces no measurable degradation"
        )
    return (float(kid_at_alpha_i) - float(kid_at_alpha_prev)) / float(kid_at_alpha_max)


# ---------------------------------------------------------------------------
# segmentation metrics


@dataclass(frozen=True, eq=False)
class SegSample:
    """One prediction/ground-truth raster pair."""

    prediction: np.ndarray
    ground_truth: np.ndarray
    num_classes: int
    ignore_label: int | None = None

    def __post_init__(self):
        pred = np.asarray(self.prediction)
        gt = np.asarray(self.ground_truth)
        if pred.shape != gt.shape:
            raise MetricsError(f"raster shape mismatch: {pred.shape} vs {gt.shape}")
        if self.num_classes < 1:
            raise MetricsError("num_classes must be positive")
        object.__setattr__(self, "prediction", pred)
        object.__setattr__(self, "ground_truth", gt)


def confusion_matrix(samples) -> np.ndarray:
    """Accumulated (num_classes x num_classes) matrix, rows = ground truth."""
    samples = list(samples)
    if not samples:
        raise MetricsError("no samples")
    ncls = samples[0].num_classes
    mat = np.zeros((ncls, ncls), dtype=np.int64)
    for s in samples:
        if s.num_classes != ncls:
            raise MetricsError("inconsistent num_classes across samples")
        gt = s.ground_truth.reshape(-1).astype(np.int64)
        pred = s.prediction.reshape(-1).astype(np.int64)
        if s.ignore_label is not None:
            keep = gt != s.ignore_label
            gt, pred = gt[keep], pred[keep]
        if gt.size == 0:
            continue
        if gt.min() < 0 or gt.max() >= ncls:
            raise MetricsError("ground-truth label outside [0, num_classes)")
        if pred.min() < 0 or pred.max() >= ncls:
            raise MetricsError("prediction label outside [0, num_classes) on a counted pixel")
        mat += np.bincount(ncls * gt + pred, minlength=ncls * ncls).reshape(ncls, ncls)
    return mat


def seg_metrics(samples) -> dict:
    """aAcc, mAcc and mIoU over the accumulated confusion matrix.

    Class means run over classes that appear in the ground truth; pixels
    labelled ignore_label never enter any count.
    """
    mat = confusion_matrix(samples)
    total = mat.sum()
    if total == 0:
        raise MetricsError("no countable pixels")
    diag = np.diag(mat).astype(np.float64)
    row = mat.sum(axis=1).astype(np.float64)
    col = mat.sum(axis=0).astype(np.float64)
    present = row > 0
    acc = diag[present] / row[present]
    union = row[present] + col[present] - diag[present]
    iou = diag[present] / union
    return {
        "aAcc": float(diag.sum() / total),
        "mAcc": float(acc.mean()),
        "mIoU": float(iou.mean()),
    }


def seg_metrics_json(metrics: dict) -> str:
    """Canonical 6-decimal JSON rendering of a metrics dict."""
    return "{" + ", ".join(f'"{k}": {metrics[k]:.6f}' for k in ("aAcc", "mAcc", "mIoU")) + "}"


# ---------------------------------------------------------------------------
# feature extraction


class RandomProjectionExtractor:
    """Deterministic stand-in for a pretrained feature network.

    Images are block-averaged onto a fixed grid, flattened, pushed through
    a seeded Gaussian projection, and rectified. No bias term, so the
    all-zero image maps to the zero vector.
    """

    def __init__(self, seed: int = 0, dim: int = 64, grid: int = 16):
        if dim < 1 or grid < 1:
            raise MetricsError("dim and grid must be positive")
        self.seed = int(seed)
        self.dim = int(dim)
        self.grid = int(grid)
        gen = np.random.Generator(np.random.Philox(key=self.seed))
        self.projection = gen.standard_normal((self.dim, self.grid * self.grid * 3))

    def extract(self, img: ImageBuffer, image_id: str | None = None) -> np.ndarray:
        pooled = block_average(img.data, self.grid)
        flat = pooled.reshape(-1) / 255.0
        return np.maximum(self.projection @ flat, 0.0)


class FileFeatureExtractor:
    """Feature lookup backed by a CSV written with write_features_csv."""

    def __init__(self, path):
        ids, matrix = read_features_csv(path)
        self._table = {i: matrix[n] for n, i in enumerate(ids)}
        self.dim = matrix.shape[1]

    def extract(self, img: ImageBuffer | None = None, image_id: str | None = None) -> np.ndarray:
        if image_id is None:
            raise MetricsError("file-backed extraction requires an image_id")
        try:
            return self._table[image_id]
        except KeyError:
            raise MetricsError(f"no features stored for image id {image_id!r}")


def feature_extract(img: ImageBuffer | None, extractor, image_id: str | None = None) -> np.ndarray:
    """Single deterministic feature vector for one image."""
    return extractor.extract(img, image_id=image_id)


def block_average(data: np.ndarray, grid: int) -> np.ndarray:
    """Average-pool an (h, w, c) array onto a (grid, grid, c) cell grid."""
    h, w = data.shape[:2]
    rows = np.minimum((np.arange(h) * grid) // h, grid - 1)
    cols = np.minimum((np.arange(w) * grid) // w, grid - 1)
    cell = (rows[:, None] * grid + cols[None, :]).reshape(-1)
    flat = data.reshape(h * w, -1).astype(np.float64)
    sums = np.zeros((grid * grid, flat.shape[1]))
    np.add.at(sums, cell, flat)
    counts = np.bincount(cell, minlength=grid * grid).astype(np.float64)
    return (sums / counts[:, None]).reshape(grid, grid, -1)


def write_features_csv(path, ids, vectors) -> None:
    """CSV layout: header 'id,f0..f{d-1}', then one row per vector."""
    matrix = np.asarray(vectors, dtype=np.float64)
    ids = list(ids)
    if matrix.ndim != 2 or len(ids) != matrix.shape[0]:
        raise MetricsError("ids and vectors must align")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"f{i}" for i in range(matrix.shape[1])])
        for image_id, row in zip(ids, matrix):
            writer.writerow([image_id] + [repr(float(v)) for v in row])


def read_features_csv(path) -> tuple:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MetricsError(f"empty feature file {path}")
        if not header or header[0] != "id" or len(header) < 2:
            raise MetricsError(f"bad feature header in {path}: {header[:4]}...")
        dim = len(header) - 1
        ids, rows = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise MetricsError(f"{path}:{line_no}: expected {dim + 1} columns, got {len(row)}")
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    if len(rows) < 1:
        raise MetricsError(f"no feature rows in {path}")
    return ids, np.asarray(rows, dtype=np.float64)


def feature_set_from_csv(path, source_tag: str = "") -> FeatureSet:
    _, matrix = read_features_csv(path)
    return FeatureSet(matrix, source_tag=source_tag or str(path))
