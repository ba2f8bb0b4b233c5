"""Synthetic dataset generation, corruption models, and file ingestion."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import RngState
from .errors import ConfigurationError, DataError

SYNTHETIC_FNS = ("cosexp", "cosexp_narrow", "linear", "step")

REGRESSION_NOISE_KINDS = ("uniform_replace", "flip_function")
LABEL_NOISE_KINDS = ("symmetric", "pairflip", "biased_to_class", "permutation")


@dataclass
class RegressionDataset:
    x: np.ndarray  # (N, d)
    y: np.ndarray  # (N, D), possibly corrupted
    y_clean: np.ndarray  # (N, D)
    corrupted_mask: np.ndarray  # (N,) bool
    reference_fn: str | None = None
    x_range: tuple = (0.0, 1.0)

    def __len__(self):
        return len(self.x)


@dataclass
class LabeledDataset:
    x: np.ndarray  # (N, d)
    labels: np.ndarray  # (N,), possibly corrupted
    true_labels: np.ndarray  # (N,)
    num_classes: int

    def __len__(self):
        return len(self.x)

    def one_hot(self) -> np.ndarray:
        out = np.zeros((len(self.labels), self.num_classes))
        out[np.arange(len(self.labels)), self.labels] = 1.0
        return out


@dataclass
class CorruptionSpec:
    kind: str
    rate: float
    range_lo: float = -1.0
    range_hi: float = 3.0
    region_lo: float | None = None
    region_hi: float | None = None
    reflection: str = "negation"  # or "region_mean"
    target_class: int = 0
    permutation: list = field(default_factory=list)
    exact_count: bool = True  # corrupt exactly floor(p*N) indices

    def __post_init__(self):
        if not (0.0 <= self.rate <= 1.0):
            raise ConfigurationError("corruption rate must lie in [0, 1]")
        if self.kind in ("uniform_replace",) and not self.range_lo < self.range_hi:
            raise ConfigurationError("uniform_replace: need range_lo < range_hi")
        if self.kind == "permutation" and self.permutation:
            if sorted(self.permutation) != list(range(len(self.permutation))):
                raise ConfigurationError("permutation must be a bijection on 0..C-1")


def reference_function(fn: str):
    """Scalar target functions used by the synthetic benchmarks."""
    if fn == "cosexp":
        return lambda x: np.cos(0.5 * np.pi * x) * np.exp(-((x / 2.0) ** 2))
    if fn == "cosexp_narrow":
        return lambda x: np.cos(0.5 * np.pi * x) * np.exp(-(x**2))
    if fn == "linear":
        return None  # range-dependent; handled in gen_synthetic
    if fn == "step":
        return None
    raise ConfigurationError(f"unknown synthetic function {fn!r}")


def _fn_on_range(fn: str, x_range):
    lo, hi = x_range
    if fn in ("cosexp", "cosexp_narrow"):
        return reference_function(fn)
    if fn == "linear":
        # scaled to output range [-1, 1] over the input range
        return lambda x: -1.0 + 2.0 * (x - lo) / (hi - lo)
    if fn == "step":
        mid = 0.5 * (lo + hi)
        return lambda x: np.where(x < mid, -0.5, 0.5)
    raise ConfigurationError(f"unknown synthetic function {fn!r}")


def gen_synthetic(fn: str, n: int, x_range=(-3.0, 3.0), rng: RngState | None = None) -> RegressionDataset:
    """Uniform inputs on the range with clean targets from the named function."""
    if n < 1:
        raise ConfigurationError("gen_synthetic: n must be >= 1")
    if fn not in SYNTHETIC_FNS:
        raise ConfigurationError(f"gen_synthetic: unknown function {fn!r}")
    rng = rng or RngState(0)
    lo, hi = x_range
    x = np.sort(rng.uniform(lo, hi, n))
    f = _fn_on_range(fn, x_range)
    y = f(x)
    return RegressionDataset(
        x=x.reshape(-1, 1),
        y=y.reshape(-1, 1).copy(),
        y_clean=y.reshape(-1, 1).copy(),
        corrupted_mask=np.zeros(n, dtype=bool),
        reference_fn=fn,
        x_range=(float(lo), float(hi)),
    )


def _pick_indices(rng: RngState, candidates: np.ndarray, rate: float, exact: bool) -> np.ndarray:
    if rate == 0.0 or candidates.size == 0:
        return np.array([], dtype=int)
    if exact:
        count = int(np.floor(rate * candidates.size))
        if count == 0:
            return np.array([], dtype=int)
        chosen = rng.choice(candidates.size, size=count, replace=False)
        return candidates[chosen]
    mask = rng.uniform(0.0, 1.0, candidates.size) < rate
    return candidates[mask]


def corrupt_regression(ds: RegressionDataset, spec: CorruptionSpec, rng: RngState) -> RegressionDataset:
    """Replace a fraction of targets per the noise branch; x and y_clean untouched."""
    if spec.kind not in REGRESSION_NOISE_KINDS:
        raise ConfigurationError(f"corrupt_regression: unsupported kind {spec.kind!r}")
    y = ds.y.copy()
    mask = ds.corrupted_mask.copy()

    if spec.kind == "uniform_replace":
        idx = _pick_indices(rng, np.arange(len(ds)), spec.rate, spec.exact_count)
        if idx.size:
            y[idx] = rng.uniform(spec.range_lo, spec.range_hi, (idx.size, y.shape[1]))
    else:  # flip_function
        if spec.region_lo is None or spec.region_hi is None:
            raise ConfigurationError("flip_function: region_lo/region_hi required")
        in_region = np.where(
            (ds.x[:, 0] >= spec.region_lo) & (ds.x[:, 0] <= spec.region_hi)
        )[0]
        idx = _pick_indices(rng, in_region, spec.rate, spec.exact_count)
        if idx.size:
            if spec.reflection == "negation":
                y[idx] = -ds.y_clean[idx]
            elif spec.reflection == "region_mean":
                region_mean = ds.y_clean[in_region].mean()
                y[idx] = 2.0 * region_mean - ds.y_clean[idx]
            else:
                raise ConfigurationError(
                    f"flip_function: unknown reflection {spec.reflection!r}"
                )
    mask[idx] = True
    return replace(ds, y=y, corrupted_mask=mask)


def corrupt_labels(ds: LabeledDataset, spec: CorruptionSpec, rng: RngState) -> LabeledDataset:
    """Apply a label-noise model; true labels preserved.

    Symmetric noise resamples uniformly over ALL classes (the true class
    included), so the expected clean fraction is 1 - p + p/C.
    """
    if spec.kind not in LABEL_NOISE_KINDS:
        raise ConfigurationError(f"corrupt_labels: unsupported kind {spec.kind!r}")
    c = ds.num_classes
    labels = ds.labels.copy()
    idx = _pick_indices(rng, np.arange(len(ds)), spec.rate, spec.exact_count)

    if spec.kind == "symmetric":
        labels[idx] = rng.integers(0, c, idx.size)
    elif spec.kind == "pairflip":
        labels[idx] = (labels[idx] + 1) % c
    elif spec.kind == "biased_to_class":
        if not (0 <= spec.target_class < c):
            raise ConfigurationError("biased_to_class: target_class out of range")
        labels[idx] = spec.target_class
    else:  # permutation
        if len(spec.permutation) != c:
            raise ConfigurationError(
                f"permutation: length {len(spec.permutation)} != num_classes {c}"
            )
        perm = np.asarray(spec.permutation, dtype=int)
        labels[idx] = perm[labels[idx]]
    return LabeledDataset(
        x=ds.x, labels=labels, true_labels=ds.true_labels.copy(), num_classes=c
    )


def expected_true_ratio(kind: str, p: float, c: int, permutation=None) -> float:
    """Expected fraction of labels that remain correct after corruption."""
    if kind == "symmetric":
        return 1.0 - p + p / c
    if kind in ("pairflip", "biased_to_class"):
        return 1.0 - p
    if kind == "permutation":
        fixed = 0.0
        if permutation is not None:
            perm = np.asarray(permutation)
            fixed = float(np.mean(perm == np.arange(len(perm))))
        return 1.0 - p + p * fixed
    raise ConfigurationError(f"expected_true_ratio: unknown kind {kind!r}")


# -- file ingestion -----------------------------------------------------------------


def resolve_data_path(path: str) -> str:
    """Relative paths resolve under $CHOICENET_DATA_DIR when it is set."""
    if os.path.isabs(path):
        return path
    root = os.environ.get("CHOICENET_DATA_DIR")
    return os.path.join(root, path) if root else path


@dataclass
class CsvRegression:
    dataset: RegressionDataset
    feature_names: list
    target_name: str
    feature_mean: np.ndarray
    feature_std: np.ndarray


def load_csv_regression(path: str, target_column: str, standardize: bool = True) -> CsvRegression:
    """Load a headered numeric CSV; features standardized, target in raw units."""
    path = resolve_data_path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            header = f.readline().rstrip("\n").split(",")
            rows = []
            for lineno, line in enumerate(f, start=2):
                line = line.strip()
                if not line:
                    continue
                cells = line.split(",")
                if len(cells) != len(header):
                    raise DataError(f"{path}:{lineno}: expected {len(header)} cells")
                try:
                    rows.append([float(c) for c in cells])
                except ValueError as e:
                    raise DataError(f"{path}:{lineno}: non-numeric cell") from e
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    if target_column not in header:
        raise ConfigurationError(f"target column {target_column!r} not in header")
    if not rows:
        raise DataError(f"{path}: no data rows")

    data = np.asarray(rows)
    tcol = header.index(target_column)
    fcols = [i for i in range(len(header)) if i != tcol]
    x = data[:, fcols]
    y = data[:, tcol : tcol + 1]

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std == 0.0] = 1.0
    if standardize:
        x = (x - mean) / std

    ds = RegressionDataset(
        x=x,
        y=y.copy(),
        y_clean=y.copy(),
        corrupted_mask=np.zeros(len(x), dtype=bool),
    )
    return CsvRegression(
        dataset=ds,
        feature_names=[header[i] for i in fcols],
        target_name=target_column,
        feature_mean=mean,
        feature_std=std,
    )


IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def load_idx(images_path: str, labels_path: str) -> LabeledDataset:
    """Read big-endian IDX image/label pairs into flat [0,1] features."""
    images_path = resolve_data_path(images_path)
    labels_path = resolve_data_path(labels_path)

    with open(images_path, "rb") as f:
        head = f.read(16)
        if len(head) != 16:
            raise DataError(f"{images_path}: truncated header at offset 0")
        magic, count, rows, cols = struct.unpack(">IIII", head)
        if magic != IDX_IMAGES_MAGIC:
            raise DataError(f"{images_path}: bad magic {magic:#010x} at offset 0")
        body = f.read(count * rows * cols)
        if len(body) != count * rows * cols:
            raise DataError(f"{images_path}: truncated pixel data at offset 16")
        pixels = np.frombuffer(body, dtype=np.uint8).reshape(count, rows * cols)

    with open(labels_path, "rb") as f:
        head = f.read(8)
        if len(head) != 8:
            raise DataError(f"{labels_path}: truncated header at offset 0")
        magic, lcount = struct.unpack(">II", head)
        if magic != IDX_LABELS_MAGIC:
            raise DataError(f"{labels_path}: bad magic {magic:#010x} at offset 0")
        body = f.read(lcount)
        if len(body) != lcount:
            raise DataError(f"{labels_path}: truncated label data at offset 8")
        labels = np.frombuffer(body, dtype=np.uint8).astype(int)

    if count != lcount:
        raise DataError(f"idx: image count {count} != label count {lcount}")
    if labels.size and labels.max() > 9:
        raise DataError(f"idx: label byte {labels.max()} out of class range 0-9")
    return LabeledDataset(
        x=pixels.astype(np.float64) / 255.0,
        labels=labels.copy(),
        true_labels=labels.copy(),
        num_classes=10,
    )


# -- desk-scale task builders ---------------------------------------------------------


def split_regression(ds: RegressionDataset, test_fraction: float, rng: RngState):
    """Shuffled train/test split preserving clean references."""
    n = len(ds)
    perm = rng.permutation(n)
    n_test = int(round(test_fraction * n))
    test_idx, train_idx = perm[:n_test], perm[n_test:]

    def take(idx):
        return RegressionDataset(
            x=ds.x[idx],
            y=ds.y[idx].copy(),
            y_clean=ds.y_clean[idx].copy(),
            corrupted_mask=ds.corrupted_mask[idx].copy(),
            reference_fn=ds.reference_fn,
            x_range=ds.x_range,
        )

    return take(train_idx), take(test_idx)


def split_labeled(ds: LabeledDataset, test_fraction: float, rng: RngState):
    n = len(ds)
    perm = rng.permutation(n)
    n_test = int(round(test_fraction * n))
    test_idx, train_idx = perm[:n_test], perm[n_test:]

    def take(idx):
        return LabeledDataset(
            x=ds.x[idx],
            labels=ds.labels[idx].copy(),
            true_labels=ds.true_labels[idx].copy(),
            num_classes=ds.num_classes,
        )

    return take(train_idx), take(test_idx)


def gen_blobs(
    n_per_class: int,
    num_classes: int,
    dim: int,
    separation: float,
    rng: RngState,
    within_std: float = 1.0,
) -> LabeledDataset:
    """Gaussian blob classification task with class centers ``separation`` apart.

    When the dimension allows it the center directions are orthogonalized, so
    every pair of centers is separation * sqrt(2) apart; otherwise random unit
    directions are used and pairwise distances vary by draw.
    """
    raw = rng.standard_normal((dim, num_classes)).data
    if num_classes <= dim:
        q, _ = np.linalg.qr(raw)
        centers = q.T * separation
    else:
        centers = raw.T / np.linalg.norm(raw.T, axis=1, keepdims=True) * separation
    xs, ys = [], []
    for c in range(num_classes):
        xs.append(centers[c] + within_std * rng.standard_normal((n_per_class, dim)).data)
        ys.append(np.full(n_per_class, c, dtype=int))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    perm = rng.permutation(len(x))
    return LabeledDataset(
        x=x[perm], labels=y[perm].copy(), true_labels=y[perm].copy(), num_classes=num_classes
    )
