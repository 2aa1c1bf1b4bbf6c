"""Unsupervised activation analysis: PCA reduction, threshold-spawning
online K-means with cosine distance, and cluster purity scoring.

Consumes either internal model hidden states or external activation files in
the "LACT" binary format (one file per layer).
"""

import struct
from dataclasses import dataclass, field

import numpy as np

LACT_MAGIC = b"LACT"
LACT_VERSION = 1
UNLABELED = 0xFF


class InsufficientDataError(ValueError):
    """Fewer samples than requested principal components."""


@dataclass
class ActivationSet:
    values: np.ndarray              # (n, d)
    labels: np.ndarray | None = None  # (n,) ints, or None
    layer: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("activations must be finite")
        if self.labels is not None and len(self.labels) != len(self.values):
            raise ValueError("labels length must match sample count")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]


@dataclass
class PcaBasis:
    mean: np.ndarray        # (d,)
    components: np.ndarray  # (d, d_pca), columns are principal directions
    eigenvalues: np.ndarray

    def project(self, values):
        return (np.asarray(values) - self.mean) @ self.components


def fit_pca(acts: ActivationSet, d_pca=32) -> PcaBasis:
    """Top-d_pca principal directions of the sample covariance.

    Sign convention: each component's largest-magnitude entry is positive.
    """
    if acts.n < d_pca:
        raise InsufficientDataError(f"{acts.n} samples < d_pca={d_pca}")
    x = acts.values.astype(np.float64)
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (acts.n - 1) if acts.n > 1 else np.zeros((acts.d, acts.d))
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:d_pca]
    comps = evecs[:, order]
    evals = evals[order]
    for j in range(comps.shape[1]):
        k = np.argmax(np.abs(comps[:, j]))
        if comps[k, j] < 0:
            comps[:, j] = -comps[:, j]
    return PcaBasis(mean=mean, components=comps, eigenvalues=evals)


class ZeroVectorError(ValueError):
    """Cosine distance is undefined for the zero vector."""


class ClusterModel:
    """Single-pass online K-means with a cosine-distance spawn threshold.

    A sample joins the nearest center if its cosine distance is within
    delta, updating that center as a count-weighted running mean; otherwise
    it spawns a new center. No merging or re-assignment passes.
    """

    def __init__(self, distance_threshold=0.15):
        self.delta = distance_threshold
        self.centers = []
        self.counts = []

    @property
    def k(self):
        return len(self.centers)

    def assign(self, x):
        x = np.asarray(x, dtype=np.float64)
        nx = np.linalg.norm(x)
        if nx == 0:
            raise ZeroVectorError("cannot assign the zero vector")
        if not self.centers:
            self.centers.append(x.copy())
            self.counts.append(1)
            return 0
        cents = np.stack(self.centers)
        norms = np.linalg.norm(cents, axis=1)
        cos = cents @ x / (norms * nx)
        dist = 1.0 - cos
        i = int(np.argmin(dist))
        if dist[i] <= self.delta:
            self.counts[i] += 1
            self.centers[i] += (x - self.centers[i]) / self.counts[i]
            return i
        self.centers.append(x.copy())
        self.counts.append(1)
        return len(self.centers) - 1

    def assign_all(self, values):
        return np.array([self.assign(v) for v in values])


@dataclass
class PurityReport:
    purity: float
    k: int
    cluster_majority: list  # (cluster, majority_domain, majority_count, size)


def purity(assignments, labels) -> PurityReport:
    """Fraction of samples that belong to their cluster's majority domain."""
    assignments = np.asarray(assignments)
    labels = np.asarray(labels)
    if len(assignments) != len(labels):
        raise ValueError("assignments and labels must have equal length")
    if len(assignments) == 0:
        raise ValueError("need at least one sample")
    rows = []
    hit = 0
    for c in np.unique(assignments):
        ls = labels[assignments == c]
        vals, counts = np.unique(ls, return_counts=True)
        j = int(np.argmax(counts))
        hit += int(counts[j])
        rows.append((int(c), int(vals[j]), int(counts[j]), int(len(ls))))
    return PurityReport(purity=hit / len(labels), k=len(rows),
                        cluster_majority=rows)


def cluster_layer(acts: ActivationSet, d_pca=32, distance_threshold=0.15):
    """fit_pca + one streaming clustering pass; returns (report, assignments)."""
    basis = fit_pca(acts, d_pca=min(d_pca, acts.d, acts.n))
    proj = basis.project(acts.values)
    model = ClusterModel(distance_threshold=distance_threshold)
    assignments = model.assign_all(proj)
    if acts.labels is None:
        return None, assignments
    return purity(assignments, acts.labels), assignments


def layer_sweep(sets, d_pca=32, distance_threshold=0.15):
    """Independent PCA + clustering per layer; returns (layer, purity, k) rows."""
    if not sets:
        raise ValueError("need at least one layer")
    out = []
    for i, acts in enumerate(sets):
        layer = acts.layer if acts.layer is not None else i
        report, assignments = cluster_layer(acts, d_pca, distance_threshold)
        k = int(assignments.max()) + 1
        out.append((layer, report.purity if report else float("nan"), k))
    return out


# -- LACT activation file format ----------------------------------------
# magic "LACT", version u32, layer u32, n u32, d u32,
# n*d float32 LE row-major, then n label bytes (0xFF = unlabeled).

def write_activations(path, layer, values, labels=None):
    values = np.asarray(values)
    n, d = values.shape
    with open(path, "wb") as f:
        f.write(LACT_MAGIC)
        f.write(struct.pack("<4I", LACT_VERSION, layer, n, d))
        f.write(np.ascontiguousarray(values, dtype="<f4").tobytes())
        if labels is None:
            f.write(bytes([UNLABELED]) * n)
        else:
            f.write(bytes(int(l) & 0xFF for l in labels))


class FormatError(ValueError):
    """Malformed LACT file; message cites the byte offset."""


def read_activations(path) -> ActivationSet:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != LACT_MAGIC:
        raise FormatError(f"bad magic at offset 0: {data[:4]!r}")
    if len(data) < 20:
        raise FormatError(f"truncated header at offset {len(data)}")
    version, layer, n, d = struct.unpack("<4I", data[4:20])
    if version != LACT_VERSION:
        raise FormatError(f"unsupported version {version} at offset 4")
    need = 20 + n * d * 4 + n
    if len(data) != need:
        raise FormatError(f"expected {need} bytes, got {len(data)} "
                          f"(offset {min(len(data), need)})")
    values = np.frombuffer(data[20:20 + n * d * 4], dtype="<f4").reshape(n, d)
    raw = np.frombuffer(data[20 + n * d * 4:], dtype=np.uint8)
    labels = None if np.all(raw == UNLABELED) else raw.astype(np.int64)
    return ActivationSet(values=values.copy(), labels=labels, layer=layer)
