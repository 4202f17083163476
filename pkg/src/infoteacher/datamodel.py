"""Datasets, additive-noise sampling, CSV ingestion, splits, scaling and PCA."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import ndtri

from .errors import ConfigurationError, DimensionError, IngestionError, SizeError


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Paired samples ``xs`` (n x p) and ``ys`` (n x q).

    Arrays are copied on construction and frozen (read-only), so a
    ``Dataset`` can be shared freely between threads.
    """

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = _as_matrix(self.xs, "xs")
        ys = _as_matrix(self.ys, "ys")
        if xs.shape[0] != ys.shape[0]:
            raise DimensionError(f"xs has {xs.shape[0]} rows but ys has {ys.shape[0]}")
        if xs.shape[0] < 1:
            raise DimensionError("a dataset needs at least one row")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ConfigurationError("dataset contains NaN or infinite entries")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def p(self) -> int:
        return self.xs.shape[1]

    @property
    def q(self) -> int:
        return self.ys.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.xs[idx], self.ys[idx])

    def to_json(self) -> str:
        return json.dumps({"p": self.p, "q": self.q, "xs": self.xs.tolist(), "ys": self.ys.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        obj = json.loads(text)
        ds = cls(np.array(obj["xs"], dtype=float).reshape(-1, obj["p"]),
                 np.array(obj["ys"], dtype=float).reshape(-1, obj["q"]))
        return ds


# ---------------------------------------------------------------------------
# target functions, noise families and input laws

def _sine10(x, **_):
    return np.sin(10.0 * x)


def _identity(x, **_):
    return np.array(x, dtype=float)


def _zero(x, **_):
    return np.zeros_like(x, dtype=float)


def _constant(x, value=0.0, **_):
    return np.full_like(x, float(value), dtype=float)


def _tabulated(x, grid=None, values=None, **_):
    if grid is None or values is None:
        raise ConfigurationError("tabulated target needs 'grid' and 'values'")
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.shape != values.shape or np.any(np.diff(grid) <= 0):
        raise ConfigurationError("tabulated grid must be strictly increasing and match values")
    return np.interp(x, grid, values)


# Each target acts elementwise, so the output dimension q equals the input dimension p.
TARGETS: dict[str, Callable[..., np.ndarray]] = {
    "sine10": _sine10,
    "identity": _identity,
    "zero": _zero,
    "constant": _constant,
    "tabulated": _tabulated,
}


def target_function(f_id: str, **params) -> Callable[[np.ndarray], np.ndarray]:
    """Return the registered target ``f`` as a function of an (n, p) array."""
    try:
        fn = TARGETS[f_id]
    except KeyError:
        raise ConfigurationError(f"unknown target function {f_id!r}; known: {sorted(TARGETS)}") from None

    def f(x):
        return fn(np.asarray(x, dtype=float), **params)

    f.__name__ = f_id
    return f


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean noise written as ``h(W)`` with ``W ~ U[0, 1]``.

    families and their parameters:
      - ``gaussian``: ``variance``
      - ``uniform``: ``half_width`` (support [-a, a])
      - ``laplace``: ``scale``
      - ``none``: degenerate at 0
    """

    family: str = "gaussian"
    params: Mapping[str, float] = field(default_factory=lambda: {"variance": 0.25})

    def transform(self, w: np.ndarray) -> np.ndarray:
        fam = self.family
        if fam == "gaussian":
            var = float(self.params.get("variance", 1.0))
            if var < 0:
                raise ConfigurationError("gaussian variance must be nonnegative")
            return math.sqrt(var) * ndtri(w)
        if fam == "uniform":
            a = float(self.params.get("half_width", 1.0))
            return a * (2.0 * w - 1.0)
        if fam == "laplace":
            b = float(self.params.get("scale", 1.0))
            u = w - 0.5
            return -b * np.sign(u) * np.log1p(-2.0 * np.abs(u))
        if fam == "none":
            return np.zeros_like(w)
        raise ConfigurationError(f"unknown noise family {fam!r}")

    def std(self) -> float:
        fam = self.family
        if fam == "gaussian":
            return math.sqrt(float(self.params.get("variance", 1.0)))
        if fam == "uniform":
            return float(self.params.get("half_width", 1.0)) / math.sqrt(3.0)
        if fam == "laplace":
            return math.sqrt(2.0) * float(self.params.get("scale", 1.0))
        if fam == "none":
            return 0.0
        raise ConfigurationError(f"unknown noise family {fam!r}")


@dataclass(frozen=True)
class InputLaw:
    """Marginal law of X: ``uniform`` (low, high) or ``normal`` (mean, std), i.i.d. per coordinate."""

    family: str = "uniform"
    params: Mapping[str, float] = field(default_factory=lambda: {"low": 0.0, "high": 1.0})
    dim: int = 1

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.family == "uniform":
            lo = float(self.params.get("low", 0.0))
            hi = float(self.params.get("high", 1.0))
            return rng.uniform(lo, hi, size=(n, self.dim))
        if self.family == "normal":
            return rng.normal(float(self.params.get("mean", 0.0)), float(self.params.get("std", 1.0)),
                              size=(n, self.dim))
        raise ConfigurationError(f"unknown input law {self.family!r}")


@dataclass(frozen=True)
class AdditiveModelSpec:
    """``Y = f(X) + h(W)`` with ``W ~ U[0,1]`` independent of ``X``."""

    f_id: str = "sine10"
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    input_law: InputLaw = field(default_factory=InputLaw)
    f_params: Mapping[str, object] = field(default_factory=dict)

    def f(self) -> Callable[[np.ndarray], np.ndarray]:
        return target_function(self.f_id, **dict(self.f_params))


def sine_model(noise_variance: float = 0.25) -> AdditiveModelSpec:
    """``sin(10x) + N(0, noise_variance)`` on ``U[0, 1]``."""
    return AdditiveModelSpec("sine10", NoiseSpec("gaussian", {"variance": noise_variance}), InputLaw())


def sample_additive(spec: AdditiveModelSpec, n: int, seed) -> Dataset:
    """Draw ``n`` i.i.d. rows from the additive model.

    X is drawn first, then one uniform per output coordinate, so the result is
    a pure function of ``(spec, n, seed)``.
    """
    if n < 1:
        raise SizeError("n must be at least 1")
    f = spec.f()
    spec.noise.transform(np.array([0.5]))  # fail early on bad families
    rng = np.random.default_rng(seed)
    x = spec.input_law.sample(rng, n)
    fx = np.asarray(f(x), dtype=float).reshape(n, -1)
    w = rng.random(fx.shape)
    w[w == 0.0] = np.nextafter(0.0, 1.0)
    return Dataset(x, fx + spec.noise.transform(w))


# ---------------------------------------------------------------------------
# CSV ingestion

def load_csv(path, target_columns: Sequence[str]) -> Dataset:
    """Read a comma-separated file with one header row.

    Every column not listed in ``target_columns`` becomes an input feature,
    in file order.
    """
    path = Path(path)
    if isinstance(target_columns, str):
        target_columns = [target_columns]
    if not path.is_file():
        raise IngestionError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path}: file is empty (no header row)") from None
        missing = [c for c in target_columns if c not in header]
        if missing:
            raise IngestionError(f"{path}: target column(s) {missing} not in header {header}")
        t_idx = [header.index(c) for c in target_columns]
        x_idx = [i for i in range(len(header)) if i not in t_idx]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestionError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
            vals = []
            for j, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise IngestionError(
                        f"{path}: row {lineno}, column {header[j]!r}: cannot parse {cell!r} as a number"
                    ) from None
                if not math.isfinite(v):
                    raise IngestionError(f"{path}: row {lineno}, column {header[j]!r}: non-finite value")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    return Dataset(data[:, x_idx].reshape(len(rows), len(x_idx)), data[:, t_idx])


# ---------------------------------------------------------------------------
# splits and scaling

@dataclass(frozen=True)
class SplitSpec:
    n_train: int
    n_val: int
    seed: int = 0

    def __post_init__(self):
        if self.n_val < 1 or self.n_train < 0:
            raise SizeError(f"invalid split sizes n_train={self.n_train}, n_val={self.n_val}")


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Seeded permutation; the validation rows come first so that, for a fixed
    seed, the validation set does not depend on ``n_train``."""
    if spec.n_train + spec.n_val > n:
        raise SizeError(f"n_train + n_val = {spec.n_train + spec.n_val} exceeds {n} rows")
    perm = np.random.default_rng(spec.seed).permutation(n)
    val = perm[: spec.n_val]
    train = perm[spec.n_val : spec.n_val + spec.n_train]
    return train, val


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    train, val = split_indices(ds.n, spec)
    if train.size == 0:
        raise SizeError("n_train must be at least 1")
    return ds.subset(train), ds.subset(val)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, a) -> "Standardizer":
        a = np.asarray(a, dtype=float)
        mean = a.mean(axis=0)
        scale = a.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    def transform(self, a) -> np.ndarray:
        return (np.asarray(a, dtype=float) - self.mean) / self.scale

    def inverse(self, a) -> np.ndarray:
        return np.asarray(a, dtype=float) * self.scale + self.mean


# ---------------------------------------------------------------------------
# PCA

@dataclass(frozen=True)
class PCAModel:
    mean: np.ndarray
    components: np.ndarray  # k x p, rows orthonormal
    explained_variance: np.ndarray


def pca_fit(xs, k: int) -> PCAModel:
    """Top-``k`` eigenvectors of the sample covariance (denominator n - 1).

    Each component's sign is chosen so that its largest-magnitude entry is
    positive.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2:
        raise DimensionError("pca_fit expects an n x p matrix")
    n, p = xs.shape
    if k < 1 or k > p:
        raise DimensionError(f"cannot keep {k} components of {p}-dimensional data")
    if n < 2:
        raise SizeError("pca_fit needs at least two rows")
    mean = xs.mean(axis=0)
    cov = np.atleast_2d(np.cov(xs, rowvar=False, ddof=1))
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1][:k]
    comps = evecs[:, order].T.copy()
    for row in comps:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return PCAModel(mean, comps, np.clip(evals[order], 0.0, None))


def pca_transform(model: PCAModel, xs) -> np.ndarray:
    return (np.asarray(xs, dtype=float) - model.mean) @ model.components.T


def pca_inverse(model: PCAModel, zs) -> np.ndarray:
    return np.asarray(zs, dtype=float) @ model.components + model.mean
