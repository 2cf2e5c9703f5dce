"""Domain types for points, labeled datasets, and analytic synthetic models.

A "model" bundles a feature distribution with a regression function
eta(x) = P(Y=1|X=x) and exposes analytic derivatives and density access, so
the theory engine can evaluate boundary integrals without numerical
differentiation.  The built-in family is the symmetric-logistic form

    eta(x) = e^{x.w} / (e^{x.w} + e^{-x.w}) = 1 / (1 + e^{-2 x.w})

over iid exponential or iid uniform coordinates.  CustomModel lets tests plug
in simple closed-form alternatives (e.g. d=1, eta(x)=x).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import RngHandle

# Density below this fraction of its max is treated as outside the working
# support when building boundary meshes / bounding boxes.
DENSITY_CUTOFF = 1e-10


def as_point(x, dim=None) -> np.ndarray:
    """Validate and return a 1-d float array of coordinates."""
    p = np.asarray(x, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("a point must be a 1-d sequence with d >= 1")
    if not np.all(np.isfinite(p)):
        raise ValueError("point coordinates must be finite")
    if dim is not None and p.size != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {p.size}")
    return p


@dataclass(frozen=True)
class LabeledSample:
    point: np.ndarray
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


class Dataset:
    """Immutable collection of d-dimensional points with binary labels."""

    def __init__(self, features, labels):
        features = np.ascontiguousarray(features, dtype=float)
        labels = np.ascontiguousarray(labels, dtype=np.int8)
        if features.ndim != 2 or features.shape[0] < 1:
            raise ValueError("features must be an (n, d) array with n >= 1")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must be an (n,) array")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be binary")
        features.setflags(write=False)
        labels.setflags(write=False)
        self.features = features
        self.labels = labels

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dimension(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def sample(self, i) -> LabeledSample:
        return LabeledSample(self.features[i], int(self.labels[i]))

    def __eq__(self, other):
        return (
            isinstance(other, Dataset)
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


# ---------------------------------------------------------------------------
# feature laws


class FeatureLaw:
    name = "abstract"

    def sample(self, n, d, gen):
        raise NotImplementedError

    def density(self, X):
        raise NotImplementedError

    def density_grad(self, X):
        raise NotImplementedError

    def support_box(self, d):
        """(lo, hi) per-coordinate box where density >= cutoff * max."""
        raise NotImplementedError


@dataclass(frozen=True)
class UniformLaw(FeatureLaw):
    """iid Uniform(0, 1) coordinates."""

    name: str = field(default="iid_uniform", init=False)

    def sample(self, n, d, gen):
        return gen.random((n, d))

    def density(self, X):
        inside = np.all((X >= 0.0) & (X <= 1.0), axis=-1)
        return inside.astype(float)

    def density_grad(self, X):
        return np.zeros_like(X)

    def support_box(self, d):
        return np.zeros(d), np.ones(d)


@dataclass(frozen=True)
class ExponentialLaw(FeatureLaw):
    """iid Exponential coordinates with the given mean."""

    mean: float = 0.5
    name: str = field(default="iid_exponential", init=False)

    def sample(self, n, d, gen):
        return gen.exponential(scale=self.mean, size=(n, d))

    def density(self, X):
        X = np.asarray(X, dtype=float)
        rate = 1.0 / self.mean
        inside = np.all(X >= 0.0, axis=-1)
        vals = rate ** X.shape[-1] * np.exp(-rate * X.sum(axis=-1))
        return np.where(inside, vals, 0.0)

    def density_grad(self, X):
        f = self.density(X)
        return -(1.0 / self.mean) * f[..., None] * np.ones_like(X)

    def support_box(self, d):
        # product density falls below cutoff * max once the coordinate sum
        # exceeds mean * ln(1/cutoff)
        hi = self.mean * np.log(1.0 / DENSITY_CUTOFF)
        return np.zeros(d), np.full(d, hi)


# ---------------------------------------------------------------------------
# models


class Model:
    """Callable contract for eta, its derivatives, and the feature density."""

    dimension: int

    def eta(self, x):
        raise NotImplementedError

    def eta_grad(self, x):
        raise NotImplementedError

    def eta_hess(self, x):
        raise NotImplementedError

    def density(self, x):
        raise NotImplementedError

    def density_grad(self, x):
        raise NotImplementedError

    def sample_features(self, n, gen):
        raise NotImplementedError

    def support_box(self):
        raise NotImplementedError

    def boundary_normal(self):
        """Normal vector if {eta = 1/2} is the hyperplane x.n = c, else None."""
        return None

    def boundary_offset(self) -> float:
        return 0.0


@dataclass(frozen=True, eq=False)
class SyntheticModel(Model):
    """Symmetric-logistic regression function over an iid feature law."""

    weights: np.ndarray
    feature_law: FeatureLaw
    offset_rule: str = "half_integer"  # which weight formula produced w

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a 1-d sequence, d >= 1")

    @property
    def dimension(self) -> int:
        return self.weights.size

    def _u(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise ValueError(
                f"dimension mismatch: expected {self.dimension}, got {x.shape[-1]}"
            )
        return x @ self.weights

    def eta(self, x):
        # stable form of e^u / (e^u + e^{-u}); no overflow up to |u| ~ 700
        u = self._u(x)
        z = np.exp(-2.0 * np.abs(u))
        out = np.where(u >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
        return out if out.ndim else float(out)

    def eta_grad(self, x):
        e = np.asarray(self.eta(x))
        return (2.0 * e * (1.0 - e))[..., None] * self.weights

    def eta_hess(self, x):
        e = np.asarray(self.eta(x))
        c = 4.0 * e * (1.0 - e) * (1.0 - 2.0 * e)
        outer = np.multiply.outer(self.weights, self.weights)
        return c[..., None, None] * outer if np.ndim(c) else float(c) * outer

    def density(self, x):
        self._u(x)  # dimension check
        out = self.feature_law.density(np.asarray(x, dtype=float))
        return out if np.ndim(out) else float(out)

    def density_grad(self, x):
        self._u(x)
        return self.feature_law.density_grad(np.asarray(x, dtype=float))

    def sample_features(self, n, gen):
        return self.feature_law.sample(n, self.dimension, gen)

    def support_box(self):
        return self.feature_law.support_box(self.dimension)

    def boundary_normal(self):
        return self.weights


@dataclass(frozen=True, eq=False)
class CustomModel(Model):
    """Plug-in model from callables; used for closed-form test doubles."""

    dim: int
    eta_fn: object
    eta_grad_fn: object
    eta_hess_fn: object
    density_fn: object
    density_grad_fn: object
    sampler: object
    box: tuple

    @property
    def dimension(self):
        return self.dim

    def eta(self, x):
        return self.eta_fn(np.asarray(x, dtype=float))

    def eta_grad(self, x):
        return self.eta_grad_fn(np.asarray(x, dtype=float))

    def eta_hess(self, x):
        return self.eta_hess_fn(np.asarray(x, dtype=float))

    def density(self, x):
        return self.density_fn(np.asarray(x, dtype=float))

    def density_grad(self, x):
        return self.density_grad_fn(np.asarray(x, dtype=float))

    def sample_features(self, n, gen):
        return self.sampler(n, gen)

    def support_box(self):
        lo, hi = self.box
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


def exponential_model(d, mean=0.5) -> SyntheticModel:
    """Logistic model with w_i = i - d/2 over iid Exponential(mean) features."""
    w = np.arange(1, d + 1, dtype=float) - d / 2.0
    return SyntheticModel(w, ExponentialLaw(mean), offset_rule="integer")


def uniform_model(d) -> SyntheticModel:
    """Logistic model with w_i = i - d/2 - 0.5 over iid Uniform(0,1) features."""
    w = np.arange(1, d + 1, dtype=float) - d / 2.0 - 0.5
    return SyntheticModel(w, UniformLaw(), offset_rule="half_integer")


def ramp_model() -> CustomModel:
    """d=1 test double: X ~ Uniform(0,1), eta(x) = x."""

    def eta(x):
        v = np.clip(x[..., 0], 0.0, 1.0)
        return v if v.ndim else float(v)

    def grad(x):
        g = np.ones_like(x)
        return g

    def hess(x):
        z = np.zeros(x.shape[:-1] + (1, 1))
        return z if x.ndim > 1 else z.reshape(1, 1)

    def dens(x):
        inside = np.all((x >= 0.0) & (x <= 1.0), axis=-1)
        v = inside.astype(float)
        return v if v.ndim else float(v)

    def dens_grad(x):
        return np.zeros_like(x)

    def sampler(n, gen):
        return gen.random((n, 1))

    return CustomModel(1, eta, grad, hess, dens, dens_grad, sampler,
                       (np.zeros(1), np.ones(1)))


# ---------------------------------------------------------------------------
# operations


def eta(model: Model, x) -> float:
    return model.eta(as_point(x, model.dimension))


def eta_grad(model: Model, x) -> np.ndarray:
    return np.asarray(model.eta_grad(as_point(x, model.dimension)), dtype=float)


def eta_hess(model: Model, x) -> np.ndarray:
    return np.asarray(model.eta_hess(as_point(x, model.dimension)), dtype=float)


def density(model: Model, x) -> float:
    return float(model.density(as_point(x, model.dimension)))


def density_grad(model: Model, x) -> np.ndarray:
    return np.asarray(model.density_grad(as_point(x, model.dimension)), dtype=float)


def sample_dataset(model: Model, n, rng: RngHandle) -> Dataset:
    """n iid draws X ~ feature law, Y ~ Bernoulli(eta(X))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = rng.generator() if isinstance(rng, RngHandle) else rng
    X = model.sample_features(n, gen)
    e = np.asarray(model.eta(X))
    y = (gen.random(n) < e).astype(np.int8)
    return Dataset(X, y)


def bayes_label(model: Model, x) -> int:
    return int(eta(model, x) > 0.5)


def bayes_risk(model: Model, n_mc, rng: RngHandle):
    """Monte Carlo estimate of E[min(eta(X), 1-eta(X))] with standard error."""
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    gen = rng.generator()
    X = model.sample_features(n_mc, gen)
    e = np.asarray(model.eta(X), dtype=float)
    vals = np.minimum(e, 1.0 - e)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(n_mc)) if n_mc > 1 else 0.0
    return mean, se
