"""Test-time corruption generators.

Random perturbation draws uniformly from an Lp sphere or ball around the
test point (cone measure for p != 2, exact surface measure for p = 2).  The
white-box adversarial attack pushes eta toward 1/2 inside the Euclidean
ball with a first-order step plus optional projected-gradient refinement.
Noise injection applies the random perturbation to every training point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataspace import Dataset, Model, as_point
from .rng import RngHandle


@dataclass(frozen=True)
class CorruptionSpec:
    omega: float
    norm_p: float = 2.0
    geometry: str = "sphere"  # sphere | ball
    mode: str = "random"  # none | random | adversarial

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega must be non-negative")
        if self.geometry not in ("sphere", "ball"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.mode not in ("none", "random", "adversarial"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.norm_p < 1:
            raise ValueError("norm_p must be >= 1 (or inf)")


def lp_sphere_directions(m, d, p, gen) -> np.ndarray:
    """m unit-Lp-norm vectors in R^d under cone measure.

    For p=2 this is the exact uniform surface measure.  Directions come from
    normalized generalized-Gaussian draws (|g_i|^p iid Gamma(1/p)); for
    p=inf one coordinate is pushed to +-1 and the rest are Uniform(-1,1).
    """
    if np.isinf(p):
        u = gen.uniform(-1.0, 1.0, size=(m, d))
        j = gen.integers(0, d, size=m)
        signs = np.where(gen.random(m) < 0.5, -1.0, 1.0)
        u[np.arange(m), j] = signs
        return u
    if p == 2.0:
        g = gen.standard_normal((m, d))
        nrm = np.sqrt((g ** 2).sum(axis=1, keepdims=True))
    else:
        r = gen.gamma(1.0 / p, size=(m, d)) ** (1.0 / p)
        g = r * np.where(gen.random((m, d)) < 0.5, -1.0, 1.0)
        nrm = ((np.abs(g) ** p).sum(axis=1, keepdims=True)) ** (1.0 / p)
    # a zero draw has probability zero; guard against it anyway
    nrm[nrm == 0.0] = 1.0
    return g / nrm


def sample_offsets(m, d, spec: CorruptionSpec, gen) -> np.ndarray:
    """m perturbation vectors delta with ||delta||_p = omega (sphere) or <= omega."""
    u = lp_sphere_directions(m, d, spec.norm_p, gen)
    if spec.geometry == "ball":
        # radius density proportional to r^{d-1}
        u = u * gen.random((m, 1)) ** (1.0 / d)
    return spec.omega * u


def perturb(x, spec: CorruptionSpec, rng: RngHandle) -> np.ndarray:
    """Randomly perturbed copy of x per the corruption spec."""
    if spec.mode != "random":
        raise ValueError("perturb requires mode='random'")
    x = as_point(x)
    delta = sample_offsets(1, x.size, spec, rng.generator())[0]
    return x + delta


def direction_second_moment(d, p, geometry="sphere") -> float:
    """E[u_1^2] for a unit-Lp vector under cone measure (times the ball factor).

    Derived from (|u_1|^p, ..., |u_d|^p) ~ Dirichlet(1/p, ..., 1/p):
    E|u_1|^2 = Gamma(3/p) Gamma(d/p) / (Gamma(1/p) Gamma((d+2)/p)).
    Equals 1/d at p=2 and (d+2)/(3d) at p=inf; ball sampling multiplies
    by d/(d+2).
    """
    if np.isinf(p):
        m2 = (d + 2.0) / (3.0 * d)
    else:
        m2 = math.exp(
            math.lgamma(3.0 / p) + math.lgamma(d / p)
            - math.lgamma(1.0 / p) - math.lgamma((d + 2.0) / p)
        )
    if geometry == "ball":
        m2 *= d / (d + 2.0)
    return m2


# ---------------------------------------------------------------------------
# adversarial attack


def attack_batch(X, model: Model, omega, refine_steps=8):
    """White-box attack on each row of X within the Euclidean ball B(x, omega).

    Moves eta toward (and past) 1/2: approximately minimizes eta when
    eta(x) > 1/2 and maximizes it otherwise.  Baseline is the first-order
    step x -+ omega * grad/||grad||, refined by projected-gradient ascent;
    the best iterate is kept, so the result never does worse than the
    first-order point.  Returns (X_attacked, stationary_mask).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = X.shape[0]
    if omega == 0.0:
        return X.copy(), np.zeros(m, dtype=bool)

    e0 = np.asarray(model.eta(X), dtype=float)
    # sign of the desired eta change: push below 1/2 when above it
    sgn = np.where(e0 > 0.5, -1.0, 1.0)

    g = np.asarray(model.eta_grad(X), dtype=float)
    gn = np.sqrt((g ** 2).sum(axis=1))
    stationary = gn == 0.0
    safe = np.where(stationary, 1.0, gn)

    Z = X + (sgn / safe)[:, None] * omega * g
    best = Z.copy()
    best_val = sgn * np.asarray(model.eta(Z), dtype=float)

    step = omega / max(refine_steps, 1)
    for _ in range(refine_steps):
        g = np.asarray(model.eta_grad(Z), dtype=float)
        gn_i = np.sqrt((g ** 2).sum(axis=1))
        gn_i = np.where(gn_i == 0.0, 1.0, gn_i)
        Z = Z + (sgn / gn_i)[:, None] * step * g
        # project back onto the ball
        off = Z - X
        r = np.sqrt((off ** 2).sum(axis=1))
        scale = np.where(r > omega, omega / np.where(r == 0, 1.0, r), 1.0)
        Z = X + scale[:, None] * off
        val = sgn * np.asarray(model.eta(Z), dtype=float)
        better = val > best_val
        best[better] = Z[better]
        best_val = np.where(better, val, best_val)

    best[stationary] = X[stationary]
    return best, stationary


def attack(x, model: Model, omega, refine_steps=8):
    """Single-point attack; returns (x_tilde, stationary_flag)."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    x = as_point(x, model.dimension)
    Z, flag = attack_batch(x[None, :], model, omega, refine_steps)
    return Z[0], bool(flag[0])


def inject_noise(dataset: Dataset, spec: CorruptionSpec, rng: RngHandle) -> Dataset:
    """Independently perturb every training point; labels unchanged."""
    if spec.mode != "random":
        raise ValueError("inject_noise requires mode='random'")
    gen = rng.generator()
    delta = sample_offsets(dataset.n, dataset.dimension, spec, gen)
    return Dataset(dataset.features + delta, dataset.labels)
