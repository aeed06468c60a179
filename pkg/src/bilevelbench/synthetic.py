"""Synthetic problem instances with known constants and analytic ground truth.

Three families:

* a strongly-convex quadratic lower level with quadratic upper level, fully
  closed form (the workhorse for verification),
* the same lower level under a ``cosh`` upper level whose curvature grows
  with the gradient norm (a relaxed-smoothness stress case),
* a data-hypercleaning instance: per-sample weights on a corrupted logistic
  training set, scored on a clean validation set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .constants import SmoothnessConstants, derive_constants
from .problem import (AnalyticOracle, BilevelProblem, ConfigurationError,
                      DeterministicOracle, NoiseModel, StochasticOracle)

Vec = np.ndarray


@dataclass(frozen=True)
class QuadraticSpec:
    """g(x,y) = y'Ay/2 - y'(Bx + c),  f(x,y) = ||y - e||^2/2 + r*||x||^2/2.

    ``A`` must be symmetric positive definite.  ``x_box_radius`` declares the
    compact box ``[-R, R]^dim_x`` over which the bound on ``||grad_y f||`` at
    the lower-level optimum is reported (the global supremum is infinite).
    """

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    e: np.ndarray
    r: float = 0.0
    x_box_radius: float = 1.0

    def __post_init__(self) -> None:
        if self.r < 0:
            raise ConfigurationError(f"r must be non-negative, got {self.r}")
        if self.x_box_radius <= 0:
            raise ConfigurationError("x_box_radius must be positive")

    @property
    def dim_y(self) -> int:
        return self.A.shape[0]

    @property
    def dim_x(self) -> int:
        return self.B.shape[1]


def _check_spd(a: np.ndarray) -> np.ndarray:
    """Return the eigenvalues of a symmetric positive-definite matrix."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError(f"A must be square, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-12):
        raise ConfigurationError("A must be symmetric")
    eigs = np.linalg.eigvalsh(a)
    if eigs[0] <= 0:
        raise ConfigurationError(
            f"A must be positive definite; eigenvalues {np.array2string(eigs, precision=6)}")
    return eigs


def _quadratic_constants(spec: QuadraticSpec, noise: NoiseModel,
                         L_x0: float, L_x1: float) -> SmoothnessConstants:
    eigs = _check_spd(spec.A)
    mu, l_g1 = float(eigs[0]), float(eigs[-1])
    b_norm = float(np.linalg.norm(spec.B, 2))
    if b_norm > l_g1 + 1e-12:
        raise ConfigurationError(
            f"||B|| = {b_norm:g} exceeds the declared lower-level smoothness "
            f"l_g1 = {l_g1:g}; rescale the coupling")
    a_inv = np.linalg.inv(spec.A)
    # sup over the declared box of ||y*(x) - e||, via the operator-norm bound
    l_f0 = (float(np.linalg.norm(a_inv @ spec.B, 2)) * spec.x_box_radius
            * math.sqrt(spec.dim_x)
            + float(np.linalg.norm(a_inv @ spec.c - spec.e)))
    return derive_constants(SmoothnessConstants(
        mu=mu, l_g1=l_g1, l_g2=0.0, l_f0=l_f0,
        L_x0=L_x0, L_x1=L_x1, L_y0=1.0, L_y1=0.0,
        sigma_f1=noise.sigma_f1, sigma_g1=noise.sigma_g1,
        sigma_g2=noise.sigma_g2, sigma_z=noise.sigma_z,
    ))


def _quadratic_lower_parts(spec: QuadraticSpec):
    a, b, c = spec.A, spec.B, spec.c
    a_inv = np.linalg.inv(a)

    def lower(x: Vec, y: Vec) -> float:
        return float(0.5 * y @ (a @ y) - y @ (b @ x + c))

    def grad_y_g(x: Vec, y: Vec) -> Vec:
        return a @ y - (b @ x + c)

    def hvp_yy_g(x: Vec, y: Vec, z: Vec) -> Vec:
        return a @ z

    def hvp_xy_g(x: Vec, y: Vec, z: Vec) -> Vec:
        return -(b.T @ z)

    def hess_yy_g(x: Vec, y: Vec) -> np.ndarray:
        return a.copy()

    def y_star(x: Vec) -> Vec:
        return a_inv @ (b @ x + c)

    def z_star(x: Vec) -> Vec:
        return a_inv @ (y_star(x) - spec.e)

    return lower, grad_y_g, hvp_yy_g, hvp_xy_g, hess_yy_g, y_star, z_star


def make_quadratic(spec: QuadraticSpec, noise: NoiseModel = NoiseModel.noiseless(),
                   *, declared_L_x1: float = 0.0,
                   name: str = "quadratic") -> BilevelProblem:
    """Build the quadratic instance with full analytic ground truth.

    Closed forms: ``y*(x) = A^-1 (Bx + c)``, ``z*(x) = A^-1 (y*(x) - e)``,
    hypergradient ``r x + B' z*(x)``.  Declared constants: ``mu`` and
    ``l_g1`` are the extreme eigenvalues of A.  ``declared_L_x1`` may be set
    above the true value 0 to certify the instance under a nonzero
    gradient-growth coefficient (any such value is a valid upper bound); the
    warm-start thresholds are finite only then.
    """
    lower, grad_y_g, hvp_yy_g, hvp_xy_g, hess_yy_g, y_star, z_star = (
        _quadratic_lower_parts(spec))
    consts = _quadratic_constants(spec, noise, L_x0=spec.r, L_x1=declared_L_x1)
    e, r, b = spec.e, spec.r, spec.B

    def upper(x: Vec, y: Vec) -> float:
        return float(0.5 * np.sum((y - e) ** 2) + 0.5 * r * np.sum(x ** 2))

    def grad_x_f(x: Vec, y: Vec) -> Vec:
        return r * x

    def grad_y_f(x: Vec, y: Vec) -> Vec:
        return y - e

    def hypergrad(x: Vec) -> Vec:
        return r * x + b.T @ z_star(x)

    det = DeterministicOracle(grad_x_f, grad_y_f, grad_y_g, hvp_xy_g,
                              hvp_yy_g, hess_yy_g)
    return BilevelProblem(
        dim_x=spec.dim_x, dim_y=spec.dim_y, upper=upper, lower=lower,
        det=det, oracle=StochasticOracle(det, noise),
        analytic=AnalyticOracle(y_star, z_star, hypergrad),
        constants=consts, name=name,
        metadata={"kind": "quadratic", "x_box_radius": spec.x_box_radius},
    )


def q2_spec() -> QuadraticSpec:
    """The pinned 2x2 benchmark instance: A = 2I, B = I, c = 0, e = 1, r = 1."""
    return QuadraticSpec(A=2.0 * np.eye(2), B=np.eye(2), c=np.zeros(2),
                         e=np.ones(2), r=1.0)


def make_q2(noise: NoiseModel = NoiseModel.noiseless()) -> BilevelProblem:
    """The shipped Q2 instance; declares L_x1 = 1 so warm-start bounds bite."""
    return make_quadratic(q2_spec(), noise, declared_L_x1=1.0, name="q2")


def random_quadratic_spec(dim_x: int, dim_y: int, seed: int, *,
                          mu: float = 1.0, l_g1: float = 2.0,
                          r: float = 1.0) -> QuadraticSpec:
    """A random spec with lower-level eigenvalues spread over [mu, l_g1]."""
    if not 0 < mu <= l_g1:
        raise ConfigurationError(f"need 0 < mu <= l_g1, got ({mu}, {l_g1})")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim_y, dim_y)))
    if dim_y == 1:
        eigs = np.array([mu])
    else:
        eigs = np.concatenate([[mu], rng.uniform(mu, l_g1, size=dim_y - 2), [l_g1]]) \
            if dim_y > 2 else np.array([mu, l_g1])
    a = q @ np.diag(eigs) @ q.T
    a = 0.5 * (a + a.T)
    b = rng.standard_normal((dim_y, dim_x))
    bn = np.linalg.norm(b, 2)
    if bn > 0:
        b *= 0.5 * l_g1 / bn
    return QuadraticSpec(A=a, B=b, c=rng.standard_normal(dim_y),
                         e=rng.standard_normal(dim_y), r=r)


def random_quadratic(dim_x: int, dim_y: int, seed: int, *,
                     mu: float = 1.0, l_g1: float = 2.0, r: float = 1.0,
                     noise: NoiseModel = NoiseModel.noiseless()) -> BilevelProblem:
    spec = random_quadratic_spec(dim_x, dim_y, seed, mu=mu, l_g1=l_g1, r=r)
    return make_quadratic(spec, noise, name=f"quadratic-{seed}")


@dataclass(frozen=True)
class UnboundedSmoothSpec:
    """Upper level sum_i cosh(a*x_i) - dim_x + ||y - e||^2/2 over a quadratic core.

    The upper-level curvature grows linearly with the gradient norm, so the
    instance exercises the relaxed-smoothness regime.
    """

    a: float
    core: QuadraticSpec

    def __post_init__(self) -> None:
        if self.a <= 0:
            raise ConfigurationError(f"growth rate a must be positive, got {self.a}")


def make_unbounded_smooth(spec: UnboundedSmoothSpec,
                          noise: NoiseModel = NoiseModel.noiseless(),
                          name: str = "unbounded") -> BilevelProblem:
    """Build the cosh-upper-level instance with analytic ground truth.

    Evaluations with ``max|x_i| > 700/a`` raise OverflowError before cosh
    overflows double precision.
    """
    core = spec.core
    lower, grad_y_g, hvp_yy_g, hvp_xy_g, hess_yy_g, y_star, z_star = (
        _quadratic_lower_parts(core))
    a_rate = spec.a
    x_max = 700.0 / a_rate
    e, b = core.e, core.B

    def _guard(x: Vec) -> None:
        m = float(np.max(np.abs(x))) if x.size else 0.0
        if m > x_max:
            raise OverflowError(
                f"|x| up to {m:g} exceeds the cosh evaluation range {x_max:g}")

    def upper(x: Vec, y: Vec) -> float:
        _guard(x)
        return float(np.sum(np.cosh(a_rate * x)) - x.shape[0]
                     + 0.5 * np.sum((y - e) ** 2))

    def grad_x_f(x: Vec, y: Vec) -> Vec:
        _guard(x)
        return a_rate * np.sinh(a_rate * x)

    def grad_y_f(x: Vec, y: Vec) -> Vec:
        return y - e

    def hypergrad(x: Vec) -> Vec:
        _guard(x)
        return a_rate * np.sinh(a_rate * x) + b.T @ z_star(x)

    base = _quadratic_constants(core, noise, L_x0=a_rate ** 2, L_x1=a_rate)
    det = DeterministicOracle(grad_x_f, grad_y_f, grad_y_g, hvp_xy_g,
                              hvp_yy_g, hess_yy_g)
    return BilevelProblem(
        dim_x=core.dim_x, dim_y=core.dim_y, upper=upper, lower=lower,
        det=det, oracle=StochasticOracle(det, noise),
        analytic=AnalyticOracle(y_star, z_star, hypergrad),
        constants=base, name=name,
        metadata={"kind": "unbounded", "a": a_rate, "x_max": x_max},
    )


def sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


@dataclass(frozen=True)
class HypercleanSpec:
    """Synthetic data-hypercleaning instance.

    Draws near-separable logistic data, flips exactly
    ``floor(corruption_rate * n_train)`` training labels chosen by a seeded
    shuffle, and weighs each training sample by ``sigmoid(x_i)`` in the
    regularized lower-level loss.  The upper level is the unweighted loss on
    the clean validation set.
    """

    n_train: int
    n_val: int
    feature_dim: int
    corruption_rate: float
    reg: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.corruption_rate <= 1.0:
            raise ConfigurationError(
                f"corruption_rate must lie in [0, 1], got {self.corruption_rate}")
        if self.reg <= 0:
            raise ConfigurationError(f"reg must be positive, got {self.reg}")
        if min(self.n_train, self.n_val, self.feature_dim) < 1:
            raise ConfigurationError("n_train, n_val and feature_dim must be positive")


def _hyperclean_data(spec: HypercleanSpec):
    rng = np.random.default_rng(spec.seed)
    w = rng.standard_normal(spec.feature_dim)
    w /= np.linalg.norm(w)
    feats_tr = rng.standard_normal((spec.n_train, spec.feature_dim))
    feats_val = rng.standard_normal((spec.n_val, spec.feature_dim))
    lab_tr = np.where(feats_tr @ w + 0.1 * rng.standard_normal(spec.n_train) > 0,
                      1.0, -1.0)
    lab_val = np.where(feats_val @ w + 0.1 * rng.standard_normal(spec.n_val) > 0,
                       1.0, -1.0)
    # floor(p * n) flips; the epsilon shields exact products from FP dust
    n_flip = int(spec.corruption_rate * spec.n_train + 1e-9)
    corrupted = np.sort(rng.permutation(spec.n_train)[:n_flip])
    lab_tr[corrupted] *= -1.0
    return feats_tr, lab_tr, feats_val, lab_val, corrupted


def make_hyperclean(spec: HypercleanSpec,
                    noise: NoiseModel = NoiseModel.noiseless(),
                    name: str = "hyperclean") -> BilevelProblem:
    """Build the hypercleaning instance.

    There is no closed-form lower-level minimizer; the analytic oracle is
    backed by the high-precision deterministic solvers (tolerance 1e-10).
    The per-sample weights live in dimension ``n_train`` and are meant to be
    initialized at 1.0.
    """
    feats_tr, lab_tr, feats_val, lab_val, corrupted = _hyperclean_data(spec)
    n_tr, lam = spec.n_train, spec.reg

    def _margins(y: Vec) -> Vec:
        return lab_tr * (feats_tr @ y)

    def lower(x: Vec, y: Vec) -> float:
        losses = np.logaddexp(0.0, -_margins(y))
        return float(sigmoid(x) @ losses / n_tr + lam * np.sum(y ** 2))

    def upper(x: Vec, y: Vec) -> float:
        return float(np.mean(np.logaddexp(0.0, -lab_val * (feats_val @ y))))

    def grad_y_g(x: Vec, y: Vec) -> Vec:
        s = sigmoid(-_margins(y))
        return -(feats_tr.T @ (sigmoid(x) * lab_tr * s)) / n_tr + 2.0 * lam * y

    def hvp_yy_g(x: Vec, y: Vec, z: Vec) -> Vec:
        m = _margins(y)
        w = sigmoid(m) * sigmoid(-m)
        return (feats_tr.T @ (sigmoid(x) * w * (feats_tr @ z))) / n_tr + 2.0 * lam * z

    def hess_yy_g(x: Vec, y: Vec) -> np.ndarray:
        m = _margins(y)
        w = sigmoid(x) * sigmoid(m) * sigmoid(-m)
        return (feats_tr.T * w) @ feats_tr / n_tr + 2.0 * lam * np.eye(spec.feature_dim)

    def hvp_xy_g(x: Vec, y: Vec, z: Vec) -> Vec:
        s = sigmoid(-_margins(y))
        sx = sigmoid(x)
        return sx * (1.0 - sx) * (-(lab_tr * s) * (feats_tr @ z)) / n_tr

    def grad_x_f(x: Vec, y: Vec) -> Vec:
        return np.zeros(n_tr)

    def grad_y_f(x: Vec, y: Vec) -> Vec:
        s = sigmoid(-lab_val * (feats_val @ y))
        return -(feats_val.T @ (lab_val * s)) / spec.n_val

    tr_norms = np.linalg.norm(feats_tr, axis=1)
    val_norms = np.linalg.norm(feats_val, axis=1)
    consts = derive_constants(SmoothnessConstants(
        mu=2.0 * lam,
        l_g1=0.25 * float(np.mean(tr_norms ** 2)) + 2.0 * lam,
        # third-derivative bound of the logistic loss is 1/(6*sqrt(3))
        l_g2=float(np.mean(tr_norms ** 3)) / (6.0 * math.sqrt(3.0))
        + 0.0625 * float(np.mean(tr_norms ** 2)),
        l_f0=float(np.mean(val_norms)),
        L_x0=0.0, L_x1=0.0,
        L_y0=0.25 * float(np.mean(val_norms ** 2)), L_y1=0.0,
        sigma_f1=noise.sigma_f1, sigma_g1=noise.sigma_g1,
        sigma_g2=noise.sigma_g2, sigma_z=noise.sigma_z,
    ))

    det = DeterministicOracle(grad_x_f, grad_y_f, grad_y_g, hvp_xy_g,
                              hvp_yy_g, hess_yy_g)
    base = BilevelProblem(
        dim_x=n_tr, dim_y=spec.feature_dim, upper=upper, lower=lower,
        det=det, oracle=StochasticOracle(det, noise),
        analytic=None, constants=consts, name=name,
        # per-sample weights start at 1.0; model parameters at zero
        metadata={"kind": "hyperclean", "corrupted_indices": corrupted,
                  "x0_default": 1.0, "y0_default": 0.0},
    )

    # Analytic oracle backed by the deterministic solvers; memoized on the
    # query point because y*, z* and the hypergradient share the inner solve.
    from . import verify  # deferred: verify consumes this module's instances

    settings = verify.SolverSettings(tol=1e-10, max_iters=200,
                                     method=verify.SolverMethod.NEWTON)
    cache: dict[bytes, tuple[Vec, Vec]] = {}

    def _solve(x: Vec) -> tuple[Vec, Vec]:
        key = np.asarray(x, dtype=float).tobytes()
        if key not in cache:
            ys = verify.inner_solve_exact(base, x, settings)
            zs = verify.solve_linear_system_exact(base, x, ys, settings)
            if len(cache) > 8:
                cache.clear()
            cache[key] = (ys, zs)
        return cache[key]

    def y_star(x: Vec) -> Vec:
        return _solve(x)[0].copy()

    def z_star(x: Vec) -> Vec:
        return _solve(x)[1].copy()

    def hypergrad(x: Vec) -> Vec:
        ys, zs = _solve(x)
        return grad_x_f(x, ys) - hvp_xy_g(x, ys, zs)

    return replace(base, analytic=AnalyticOracle(y_star, z_star, hypergrad))
