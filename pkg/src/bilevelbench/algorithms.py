"""Optimizers: the single-loop bilevel method and three simplified baselines.

The main optimizer (``slip_run``) warm-starts the lower-level variable by
plain SGD at frozen x, then per iteration updates, in order: the lower-level
variable by SGD, the linear-system variable by SGD on its quadratic
surrogate, the momentum buffer by an exponential moving average of the
single-sample hypergradient estimate, and the upper-level variable by a
normalized momentum step of exact length eta.

The baselines are deliberately simplified re-implementations kept for
oracle-count and convergence-shape comparison, not faithful reproductions of
the methods they are named after:

* ``masoba_run``  - identical loop, but the upper-level step is the plain
  unnormalized momentum step.
* ``double_loop_run`` - the main loop plus periodic extra lower-level SGD
  refinement at frozen x (every ``refine_interval`` upper steps, run
  ``refine_steps`` extra updates).
* ``ttsa_run`` - momentum-free, unnormalized, with polynomially decaying
  two-timescale step sizes and a single sample per oracle per iteration.

A run is strictly sequential; runs with distinct seeds share no mutable
state and may execute concurrently.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .constants import ParamSchedule
from .problem import BilevelProblem, ConfigurationError
from .samples import Sample, Stream
from .trace import Trace, TraceRecord

logger = logging.getLogger(__name__)

Vec = np.ndarray


class NumericalDivergenceError(RuntimeError):
    """An iterate became NaN/Inf; carries the partial trace and the row index."""

    def __init__(self, t: int, trace: Trace, state: "SlipState"):
        super().__init__(f"non-finite iterate at iteration {t}")
        self.t = t
        self.trace = trace
        self.state = state


@dataclass
class OracleCounter:
    """Cumulative stochastic-oracle call counts (the complexity currency)."""

    n_grad_x_F: int = 0
    n_grad_y_F: int = 0
    n_grad_y_G: int = 0
    n_hvp_xy: int = 0
    n_hvp_yy: int = 0

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.n_grad_x_F, self.n_grad_y_F, self.n_grad_y_G,
                self.n_hvp_xy, self.n_hvp_yy)

    def copy(self) -> "OracleCounter":
        return replace(self)


@dataclass
class SlipState:
    """The iterate tuple plus iteration index and call counters."""

    x: Vec
    y: Vec
    z: Vec
    m: Vec
    t: int
    calls: OracleCounter


@dataclass(frozen=True)
class IterationView:
    """Read-only per-iteration snapshot handed to metric callbacks.

    ``x``/``y``/``z`` are the values the iteration read (pre-update), ``m``
    the freshly updated momentum buffer, ``ghat`` the hypergradient estimate
    consumed by the momentum update.  Callbacks must not mutate anything.
    """

    t: int
    x: Vec
    y: Vec
    z: Vec
    m: Vec
    ghat: Vec


MetricFn = Callable[[int, Vec, Vec, Vec, Vec],
                    tuple[float | None, float | None, float | None,
                          float | None, float | None]]
HookFn = Callable[[IterationView], None]


def default_metrics(problem: BilevelProblem) -> MetricFn:
    """Metric evaluator using the analytic oracle when present."""
    analytic = problem.analytic

    def metrics(t: int, x: Vec, y: Vec, z: Vec, m_next: Vec):
        if analytic is None:
            return (None, None, None, None, None)
        ys = analytic.y_star(x)
        zs = analytic.z_star(x)
        gphi = analytic.hypergrad(x)
        return (
            float(np.linalg.norm(gphi)),
            float(np.linalg.norm(y - ys)),
            float(np.linalg.norm(z - zs)),
            float(np.linalg.norm(m_next - gphi)),
            float(problem.upper(x, ys)),
        )

    return metrics


def _as_x_sequence(x_sequence) -> Callable[[int], Vec]:
    if callable(x_sequence):
        return x_sequence
    fixed = np.asarray(x_sequence, dtype=float)
    return lambda t: fixed


def sgd_dd(problem: BilevelProblem, x_sequence, y0: Vec, alpha: float,
           n_steps: int, seed: int, *, counter_start: int = 0,
           calls: OracleCounter | None = None) -> tuple[Vec, list[float] | None]:
    """Lower-level SGD along a (possibly drifting) upper-level sequence.

    ``x_sequence`` is either a fixed vector or a callable ``t -> x_t``.
    Performs exactly ``n_steps`` updates, consuming the warm-start stream at
    counters ``counter_start .. counter_start + n_steps - 1``.  Returns the
    final iterate and, when the problem has an analytic oracle, the list of
    distances ``||y_t - y*(x_t)||`` for t = 0..n_steps.
    """
    if n_steps < 0:
        raise ConfigurationError(f"n_steps must be non-negative, got {n_steps}")
    consts = problem.constants
    if consts is not None and consts.l_g1 > 0 and alpha > 1.0 / (2.0 * consts.l_g1):
        warnings.warn(
            f"alpha={alpha:g} exceeds 1/(2*l_g1)={1.0 / (2.0 * consts.l_g1):g}; "
            "the tracking guarantees assume the smaller step", stacklevel=2)
    xs = _as_x_sequence(x_sequence)
    y = np.asarray(y0, dtype=float).copy()
    dist: list[float] | None = [] if problem.analytic is not None else None
    for t in range(n_steps):
        xt = xs(t)
        if dist is not None:
            dist.append(float(np.linalg.norm(y - problem.analytic.y_star(xt))))
        g = problem.oracle.grad_y_G(xt, y, Sample(Stream.PI_TILDE,
                                                  counter_start + t, seed))
        if calls is not None:
            calls.n_grad_y_G += 1
        y = y - alpha * g
    if dist is not None:
        dist.append(float(np.linalg.norm(y - problem.analytic.y_star(xs(n_steps)))))
    return y, dist


def update_z(z: Vec, x: Vec, y: Vec, gamma: float, s_zeta: Sample, s_xi: Sample,
             problem: BilevelProblem,
             calls: OracleCounter | None = None) -> Vec:
    """One SGD step on the quadratic surrogate whose minimizer is z*(x).

    ``z - gamma * (hvp_yy_G(x, y, z) - grad_y_F(x, y))`` with independent
    samples for the two oracles.
    """
    hz = problem.oracle.hvp_yy_G(x, y, z, s_zeta)
    gf = problem.oracle.grad_y_F(x, y, s_xi)
    if calls is not None:
        calls.n_hvp_yy += 1
        calls.n_grad_y_F += 1
    return z - gamma * (hz - gf)


def _finite(*arrays: Vec) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays)


def _run_loop(problem: BilevelProblem, schedule: ParamSchedule, x0: Vec,
              y0_init: Vec, z0: Vec, seed: int, *,
              normalize: bool,
              beta_override: float | None = None,
              alpha_fn: Callable[[int], float] | None = None,
              gamma_fn: Callable[[int], float] | None = None,
              eta_fn: Callable[[int], float] | None = None,
              refine: tuple[int, int] | None = None,
              warm_start: bool = True,
              hooks: Sequence[HookFn] | HookFn | None = None,
              metrics: MetricFn | None = None) -> tuple[SlipState, Trace]:
    """Shared driver for the main optimizer and its baselines."""
    x = np.asarray(x0, dtype=float).copy()
    y0 = np.asarray(y0_init, dtype=float).copy()
    z = np.asarray(z0, dtype=float).copy()
    if x.shape != (problem.dim_x,):
        raise ConfigurationError(
            f"x0 has shape {x.shape}, expected ({problem.dim_x},)")
    if y0.shape != (problem.dim_y,) or z.shape != (problem.dim_y,):
        raise ConfigurationError(
            f"y0/z0 must have shape ({problem.dim_y},), got {y0.shape}/{z.shape}")
    if callable(hooks):
        hooks = [hooks]
    hooks = list(hooks or [])
    if metrics is None:
        metrics = default_metrics(problem)

    calls = OracleCounter()
    warm_counter = 0
    if warm_start and schedule.T0 > 0:
        y, _ = sgd_dd(problem, x, y0, schedule.alpha_init, schedule.T0, seed,
                      calls=calls)
        warm_counter = schedule.T0
    else:
        y = y0
    m = np.zeros(problem.dim_x)
    beta = schedule.beta if beta_override is None else beta_override
    trace = Trace()

    for t in range(schedule.T):
        alpha = schedule.alpha if alpha_fn is None else alpha_fn(t)
        gamma = schedule.gamma if gamma_fn is None else gamma_fn(t)
        eta = schedule.eta if eta_fn is None else eta_fn(t)

        s_pi = Sample(Stream.PI, t, seed)
        s_zeta = Sample(Stream.ZETA, t, seed)
        s_xi = Sample(Stream.XI, t, seed)
        s_xi_p = Sample(Stream.XI_PRIME, t, seed)
        s_zeta_p = Sample(Stream.ZETA_PRIME, t, seed)

        # updates read the current (x_t, y_t, z_t); z feeds the momentum
        # update before its own refresh
        with np.errstate(over="ignore", invalid="ignore"):
            gy = problem.oracle.grad_y_G(x, y, s_pi)
            calls.n_grad_y_G += 1
            y_next = y - alpha * gy
            z_next = update_z(z, x, y, gamma, s_zeta, s_xi, problem, calls)
            gx = problem.oracle.grad_x_F(x, y, s_xi_p)
            hxy = problem.oracle.hvp_xy_G(x, y, z, s_zeta_p)
            calls.n_grad_x_F += 1
            calls.n_hvp_xy += 1
            ghat = gx - hxy
            m = beta * m + (1.0 - beta) * ghat

            norm_m = float(np.linalg.norm(m))
            if normalize:
                if norm_m == 0.0:
                    logger.info("iteration %d: zero momentum, skipping x-step", t)
                    trace.skipped_steps.append(t)
                    x_next = x
                else:
                    x_next = x - eta * (m / norm_m)
            else:
                x_next = x - eta * m

        row_metrics = metrics(t, x, y, z, m)
        trace.append(TraceRecord(t, *row_metrics, *calls.as_tuple()))
        for hook in hooks:
            hook(IterationView(t=t, x=x.copy(), y=y.copy(), z=z.copy(),
                               m=m.copy(), ghat=ghat.copy()))

        if not _finite(x_next, y_next, z_next, m):
            trace.aborted_at = t
            state = SlipState(x=x_next, y=y_next, z=z_next, m=m, t=t, calls=calls)
            raise NumericalDivergenceError(t, trace, state)

        x, y, z = x_next, y_next, z_next

        if refine is not None:
            interval, extra = refine
            if interval > 0 and extra > 0 and (t + 1) % interval == 0:
                y, _ = sgd_dd(problem, x, y, alpha, extra, seed,
                              counter_start=warm_counter, calls=calls)
                warm_counter += extra

    return SlipState(x=x, y=y, z=z, m=m, t=schedule.T, calls=calls), trace


def slip_run(problem: BilevelProblem, schedule: ParamSchedule, x0: Vec,
             y0_init: Vec, z0: Vec, seed: int,
             hooks: Sequence[HookFn] | HookFn | None = None,
             metrics: MetricFn | None = None) -> tuple[SlipState, Trace]:
    """Run the single-loop optimizer with normalized momentum upper steps.

    Every non-skipped upper-level step has length exactly ``schedule.eta``.
    Raises :class:`NumericalDivergenceError` on NaN/Inf iterates.
    """
    return _run_loop(problem, schedule, x0, y0_init, z0, seed,
                     normalize=True, hooks=hooks, metrics=metrics)


def masoba_run(problem: BilevelProblem, schedule: ParamSchedule, x0: Vec,
               y0_init: Vec, z0: Vec, seed: int,
               hooks: Sequence[HookFn] | HookFn | None = None,
               metrics: MetricFn | None = None) -> tuple[SlipState, Trace]:
    """Baseline: identical loop, unnormalized upper step ``x - eta * m``."""
    return _run_loop(problem, schedule, x0, y0_init, z0, seed,
                     normalize=False, hooks=hooks, metrics=metrics)


def double_loop_run(problem: BilevelProblem, schedule: ParamSchedule,
                    refine_interval: int, refine_steps: int, x0: Vec,
                    y0_init: Vec, z0: Vec, seed: int,
                    hooks: Sequence[HookFn] | HookFn | None = None,
                    metrics: MetricFn | None = None) -> tuple[SlipState, Trace]:
    """Baseline: periodic lower-level refinement at frozen x.

    Every ``refine_interval`` upper steps, runs ``refine_steps`` extra
    lower-level SGD updates.  With interval 1 and 0 extra steps the run is
    trace-identical to ``slip_run`` under the same seed discipline.
    """
    if refine_interval < 1:
        raise ConfigurationError(
            f"refine_interval must be >= 1, got {refine_interval}")
    if refine_steps < 0:
        raise ConfigurationError(
            f"refine_steps must be >= 0, got {refine_steps}")
    return _run_loop(problem, schedule, x0, y0_init, z0, seed,
                     normalize=True, refine=(refine_interval, refine_steps),
                     hooks=hooks, metrics=metrics)


def ttsa_run(problem: BilevelProblem, schedule: ParamSchedule, x0: Vec,
             y0_init: Vec, z0: Vec, seed: int, *,
             eta_exponent: float = 0.6, alpha_exponent: float = 0.4,
             hooks: Sequence[HookFn] | HookFn | None = None,
             metrics: MetricFn | None = None) -> tuple[SlipState, Trace]:
    """Baseline: two-timescale single-sample method.

    Momentum-free, unnormalized upper step with ``eta_t = eta * (t+1)^-0.6``;
    lower-level and linear-system steps decay as ``(t+1)^-0.4`` from
    ``schedule.alpha`` and ``schedule.gamma``.  No warm-start phase.
    """
    def eta_fn(t: int) -> float:
        return schedule.eta * (t + 1) ** (-eta_exponent)

    def alpha_fn(t: int) -> float:
        return schedule.alpha * (t + 1) ** (-alpha_exponent)

    def gamma_fn(t: int) -> float:
        return schedule.gamma * (t + 1) ** (-alpha_exponent)

    return _run_loop(problem, schedule, x0, y0_init, z0, seed,
                     normalize=False, beta_override=0.0,
                     alpha_fn=alpha_fn, gamma_fn=gamma_fn, eta_fn=eta_fn,
                     warm_start=False, hooks=hooks, metrics=metrics)
