"""Linearized flow: pushforward of tangent vectors along flow lines.

The pushforward V(t) of a tangent vector obeys the variational equation
dV/dt = -A(x) V, where A(x) V is the directional derivative of the
projected gradient field along V. That derivative is taken by central
finite differences of the assembled field (step 1e-6 * max(1, |x|)) and
projected back to the tangent space; this avoids third derivatives of
the defining expressions, and the Richardson consistency test in the
suite validates the step choice.

The energy E(t) = |V|^2 / 2 satisfies dE/dt = -Hess(V, V) with the
multiplier-corrected Hessian; `check_energy_ode` measures the residual
of that identity on a computed series, and `fit_decay_rate` compares the
asymptotic decay rate of |V| against the smallest Hessian eigenvalue at
the limiting minimum.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import FlowError, NotConvergedError, RetractionError
from .flow import _CK_A, _CK_B5, _CK_ERR, FlowConfig, GradientField, Terminal, FlowStats
from .morse import hessian_quadratic_form

# Step caps giving dense enough sampling for rate fits and for the
# finite-difference energy derivative (its truncation must sit below
# the 1e-2 residual gate even where dE/dt changes sign).
DECAY_MAX_STEP = 0.2
ENERGY_MAX_STEP = 0.02

_FD_STEP = 1e-6


@dataclass
class VariationalSeries:
    """Joint samples of the flow line and its pushforward vector."""

    times: np.ndarray
    points: np.ndarray
    vectors: np.ndarray
    energies: np.ndarray
    terminal: Terminal
    stats: FlowStats
    direction: str

    def __len__(self):
        return len(self.times)

    def vector_norms(self):
        return np.linalg.norm(self.vectors, axis=1)


def _field_derivative(field, xs, vec, sign):
    """sign * A(x) vec for the list-based field, finite differenced."""
    norm = math.sqrt(sum(v * v for v in vec))
    if norm == 0.0:
        return [0.0] * len(vec)
    h = _FD_STEP * max(1.0, math.sqrt(sum(x * x for x in xs)))
    unit = [v / norm for v in vec]
    plus = field.projected_gradient([x + h * u for x, u in zip(xs, unit)])
    minus = field.projected_gradient([x - h * u for x, u in zip(xs, unit)])
    scale = sign * norm / (2.0 * h)
    return [scale * (p - q) for p, q in zip(plus, minus)]


def integrate_variational_multi(m, f, x0, initial_vectors, cfg=None,
                                direction="forward", crits=None,
                                capture=True):
    """Co-integrate the flow from x0 with several pushforward vectors.

    All vectors share the base trajectory and the adaptive step. Returns
    (times, points, vector_blocks, terminal, stats) where vector_blocks
    is a list (one array per initial vector) of per-sample pushforwards.
    With capture=False the run always lasts exactly t_max (used for
    fixed-horizon pushes, where a stationary start is legitimate).
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    cfg = cfg or FlowConfig()
    sign = -1.0 if direction == "forward" else 1.0
    field = GradientField(m, f)
    n = field.n
    crit_list = list(crits) if crits is not None else []

    x = np.asarray(x0, dtype=float)
    if not m.is_on_manifold(x):
        x = m.retract(x)
    vecs = []
    for v0 in initial_vectors:
        vec = np.asarray(getattr(v0, "vec", v0), dtype=float)
        if vec.shape != (n,):
            raise ValueError("each v0 must be an ambient vector of length n")
        tangency = np.max(np.abs(m.constraint_jacobian(x) @ vec))
        if tangency > 1e-6 * max(1.0, np.linalg.norm(vec)):
            raise ValueError("v0 is not tangent at x0")
        vecs.append(vec.tolist())
    n_vecs = len(vecs)

    xs = x.tolist()
    stats = FlowStats()

    def rhs(point, vectors):
        # The raw directional derivative of the field carries the normal
        # component that rotates V with the tangent planes; projecting it
        # here would bleed energy at every re-projection. Tangency is
        # enforced on accepted samples instead.
        base = field.projected_gradient(point)
        dx = [sign * b for b in base]
        dvs = [_field_derivative(field, point, vec, sign) for vec in vectors]
        return dx, dvs

    pg = field.projected_gradient(xs)
    gnorm = math.sqrt(sum(v * v for v in pg))

    times = [0.0]
    points = [np.array(xs)]
    blocks = [[np.array(v)] for v in vecs]

    def _capture(point, norm):
        if not capture or norm >= cfg.capture_grad_tol:
            return None
        for crit in crit_list:
            if np.linalg.norm(point - crit.location) < cfg.capture_radius:
                return Terminal("converged", crit.id)
        return Terminal("stalled")

    terminal = _capture(points[0], gnorm)
    t = 0.0
    k1 = rhs(xs, vecs)
    speed = math.sqrt(sum(v * v for v in k1[0]))
    h = min(cfg.max_step, cfg.t_max, 0.01 * (1.0 + np.linalg.norm(x)) /
            max(speed, 1e-10))
    halvings = 0

    while terminal is None:
        if t >= cfg.t_max - 1e-13:
            terminal = Terminal("max_time")
            break
        h = min(h, cfg.t_max - t, cfg.max_step)
        if h < 1e-13 * max(1.0, t):
            raise FlowError(f"step size underflow at t={t}")

        ks = [k1]
        for row in _CK_A:
            stage_x = [
                x_i + h * sum(a * k[0][i] for a, k in zip(row, ks))
                for i, x_i in enumerate(xs)
            ]
            stage_v = [
                [
                    v_i + h * sum(a * k[1][w][i] for a, k in zip(row, ks))
                    for i, v_i in enumerate(vecs[w])
                ]
                for w in range(n_vecs)
            ]
            ks.append(rhs(stage_x, stage_v))
        x_new = [
            x_i + h * sum(b * k[0][i] for b, k in zip(_CK_B5, ks))
            for i, x_i in enumerate(xs)
        ]
        v_new = [
            [
                v_i + h * sum(b * k[1][w][i] for b, k in zip(_CK_B5, ks))
                for i, v_i in enumerate(vecs[w])
            ]
            for w in range(n_vecs)
        ]
        err_scaled = 0.0
        for i in range(n):
            err = h * sum(e * k[0][i] for e, k in zip(_CK_ERR, ks))
            scale = cfg.abs_tol + cfg.rel_tol * max(abs(xs[i]), abs(x_new[i]))
            err_scaled += (err / scale) ** 2
        for w in range(n_vecs):
            for i in range(n):
                err = h * sum(e * k[1][w][i] for e, k in zip(_CK_ERR, ks))
                scale = cfg.abs_tol + cfg.rel_tol * max(
                    abs(vecs[w][i]), abs(v_new[w][i]))
                err_scaled += (err / scale) ** 2
        err_scaled = math.sqrt(err_scaled / (n * (1 + n_vecs)))

        if err_scaled > 1.0:
            stats.rejected += 1
            h *= max(cfg.min_scale, cfg.safety * err_scaled ** -0.2)
            continue

        try:
            retracted = m.retract(np.array(x_new), guard=None)
        except RetractionError:
            halvings += 1
            stats.retraction_halvings += 1
            if halvings > 40:
                raise FlowError(
                    "retraction kept failing after 40 step halvings"
                ) from None
            h *= 0.5
            continue
        halvings = 0
        drift = max(abs(c.value(x_new)) for c in field._constraints)
        stats.max_constraint_drift = max(stats.max_constraint_drift, drift)

        t += h
        xs = retracted.tolist()
        vecs = [field.project(xs, v) for v in v_new]
        stats.steps += 1
        times.append(t)
        points.append(retracted)
        for w in range(n_vecs):
            blocks[w].append(np.array(vecs[w]))
        pg = field.projected_gradient(xs)
        gnorm = math.sqrt(sum(v * v for v in pg))
        k1 = rhs(xs, vecs)
        terminal = _capture(retracted, gnorm)
        if terminal is None:
            h *= min(cfg.max_scale,
                     max(cfg.min_scale, cfg.safety * err_scaled ** -0.2))

    return (
        np.array(times),
        np.array(points),
        [np.array(b) for b in blocks],
        terminal,
        stats,
    )


def integrate_variational(m, f, x0, v0, cfg=None, direction="forward",
                          crits=None):
    """Co-integrate the flow from x0 and the pushforward of v0.

    v0 may be a TangentVector or an ambient array tangent at x0. The
    joint state shares one adaptive step, the point is retracted and the
    vector re-projected after every accepted step, and capture follows
    the same thresholds as the plain flow.
    """
    times, points, blocks, terminal, stats = integrate_variational_multi(
        m, f, x0, [v0], cfg, direction, crits
    )
    vectors = blocks[0]
    return VariationalSeries(
        times=times,
        points=points,
        vectors=vectors,
        energies=0.5 * np.sum(vectors * vectors, axis=1),
        terminal=terminal,
        stats=stats,
        direction=direction,
    )


def _centered_derivative(t, e, i):
    """d e / d t at sample i from a centered stencil on a non-uniform grid.

    Interior samples fit a quartic through the five neighbours (exact
    through fourth order, which keeps the estimate usable right next to
    sign changes of the derivative); the samples adjacent to the ends
    fall back to the three-point formula.
    """
    if 2 <= i < len(t) - 2:
        span = t[i + 2] - t[i - 2]
        s = (t[i - 2:i + 3] - t[i]) / span
        vand = np.vander(s, 5, increasing=True)
        coef = np.linalg.solve(vand, e[i - 2:i + 3])
        return coef[1] / span
    h_minus = t[i] - t[i - 1]
    h_plus = t[i + 1] - t[i]
    return (
        -e[i - 1] * h_plus / (h_minus * (h_minus + h_plus))
        + e[i] * (h_plus - h_minus) / (h_minus * h_plus)
        + e[i + 1] * h_minus / (h_plus * (h_minus + h_plus))
    )


def check_energy_ode(series, m, f, deriv_floor=1e-10):
    """Max relative residual of dE/dt against -Hess(V, V) on the series.

    dE/dt is a centered finite difference on the (non-uniform) time
    grid; samples whose derivative magnitude sits below `deriv_floor`
    are skipped. Returns 0.0 when nothing clears the floor.
    """
    if len(series) < 3:
        raise FlowError("need at least three samples for the energy check")
    worst = 0.0
    t = series.times
    e = series.energies
    for i in range(1, len(series) - 1):
        lhs = _centered_derivative(t, e, i)
        if abs(lhs) <= deriv_floor:
            continue
        rhs = -hessian_quadratic_form(m, f, series.points[i], series.vectors[i])
        denom = max(abs(lhs), abs(rhs))
        worst = max(worst, abs(lhs - rhs) / denom)
    return worst


@dataclass(frozen=True)
class DecayReport:
    """Fitted vs predicted exponential rate of the pushforward norm."""

    c_fit: float
    c_pred: float
    fit_window: tuple
    residual: float
    relative_gap: float
    limit_id: int
    n_fit_samples: int
    energy_monotone_on_window: bool


def fit_decay_rate(series, crits, window=(0.60, 0.95), min_samples=20):
    """Least-squares slope of log|V| on the tail of a converged series.

    The window covers the stated fraction of samples before capture (the
    final slice is dropped as capture-threshold noise). The prediction
    is the smallest intrinsic Hessian eigenvalue at the limiting
    minimum.
    """
    if not series.terminal.converged:
        raise NotConvergedError("series did not converge to a critical point")
    by_id = {p.id: p for p in crits}
    limit = by_id.get(series.terminal.critical_point_id)
    if limit is None:
        raise NotConvergedError("limit id missing from the critical point set")
    if limit.index != 0:
        raise NotConvergedError(
            "decay fit requires convergence to a minimum, got index "
            f"{limit.index}"
        )
    n = len(series)
    lo = int(math.floor(window[0] * n))
    hi = int(math.floor(window[1] * n))
    if hi - lo < min_samples:
        raise FlowError(
            f"fit window has {hi - lo} samples, needs {min_samples}; "
            "lower max_step or raise capture accuracy"
        )
    norms = series.vector_norms()[lo:hi]
    if np.any(norms <= 0.0):
        raise FlowError("pushforward norm vanished inside the fit window")
    ts = series.times[lo:hi]
    logs = np.log(norms)
    design = np.stack([ts, np.ones_like(ts)], axis=1)
    coef, *_ = np.linalg.lstsq(design, logs, rcond=None)
    slope, intercept = coef
    resid = logs - design @ coef
    rms = float(np.sqrt(np.mean(resid ** 2)))
    c_fit = -float(slope)
    c_pred = float(limit.eigenvalues[0])
    energies = series.energies[lo:hi]
    return DecayReport(
        c_fit=c_fit,
        c_pred=c_pred,
        fit_window=(float(ts[0]), float(ts[-1])),
        residual=rms,
        relative_gap=abs(c_fit - c_pred) / c_pred,
        limit_id=limit.id,
        n_fit_samples=int(hi - lo),
        energy_monotone_on_window=bool(np.all(np.diff(energies) <= 0.0)),
    )


def slow_component(series, crits, tol=1e-6):
    """Fraction of the final vector lying in the slow eigenspace.

    Guards the generic-direction assumption behind rate fits: a start
    vector with no component on the smallest-eigenvalue eigenspace of
    the limiting minimum decays at a faster rate and must be redrawn.
    """
    by_id = {p.id: p for p in crits}
    limit = by_id[series.terminal.critical_point_id]
    lam_min = limit.eigenvalues[0]
    slow = [
        ev.vec for lam, ev in zip(limit.eigenvalues, limit.eigenvectors)
        if lam <= lam_min + tol
    ]
    v_end = series.vectors[-1]
    norm = np.linalg.norm(v_end)
    if norm == 0.0:
        return 0.0
    proj = sum(float(np.dot(v_end, s)) ** 2 for s in slow)
    return math.sqrt(proj) / norm


def run_decay(m, f, crits, cfg=None, seed=0, x0=None, v0=None,
              max_redraws=5):
    """One full decay experiment: generic start, fit, genericity guard.

    Draws a start point and tangent direction from the seed when not
    supplied, redraws the direction if its slow-eigenspace component at
    the limit falls below 1e-6, and returns (series, report).
    """
    cfg = (cfg or FlowConfig()).replace(max_step=min(
        DECAY_MAX_STEP, (cfg or FlowConfig()).max_step))
    rng = np.random.default_rng(seed)
    if x0 is None:
        x0 = m.sample_points(1, seed=rng.integers(2 ** 31))[0]
    for _ in range(max_redraws):
        vec = m.random_tangent(x0, rng) if v0 is None else np.asarray(
            getattr(v0, "vec", v0), dtype=float)
        series = integrate_variational(m, f, x0, vec, cfg, crits=crits)
        report = fit_decay_rate(series, crits)
        if v0 is not None or slow_component(series, crits) >= 1e-6:
            return series, report
    raise FlowError("could not draw a direction with a slow component")
