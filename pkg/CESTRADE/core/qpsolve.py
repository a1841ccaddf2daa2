"""
Dense convex quadratic program solver.

Problems have the form

    minimize    1/2 x'Qx + c'x
    subject to  A_eq x = b_eq,  A_in x <= b_in,  lo <= x <= hi

and are solved by a Mehrotra predictor-corrector primal-dual interior point
method followed by an active-set polish step that solves the KKT system of
the identified active constraints exactly. Also provides KKT residual
evaluation, an exhaustive grid oracle for tiny problems and a plain-text
problem dump.
"""

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .. import constants as C
from ..exceptions import InfeasibleProblemError, SolverError, ValidationError
from ..utils.logging_config import get_logger

logger = get_logger("cestrade.qpsolve")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"
UNBOUNDED = "unbounded"

ACTIVE_TOL = 1e-7
_REG = 1e-10
_STEP_FACTOR = 0.99
_DUAL_BLOWUP = 1e10
_GRID_CHUNK = 200_000


def _matrix(values, cols: int) -> np.ndarray:
    if values is None:
        return np.zeros((0, cols))
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else np.zeros((0, cols))
    return arr


def _vector(values, size: int, fill: float = 0.0) -> np.ndarray:
    if values is None:
        return np.full(size, fill)
    return np.asarray(values, dtype=float).reshape(-1)


@dataclass(eq=False)
class QpProblem:
    """
    A convex QP in minimization form.

    Bounds may be infinite. Optional labels name variables and constraint
    rows in infeasibility diagnoses and dumps; ``offset`` is a constant added
    to the objective.
    """

    Q: np.ndarray
    c: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    A_in: Optional[np.ndarray] = None
    b_in: Optional[np.ndarray] = None
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    offset: float = 0.0
    var_labels: Optional[List[str]] = None
    eq_labels: Optional[List[str]] = None
    in_labels: Optional[List[str]] = None

    def __post_init__(self):
        self.c = _vector(self.c, 0)
        n = self.c.size
        self.Q = np.asarray(self.Q, dtype=float).reshape(n, n) if n else np.zeros((0, 0))
        self.A_eq = _matrix(self.A_eq, n)
        self.b_eq = _vector(self.b_eq, self.A_eq.shape[0])
        self.A_in = _matrix(self.A_in, n)
        self.b_in = _vector(self.b_in, self.A_in.shape[0])
        self.lo = _vector(self.lo, n, -np.inf)
        self.hi = _vector(self.hi, n, np.inf)

        if self.A_eq.shape != (self.b_eq.size, n):
            raise ValidationError(
                f"equality system has shape {self.A_eq.shape} for {self.b_eq.size} rows "
                f"and {n} variables",
                field="A_eq",
            )
        if self.A_in.shape != (self.b_in.size, n):
            raise ValidationError(
                f"inequality system has shape {self.A_in.shape} for {self.b_in.size} rows "
                f"and {n} variables",
                field="A_in",
            )
        if self.lo.size != n or self.hi.size != n:
            raise ValidationError("bounds must have one entry per variable", field="bounds")

        self.var_labels = list(self.var_labels or [f"x[{i}]" for i in range(n)])
        self.eq_labels = list(self.eq_labels or [f"eq[{i}]" for i in range(self.b_eq.size)])
        self.in_labels = list(self.in_labels or [f"in[{i}]" for i in range(self.b_in.size)])

    @property
    def n(self) -> int:
        return self.c.size

    @classmethod
    def maximize(cls, P, q, **kwargs) -> "QpProblem":
        """Problem whose minimizer maximizes 1/2 x'Px + q'x + offset (P negative semidefinite)."""
        offset = kwargs.pop("offset", 0.0)
        return cls(
            Q=-np.asarray(P, dtype=float), c=-np.asarray(q, dtype=float), offset=-offset, **kwargs
        )

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.c @ x + self.offset)

    def scaled(self, gamma: float) -> "QpProblem":
        """Same feasible set with (Q, c, offset) multiplied by gamma."""
        return dataclasses.replace(
            self, Q=gamma * self.Q, c=gamma * self.c, offset=gamma * self.offset
        )

    def inequality_system(self) -> Tuple[np.ndarray, np.ndarray, List[str]]:
        """A_in stacked with the finite bound rows as G x <= h."""
        rows, rhs, labels = [self.A_in], [self.b_in], list(self.in_labels)
        eye = np.eye(self.n)
        free = self.lo != self.hi
        upper = np.flatnonzero(np.isfinite(self.hi) & free)
        lower = np.flatnonzero(np.isfinite(self.lo) & free)
        rows += [eye[upper], -eye[lower]]
        rhs += [self.hi[upper], -self.lo[lower]]
        labels += [f"{self.var_labels[i]} <= {self.hi[i]:.6g}" for i in upper]
        labels += [f"{self.var_labels[i]} >= {self.lo[i]:.6g}" for i in lower]
        return np.vstack(rows), np.concatenate(rhs), labels

    def equality_system(self) -> Tuple[np.ndarray, np.ndarray, List[str]]:
        """A_eq stacked with one row per fixed variable (lo == hi)."""
        fixed = np.flatnonzero(self.lo == self.hi)
        rows = np.vstack([self.A_eq, np.eye(self.n)[fixed]])
        rhs = np.concatenate([self.b_eq, self.lo[fixed]])
        labels = list(self.eq_labels) + [f"{self.var_labels[i]} = {self.lo[i]:.6g}" for i in fixed]
        return rows, rhs, labels


@dataclass(eq=False)
class QpSolution:
    """Solver result with KKT residuals (stationarity, primal, complementarity)."""

    x: np.ndarray
    objective: float
    status: str
    kkt_residuals: Tuple[float, float, float]
    iterations: int = 0
    polished: bool = False
    diagnosis: List[str] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def require_optimal(self, context: str = "QP") -> "QpSolution":
        """
        Return self when optimal.

        Raises:
            InfeasibleProblemError: If the problem was found infeasible
            SolverError: For any other non-optimal status
        """
        if self.status == OPTIMAL:
            return self
        if self.status == INFEASIBLE:
            raise InfeasibleProblemError(
                f"{context} has no feasible point", diagnosis=self.diagnosis, best_iterate=self.x
            )
        raise SolverError(
            f"{context} stopped with status {self.status} after {self.iterations} iterations "
            f"(KKT residuals {', '.join(f'{r:.2e}' for r in self.kkt_residuals)})",
            status=self.status,
            best_iterate=self.x,
        )


def validate_psd(Q: np.ndarray, tol: float = C.PSD_TOL) -> None:
    """
    Raises:
        ValidationError: If Q is not symmetric or has an eigenvalue below -tol (relative)
    """
    if Q.size == 0:
        return
    scale = max(1.0, float(np.max(np.abs(Q))))
    if np.max(np.abs(Q - Q.T)) > 1e-9 * scale:
        raise ValidationError("Q must be symmetric", field="Q")
    smallest = float(np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))))
    if smallest < -tol * scale:
        raise ValidationError(
            f"Q is not positive semidefinite (smallest eigenvalue {smallest:.3g})",
            field="Q",
            value=smallest,
        )


def _stationarity_multipliers(grad: np.ndarray, E: np.ndarray, G_act: np.ndarray):
    """Least-squares (y, z >= 0) minimizing ||grad + E'y + G_act'z||."""
    active = list(range(G_act.shape[0]))
    while True:
        M = np.vstack([E, G_act[active]]).T
        if M.shape[1] == 0:
            return np.zeros(E.shape[0]), np.zeros(G_act.shape[0]), grad
        coef = np.linalg.lstsq(M, -grad, rcond=None)[0]
        y = coef[: E.shape[0]]
        z_part = coef[E.shape[0]:]
        if z_part.size == 0 or np.min(z_part) >= -1e-12:
            z = np.zeros(G_act.shape[0])
            z[active] = np.maximum(z_part, 0.0)
            return y, z, grad + M @ coef
        del active[int(np.argmin(z_part))]


def kkt_residual(p: QpProblem, x, active_tol: float = ACTIVE_TOL) -> Tuple[float, float, float]:
    """
    KKT residual norms of a candidate point.

    Multipliers are fitted by least squares over the equality rows and the
    inequality rows active within ``active_tol``; inequality multipliers are
    kept non-negative by dropping the most negative one and refitting.

    Returns:
        (stationarity, primal violation, complementarity) as max-norms
    """
    x = np.asarray(x, dtype=float)
    if x.size != p.n:
        raise ValidationError(f"point has {x.size} entries, problem has {p.n}", field="x")
    G, h, _ = p.inequality_system()
    E, e, _ = p.equality_system()

    eq_violation = E @ x - e
    slack = h - G @ x
    primal = max(
        float(np.max(np.abs(eq_violation), initial=0.0)),
        float(np.max(-slack, initial=0.0)),
    )

    grad = p.Q @ x + p.c
    active = np.flatnonzero(slack <= active_tol * (1.0 + np.abs(h)))
    _, z, residual = _stationarity_multipliers(grad, E, G[active])
    stationarity = float(np.max(np.abs(residual), initial=0.0))
    complementarity = float(np.max(np.abs(z * slack[active]), initial=0.0))
    return stationarity, primal, complementarity


def _step_length(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _kkt_solve(K: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(K, rhs, rcond=None)[0]


def _initial_point(p: QpProblem, x0: Optional[np.ndarray]) -> np.ndarray:
    x = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    both = np.isfinite(p.lo) & np.isfinite(p.hi)
    x = np.where(both & ((x <= p.lo) | (x >= p.hi)), 0.5 * (p.lo + p.hi), x)
    x = np.where(~both & np.isfinite(p.lo) & (x <= p.lo), p.lo + 1.0, x)
    x = np.where(~both & np.isfinite(p.hi) & (x >= p.hi), p.hi - 1.0, x)
    return x


def _diagnose(labels: List[str], weights: np.ndarray, count: int = 5) -> List[str]:
    order = np.argsort(-np.abs(weights))[:count]
    return [labels[i] for i in order if abs(weights[i]) > 0]


def _polish(
    p: QpProblem,
    A: np.ndarray,
    b: np.ndarray,
    G: np.ndarray,
    h: np.ndarray,
    s: np.ndarray,
    z: np.ndarray,
) -> Optional[np.ndarray]:
    """Solve the equality KKT system of the active set {z > s}; None if rejected."""
    active = np.flatnonzero(z > s)
    n, me, ma = p.n, A.shape[0], active.size
    G_a = G[active]
    K = np.block(
        [
            [p.Q, A.T, G_a.T],
            [A, np.zeros((me, me)), np.zeros((me, ma))],
            [G_a, np.zeros((ma, me)), np.zeros((ma, ma))],
        ]
    )
    rhs = np.concatenate([-p.c, b, h[active]])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    x_pol = sol[:n]
    z_pol = sol[n + me:]

    feasible = np.all(G @ x_pol <= h + 1e-9 * (1.0 + np.abs(h)))
    eq_ok = np.all(np.abs(A @ x_pol - b) <= 1e-9 * (1.0 + np.abs(b)))
    if not (feasible and eq_ok) or (ma and np.min(z_pol) < -1e-9 * (1.0 + np.max(np.abs(z_pol)))):
        return None
    return x_pol


def solve_qp(
    p: QpProblem,
    tol: float = C.QP_TOL,
    max_iter: int = C.QP_MAX_ITER,
    x0=None,
    polish: bool = True,
) -> QpSolution:
    """
    Solve a convex QP.

    Args:
        p: Problem in minimization form
        tol: Relative tolerance on the scaled KKT residuals
        max_iter: Interior point iteration limit
        x0: Optional initial-point hint
        polish: Whether to refine the result on its active set

    Returns:
        Solution with status optimal, infeasible, unbounded or max_iter

    Raises:
        ValidationError: If Q is not positive semidefinite
    """
    validate_psd(p.Q)
    n = p.n

    crossed = np.flatnonzero(p.lo > p.hi)
    if crossed.size:
        diagnosis = [
            f"{p.var_labels[i]}: lower {p.lo[i]:.6g} > upper {p.hi[i]:.6g}" for i in crossed
        ]
        x = _initial_point(p, x0)
        return QpSolution(x, p.objective(x), INFEASIBLE, kkt_residual(p, x), diagnosis=diagnosis)

    G, h, in_labels = p.inequality_system()
    A, b, eq_labels = p.equality_system()
    m, me = G.shape[0], A.shape[0]

    if m == 0:
        return _solve_equality_only(p, A, b, eq_labels, tol)

    x = _initial_point(p, x0)
    s = np.maximum(h - G @ x, 1.0)
    z = np.ones(m)
    y = np.zeros(me)

    c_scale = 1.0 + float(np.max(np.abs(p.c), initial=0.0))
    p_scale = 1.0 + max(
        float(np.max(np.abs(b), initial=0.0)), float(np.max(np.abs(h), initial=0.0))
    )

    status = MAX_ITER
    best = (np.inf, x, s, z)
    stalled = 0
    iteration = 0
    for iteration in range(1, max_iter + 1):
        r_d = p.Q @ x + p.c + A.T @ y + G.T @ z
        r_p = A @ x - b
        r_g = G @ x + s - h
        mu = float(s @ z) / m

        rd_n = float(np.max(np.abs(r_d), initial=0.0)) / c_scale
        rp_n = max(float(np.max(np.abs(r_p), initial=0.0)), float(np.max(np.abs(r_g)))) / p_scale
        merit = max(rd_n, rp_n, mu)
        if merit < best[0]:
            best = (merit, x.copy(), s.copy(), z.copy())
        logger.debug(f"IPM iter {iteration}: dual {rd_n:.2e} primal {rp_n:.2e} mu {mu:.2e}")

        if rd_n <= tol and rp_n <= tol and mu <= tol:
            status = OPTIMAL
            break

        dual_size = max(float(np.max(np.abs(z))), float(np.max(np.abs(y), initial=0.0)))
        if iteration > 10 and rp_n > 1e-6 and dual_size > _DUAL_BLOWUP * c_scale:
            status = INFEASIBLE
            break

        W = z / s
        H_mat = p.Q + G.T @ (W[:, None] * G) + _REG * np.eye(n)
        K = np.block([[H_mat, A.T], [A, -_REG * np.eye(me)]])

        def direction(r_sz):
            rhs = np.concatenate([-r_d - G.T @ (W * r_g - r_sz / s), -r_p])
            sol = _kkt_solve(K, rhs)
            dx, dy = sol[:n], sol[n:]
            dz = W * (G @ dx + r_g) - r_sz / s
            ds = -(r_sz + s * dz) / z
            return dx, dy, dz, ds

        dx_a, dy_a, dz_a, ds_a = direction(s * z)
        alpha_aff = min(_step_length(s, ds_a), _step_length(z, dz_a))
        mu_aff = float((s + alpha_aff * ds_a) @ (z + alpha_aff * dz_a)) / m
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        dx, dy, dz, ds = direction(s * z + ds_a * dz_a - sigma * mu)
        alpha = min(1.0, _STEP_FACTOR * min(_step_length(s, ds), _step_length(z, dz)))

        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds

        stalled = stalled + 1 if alpha < 1e-8 else 0
        if stalled >= 5:
            break

    if status != OPTIMAL:
        _, x_best, s_best, z_best = best
        r_g = G @ x_best - h
        if status == MAX_ITER and max(
            float(np.max(np.abs(A @ x_best - b), initial=0.0)), float(np.max(r_g, initial=0.0))
        ) / p_scale > 1e-6:
            status = INFEASIBLE
        if status != INFEASIBLE:
            x, s, z = x_best, s_best, z_best

    if status == INFEASIBLE:
        weights = np.concatenate([y, z])
        diagnosis = _diagnose(eq_labels + in_labels, weights)
        logger.warning(
            f"QP infeasible after {iteration} iterations; binding: {', '.join(diagnosis)}"
        )
        return QpSolution(
            x, p.objective(x), INFEASIBLE, kkt_residual(p, x), iteration, diagnosis=diagnosis
        )

    residuals = kkt_residual(p, x)
    polished = False
    if polish:
        x_pol = _polish(p, A, b, G, h, s, z)
        if x_pol is not None:
            res_pol = kkt_residual(p, x_pol)
            if max(res_pol) <= max(max(residuals), tol):
                x, residuals, polished = x_pol, res_pol, True

    if status != OPTIMAL and polished and max(residuals) <= tol * c_scale:
        status = OPTIMAL
    if status != OPTIMAL:
        logger.warning(
            f"QP stopped with status {status} after {iteration} iterations "
            f"(KKT residuals {residuals[0]:.2e}, {residuals[1]:.2e}, {residuals[2]:.2e})"
        )
    return QpSolution(x, p.objective(x), status, residuals, iteration, polished)


def _solve_equality_only(
    p: QpProblem, A: np.ndarray, b: np.ndarray, eq_labels: List[str], tol: float
) -> QpSolution:
    me = A.shape[0]
    K = np.block([[p.Q, A.T], [A, np.zeros((me, me))]])
    rhs = np.concatenate([-p.c, b])
    x = np.linalg.lstsq(K, rhs, rcond=None)[0][: p.n]
    residuals = kkt_residual(p, x)
    scale = 1.0 + float(np.max(np.abs(rhs), initial=0.0))
    if residuals[1] > tol * scale:
        status = INFEASIBLE
    elif residuals[0] > tol * scale:
        status = UNBOUNDED
    else:
        status = OPTIMAL
    if status != OPTIMAL:
        logger.warning(f"Equality-constrained QP is {status}")
    diagnosis = eq_labels if status == INFEASIBLE else []
    return QpSolution(x, p.objective(x), status, residuals, 1, diagnosis=diagnosis)


def brute_force_grid(p: QpProblem, resolution: float, max_points: int = 50_000_000):
    """
    Exhaustive grid search over the bounding box of a tiny problem.

    Grid points keep equality rows within resolution * sum|row| / 2 and
    inequality rows exactly.

    Returns:
        (best point, objective value)

    Raises:
        ValidationError: If a variable is unbounded, n > 6 or the grid is too large
        InfeasibleProblemError: If no grid point is feasible
    """
    if p.n > 6:
        raise ValidationError("grid search supports at most 6 variables", field="n", value=p.n)
    if not (np.all(np.isfinite(p.lo)) and np.all(np.isfinite(p.hi))):
        raise ValidationError("grid search needs every variable bounded", field="bounds")
    if resolution <= 0:
        raise ValidationError("resolution must be > 0", field="resolution", value=resolution)

    counts = [int(np.ceil((hi - lo) / resolution)) + 1 for lo, hi in zip(p.lo, p.hi)]
    axes = [np.linspace(lo, hi, k) for lo, hi, k in zip(p.lo, p.hi, counts)]
    total = int(np.prod(counts))
    if total > max_points:
        raise ValidationError(
            f"grid of {total} points is too large", field="resolution", value=resolution
        )

    band = resolution * np.abs(p.A_eq).sum(axis=1) / 2.0 + 1e-12
    best_value, best_point = np.inf, None
    for start in range(0, total, _GRID_CHUNK):
        idx = np.unravel_index(np.arange(start, min(start + _GRID_CHUNK, total)), counts)
        X = np.column_stack([axis[i] for axis, i in zip(axes, idx)])
        ok = np.ones(X.shape[0], dtype=bool)
        if p.A_eq.shape[0]:
            ok &= np.all(np.abs(X @ p.A_eq.T - p.b_eq) <= band, axis=1)
        if p.A_in.shape[0]:
            ok &= np.all(X @ p.A_in.T <= p.b_in + 1e-12, axis=1)
        if not np.any(ok):
            continue
        X = X[ok]
        values = 0.5 * np.sum((X @ p.Q) * X, axis=1) + X @ p.c + p.offset
        k = int(np.argmin(values))
        if values[k] < best_value:
            best_value, best_point = float(values[k]), X[k].copy()

    if best_point is None:
        raise InfeasibleProblemError(
            "no feasible grid point", diagnosis=list(p.eq_labels) + list(p.in_labels)
        )
    return best_point, best_value


def dump_problem(p: QpProblem, path) -> Path:
    """
    Write a problem as labelled plain-text blocks.

    Each block starts with ``# <name> <rows> <cols>`` followed by one
    whitespace-separated row per line: Q, c, A_eq, b_eq, A_in, b_in, lo, hi.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blocks = [
        ("Q", p.Q),
        ("c", p.c.reshape(1, -1)),
        ("A_eq", p.A_eq),
        ("b_eq", p.b_eq.reshape(1, -1)),
        ("A_in", p.A_in),
        ("b_in", p.b_in.reshape(1, -1)),
        ("lo", p.lo.reshape(1, -1)),
        ("hi", p.hi.reshape(1, -1)),
    ]
    with open(path, "w", encoding="utf-8") as f:
        for name, matrix in blocks:
            f.write(f"# {name} {matrix.shape[0]} {matrix.shape[1]}\n")
            for row in matrix:
                f.write(" ".join(repr(float(v)) for v in row) + "\n")
    logger.debug(f"Dumped QP with {p.n} variables to {path}")
    return path


def load_problem(path) -> QpProblem:
    """Read a problem written by :func:`dump_problem`."""
    blocks = {}
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.strip() for line in f]
    i = 0
    while i < len(lines):
        if not lines[i].startswith("#"):
            i += 1
            continue
        _, name, rows, cols = lines[i].split()
        rows, cols = int(rows), int(cols)
        data = [[float(v) for v in lines[i + 1 + r].split()] for r in range(rows)]
        blocks[name] = np.array(data, dtype=float).reshape(rows, cols)
        i += 1 + rows
    return QpProblem(
        Q=blocks["Q"],
        c=blocks["c"].ravel(),
        A_eq=blocks["A_eq"],
        b_eq=blocks["b_eq"].ravel(),
        A_in=blocks["A_in"],
        b_in=blocks["b_in"].ravel(),
        lo=blocks["lo"].ravel(),
        hi=blocks["hi"].ravel(),
    )
