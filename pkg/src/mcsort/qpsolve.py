"""Dense convex QP solver: primal-dual interior point with an active-set polish.

Problems have the form::

    minimize    0.5 x'Px + c'x
    subject to  A_ineq x >= b_ineq
                A_eq x    = b_eq
                x         >= lb        (entries of lb may be -inf)

The interior-point phase uses Mehrotra's predictor-corrector on the reduced
augmented system. Its approximate solution is then polished: constraints
whose multiplier dominates their slack are treated as active and the
resulting equality-constrained KKT system is solved directly. The polished
point is kept only when it is feasible with nonnegative multipliers, which is
what makes LP-like problems land on vertices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max-iterations"


class QpDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class QpProblem:
    P: np.ndarray
    c: np.ndarray
    A_ineq: np.ndarray = None
    b_ineq: np.ndarray = None
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    lb: np.ndarray = None
    # modeled objective = scale * assembled objective; metadata for callers only
    scale: float = 1.0
    # which model the problem was assembled for ("P2", "P3", "P4"); informational
    tag: str = ""

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size
        if P.shape != (n, n):
            raise QpDimensionError(f"P has shape {P.shape}, expected ({n}, {n})")
        if not np.allclose(P, P.T, atol=1e-12, rtol=1e-10):
            raise ValueError("P must be symmetric")

        def rows(A, b, name):
            if A is None:
                return np.zeros((0, n)), np.zeros(0)
            A = np.asarray(A, dtype=float).reshape(-1, n) if np.size(A) else np.zeros((0, n))
            b = np.asarray(b, dtype=float).ravel()
            if A.shape[0] != b.size:
                raise QpDimensionError(f"{name}: {A.shape[0]} rows but {b.size} right-hand sides")
            return A, b

        A_i, b_i = rows(self.A_ineq, self.b_ineq, "inequalities")
        A_e, b_e = rows(self.A_eq, self.b_eq, "equalities")
        lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).ravel()
        if lb.size != n:
            raise QpDimensionError(f"lb has {lb.size} entries, expected {n}")
        for name, val in (("P", 0.5 * (P + P.T)), ("c", c), ("A_ineq", A_i), ("b_ineq", b_i),
                          ("A_eq", A_e), ("b_eq", b_e), ("lb", lb)):
            object.__setattr__(self, name, val)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_cons(self) -> int:
        return self.A_ineq.shape[0] + self.A_eq.shape[0] + int(np.isfinite(self.lb).sum())

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.P @ x + self.c @ x)

    def violation(self, x) -> float:
        """Largest constraint violation (sup-norm) at ``x``."""
        x = np.asarray(x, dtype=float)
        parts = [0.0]
        if self.A_ineq.shape[0]:
            parts.append(float(np.max(self.b_ineq - self.A_ineq @ x)))
        if self.A_eq.shape[0]:
            parts.append(float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        fin = np.isfinite(self.lb)
        if fin.any():
            parts.append(float(np.max(self.lb[fin] - x[fin])))
        return max(parts)


@dataclass(frozen=True)
class KktResiduals:
    stationarity: float
    primal: float
    dual: float
    complementarity: float

    def max(self) -> float:
        return max(self.stationarity, self.primal, self.dual, self.complementarity)


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    status: str
    objective: float
    kkt: KktResiduals
    lam: np.ndarray = field(default=None, repr=False)
    nu: np.ndarray = field(default=None, repr=False)
    mu_lb: np.ndarray = field(default=None, repr=False)
    iterations: int = 0
    polished: bool = False

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-8
    kkt_tol: float = 1e-6
    max_iter: int = None
    polish: bool = True


def kkt_residuals(p: QpProblem, x, lam=None, nu=None, mu_lb=None) -> KktResiduals:
    """Sup-norm KKT residuals of ``x`` with multipliers for inequalities, equalities and bounds."""
    x = np.asarray(x, dtype=float)
    lam = np.zeros(p.A_ineq.shape[0]) if lam is None else np.asarray(lam, dtype=float)
    nu = np.zeros(p.A_eq.shape[0]) if nu is None else np.asarray(nu, dtype=float)
    mu_lb = np.zeros(p.n_vars) if mu_lb is None else np.asarray(mu_lb, dtype=float)
    fin = np.isfinite(p.lb)
    grad = p.P @ x + p.c - p.A_ineq.T @ lam - p.A_eq.T @ nu - mu_lb
    stat = float(np.max(np.abs(grad))) if grad.size else 0.0
    dual = max(0.0, float(np.max(-lam, initial=0.0)), float(np.max(-mu_lb[fin], initial=0.0)))
    # multipliers on infinite bounds must vanish; count them as dual infeasibility
    dual = max(dual, float(np.max(np.abs(mu_lb[~fin]), initial=0.0)))
    slack = p.A_ineq @ x - p.b_ineq
    comp = max(float(np.max(np.abs(lam * slack), initial=0.0)),
               float(np.max(np.abs(mu_lb[fin] * (x[fin] - p.lb[fin])), initial=0.0)))
    return KktResiduals(stat, p.violation(x), dual, comp)


def _independent_rows(E, f, tol=1e-10):
    """Greedy Gram-Schmidt selection of linearly independent equality rows.

    Returns the kept row indices and the largest inconsistency among the
    dropped rows (nonzero means the equalities contradict each other).
    """
    keep, basis, coef_rows = [], [], []
    worst = 0.0
    for i, row in enumerate(E):
        r = row.copy()
        comb = np.zeros(len(basis))
        for b_idx, q in enumerate(basis):
            comb[b_idx] = q @ r
            r = r - comb[b_idx] * q
        nrm = np.linalg.norm(r)
        if nrm > tol * max(1.0, np.linalg.norm(row)):
            basis.append(r / nrm)
            keep.append(i)
        else:
            # express row as a combination of kept rows and compare right-hand sides
            if keep:
                sol, *_ = np.linalg.lstsq(E[keep].T, row, rcond=None)
                worst = max(worst, abs(sol @ f[keep] - f[i]))
            else:
                worst = max(worst, abs(f[i]))
    return keep, worst


class _Std:
    """Internal form: G x >= h (inequalities and finite bounds), E x = f."""

    def __init__(self, p: QpProblem):
        self.p = p
        n = p.n_vars
        self.fin = np.flatnonzero(np.isfinite(p.lb))
        bound_rows = np.zeros((self.fin.size, n))
        bound_rows[np.arange(self.fin.size), self.fin] = 1.0
        self.G = np.vstack([p.A_ineq, bound_rows])
        self.h = np.concatenate([p.b_ineq, p.lb[self.fin]])
        self.m_ineq = p.A_ineq.shape[0]
        keep, self.eq_conflict = _independent_rows(p.A_eq, p.b_eq)
        self.eq_keep = np.array(keep, dtype=int)
        self.E = p.A_eq[self.eq_keep]
        self.f = p.b_eq[self.eq_keep]

    def split(self, x, z, y):
        p = self.p
        lam = z[:self.m_ineq].copy()
        mu_lb = np.zeros(p.n_vars)
        mu_lb[self.fin] = z[self.m_ineq:]
        nu = np.zeros(p.A_eq.shape[0])
        nu[self.eq_keep] = y
        return lam, nu, mu_lb


def _solve_kkt(H, E, r1, r2, reg=1e-10):
    # primal/dual regularization makes the step a proximal one; no refinement
    # against the unregularized matrix, which is singular for free variables
    # without curvature
    n, me = H.shape[0], E.shape[0]
    K = np.zeros((n + me, n + me))
    K[:n, :n] = H + reg * np.eye(n)
    K[:n, n:] = E.T
    K[n:, :n] = E
    K[n:, n:] = -reg * np.eye(me)
    rhs = np.concatenate([r1, r2])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def _max_step(v, dv):
    neg = dv < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _interior_point(std: _Std, opts: SolverOptions, max_iter: int):
    p = std.p
    P, c, G, h, E, f = p.P, p.c, std.G, std.h, std.E, std.f
    n, m = p.n_vars, G.shape[0]
    # least-squares-ish start
    x, w = _solve_kkt(P + G.T @ G, E, -c + G.T @ h, f)
    y = -w
    s = G @ x - h
    s = np.where(s > 1.0, s, 1.0)
    z = np.ones(m)
    scale = 1.0 + max(np.max(np.abs(c), initial=0.0), np.max(np.abs(P), initial=0.0))
    best = None
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        rd = P @ x + c - G.T @ z - E.T @ y
        rp = G @ x - s - h
        re = E @ x - f
        mu = float(s @ z / m) if m else 0.0
        res = max(np.max(np.abs(rd), initial=0.0) / scale,
                  np.max(np.abs(rp), initial=0.0), np.max(np.abs(re), initial=0.0))
        merit = max(res, mu)
        if best is None or merit < best[0]:
            if best is None or merit < 0.5 * best[0]:
                stall = 0
            best = (merit, x.copy(), s.copy(), z.copy(), y.copy())
        else:
            stall += 1
        if res < 1e-9 and mu < 1e-10:
            break
        if stall > 25 or np.max(z, initial=0.0) > 1e14:
            break
        W = z / s
        H = P + G.T @ (W[:, None] * G)

        def direction(rc):
            r1 = -rd - G.T @ ((rc + z * rp) / s)
            dx, w = _solve_kkt(H, E, r1, -re)
            dy = -w
            ds = G @ dx + rp
            dz = -(rc + z * ds) / s
            return dx, dy, ds, dz

        # predictor
        dx, dy, ds, dz = direction(s * z)
        a_aff = min(_max_step(s, ds), _max_step(z, dz))
        if m:
            mu_aff = float((s + a_aff * ds) @ (z + a_aff * dz) / m)
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            dx, dy, ds, dz = direction(s * z + ds * dz - sigma * mu)
        alpha = 0.99 * min(_max_step(s, ds), _max_step(z, dz))
        alpha = min(alpha, 1.0)
        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        z = z + alpha * dz
        s = np.maximum(s, 1e-300)
        z = np.maximum(z, 1e-300)
    # later iterates can degrade once the barrier is exhausted; hand back the best one
    _, x, s, z, y = best
    return x, s, z, y, it


def _polish(std: _Std, x, s, z):
    """Solve the KKT system of the guessed active set; None when the guess fails."""
    p = std.p
    G, h, E, f = std.G, std.h, std.E, std.f
    active = np.flatnonzero(z > s)
    A = np.vstack([E, G[active]])
    b = np.concatenate([f, h[active]])
    n, ma = p.n_vars, A.shape[0]
    K = np.zeros((n + ma, n + ma))
    K[:n, :n] = p.P
    K[:n, n:] = -A.T
    K[n:, :n] = A
    rhs = np.concatenate([-p.c, b])
    # equilibrate, then refine: P entries can be many orders larger than the rows of A
    d = 1.0 / np.sqrt(np.maximum(np.max(np.abs(K), axis=1), 1e-300))
    Ks = d[:, None] * K * d[None, :]
    sol = d * np.linalg.lstsq(Ks, d * rhs, rcond=None)[0]
    for _ in range(3):
        sol = sol + d * np.linalg.lstsq(Ks, d * (rhs - K @ sol), rcond=None)[0]
    xp, mult = sol[:n], sol[n:]
    y = mult[:E.shape[0]]
    z_act = mult[E.shape[0]:]
    if z_act.size and z_act.min() < -1e-9 * (1 + np.max(np.abs(z_act))):
        return None
    zp = np.zeros_like(z)
    zp[active] = np.maximum(z_act, 0.0)
    return xp, zp, y


def _phase_one_gap(std: _Std) -> float:
    """Optimal total violation of the constraints; > 0 certifies infeasibility."""
    p = std.p
    n = p.n_vars
    G, h = std.G, std.h
    E, f = p.A_eq, p.b_eq
    m, me = G.shape[0], E.shape[0]
    nv = n + 1 + 2 * me  # x, t, e+, e-
    A_i = np.zeros((m, nv))
    A_i[:, :n] = G
    A_i[:, n] = 1.0
    A_e = np.zeros((me, nv))
    A_e[:, :n] = E
    A_e[:, n + 1:n + 1 + me] = np.eye(me)
    A_e[:, n + 1 + me:] = -np.eye(me)
    lb = np.full(nv, -np.inf)
    lb[n:] = 0.0
    cost = np.zeros(nv)
    cost[n:] = 1.0
    aux = QpProblem(P=1e-10 * np.eye(nv), c=cost, A_ineq=A_i, b_ineq=h, A_eq=A_e, b_eq=f, lb=lb)
    sol = _solve_core(aux, SolverOptions(), _phase_one=False)
    return float(cost @ sol.x)


def _solve_core(p: QpProblem, opts: SolverOptions, _phase_one: bool = True) -> QpSolution:
    max_iter = opts.max_iter or 50 * (p.n_vars + p.n_cons)
    std = _Std(p)
    n = p.n_vars

    def package(x, z, y, status, it, polished):
        lam, nu, mu_lb = std.split(x, z, y)
        kkt = kkt_residuals(p, x, lam, nu, mu_lb)
        return QpSolution(x=x, status=status, objective=p.objective(x), kkt=kkt,
                          lam=lam, nu=nu, mu_lb=mu_lb, iterations=it, polished=polished)

    if std.eq_conflict > opts.feas_tol:
        x = np.zeros(n)
        return package(x, np.zeros(std.G.shape[0]), np.zeros(std.E.shape[0]), INFEASIBLE, 0, False)

    x, s, z, y, it = _interior_point(std, opts, max_iter)

    def acceptable(sol):
        return sol.kkt.max() <= opts.kkt_tol and sol.kkt.primal <= opts.feas_tol

    candidate = package(x, z, y, MAX_ITER, it, False)
    if opts.polish:
        pol = _polish(std, x, s, z)
        if pol is not None:
            polished = package(pol[0], pol[1], pol[2], MAX_ITER, it, True)
            if polished.kkt.primal <= opts.feas_tol and (
                acceptable(polished) or polished.kkt.max() < candidate.kkt.max()
            ):
                candidate = polished
    if acceptable(candidate):
        return QpSolution(**{**candidate.__dict__, "status": OPTIMAL})
    if _phase_one and _phase_one_gap(std) > opts.feas_tol:
        return QpSolution(**{**candidate.__dict__, "status": INFEASIBLE})
    return candidate


def _singleton_fixings(p: QpProblem):
    """Variables pinned by equality rows with a single nonzero: {var: (row, value)}."""
    fixed = {}
    for r, row in enumerate(p.A_eq):
        nz = np.flatnonzero(row)
        if nz.size == 1:
            i = int(nz[0])
            fixed.setdefault(i, (r, p.b_eq[r] / row[i]))
    return fixed


def solve(p: QpProblem, options: SolverOptions = None) -> QpSolution:
    """Solve a convex QP.

    Variables pinned by single-variable equality rows are eliminated before
    the interior-point phase (a pinned variable sitting on its bound leaves
    no interior, which stalls the barrier), and their multipliers are
    recovered afterwards.

    Parameters
    ----------
    p : QpProblem
    options : SolverOptions, optional
        Tolerances and iteration limit. The default limit is
        ``50 * (n_vars + n_cons)``.

    Returns
    -------
    QpSolution
        ``status`` is ``"optimal"`` only when every KKT residual is within
        ``kkt_tol`` and the constraint violation within ``feas_tol``.
    """
    opts = options or SolverOptions()
    fixed = _singleton_fixings(p)
    if not fixed:
        return _solve_core(p, opts)

    n = p.n_vars
    fix_idx = np.array(sorted(fixed), dtype=int)
    x_fix = np.array([fixed[i][1] for i in fix_idx])
    free = np.setdiff1d(np.arange(n), fix_idx)
    x = np.zeros(n)
    x[fix_idx] = x_fix

    def result(status, x, lam, nu, mu_lb, it=0, polished=False):
        kkt = kkt_residuals(p, x, lam, nu, mu_lb)
        return QpSolution(x=x, status=status, objective=p.objective(x), kkt=kkt, lam=lam, nu=nu,
                          mu_lb=mu_lb, iterations=it, polished=polished)

    zeros = (np.zeros(p.A_ineq.shape[0]), np.zeros(p.A_eq.shape[0]), np.zeros(n))
    # rows that lose every variable must already hold
    b_i = p.b_ineq - p.A_ineq[:, fix_idx] @ x_fix
    b_e = p.b_eq - p.A_eq[:, fix_idx] @ x_fix
    A_i, A_e = p.A_ineq[:, free], p.A_eq[:, free]
    keep_i = np.any(A_i != 0, axis=1)
    keep_e = np.any(A_e != 0, axis=1)
    if (np.any(b_i[~keep_i] > opts.feas_tol) or np.any(np.abs(b_e[~keep_e]) > opts.feas_tol)
            or np.any(x_fix < p.lb[fix_idx] - opts.feas_tol)):
        return result(INFEASIBLE, x, *zeros)

    if free.size == 0:
        sol = None
        lam, nu, mu_lb = zeros
        lam, nu, mu_lb = lam.copy(), nu.copy(), mu_lb.copy()
    else:
        sub = QpProblem(P=p.P[np.ix_(free, free)], c=p.c[free] + p.P[np.ix_(free, fix_idx)] @ x_fix,
                        A_ineq=A_i[keep_i], b_ineq=b_i[keep_i], A_eq=A_e[keep_e], b_eq=b_e[keep_e],
                        lb=p.lb[free])
        sol = _solve_core(sub, opts)
        x[free] = sol.x
        lam = np.zeros(p.A_ineq.shape[0])
        lam[keep_i] = sol.lam
        nu = np.zeros(p.A_eq.shape[0])
        nu[keep_e] = sol.nu
        mu_lb = np.zeros(n)
        mu_lb[free] = sol.mu_lb
    # the pinning row of each fixed variable absorbs its stationarity residual
    grad = p.P @ x + p.c - p.A_ineq.T @ lam - p.A_eq.T @ nu
    for i in fix_idx:
        r = fixed[i][0]
        nu[r] += grad[i] / p.A_eq[r, i]
    if sol is None:
        out = result(MAX_ITER, x, lam, nu, mu_lb)
        ok = out.kkt.max() <= opts.kkt_tol and out.kkt.primal <= opts.feas_tol
        return QpSolution(**{**out.__dict__, "status": OPTIMAL if ok else INFEASIBLE})
    out = result(sol.status, x, lam, nu, mu_lb, sol.iterations, sol.polished)
    if out.status == OPTIMAL and not (out.kkt.max() <= opts.kkt_tol and out.kkt.primal <= opts.feas_tol):
        out = QpSolution(**{**out.__dict__, "status": MAX_ITER})
    return out
