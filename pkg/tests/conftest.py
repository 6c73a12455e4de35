import numpy as np
import pytest
from hypothesis import settings

from mcsort.classify import ScoredReferenceSet
from mcsort.dataset import CriterionScale, PerformanceTable
from mcsort.encoding import Layout, encode_table

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

E_VALUES = [0.10, 0.15, 0.20, 0.25, 0.30, 0.40, 0.55, 0.60, 0.70, 0.80, 0.90]
E1_CLASSES = [1, 2, 1, 2, 3, 2, 1, 1, 2, 3, 3]
E2_CLASSES = [1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3]
B_VALUE = 0.50


@pytest.fixture
def e1():
    return ScoredReferenceSet.from_arrays(E_VALUES, E1_CLASSES, 3)


@pytest.fixture
def e2():
    return ScoredReferenceSet.from_arrays(E_VALUES, E2_CLASSES, 3)


def make_table(X, y, q=None, names=None):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    return PerformanceTable(
        alternatives=tuple(f"a{i}" for i in range(len(y))),
        performances=X,
        labels=y,
        q=q or int(y.max()),
        criterion_names=tuple(names or (f"g{j + 1}" for j in range(X.shape[1]))),
    )


def synthetic_table(n_alt=60, n_crit=3, q=3, noise=0.05, seed=0):
    """Noisy monotone-additive ground truth cut into q equal-frequency classes."""
    rng = np.random.default_rng(seed)
    X = rng.random((n_alt, n_crit))
    w = rng.dirichlet(np.ones(n_crit))
    s = np.sqrt(X) @ w + noise * rng.standard_normal(n_alt)
    y = np.digitize(s, np.quantile(s, np.arange(1, q) / q)) + 1
    return make_table(X, y, q)


@pytest.fixture
def toy_separable():
    # two criteria, gamma 1, classes {(0,0)} < {(1,1)}
    return make_table([[0.0, 0.0], [1.0, 1.0]], [1, 2])


@pytest.fixture
def synth():
    return synthetic_table()


def random_instance(rng, n_max=4, q_max=3, m_max=12):
    """Random encoded reference set: n <= 4 criteria, gamma 2, q <= 3 classes, <= 12 alternatives."""
    n = int(rng.integers(1, n_max + 1))
    q = int(rng.integers(2, q_max + 1))
    m = int(rng.integers(q, m_max + 1))
    labels = np.concatenate([np.arange(1, q + 1), rng.integers(1, q + 1, m - q)])
    X = rng.random((m, n)) + 0.3 * labels[:, None] * rng.random()
    scales = [CriterionScale(0, X[:, j].max() + 0.1, gamma=2) for j in range(n)]
    return encode_table(scales, X), labels, q


def feasible_weights(rng, gammas, form, structure):
    """Random nonnegative weights, marginal steps raised until every monotonicity row holds."""
    from mcsort.learner import monotonicity_rows
    lay = Layout(gammas, form)
    u = rng.random(lay.dimension) * (rng.random(lay.dimension) < 0.7)
    u[lay.n_marginal:] *= 3.0
    keep = np.zeros(lay.dimension, dtype=bool)
    keep[:lay.n_marginal] = True
    for (j, k), s in zip(structure.pairs, structure.signs):
        p0, m0, size = lay.pair_offsets[(j, k)]
        start = p0 if s > 0 else m0
        keep[start:start + size] = True
    u[~keep] = 0.0
    for pair in structure.pairs:
        for row in monotonicity_rows(lay, pair):
            lack = -(row @ u)
            if lack > 0:
                step = np.flatnonzero((row == 1) & (np.arange(lay.dimension) < lay.n_marginal))[0]
                u[step] += lack + rng.random() * 0.01
    return lay, u


# ----------------------------------------------------------------- suite-wide QP audit and acceptance report

SOLVE_LOG = []          # (tag, status, max KKT residual, violation) of every P2/P3/P4 solve
ACCEPTANCE_LINES = {}   # criterion number -> report line


def _recording(solve):
    def wrapper(p, options=None):
        sol = solve(p, options)
        if getattr(p, "tag", "") in ("P2", "P3", "P4"):
            SOLVE_LOG.append((p.tag, sol.status, sol.kkt.max(), p.violation(sol.x)))
        return sol
    wrapper.__wrapped__ = solve
    return wrapper


def audit_solves(log):
    """Criterion-4 check: optimal solves meet the contract; the rest are certified infeasible."""
    optimal = [r for r in log if r[1] == "optimal"]
    bad = [r for r in optimal if r[2] > 1e-6 or r[3] > 1e-8]
    other = [r for r in log if r[1] not in ("optimal", "infeasible")]
    worst_kkt = max((r[2] for r in optimal), default=0.0)
    worst_viol = max((r[3] for r in optimal), default=0.0)
    return len(optimal), len(log) - len(optimal) - len(other), bad, other, worst_kkt, worst_viol


def pytest_configure(config):
    from mcsort import choquet, learner, qpsolve
    w = _recording(qpsolve.solve)
    for mod in (qpsolve, learner, choquet):
        mod.solve = w


def pytest_sessionfinish(session, exitstatus):
    n_opt, n_inf, bad, other, _, _ = audit_solves(SOLVE_LOG)
    if (bad or other) and session.exitstatus == 0:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES and not SOLVE_LOG:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        tr.write_line(ACCEPTANCE_LINES[k])
    if SOLVE_LOG:
        n_opt, n_inf, bad, other, kkt, viol = audit_solves(SOLVE_LOG)
        verdict = "PASS" if not bad and not other else "FAIL"
        tr.write_line(f"[{verdict}] 4* suite-wide QP audit: {n_opt} optimal P2/P3/P4 solves "
                      f"(max KKT {kkt:.2e} <= 1e-6, max violation {viol:.2e} <= 1e-8), "
                      f"{n_inf} certified infeasible, {len(other)} other")
