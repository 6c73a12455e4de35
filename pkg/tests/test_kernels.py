import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcsort import _kernels_py as py
from mcsort import kernels

try:
    from mcsort import _kernels as cy
except ImportError:  # fallback build
    cy = None

needs_cython = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "numpy")
    assert kernels.BACKEND == ("cython" if cy is not None else "numpy")


def test_pure_python_switch():
    env = dict(os.environ, MCSORT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import mcsort.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@needs_cython
@given(st.integers(1, 4), st.integers(1, 8), st.sampled_from([0, 1, 2]), st.integers(0, 2**31))
def test_encode_rows_agree(n, rows, form, seed):
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(-1, 0, n)
    beta = alpha + rng.uniform(0.1, 2, n)
    gamma = rng.integers(1, 4, n).astype(np.int64)
    X = rng.uniform(-1.5, 2.5, (rows, n))
    a = py.encode_rows(X, alpha, beta, gamma, form)
    b = cy.encode_rows(X, alpha, beta, gamma, form)
    assert a.shape == b.shape == (rows, py.encoded_dimension(gamma, form))
    assert np.allclose(a, b, atol=1e-14, rtol=0)
    assert cy.encoded_dimension(gamma, form) == py.encoded_dimension(gamma, form)


def _refs(rng, n, q, grid=False):
    u = rng.integers(0, 6, n) / 5.0 if grid else rng.random(n)
    cls = np.concatenate([np.arange(1, q + 1), rng.integers(1, q + 1, n - q)]).astype(np.int64)
    return np.ascontiguousarray(u), cls


@needs_cython
@given(st.integers(2, 4), st.integers(4, 25), st.booleans(), st.integers(0, 2**31))
def test_scoring_kernels_agree(q, n, grid, seed):
    rng = np.random.default_rng(seed)
    u, cls = _refs(rng, n, q, grid)
    queries = np.concatenate([rng.random(7), u[:3]])  # include exact ties
    w = rng.random(n)
    assert np.allclose(py.supporter_mass(u, cls, w, q, queries), cy.supporter_mass(u, cls, w, q, queries), atol=1e-13)
    assert np.allclose(py.m3_scores(u, cls, q, queries), cy.m3_scores(u, cls, q, queries), atol=1e-13)
    K = int(rng.integers(1, 1 + np.bincount(cls)[1:].min()))
    assert np.allclose(py.m4_scores(u, cls, q, queries, K), cy.m4_scores(u, cls, q, queries, K), atol=1e-13)
