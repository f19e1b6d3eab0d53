import numpy as np
import pytest

from dscov import _backend, _pykernels
from dscov.graph import build_clique_tree, path_of_cliques
from dscov.local import SINGULAR_RTOL
from dscov.synthetic import random_doubly_sparse

BACKENDS = _backend.available_backends()
needs_compiled = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")


@pytest.fixture
def instance():
    rng = np.random.default_rng(9)
    t = build_clique_tree(path_of_cliques(6, 5, 2))
    m = random_doubly_sparse(t, rng)
    x = rng.standard_normal(m.shape)
    return t, m, 0.5 * (x + x.T)


@pytest.mark.parametrize("name", BACKENDS)
def test_backend_matches_dense(name, instance):
    t, m, _ = instance
    out, logdet, status = _backend.get_kernels(name).local_inverse(m, *t.blocks(), SINGULAR_RTOL)
    assert not status.any()
    inv = np.linalg.inv(m)
    np.testing.assert_allclose(out, inv, atol=1e-11 * np.abs(inv).max())
    assert logdet == pytest.approx(np.linalg.slogdet(m)[1], rel=1e-12)


@needs_compiled
def test_backends_agree(instance):
    t, m, x = instance
    py = _backend.get_kernels("python")
    cy = _backend.get_kernels("cython")
    a = py.local_inverse(m, *t.blocks(), SINGULAR_RTOL)
    b = cy.local_inverse(m, *t.blocks(), SINGULAR_RTOL)
    np.testing.assert_allclose(a[0], b[0], rtol=0, atol=1e-12 * np.abs(a[0]).max())
    assert a[1] == pytest.approx(b[1], rel=1e-13)
    np.testing.assert_array_equal(a[2], b[2])
    sa, _ = py.sandwich(m, x, *t.blocks(), SINGULAR_RTOL)
    sb, _ = cy.sandwich(m, x, *t.blocks(), SINGULAR_RTOL)
    np.testing.assert_allclose(sa, sb, rtol=0, atol=1e-12 * np.abs(sa).max())


@pytest.mark.parametrize("name", BACKENDS)
def test_sandwich_definition(name, instance):
    t, m, x = instance
    idx, ptr, sign = t.blocks()
    ref = np.zeros_like(m)
    for b in range(len(ptr) - 1):
        v = idx[ptr[b]:ptr[b + 1]]
        k = np.linalg.inv(m[np.ix_(v, v)])
        ref[np.ix_(v, v)] += sign[b] * k @ x[np.ix_(v, v)] @ k
    out, _ = _backend.get_kernels(name).sandwich(m, x, idx, ptr, sign, SINGULAR_RTOL)
    np.testing.assert_allclose(out, ref, atol=1e-12 * np.abs(ref).max())


@pytest.mark.parametrize("name", BACKENDS)
def test_status_codes(name):
    k = _backend.get_kernels(name)
    idx = np.array([0, 1, 0, 1, 0, 1], dtype=np.int64)
    ptr = np.array([0, 2], dtype=np.int64)
    sign = np.array([1.0])
    spd = np.array([[2.0, 1.0], [1.0, 2.0]])
    indef = np.array([[1.0, 2.0], [2.0, 1.0]])
    sing = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert k.local_inverse(spd, idx, ptr, sign, SINGULAR_RTOL)[2][0] == 0
    out, _, st = k.local_inverse(indef, idx, ptr, sign, SINGULAR_RTOL)
    assert st[0] == 1
    np.testing.assert_allclose(out, np.linalg.inv(indef), atol=1e-15)
    assert k.local_inverse(sing, idx, ptr, sign, SINGULAR_RTOL)[2][0] == 2
    assert k.local_inverse(np.zeros((2, 2)), idx, ptr, sign, SINGULAR_RTOL)[2][0] == 2


@pytest.mark.parametrize("name", BACKENDS)
def test_repeated_calls_are_bitwise_identical(name, instance):
    t, m, _ = instance
    k = _backend.get_kernels(name)
    a = k.local_inverse(m, *t.blocks(), SINGULAR_RTOL)[0]
    b = k.local_inverse(m, *t.blocks(), SINGULAR_RTOL)[0]
    assert np.array_equal(a, b)


def test_backend_selection():
    assert _backend.get_kernels("python") is _pykernels
    with pytest.raises(ValueError):
        _backend.get_kernels("fortran")
    assert _backend.BACKEND in BACKENDS


def test_pure_python_switch():
    import os
    import subprocess
    import sys

    env = dict(os.environ, DSCOV_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import dscov; print(dscov.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
