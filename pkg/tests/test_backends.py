import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqt import _backend
from pqt import _fallback as py
from pqt.linequant import pair_lookup, quantize_lambda
from pqt.tree import lists_from_slots

compiled = _backend.BACKENDS.get("cython")
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled backend not built")


def _same(a, b):
    if isinstance(a, tuple):
        assert len(a) == len(b)
        for x, y in zip(a, b):
            _same(x, y)
    else:
        x, y = np.asarray(a), np.asarray(b)
        assert x.shape == y.shape and x.dtype == y.dtype
        assert x.tobytes() == y.tobytes()


def test_switch_backend():
    previous = _backend.name
    try:
        _backend.use("python")
        assert _backend.kernels is py
        with pytest.raises(ValueError):
            _backend.use("fortran")
    finally:
        _backend.use(previous)


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(n=st.integers(0, 60), m=st.integers(1, 9), k=st.integers(1, 12), seed=st.integers(0, 10**6))
def test_nearest_and_sq_dists(n, m, k, seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(-3, 4, size=(n, m)).astype(np.float32) * rng.uniform(0.5, 9)
    X = X.astype(np.float32)
    C = rng.integers(-3, 4, size=(k, m)).astype(np.float64)
    _same(py.nearest(X, C), compiled.nearest(X, C))
    rows = rng.integers(0, max(n, 1), size=7 if n else 0).astype(np.int64)
    y = rng.normal(size=m).astype(np.float32)
    _same(py.sq_dists(X, rows, y), compiled.sq_dists(X, rows, y))


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(n=st.integers(0, 40), p_line=st.integers(1, 4), k1=st.integers(1, 7),
       mf=st.integers(1, 4), seed=st.integers(0, 10**6), coarse=st.booleans())
def test_encode_lines(n, p_line, k1, mf, seed, coarse):
    rng = np.random.default_rng(seed)
    if coarse:  # small integer grids produce exact ties and degenerate pairs
        fine = rng.integers(0, 3, size=(p_line, k1, mf)).astype(np.float64)
        X = rng.integers(0, 3, size=(n, p_line * mf)).astype(np.float32)
    else:
        fine = rng.normal(size=(p_line, k1, mf)) * 10
        X = (rng.normal(size=(n, p_line * mf)) * 10).astype(np.float32)
    _same(py.encode_lines(X, fine), compiled.encode_lines(X, fine))


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(c=st.integers(0, 30), p_line=st.integers(1, 5), k1=st.integers(2, 9), seed=st.integers(0, 10**6))
def test_line_distances(c, p_line, k1, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0, 100, size=(p_line, k1))
    table = rng.uniform(0, 100, size=(p_line, k1, k1))
    pi, pj = pair_lookup(k1)
    pid = rng.integers(0, len(pi), size=(c, p_line))
    lam = rng.uniform(size=(c, p_line))
    _same(py.line_distances(lam, pi[pid], pj[pid], A, table),
          compiled.line_distances(lam, pi[pid], pj[pid], A, table))
    lam_q = quantize_lambda(lam)
    cand = rng.permutation(c).astype(np.int64)
    args = (cand, lam_q, pid.astype(np.uint16), pi, pj, A, table)
    _same(py.line_distances_codes(*args), compiled.line_distances_codes(*args))


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(n=st.integers(0, 200), H=st.integers(1, 40), budget=st.integers(0, 250), seed=st.integers(0, 10**6))
def test_scatter_and_gather(n, H, budget, seed):
    rng = np.random.default_rng(seed)
    slots = rng.integers(0, H, size=n).astype(np.int64)
    lists = lists_from_slots(slots, H)
    _same(py.scatter_ids(slots, lists.offsets), compiled.scatter_ids(slots, lists.offsets))
    order = rng.permutation(H).astype(np.int64)
    _same(py.gather(order, lists.offsets, lists.ids, budget),
          compiled.gather(order, lists.offsets, lists.ids, budget))


def test_gather_stops_at_budget():
    lists = lists_from_slots(np.array([0, 0, 1, 1, 1, 3]), 4)
    cand, scanned, nonempty = py.gather(np.array([1, 2, 0, 3]), lists.offsets, lists.ids, 4)
    assert cand.tolist() == [2, 3, 4, 0]
    assert (scanned, nonempty) == (3, 2)
