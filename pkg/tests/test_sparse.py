import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spconv import sparse
from spconv.sparse import CSC, CSR, SparseError, Triplets


def random_triplets(rng, rows, cols, nnz):
    flat = rng.choice(rows * cols, size=nnz, replace=False)
    r, c = np.divmod(flat, cols)
    return Triplets.from_arrays(rows, cols, r, c, rng.standard_normal(nnz))


@st.composite
def triplet_sets(draw, max_dim=50, max_density=0.3):
    rows = draw(st.integers(1, max_dim))
    cols = draw(st.integers(1, max_dim))
    nnz = draw(st.integers(0, int(rows * cols * max_density)))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_triplets(np.random.default_rng(seed), rows, cols, nnz)


def test_compile_identity_pattern():
    t = Triplets(2, 2)
    t.add(0, 0, 1.0)
    t.add(1, 1, 1.0)
    a = sparse.compile(t, CSR)
    assert a.indptr.tolist() == [0, 1, 2]
    assert a.indices.tolist() == [0, 1]
    assert a.data.tolist() == [1.0, 1.0]


def test_compile_empty():
    a = sparse.compile(Triplets(3, 3), CSR)
    assert a.indptr.tolist() == [0, 0, 0, 0]
    assert a.nnz == 0


def test_compile_round_trip_both_layouts(rng):
    t = random_triplets(rng, 8, 5, 12)
    scratch = np.zeros((8, 5))
    for r, c, v in zip(t.row_idx, t.col_idx, t.values):
        scratch[r, c] = v
    for layout in (CSR, CSC):
        a = sparse.compile(t, layout)
        assert set(a.entries()) == t.entry_set()
        np.testing.assert_array_equal(a.to_dense(), scratch)


def test_compile_rejects_duplicates():
    t = Triplets(3, 3)
    t.add(0, 1, 1.0)
    t.add(2, 2, 1.0)
    t.add(0, 1, 5.0)
    with pytest.raises(SparseError, match=r"duplicate coordinate \(0, 1\)"):
        sparse.compile(t)


@pytest.mark.parametrize("row,col", [(3, 0), (0, 4), (-1, 0)])
def test_compile_rejects_out_of_range(row, col):
    t = Triplets(3, 4)
    t.add(row, col, 1.0)
    with pytest.raises(SparseError, match="out of range"):
        sparse.compile(t)


def test_triplets_need_positive_shape():
    with pytest.raises(SparseError):
        Triplets(0, 3)


def test_constructor_validates_structure():
    with pytest.raises(SparseError, match="strictly increasing"):
        sparse.SparseMatrix(CSR, (1, 3), [0, 2], [2, 1], [1.0, 1.0])
    with pytest.raises(SparseError, match="non-decreasing"):
        sparse.SparseMatrix(CSR, (2, 3), [0, 2, 1], [0, 1], [1.0, 1.0])
    with pytest.raises(SparseError, match="end at nnz"):
        sparse.SparseMatrix(CSR, (2, 3), [0, 1, 1], [0, 1], [1.0, 1.0])


def test_compiled_arrays_are_read_only(rng):
    a = sparse.compile(random_triplets(rng, 4, 4, 5))
    with pytest.raises(ValueError):
        a.data[0] = 3.0


@given(triplet_sets())
@settings(max_examples=60, deadline=None)
def test_round_trip_property(t):
    dense = t.to_dense()
    for layout in (CSR, CSC):
        a = sparse.compile(t, layout)
        np.testing.assert_array_equal(a.to_dense(), dense)
        ptr = a.indptr
        assert ptr[0] == 0 and ptr[-1] == a.nnz and np.all(np.diff(ptr) >= 0)


def test_spmv_identity():
    np.testing.assert_array_equal(sparse.spmv(sparse.identity(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


def test_spmv_empty_matrix():
    for layout in (CSR, CSC):
        a = sparse.compile(Triplets(2, 4), layout)
        np.testing.assert_array_equal(sparse.spmv(a, np.ones(4)), [0.0, 0.0])


def test_spmv_matches_dense(rng):
    t = random_triplets(rng, 6, 6, 10)
    x = rng.standard_normal(6)
    expected = t.to_dense() @ x
    for layout in (CSR, CSC):
        np.testing.assert_allclose(sparse.spmv(sparse.compile(t, layout), x), expected, rtol=0, atol=1e-12)


def test_spmv_dimension_mismatch():
    with pytest.raises(sparse.DimensionError) as info:
        sparse.spmv(sparse.identity(3), np.ones(4))
    assert info.value.expected == 3 and info.value.got == 4


@given(triplet_sets(), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_spmv_layouts_agree(t, seed):
    x = np.random.default_rng(seed).standard_normal(t.cols)
    y_csr = sparse.spmv(sparse.compile(t, CSR), x)
    y_csc = sparse.spmv(sparse.compile(t, CSC), x)
    np.testing.assert_allclose(y_csr, y_csc, rtol=0, atol=1e-12)


def test_spmv_parallel_path_matches_serial(rng):
    t = random_triplets(rng, 40, 30, 200)
    x = rng.standard_normal(30)
    serial = {lay: sparse.spmv(sparse.compile(t, lay), x) for lay in (CSR, CSC)}
    previous = sparse.set_num_threads(4)
    try:
        for lay in (CSR, CSC):
            np.testing.assert_allclose(sparse.spmv(sparse.compile(t, lay), x), serial[lay], rtol=0, atol=1e-12)
    finally:
        sparse.set_num_threads(previous)


def test_spgemm_identity_left_and_right(rng):
    b = sparse.compile(random_triplets(rng, 5, 7, 9))
    assert sparse.spgemm(sparse.identity(5), b).structurally_equal(b)
    assert sparse.spgemm(b, sparse.identity(7)).structurally_equal(b)


def test_spgemm_matches_dense(rng):
    a = random_triplets(rng, 5, 7, 12)
    b = random_triplets(rng, 7, 4, 10)
    c = sparse.spgemm(sparse.compile(a), sparse.compile(b, CSC))
    assert c.shape == (5, 4)
    np.testing.assert_allclose(c.to_dense(), a.to_dense() @ b.to_dense(), rtol=0, atol=1e-12)


def test_spgemm_drops_exact_cancellation():
    a = sparse.from_dense([[1.0, 1.0]])
    b = sparse.from_dense([[2.0], [-2.0]])
    c = sparse.spgemm(a, b)
    assert c.shape == (1, 1) and c.nnz == 0


def test_spgemm_dimension_mismatch():
    with pytest.raises(sparse.DimensionError):
        sparse.spgemm(sparse.identity(3), sparse.identity(4))


@given(st.integers(1, 50), st.integers(1, 50), st.integers(1, 50), st.floats(0.0, 0.3), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_spgemm_property(m, k, n, density, seed):
    rng = np.random.default_rng(seed)
    a = random_triplets(rng, m, k, int(m * k * density))
    b = random_triplets(rng, k, n, int(k * n * density))
    c = sparse.spgemm(sparse.compile(a), sparse.compile(b))
    np.testing.assert_allclose(c.to_dense(), a.to_dense() @ b.to_dense(), rtol=0, atol=1e-12)


def test_hstack_with_empty_block():
    out = sparse.hstack_blocks([sparse.identity(2), sparse.zeros(2, 3)])
    assert out.shape == (2, 5)
    assert [(r, c) for r, c, _ in out.entries()] == [(0, 0), (1, 1)]


def test_vstack_preserves_order():
    top = sparse.from_dense([[1.0, 2.0]])
    bottom = sparse.from_dense([[3.0, 4.0]])
    np.testing.assert_array_equal(sparse.vstack_blocks([top, bottom]).to_dense(), [[1, 2], [3, 4]])


def test_stack_matches_dense_concatenation(rng):
    blocks = [random_triplets(rng, 4, c, c) for c in (3, 1, 5)]
    out = sparse.hstack_blocks([sparse.compile(b, CSC) for b in blocks])
    np.testing.assert_array_equal(out.to_dense(), np.hstack([b.to_dense() for b in blocks]))
    assert out.nnz == sum(b.nnz for b in blocks)
    blocks = [random_triplets(rng, r, 3, r) for r in (2, 6)]
    out = sparse.vstack_blocks([sparse.compile(b) for b in blocks])
    np.testing.assert_array_equal(out.to_dense(), np.vstack([b.to_dense() for b in blocks]))


def test_stack_rejects_ragged_blocks():
    with pytest.raises(SparseError, match="block 2"):
        sparse.hstack_blocks([sparse.identity(2), sparse.zeros(2, 1), sparse.zeros(3, 1)])
    with pytest.raises(SparseError, match="block 1"):
        sparse.vstack_blocks([sparse.identity(2), sparse.zeros(1, 3)])


@given(st.lists(triplet_sets(max_dim=10), min_size=1, max_size=5))
@settings(max_examples=40, deadline=None)
def test_hstack_nnz_is_sum(parts):
    rows = parts[0].rows
    blocks = [sparse.compile(Triplets.from_arrays(rows, p.cols, *_clip_rows(p, rows))) for p in parts]
    assert sparse.hstack_blocks(blocks).nnz == sum(b.nnz for b in blocks)


def _clip_rows(t, rows):
    r, c, v = t.arrays()
    keep = r < rows
    return r[keep], c[keep], v[keep]


def test_prune_drops_explicit_zeros():
    a = sparse.compile(Triplets.from_arrays(2, 3, [0, 0, 1], [0, 2, 1], [0.0, 2.0, 0.0]))
    p = sparse.prune(a)
    assert p.nnz == 1 and p.indptr.tolist() == [0, 1, 1]
    np.testing.assert_array_equal(p.to_dense(), a.to_dense())


def test_transpose_view(rng):
    t = random_triplets(rng, 4, 6, 7)
    a = sparse.compile(t)
    np.testing.assert_array_equal(a.T.to_dense(), t.to_dense().T)
    assert a.T.layout == CSC


def test_text_format_round_trip(rng):
    t = random_triplets(rng, 7, 3, 9)
    a = sparse.compile(t, CSC)
    buf = io.StringIO()
    sparse.write_matrix(a, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "%%sparse coordinate real"
    assert lines[1] == f"7 3 {a.nnz}"
    first = lines[2].split()
    r, c, v = next(iter(a.entries()))
    assert (int(first[0]), int(first[1])) == (r + 1, c + 1)
    back = sparse.read_matrix(io.StringIO(buf.getvalue()), CSC)
    assert back.structurally_equal(a)


def test_text_format_errors():
    with pytest.raises(SparseError, match="header"):
        sparse.read_matrix(io.StringIO("2 2 0\n"))
    with pytest.raises(SparseError, match="expected 2 entries"):
        sparse.read_matrix(io.StringIO("%%sparse coordinate real\n2 2 2\n1 1 1.0\n"))


@pytest.mark.parametrize("nchunks", [1, 2, 3, 7])
def test_parallel_kernels_match_serial(rng, nchunks):
    from spconv import _kernels

    t = random_triplets(rng, 25, 19, 90)
    x = rng.standard_normal(19)
    expected = t.to_dense() @ x
    csr, csc = sparse.compile(t, CSR), sparse.compile(t, CSC)
    y = np.empty(25)
    _kernels.csr_matvec_parallel(csr._uptr, csr._uidx, csr.data, x, y)
    np.testing.assert_allclose(y, expected, rtol=0, atol=1e-12)
    _kernels.csc_matvec_parallel(csc._uptr, csc._uidx, csc.data, x, y, nchunks)
    np.testing.assert_allclose(y, expected, rtol=0, atol=1e-12)
    again = np.empty(25)
    _kernels.csc_matvec_parallel(csc._uptr, csc._uidx, csc.data, x, again, nchunks)
    np.testing.assert_array_equal(y, again)
