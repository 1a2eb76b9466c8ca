import io

import numpy as np
import pytest
import scipy.io
import scipy.sparse
from hypothesis import given, settings
from hypothesis import strategies as st

from stand import mmio
from stand.rng import derive_seed, substream
from stand.sparse import from_dense, from_lower_triplets, from_triplets


def random_spd(n, density, seed):
    rng = np.random.default_rng(seed)
    a = scipy.sparse.random(n, n, density=density, random_state=rng).toarray()
    return a @ a.T + n * np.eye(n)


@given(st.integers(1, 30), st.floats(0.0, 0.4), st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_csr_invariants_and_spmv(n, density, seed):
    a = random_spd(n, density, seed)
    K = from_dense(a)
    assert K.is_symmetric()
    for i in range(n):
        cols = K.indices[K.indptr[i] : K.indptr[i + 1]]
        assert np.all(np.diff(cols) > 0)
    x = np.random.default_rng(seed).standard_normal(n)
    assert np.allclose(K @ x, a @ x, rtol=1e-13, atol=1e-12)
    assert np.array_equal(K.to_dense(), a)
    assert np.array_equal(K.diagonal(), np.diag(a))
    assert (K.to_scipy() != scipy.sparse.csr_matrix(a)).nnz == 0


def test_triplets_sum_duplicates_and_mirror_exactly():
    K = from_triplets(2, [0, 0, 1, 1], [0, 0, 1, 0], [1.0, 2.0, 5.0, 7.0])
    assert K.to_dense().tolist() == [[3.0, 0.0], [7.0, 5.0]]
    rng = np.random.default_rng(1)
    r = rng.integers(0, 20, 300)
    c = rng.integers(0, 20, 300)
    lo, hi = np.maximum(r, c), np.minimum(r, c)
    S = from_lower_triplets(20, lo, hi, rng.standard_normal(300))
    d = S.to_dense()
    assert np.array_equal(d, d.T)
    with pytest.raises(ValueError):
        from_lower_triplets(2, [0], [1], [1.0])


def test_lower_has_diagonal_last():
    K = from_dense(random_spd(12, 0.3, 4))
    indptr, indices, data = K.lower()
    for i in range(12):
        row = indices[indptr[i] : indptr[i + 1]]
        assert row[-1] == i and np.all(row <= i)
    assert len(data) == (K.nnz + 12) // 2


def test_permute_matches_dense():
    a = random_spd(9, 0.3, 2)
    perm = np.random.default_rng(0).permutation(9)
    assert np.array_equal(from_dense(a).permute(perm).to_dense(), a[np.ix_(perm, perm)])


def test_handwritten_two_by_two():
    text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 3\n1 1 4\n2 1 2\n2 2 3\n"
    K = mmio.parse(text)
    assert K.to_dense().tolist() == [[4.0, 2.0], [2.0, 3.0]]
    assert K.nnz == 4  # 3 stored entries, the off-diagonal mirrored


def test_symmetric_writer_stores_lower_only_and_scipy_reads_it():
    a = random_spd(15, 0.2, 9)
    K = from_dense(a)
    text = mmio.format_sparse(K)
    header = text.splitlines()[1].split()
    n_offdiag = (K.nnz - 15) // 2
    assert int(header[2]) == 15 + n_offdiag
    for line in text.splitlines()[2:]:
        r, c, _ = line.split()
        assert int(r) >= int(c) >= 1
    ref = scipy.io.mmread(io.StringIO(text))
    assert np.array_equal(ref.toarray(), a)
    assert mmio.parse(text) == K


def test_vector_round_trip_and_scipy_oracle():
    x = np.random.default_rng(3).standard_normal(50) * 10.0 ** np.arange(-25, 25)
    text = mmio.format_vector(x)
    assert text.startswith("%%MatrixMarket matrix array real general\n50 1\n")
    assert np.array_equal(mmio.parse(text), x)
    assert np.array_equal(np.asarray(scipy.io.mmread(io.StringIO(text))).ravel(), x)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=40))
def test_seventeen_digits_round_trip(values):
    x = np.array(values)
    assert np.array_equal(mmio.parse(mmio.format_vector(x)), x)


def test_scipy_written_file_parses():
    a = random_spd(8, 0.5, 1)
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, scipy.sparse.coo_matrix(np.tril(a)), symmetry="general")
    K = mmio.parse(buf.getvalue().decode())
    assert np.allclose(K.to_dense(), np.tril(a), rtol=1e-15)


@pytest.mark.parametrize(
    "text, message",
    [
        ("1 1\n", "banner"),
        ("%%MatrixMarket matrix array real general\n3 1\n1\n2\n", "dimension mismatch"),
        ("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n", "dimension mismatch"),
        ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1\n", "upper-triangle"),
        ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1\n", "out of range"),
        ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 x\n", "bad value"),
        ("%%MatrixMarket matrix coordinate complex hermitian\n2 2 0\n", "unsupported"),
    ],
)
def test_malformed(text, message):
    with pytest.raises(mmio.MatrixMarketError, match=message):
        mmio.parse(text, "x.mtx")


def test_write_and_read_files(tmp_path):
    K = from_dense(random_spd(6, 0.5, 0))
    mmio.write_sparse(tmp_path / "K.mtx", K)
    mmio.write_vector(tmp_path / "f.mtx", np.arange(6.0))
    assert mmio.read(tmp_path / "K.mtx") == K
    assert mmio.read(tmp_path / "f.mtx").tolist() == list(range(6))


def test_substreams_independent_and_reproducible():
    a = substream(7, "grid").random(5)
    assert np.array_equal(a, substream(7, "grid").random(5))
    assert not np.array_equal(a, substream(7, "carve").random(5))
    assert not np.array_equal(a, substream(8, "grid").random(5))
    assert derive_seed(1, "x", 0) != derive_seed(1, "x", 1)
    assert 0 <= derive_seed(2**64 - 1, "y") < 2**64
