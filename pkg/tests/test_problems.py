import gzip
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipalm.problems import (
    LAD,
    BasisPursuit,
    EqualityQP,
    FusedLasso,
    LabeledDataset,
    LibsvmParseError,
    SoftMarginSVM,
    build_problem,
    difference_matrix,
    dump_libsvm,
    lad_vertex_optimum,
    load_libsvm,
    normalize_rows,
    parse_libsvm,
    reference_objective,
    synthetic_instance,
)
from ipalm.sparse import SparseMatrix


def _random_dataset(rng, m, n, density=0.4):
    A = rng.standard_normal((m, n)) * (rng.random((m, n)) < density)
    return LabeledDataset(SparseMatrix.from_dense(A), rng.standard_normal(m))


# ------------------------------------------------------------------ libsvm

def test_parse_single_line():
    d = parse_libsvm(b"1 1:0.5 3:-2\n")
    assert d.shape == (1, 3)
    np.testing.assert_array_equal(d.labels, [1.0])
    np.testing.assert_array_equal(d.X.toarray(), [[0.5, 0.0, -2.0]])
    assert list(d.X.col_indices) == [0, 2]


def test_parse_empty_file():
    d = parse_libsvm(b"")
    assert d.shape == (0, 0)
    assert d.labels.size == 0


def test_parse_label_only_line_and_comments():
    d = parse_libsvm(b"# header\n-1\n+1 2:3 # trailing\n")
    np.testing.assert_array_equal(d.labels, [-1.0, 1.0])
    np.testing.assert_array_equal(d.X.toarray(), [[0.0, 0.0], [0.0, 3.0]])


def test_n_features_override():
    assert parse_libsvm(b"1 2:1\n", n_features=5).shape == (1, 5)
    with pytest.raises(ValueError):
        parse_libsvm(b"1 4:1\n", n_features=2)


@pytest.mark.parametrize("text, line", [
    (b"1 1:2\nx 1:2\n", 2),
    (b"1 1:2\n\n1 2\n", 3),
    (b"1 a:2\n", 1),
    (b"1 0:2\n", 1),
    (b"1 1:nan\n", 1),
    (b"1 1:2 2:1\n1 3:1 2:1\n", 2),
    (b"1 2:1 2:1\n", 1),
])
def test_parse_errors_carry_the_line_number(text, line):
    with pytest.raises(LibsvmParseError) as err:
        parse_libsvm(text)
    assert err.value.line_no == line
    assert f"line {line}" in str(err.value)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 9))
def test_dump_parse_round_trip(seed, m, n):
    rng = np.random.default_rng(seed)
    d = _random_dataset(rng, m, n)
    back = parse_libsvm(dump_libsvm(d), n_features=n)
    np.testing.assert_array_equal(back.labels, d.labels)
    np.testing.assert_array_equal(back.X.toarray(), d.X.toarray())


def test_gzip_and_file_inputs(tmp_path):
    d = _random_dataset(np.random.default_rng(0), 5, 4, density=1.0)
    text = dump_libsvm(d)
    plain, packed = tmp_path / "d.svm", tmp_path / "d.svm.gz"
    plain.write_bytes(text)
    packed.write_bytes(gzip.compress(text))
    for src in (plain, str(packed), io.BytesIO(text)):
        got = load_libsvm(src) if not isinstance(src, io.BytesIO) else parse_libsvm(src)
        np.testing.assert_array_equal(got.X.toarray(), d.X.toarray())


def test_dataset_label_length_checked():
    with pytest.raises(ValueError):
        LabeledDataset(SparseMatrix.from_dense(np.eye(2)), np.zeros(3))


# ------------------------------------------------------------------ rows

def test_normalize_rows_examples():
    X = normalize_rows(SparseMatrix.from_dense(np.array([[3.0, 4.0], [0.0, 0.0]])))
    np.testing.assert_allclose(X.toarray(), [[0.6, 0.8], [0.0, 0.0]], rtol=1e-15)


def test_normalize_rows_random():
    A = np.random.default_rng(2).standard_normal((30, 7))
    A[4] = 0.0
    norms = np.linalg.norm(normalize_rows(SparseMatrix.from_dense(A)).toarray(), axis=1)
    np.testing.assert_allclose(np.delete(norms, 4), 1.0, atol=1e-12)
    assert norms[4] == 0.0


def test_difference_matrix():
    np.testing.assert_array_equal(difference_matrix(3).toarray(), [[1, -1, 0], [0, 1, -1]])


# ------------------------------------------------------------------ builders

def test_lad_on_identity_data():
    d = LabeledDataset(SparseMatrix.from_dense(np.eye(2)), np.ones(2))
    p = build_problem(LAD(0.01), d)
    assert p.objective(np.ones(2)) == pytest.approx(0.02, abs=1e-15)
    assert p.mu_g == 0.0


def test_basis_pursuit_tie():
    d = LabeledDataset(SparseMatrix.from_dense(np.array([[1.0, 1.0]])), np.ones(1))
    p = build_problem(BasisPursuit(), d)
    for t in (0.0, 0.3, 1.0):
        x = np.array([t, 1 - t])
        assert p.objective(x) == pytest.approx(1.0)
        assert p.infeasibility(x) == pytest.approx(0.0, abs=1e-15)


def test_fused_lasso_default_weights():
    k = FusedLasso()
    assert k.lambda_r == 0.01 and k.lambda_1mr == 0.01


@pytest.mark.parametrize("kind", [LAD(0.3), BasisPursuit(), FusedLasso(0.02, 0.05, ridge=0.1),
                                  SoftMarginSVM(0.04)])
def test_structure_matches_direct_formula(kind):
    rng = np.random.default_rng(11)
    d = _random_dataset(rng, 9, 6, density=0.7)
    if isinstance(kind, SoftMarginSVM):
        d = LabeledDataset(d.X, np.where(rng.random(9) < 0.5, -1.0, 1.0))
    p = build_problem(kind, d)
    for _ in range(10):
        x = 2 * rng.standard_normal(p.n)
        ref = reference_objective(kind, d, x)
        assert p.objective(x) == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_builder_validation():
    d = _random_dataset(np.random.default_rng(0), 3, 2)
    with pytest.raises(ValueError):
        build_problem(LAD(0.0), d)
    with pytest.raises(ValueError):
        build_problem(FusedLasso(0.01, -1.0), d)
    with pytest.raises(ValueError):
        build_problem(SoftMarginSVM(), d)  # labels not in {-1, 1}
    with pytest.raises(TypeError):
        build_problem("lad", d)


# ------------------------------------------------------------------ synthetic

def test_equality_qp_base_instance():
    p, cert = synthetic_instance("equality_qp", (5,))
    np.testing.assert_allclose(cert["x"], np.ones(5), atol=1e-14)
    np.testing.assert_allclose(cert["lam"], [-1.0], atol=1e-14)
    assert p.infeasibility(cert["x"]) == pytest.approx(0.0, abs=1e-13)


def test_equality_qp_kkt_by_hand():
    p, cert = synthetic_instance("equality_qp", (12, 4), seed=1)
    A = cert["data"].X.toarray()
    b, c = cert["data"].labels, cert["kind"].center
    x, lam = cert["x"], cert["lam"]
    np.testing.assert_allclose(A @ x, b, atol=1e-12)
    np.testing.assert_allclose(x - c + A.T @ lam, 0.0, atol=1e-12)
    assert p.objective(x) == pytest.approx(cert["F"], rel=1e-12)
    assert isinstance(cert["kind"], EqualityQP)


def test_planted_basis_pursuit_certificate():
    p, cert = synthetic_instance("planted_bp", (20, 50), sparsity=5, seed=3)
    A = cert["data"].X.toarray()
    S, y, x = cert["support"], cert["dual"], cert["x"]
    np.testing.assert_allclose(A[:, S].T @ y, np.sign(x[S]), atol=1e-10)
    assert np.max(np.abs(np.delete(A.T @ y, S))) < 1
    assert np.count_nonzero(x) == 5
    np.testing.assert_allclose(A @ x, cert["data"].labels, atol=1e-12)
    # weak duality: b^T y <= ||z||_1 for every feasible z, with equality at x
    assert cert["data"].labels @ y == pytest.approx(cert["F"], rel=1e-10)


def test_lad_small_matches_an_lp_solver():
    from scipy.optimize import linprog

    p, cert = synthetic_instance("lad_small", (8, 4), seed=0)
    A, b = cert["data"].X.toarray(), cert["data"].labels
    m, n = A.shape
    lam = cert["kind"].lam
    # variables (x, t, s): min 1^T t + lam 1^T s, |Ax - b| <= t, |x| <= s
    c = np.concatenate([np.zeros(n), np.ones(m), lam * np.ones(n)])
    I_m, I_n, Z = np.eye(m), np.eye(n), np.zeros
    A_ub = np.block([[A, -I_m, Z((m, n))], [-A, -I_m, Z((m, n))],
                     [I_n, Z((n, m)), -I_n], [-I_n, Z((n, m)), -I_n]])
    b_ub = np.concatenate([b, -b, np.zeros(2 * n)])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * (2 * n + m), method="highs")
    assert cert["F"] == pytest.approx(res.fun, rel=1e-9)
    assert p.objective(cert["x"]) == pytest.approx(cert["F"], rel=1e-12)


def test_vertex_enumeration_small_case():
    # |x - 1| + 0.5 |x| is minimized at x = 1 with value 0.5
    x, F = lad_vertex_optimum(np.ones((1, 1)), np.ones(1), 0.5)
    assert F == pytest.approx(0.5)
    np.testing.assert_allclose(x, [1.0])


@pytest.mark.parametrize("family", ["lad", "fused_lasso", "svm"])
def test_benchmark_families_build(family):
    p, cert = synthetic_instance(family, (30, 10), seed=0)
    assert p.n == 10 + (family == "svm")
    x = np.random.default_rng(0).standard_normal(p.n)
    assert p.objective(x) == pytest.approx(reference_objective(cert["kind"], cert["data"], x), rel=1e-10)


def test_synthetic_validation():
    with pytest.raises(ValueError):
        synthetic_instance("nope", (3, 3))
    with pytest.raises(ValueError):
        synthetic_instance("equality_qp", (2, 3))
    with pytest.raises(ValueError):
        synthetic_instance("lad_small", (10, 8))
