import io
import math
import pathlib

import numpy as np
import pytest

from sparselasso import (
    CapacityError,
    DataError,
    EnsembleSpec,
    ParameterError,
    SignalSpec,
    make_signal,
    observe,
    read_matrix,
    rescale_coupled,
    sample_matrix,
    signal_signs,
    write_matrix,
)

GOLDEN_MATRIX = pathlib.Path(__file__).parent / "golden" / "matrix_n6_p4_seed3.txt"


def test_spec_validation():
    with pytest.raises(ParameterError):
        EnsembleSpec(n=0, p=4, gamma=0.5)
    with pytest.raises(ParameterError):
        EnsembleSpec(n=4, p=4, gamma=0.0)
    with pytest.raises(ParameterError):
        EnsembleSpec(n=4, p=4, gamma=1.5)
    with pytest.raises(ParameterError):
        EnsembleSpec(n=4, p=4, gamma=0.5, convention="dense")
    with pytest.raises(CapacityError):
        EnsembleSpec(n=2**32, p=1, gamma=0.5)
    with pytest.raises(CapacityError):
        EnsembleSpec(n=2**21, p=2**21, gamma=0.5)


def test_sampling_deterministic():
    spec = EnsembleSpec(n=50, p=30, gamma=0.4)
    a = sample_matrix(spec, seed=123)
    b = sample_matrix(spec, seed=123)
    assert np.array_equal(a.indptr, b.indptr)
    assert np.array_equal(a.indices, b.indices)
    assert np.array_equal(a.values, b.values)
    c = sample_matrix(spec, seed=124)
    assert not np.array_equal(a.values, c.values)


def test_pattern_and_values_independent():
    spec = EnsembleSpec(n=50, p=30, gamma=0.4)
    a = sample_matrix(spec, seed=123)
    b = sample_matrix(spec, seed=123, value_seed=999)
    assert np.array_equal(a.indptr, b.indptr)
    assert np.array_equal(a.indices, b.indices)
    assert not np.array_equal(a.values, b.values)


def test_nnz_concentration():
    spec = EnsembleSpec(n=200, p=100, gamma=0.3)
    m = sample_matrix(spec, seed=7)
    mean = 200 * 100 * 0.3
    sd = math.sqrt(200 * 100 * 0.3 * 0.7)
    assert abs(m.nnz - mean) < 5 * sd
    m.validate()


def test_values_standard_unit_variance():
    spec = EnsembleSpec(n=400, p=200, gamma=0.25, convention="standard")
    m = sample_matrix(spec, seed=5)
    assert abs(m.values.var() - 1.0) < 0.1


def test_values_rescaled_variance():
    spec = EnsembleSpec(n=400, p=200, gamma=0.25, convention="rescaled")
    m = sample_matrix(spec, seed=5)
    assert abs(m.values.var() - 4.0) < 0.4


def test_gamma_one_dense_pattern():
    spec = EnsembleSpec(n=12, p=9, gamma=1.0)
    m = sample_matrix(spec, seed=2)
    assert m.nnz == 12 * 9
    assert np.all(m.values != 0.0)
    dense = m.to_csr().toarray()
    assert np.all(dense != 0.0)


def test_rescale_coupled_roundtrip():
    spec = EnsembleSpec(n=60, p=40, gamma=0.5, convention="standard")
    m = sample_matrix(spec, seed=9)
    r = rescale_coupled(m)
    assert r.spec.convention == "rescaled"
    assert np.array_equal(r.indices, m.indices)
    assert np.array_equal(r.values, m.values * (1.0 / math.sqrt(0.5)))
    back = rescale_coupled(r)
    assert back.spec.convention == "standard"
    assert np.allclose(back.values, m.values, rtol=1e-15)


def test_rescaled_matches_coupled_standard_exactly():
    # Same seed under the two conventions draws the same pattern and the
    # same normals; only the scale differs.
    std = sample_matrix(EnsembleSpec(n=60, p=40, gamma=0.5, convention="standard"), seed=9)
    res = sample_matrix(EnsembleSpec(n=60, p=40, gamma=0.5, convention="rescaled"), seed=9)
    assert np.array_equal(std.indices, res.indices)
    assert np.array_equal(res.values, std.values * (1.0 / math.sqrt(0.5)))


def test_dense_columns_matches_csr():
    spec = EnsembleSpec(n=30, p=20, gamma=0.6)
    m = sample_matrix(spec, seed=4)
    cols = np.array([0, 3, 19])
    assert np.array_equal(m.dense_columns(cols), m.to_csr().toarray()[:, cols])
    with pytest.raises(ParameterError):
        m.dense_columns([20])


def test_signal_patterns():
    assert np.array_equal(make_signal(SignalSpec(p=8, k=3, beta_min=2.0)), [2, 2, 2, 0, 0, 0, 0, 0])
    alt = SignalSpec(p=8, k=4, sign_pattern="alternating")
    assert np.array_equal(signal_signs(alt), [1, -1, 1, -1])
    rnd = SignalSpec(p=20, k=10, sign_pattern="seeded_random", sign_seed=3)
    s1, s2 = signal_signs(rnd), signal_signs(rnd)
    assert np.array_equal(s1, s2)
    assert set(np.unique(s1)) <= {-1.0, 1.0}
    with pytest.raises(ParameterError):
        SignalSpec(p=8, k=5)
    with pytest.raises(ParameterError):
        SignalSpec(p=8, k=2, beta_min=0.0)
    with pytest.raises(ParameterError):
        SignalSpec(p=8, k=2, sign_pattern="seeded_random")


def test_observe_noise_variance_reset():
    beta = make_signal(SignalSpec(p=20, k=4))
    std = sample_matrix(EnsembleSpec(n=40, p=20, gamma=0.25, convention="standard"), seed=1)
    obs_std = observe(std, beta, sigma2=0.16, noise_seed=6)
    assert obs_std.noise_variance == 0.16
    res = sample_matrix(EnsembleSpec(n=40, p=20, gamma=0.25, convention="rescaled"), seed=1)
    obs_res = observe(res, beta, sigma2=0.16, noise_seed=6)
    assert obs_res.noise_variance == pytest.approx(0.64)
    assert np.allclose(obs_res.y, res.to_csr() @ beta + obs_res.w, rtol=0, atol=0)
    # same noise seed, different variance: pathwise scaled normals
    assert np.allclose(obs_res.w, 2.0 * obs_std.w, rtol=1e-15)


def test_serialization_roundtrip():
    spec = EnsembleSpec(n=25, p=18, gamma=0.37, convention="rescaled")
    m = sample_matrix(spec, seed=77)
    buf = io.StringIO()
    write_matrix(m, buf)
    buf.seek(0)
    back = read_matrix(buf)
    assert back.spec == m.spec
    assert back.seed_info.seed == 77
    assert np.array_equal(back.indptr, m.indptr)
    assert np.array_equal(back.indices, m.indices)
    assert np.array_equal(back.values, m.values)


def test_serialization_golden():
    m = sample_matrix(EnsembleSpec(n=6, p=4, gamma=0.7, convention="standard"), seed=3)
    buf = io.StringIO()
    write_matrix(m, buf)
    with open(GOLDEN_MATRIX) as fh:
        assert buf.getvalue() == fh.read()


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("", "header"),
        ("4 4 0.5 standard\n", "header"),
        ("4 4 0.5 dense 1\n", "header"),
        ("4 4 0.5 standard 1\n0 9 1.5\n", "column index"),
        ("4 4 0.5 standard 1\n9 0 1.5\n", "row index"),
        ("4 4 0.5 standard 1\n0 0 0.0\n", "non-zero"),
        ("4 4 0.5 standard 1\n0 0\n", "expected"),
        ("4 4 0.5 standard 1\n0 0 abc\n", "could not convert"),
    ],
)
def test_read_matrix_rejects_malformed(text, fragment):
    with pytest.raises(DataError) as err:
        read_matrix(io.StringIO(text))
    assert fragment in str(err.value)
