import math
import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distsl.potential import (
    CATALOGUE,
    PotentialError,
    PotentialPrimitive,
    from_catalogue,
    from_samples,
    gauge_shift,
    mean_zero,
    parse_number,
    parse_spec,
    read_samples_csv,
)

from oracles import l2_norm_simpson

PI = math.pi

CATALOGUE_CASES = [
    ("zero", []),
    ("constant", [1 + 2j]),
    ("linear", [5]),
    ("step", [2, PI / 2]),
    ("step", [2j, PI / 2]),
    ("sawtooth", [1.5, 3]),
    ("rough_fourier", [0.6, 64, 7]),
]


def test_zero_norm():
    assert from_catalogue("zero").l2_norm == 0.0


def test_step_norm_closed_form():
    p = from_catalogue("step", [2, PI / 2])
    assert p.l2_norm == pytest.approx(2 * math.sqrt(PI / 2), rel=1e-14)
    assert p(np.array([0.1, PI / 2, 3.0])).tolist() == [0, 2, 2]


def test_linear_norm_closed_form():
    assert from_catalogue("linear", [5]).l2_norm == pytest.approx(5 * math.sqrt(PI**3 / 3), rel=1e-14)


def test_samples_zero_and_constant():
    assert from_samples([0, PI], [0, 0]).l2_norm == 0.0
    assert from_samples([0, PI], [1, 1]).l2_norm == pytest.approx(math.sqrt(PI), rel=1e-14)


def test_tent_norm_against_simpson():
    p = from_samples([0, PI / 2, PI], [0, 1, 0])
    assert p.l2_norm == pytest.approx(math.sqrt(PI / 3), rel=1e-14)  # two halves of int (2t/pi)^2
    assert p.l2_norm == pytest.approx(l2_norm_simpson(p), rel=1e-10)


@pytest.mark.parametrize("name,params", CATALOGUE_CASES)
def test_catalogue_norm_against_simpson(name, params):
    p = from_catalogue(name, params)
    assert p.l2_norm == pytest.approx(l2_norm_simpson(p), rel=1e-10, abs=1e-14)


def test_gauge_shift_examples():
    c = gauge_shift(from_catalogue("zero"), 1)
    assert np.all(c(np.linspace(0, PI, 7)) == 1)
    m = gauge_shift(from_catalogue("linear", [5]), -5 * PI / 2)
    assert m.as_poly().integral() == pytest.approx(0, abs=1e-13)
    mz = mean_zero(from_catalogue("linear", [5]))
    np.testing.assert_allclose(mz.values_left, m.values_left, atol=1e-14)


def test_rough_fourier_reproducible():
    a = from_catalogue("rough_fourier", [0.6, 64, 7])
    b = from_catalogue("rough_fourier", [0.6, 64, 7])
    assert pickle.dumps((a.values_left, a.slopes)) == pickle.dumps((b.values_left, b.slopes))
    c = from_catalogue("rough_fourier", [0.6, 64, 8])
    assert not np.array_equal(a.values_left, c.values_left)


def test_rough_fourier_warns_for_small_s():
    with pytest.warns(UserWarning, match="L2"):
        from_catalogue("rough_fourier", [0.5, 8, 1])


def test_sawtooth_shape():
    p = from_catalogue("sawtooth", [1.5, 3])
    assert p.n_segments == 3
    np.testing.assert_allclose(p.values_right, 1.5)
    np.testing.assert_allclose(p.jumps, -1.5)


@pytest.mark.parametrize(
    "name,params,msg",
    [
        ("nope", [], "unknown"),
        ("step", [1, 0.0], "position"),
        ("step", [1, 4.0], "position"),
        ("step", [1], "parameter"),
        ("sawtooth", [1, 0], "tooth"),
        ("rough_fourier", [1, 0, 1], "K"),
    ],
)
def test_catalogue_errors(name, params, msg):
    with pytest.raises(PotentialError, match=msg):
        from_catalogue(name, params)


@pytest.mark.parametrize(
    "grid,values,msg",
    [
        ([0, 1, 1, PI], [0, 0, 0, 0], "increasing"),
        ([0, 1], [0, 0], "pi"),
        ([0, PI], [0, np.nan], "finite"),
        ([0, PI], [0], "equal length"),
    ],
)
def test_samples_errors(grid, values, msg):
    with pytest.raises(PotentialError, match=msg):
        from_samples(grid, values)


def test_immutable():
    p = from_catalogue("step", [2, PI / 2])
    with pytest.raises(ValueError):
        p.values_left[0] = 3
    with pytest.raises(AttributeError):
        p.mesh = np.array([0, PI])


def test_segments_absolute_form():
    p = from_samples([0, 1, PI], [1, 3, 0])
    c0, c1 = p.segments[1]
    assert c0 + c1 * 1 == pytest.approx(3)
    assert c0 + c1 * PI == pytest.approx(0, abs=1e-14)


def test_read_samples_csv(tmp_path):
    f = tmp_path / "u.csv"
    f.write_text("x,re,im\n0,0,1\n1.5,2,0\n3.141592653589793,0,0\n", encoding="utf-8")
    p = read_samples_csv(f)
    assert p(np.array([1.5]))[0] == 2
    assert p(np.array([0.0]))[0] == 1j
    f.write_text("0,0\nbad,1\n", encoding="utf-8")
    with pytest.raises(PotentialError, match=":2:"):
        read_samples_csv(f)


def test_parse_spec():
    assert parse_spec("step(2i, pi/2)") == ("step", [2j, PI / 2])
    assert parse_spec("zero") == ("zero", [])
    assert parse_number("1+2i") == 1 + 2j
    with pytest.raises(PotentialError):
        parse_spec("step(__import__('os'), 1)")


def test_catalogue_names():
    assert set(CATALOGUE) == {"zero", "constant", "linear", "step", "sawtooth", "rough_fourier"}


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=2, max_size=12),
    st.lists(st.floats(-5, 5), min_size=2, max_size=12),
)
def test_sample_norm_matches_quadrature(re, im):
    k = min(len(re), len(im))
    grid = np.linspace(0, PI, k)
    p = from_samples(grid, np.array(re[:k]) + 1j * np.array(im[:k]))
    assert p.l2_norm == pytest.approx(l2_norm_simpson(p), rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_gauge_shift_keeps_slopes_and_jumps(c):
    p = from_catalogue("sawtooth", [1.5, 3])
    q = gauge_shift(p, c)
    assert np.array_equal(q.slopes, p.slopes)
    np.testing.assert_allclose(q.jumps, p.jumps, atol=1e-12)
    assert isinstance(q, PotentialPrimitive)
