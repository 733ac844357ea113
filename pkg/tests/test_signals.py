import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from canrev.model import Action, GpsSample, ImuSample
from canrev.signals import (
    PreprocessConfig,
    UndefinedCorrelationError,
    action_signal,
    apply_mask,
    moving_average,
    motion_mask,
    pearson,
    pearson_rows,
)
from canrev.tokenizer import make_grid

RAW = PreprocessConfig(smoothing_window=1)


def imu_from(ax=None, ay=None, step=0.01):
    n = len(ax if ax is not None else ay)
    ax = ax if ax is not None else [0.0] * n
    ay = ay if ay is not None else [0.0] * n
    return [ImuSample(i * step, a, b, 9.81) for i, (a, b) in enumerate(zip(ax, ay))]


def fraction_pearson(x, y):
    """Squared correlation in exact arithmetic, plus its sign."""
    x = [Fraction(v) for v in x]
    y = [Fraction(v) for v in y]
    mx, my = sum(x) / len(x), sum(y) / len(y)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy * sxy / (sxx * syy), sxy


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_zero_input_gives_zero_signal():
    sig = action_signal(imu_from(ay=[0.0] * 10), Action.DECELERATE, RAW)
    assert np.all(sig.values == 0)


def test_rectification_longitudinal():
    imu = imu_from(ay=[1.0, -1.0, 1.0])
    assert list(action_signal(imu, Action.DECELERATE, RAW).values) == [1, 0, 1]
    assert list(action_signal(imu, Action.ACCELERATE, RAW).values) == [0, 1, 0]


def test_rectification_lateral():
    imu = imu_from(ax=[2.0, 2.0, 2.0])
    assert list(action_signal(imu, Action.STEER_LEFT, RAW).values) == [2, 2, 2]
    assert list(action_signal(imu, Action.STEER_RIGHT, RAW).values) == [0, 0, 0]
    imu = imu_from(ax=[2.0, -3.0])
    assert list(action_signal(imu, Action.STEER, RAW).values) == [2, 3]


def test_action_signal_uses_hold_grid():
    imu = [ImuSample(0.0, 0, 1.0, 0), ImuSample(0.05, 0, 3.0, 0)]
    sig = action_signal(imu, "decelerate", RAW)
    assert len(sig.grid) == 6
    assert list(sig.values) == [1, 1, 1, 1, 1, 3]


def test_action_signal_empty():
    with pytest.raises(ValueError):
        action_signal([], Action.DECELERATE)


def test_moving_average_brute_force():
    rng = np.random.default_rng(0)
    x = rng.normal(size=60)
    for w in (1, 3, 5, 25):
        got = moving_average(x, w)
        half = w // 2
        want = [x[max(0, i - half): i + half + 1].mean() for i in range(len(x))]
        assert np.allclose(got, want)


def test_moving_average_keeps_constant():
    assert np.allclose(moving_average(np.full(40, 3.5), 25), 3.5)


@pytest.mark.parametrize("kwargs", [dict(smoothing_window=4), dict(smoothing_window=0),
                                    dict(speed_threshold=-1), dict(grid_step=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        PreprocessConfig(**kwargs)


def gps_track(speed_at, t_end, step=1.0):
    out = []
    for k in range(int(t_end / step) + 1):
        t = k * step
        out.append(GpsSample(t, speed_at(t), 0.0, 0.0))
    return out


def test_mask_all_stationary():
    grid = make_grid(0, 10, 0.5)
    mask = motion_mask(gps_track(lambda t: 0.0, 10), grid)
    assert not mask.moving.any()
    assert mask.fraction_moving == 0.0


def test_mask_stop_interval():
    grid = make_grid(0, 200, 0.01)
    gps = gps_track(lambda t: 0.0 if 110 <= t <= 140 else 5.0, 200)
    mask = motion_mask(gps, grid)
    inside = (grid >= 110) & (grid <= 140)
    assert not mask.moving[inside].any()
    # hold semantics: the sample at 141 s switches the mask back on
    assert mask.moving[grid >= 141].all()
    assert mask.moving[grid < 110].all()


def test_mask_below_threshold():
    grid = make_grid(0, 5, 0.1)
    mask = motion_mask(gps_track(lambda t: 0.05, 5), grid, PreprocessConfig(speed_threshold=0.1))
    assert not mask.moving.any()


def test_mask_uses_speed_magnitude():
    grid = make_grid(0, 1, 0.5)
    gps = [GpsSample(0.0, 0.06, -0.06, 0.06)]
    assert motion_mask(gps, grid).moving.all()


def test_mask_empty_gps():
    with pytest.raises(ValueError):
        motion_mask([], make_grid(0, 1))


def test_apply_mask_examples():
    assert list(apply_mask([1, 2, 3, 4], [True, False, True, False])) == [1, 3]
    assert list(apply_mask([1, 2, 3], [True] * 3)) == [1, 2, 3]
    assert len(apply_mask([1, 2, 3], [False] * 3)) == 0
    with pytest.raises(ValueError):
        apply_mask([1, 2, 3], [True, False])


def test_apply_mask_to_matrix_rows():
    m = np.arange(8).reshape(2, 4)
    assert apply_mask(m, np.array([True, False, False, True])).tolist() == [[0, 3], [4, 7]]


def test_pearson_examples():
    assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0)
    assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(3 / math.sqrt(2 * 14 / 3), abs=1e-12)
    assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.981980506, abs=1e-9)


def test_pearson_undefined():
    with pytest.raises(UndefinedCorrelationError):
        pearson([1], [2])
    with pytest.raises(UndefinedCorrelationError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(UndefinedCorrelationError):
        pearson([1, 2, 3], [4, 4, 4])
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=2, max_size=40))
def test_pearson_matches_exact_arithmetic(pairs):
    x, y = zip(*pairs)
    assume(len(set(x)) > 1 and len(set(y)) > 1)
    r = pearson(x, y)
    r2, sxy = fraction_pearson(x, y)
    assert r * r == pytest.approx(float(r2), abs=1e-9)
    assert math.copysign(1, r) == math.copysign(1, sxy) or abs(r) < 1e-12


@settings(max_examples=200)
@given(
    st.lists(finite, min_size=3, max_size=30),
    st.floats(0.1, 100), st.floats(-100, 100),
    st.floats(0.1, 100), st.floats(-100, 100),
)
def test_pearson_affine_invariant_and_symmetric(xs, a, b, c, d):
    x = np.array(xs)
    y = np.sin(x) + 0.1 * x
    assume(np.ptp(x) > 1e-3 and np.ptp(y) > 1e-3)
    r = pearson(x, y)
    assert -1.0 <= r <= 1.0
    assert pearson(y, x) == pytest.approx(r, abs=1e-9)
    assert pearson(a * x + b, c * y + d) == pytest.approx(r, abs=1e-6)
    assert pearson(-a * x + b, y) == pytest.approx(-r, abs=1e-6)


def test_pearson_rows_agrees_and_flags_constants():
    rng = np.random.default_rng(1)
    y = rng.normal(size=50)
    m = rng.normal(size=(5, 50))
    m[2] = 7.0
    m[3] = 3 * y + 1
    r, const = pearson_rows(m, y)
    assert const.tolist() == [False, False, True, False, False]
    assert r[2] == 0.0
    assert r[3] == pytest.approx(1.0)
    for i in (0, 1, 4):
        assert r[i] == pytest.approx(pearson(m[i], y), abs=1e-12)


def test_pearson_rows_constant_reference():
    with pytest.raises(UndefinedCorrelationError):
        pearson_rows(np.ones((2, 4)), np.zeros(4))
