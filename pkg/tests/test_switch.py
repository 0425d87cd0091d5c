import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from maxrep.core import RngStream, ks_distance, ks_two_sample
from maxrep.estimators import logistic_increment_cdf
from maxrep.grid import Grid
from maxrep.models import ShapeMixture, ShapeModel, VariogramModel
from maxrep.simulate import BrownResnickIncrements, ConstantIncrements, simulate_incremental
from maxrep import switch as SW


def test_grid_density_sampler_follows_interpolant(gen):
    g = Grid.parse("0:1:0.5")
    s = SW.GridDensitySampler(g, [0.0, 1.0, 2.0])  # density proportional to 2x on [0, 1]
    x = s.sample(gen, 20000)[:, 0]
    assert ks_distance(x, lambda t: t * t) < 0.015
    with pytest.raises(ValueError):
        SW.GridDensitySampler(g, [0.0, -1.0, 2.0])


def test_m3_to_incremental_gaussian_shape(gen):
    g = Grid.parse("-1:1:0.5")
    w = SW.m3_to_incremental_sample(ShapeModel.gaussian(1.0), g, gen, size=50000)
    assert np.all(w[:, 2] == 1.0)
    assert np.max(np.abs(w.mean(axis=0) - 1)) < 0.03
    # log W(t) = -t^2/2 - t T with T standard normal
    t = g.axes[0]
    lw = np.log(w)
    assert np.allclose(lw.var(axis=0), t * t, rtol=0.05)
    assert ks_distance(lw[:, 4], stats.norm(-0.5, 1).cdf) < 0.01


def test_m3_to_incremental_needs_origin():
    with pytest.raises(ValueError):
        SW.m3_to_incremental_sample(ShapeModel.gaussian(1.0), Grid.parse("1:2:0.5"), RngStream(0))


def test_mixture_weights_are_size_biased():
    mix = ShapeMixture([ShapeModel.gaussian(1.0), ShapeModel.gaussian(2.0)], [0.5, 0.5])
    inc = SW.M3Increments(mix, Grid.parse("-1:1:0.5"))
    ints = np.array([s.profile_integral * s.lam for s in inc.shapes])
    assert np.allclose(inc.weights, ints / ints.sum())


def test_conditional_law_matches_increment_sampler():
    sh = ShapeModel.exponential(1.0)
    a = SW.conditional_increment_law_m3(sh, [[0.7]], RngStream(1), 20000)[:, 0]
    b = SW.m3_to_incremental_sample(sh, Grid.parse("-0.7:0.7:0.7"), RngStream(2), size=20000)[:, 2]
    assert ks_two_sample(a, b) < 0.02


def test_v_representation_means_and_bounds(gen):
    g = Grid.parse("-1:1:0.5")
    sh = ShapeModel.gaussian(1.0)
    uni = SW.UniformShift.around(g, 7.0)
    v = SW.m3_to_v_representation(sh, uni, g, gen, size=200000)
    assert np.max(np.abs(v.mean(axis=0) - 1)) < 0.02
    assert SW.VSampler(sh, uni, g).bound == pytest.approx(sh.sup * 16)
    assert SW.VSampler(sh, SW.GaussianShift([0.0], 2.0), g).bound is None
    with pytest.raises(ValueError):
        SW.m3_to_v_representation(sh, SW.UniformShift([0.0], [0.5]), g, gen)


def test_v_representations_agree_in_law():
    g = Grid.parse("0:1:1")
    sh = ShapeModel.gaussian(1.0)
    run = lambda dens, seed: np.stack([
        simulate_incremental(SW.VSampler(sh, dens, g), RngStream(seed, i)).values.ravel()
        for i in range(3000)])
    a = run(SW.UniformShift.around(g, 6.0), 1)
    b = run(SW.GaussianShift([0.5], 2.0), 2)
    for j in range(2):
        assert ks_two_sample(a[:, j], b[:, j]) < 0.05


def test_incremental_to_m3_recovers_smith():
    g = Grid.parse("-4:4:0.1")
    inc = BrownResnickIncrements(VariogramModel.fbm(2.0), g, (0.0,))
    fit = SW.incremental_to_m3(inc, 6000, RngStream(5))
    assert fit.c == pytest.approx(1 / math.sqrt(2 * math.pi), abs=0.02)
    mp = fit.mean_profile()
    t = mp.grid.axes[0]
    centre = np.abs(t) <= 2
    assert np.max(np.abs(mp.values[centre] - np.exp(-t[centre] ** 2 / 2))) < 0.1
    assert fit.drop_fraction < 0.1
    assert fit.offsets.lo[0] == pytest.approx(-6.0) and fit.offsets.hi[0] == pytest.approx(6.0)
    for s in fit.samples[:20]:
        assert s.profile.values.max() == 1.0 and -2 <= s.tau[0] <= 2


def test_incremental_to_m3_rejects_flat_process():
    with pytest.raises(ValueError, match="no sample"):
        SW.incremental_to_m3(ConstantIncrements(Grid.parse("-1:1:0.5")), 10, RngStream(0))


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
def test_oracle_matches_closed_form_k1(q):
    s = np.array([0.1, 0.8, 1.0, 4.0])
    got = SW.increment_law_from_exponent_measure(lambda x: SW.logistic_exponent_density(x, q), s, 1)
    assert np.allclose(got, logistic_increment_cdf(s[:, None], q), rtol=1e-5)


def test_oracle_matches_closed_form_k2():
    q = 2.0
    s = np.array([[0.5, 2.0], [1.0, 1.0]])
    got = SW.increment_law_from_exponent_measure(lambda x: SW.logistic_exponent_density(x, q), s, 2)
    assert np.allclose(got, logistic_increment_cdf(s, q), rtol=1e-4)


@settings(max_examples=8)
@given(st.floats(1.2, 4), st.floats(0.5, 3))
def test_exponent_measure_homogeneity(q, c):
    dens = lambda x: SW.logistic_exponent_density(x, q)
    lo, hi = np.array([1.0, 0.5]), np.array([2.0, 3.0])
    assert SW.exponent_measure_box(dens, c * lo, c * hi) == pytest.approx(
        SW.exponent_measure_box(dens, lo, hi) / c, rel=1e-6)


def test_exponent_density_margin():
    # mu({x_0 > 1}) = 1 for unit Frechet margins
    q = 2.0
    f = lambda x1, v: float(SW.logistic_exponent_density(np.array([1 / v, x1]), q)) / v ** 2
    from scipy import integrate
    val = integrate.dblquad(f, 0, 1, 0, np.inf)[0]
    assert val == pytest.approx(1.0, rel=1e-5)


def test_boundary_ratio_flags_slow_decay():
    inc = BrownResnickIncrements(VariogramModel.fbm(2.0), Grid.parse("-4:4:0.1"), (0.0,))
    assert SW.incremental_to_m3(inc, 500, RngStream(1)).boundary_ratio < 0.2
    slow = BrownResnickIncrements(VariogramModel.fbm(2.0, scale=5.0), Grid.parse("-1:1:0.1"), (0.0,))
    assert SW.incremental_to_m3(slow, 500, RngStream(1)).boundary_ratio > 0.5
