import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxrep.core import RngStream, frechet_cdf, ks_distance, std_normal_cdf
from maxrep.grid import Grid
from maxrep.models import DiscreteShape, ShapeModel, VariogramModel, cov_from_variogram
from maxrep import simulate as S


def test_config_validation():
    g = Grid.parse("0:1:1")
    with pytest.raises(ValueError):
        S.SimConfig(g, margin=-1)
    with pytest.raises(ValueError):
        S.SimConfig(g, atom_budget=0)


def test_constant_increments_give_first_atom():
    g = Grid.parse("0:3:1")
    res = S.simulate_incremental(S.ConstantIncrements(g), RngStream(4))
    assert res.exact and res.n_atoms == 1
    assert np.all(res.values == res.values.ravel()[0])
    x = S.replicate(lambda r: S.simulate_incremental(S.ConstantIncrements(g), r), 3000, 1)
    assert ks_distance(x[:, 0], frechet_cdf) < 0.03


def test_deterministic_increment_with_wrong_mean_rejected():
    g = Grid.parse("0:1:1")
    with pytest.raises(ValueError, match="mean one"):
        S.DeterministicIncrements(g, [1.0, 2.0])
    S.DeterministicIncrements(g, [1.0, 1.0])


def test_unbounded_sampler_uses_whole_budget():
    g = Grid.parse("-1:1:0.5")
    inc = S.BrownResnickIncrements(VariogramModel.fbm(1.0), g, (0.0,))
    res = S.simulate_incremental(inc, RngStream(1), atom_budget=300)
    assert not res.exact and res.n_atoms == 300
    assert 0 < res.residual < res.values.min()


def test_brown_resnick_anchor_and_mean(gen):
    g = Grid.parse("-2:2:0.5")
    inc = S.BrownResnickIncrements(VariogramModel.fbm(1.0), g, (0.0,))
    w = inc.sample(gen, 100000)
    assert np.all(w[:, g.flat_index_of(0.0)] == 1.0)
    assert np.max(np.abs(w.mean(axis=0) - 1)) < 0.02


def test_brown_resnick_rejects_off_grid_anchor():
    with pytest.raises(ValueError):
        S.BrownResnickIncrements(VariogramModel.fbm(1.0), Grid.parse("0:1:0.5"), (0.3,))


def test_extremal_gaussian_spectral(gen):
    g = Grid.parse("0:2:1")
    cov = S.correlation_matrix("exponential", 1.0, g)
    inc = S.ExtremalGaussianIncrements(cov, g)
    v = inc.sample(gen, 100000)
    assert abs(np.mean(v[:, 0] == 0) - 0.5) < 0.01
    assert abs(v[:, 0].mean() - 1) < 0.01
    with pytest.raises(ValueError):
        S.ExtremalGaussianIncrements(2 * cov, g)


def test_logistic_closed_form_matches_root_finding(gen):
    v = 1 - gen.random((300, 3))
    for q in (1.3, 2.0, 5.0):
        a = S.logistic_increments_from_uniforms(v, q)
        b = S.logistic_increments_from_uniforms(v, q, method="brentq")
        assert np.allclose(a, b, rtol=1e-8)


def test_logistic_increment_probability(gen):
    w = S.LogisticIncrements(2.0, 1).sample(gen, 200000)
    assert np.all(w[:, 0] == 1)
    assert abs(np.mean(w[:, 1] <= 1) - 2 ** -0.5) < 0.005


def test_logistic_rejects_q():
    with pytest.raises(ValueError):
        S.LogisticIncrements(1.0, 2)


def test_logistic_vector_joint_law():
    x = S.replicate(lambda r: S.simulate_logistic_vector(2.0, 1, r), 6000, 8)
    assert abs(np.mean(np.all(x <= 1, axis=1)) - math.exp(-math.sqrt(2))) < 0.02
    assert ks_distance(x[:, 1], frechet_cdf) < 0.03


def _smith(grid, margin=4.0):
    return lambda r: S.simulate_m3(ShapeModel.gaussian(1.0), grid, margin, r)


def test_m3_events_reproduce_field():
    g = Grid.parse("-3:3:0.25")
    sh = ShapeModel.gaussian(1.0)
    for i in range(5):
        res = S.simulate_m3(sh, g, 4.0, RngStream(3, i))
        assert res.exact
        assert np.array_equal(S.events_field(res.events, sh, g), res.values)
        lo, hi = g.expand(4.0)
        for ev in res.events:
            assert ev.u > 0 and np.all(np.asarray(ev.center) >= lo) and np.all(np.asarray(ev.center) <= hi)


@settings(max_examples=10)
@given(st.integers(0, 1000), st.integers(1, 50))
def test_exact_stopping_is_budget_independent(rep, extra):
    g = Grid.parse("-2:2:0.5")
    sh = ShapeModel.exponential(1.5)
    first = S.simulate_m3(sh, g, 3.0, RngStream(11, rep))
    more = S.simulate_m3(sh, g, 3.0, RngStream(11, rep), atom_budget=first.n_atoms + extra)
    assert np.array_equal(first.values, more.values)
    short = S.simulate_m3(sh, g, 3.0, RngStream(11, rep), atom_budget=first.n_atoms)
    assert np.array_equal(first.values, short.values)


def test_budget_exhaustion_is_flagged():
    g = Grid.parse("-2:2:0.5")
    res = S.simulate_m3(ShapeModel.gaussian(1.0), g, 4.0, RngStream(1), atom_budget=2)
    assert not res.exact and res.n_atoms == 2


def test_m3_marginal_and_smith_theta():
    g = Grid.parse("0:1:1")
    x = S.replicate(_smith(g), 6000, 2)
    assert ks_distance(x[:, 0], frechet_cdf) < 0.025
    # -u log P(M(0) <= u, M(1) <= u) = theta for every u
    th = [-u * math.log(np.mean(np.all(x <= u, axis=1))) for u in (0.5, 1.0, 2.0)]
    assert np.allclose(th, 2 * std_normal_cdf(0.5), atol=0.05)


def test_max_stability():
    g = Grid.parse("0:1:1")
    n = 5
    x = S.replicate(_smith(g), 6000, 3)
    y = S.replicate(_smith(g), 6000 * n, 4).reshape(6000, n, 2).max(axis=1) / n
    from maxrep.core import ks_two_sample
    for j in range(2):
        assert ks_two_sample(x[:, j], y[:, j]) < 0.035


def test_discrete_m3_single_site_is_independent():
    g = Grid.parse("0:4:1")
    one = DiscreteShape(np.array([1.0]))
    x = S.replicate(lambda r: S.simulate_m3_discrete(one, g, r), 4000, 5)
    assert ks_distance(x[:, 2], frechet_cdf) < 0.03
    assert abs(np.corrcoef(np.log(x[:, 0]), np.log(x[:, 1]))[0, 1]) < 0.05


def test_discrete_m3_stationary():
    g = Grid.parse("0:10:1")
    d = DiscreteShape.from_shape(ShapeModel.gaussian(1.0), 4)
    x = S.replicate(lambda r: S.simulate_m3_discrete(d, g, r), 4000, 6)
    from maxrep.core import ks_two_sample
    assert ks_distance(x[:, 5], frechet_cdf) < 0.03
    assert ks_two_sample(x[:, 0], x[:, 7]) < 0.04


def test_discrete_m3_needs_unit_lattice():
    d = DiscreteShape(np.array([1.0]))
    with pytest.raises(ValueError):
        S.simulate_m3_discrete(d, Grid.parse("0:1:0.5"), RngStream(0))


def test_mda_sample_properties():
    g = Grid.parse("-3:3:0.5")
    f = S.simulate_mda_sample(1.0, 0.1, 0.5, ShapeModel.gaussian(1.0), g, 2.0, RngStream(2))
    assert np.all(f.values >= 0.5)
    # expected atom count c |A| / eps
    counts = [RngStream(2, i).generator(0).poisson(1.0 * 10 / 0.1) for i in range(2000)]
    assert abs(np.mean(counts) - 100) < 1.0
    with pytest.raises(ValueError):
        S.simulate_mda_sample(0.0, 0.1, 0.5, ShapeModel.gaussian(1.0), g, 2.0, RngStream(2))


def test_mda_normalised_maxima_are_frechet():
    g = Grid.parse("0:0:1")
    sh = ShapeModel.gaussian(1.0)
    n = 200
    x = S.replicate(lambda r: S.simulate_mda_sample(1.0, 0.5, 0.01, sh, g, 4.0, r), 800 * n, 9)
    m = x.reshape(800, n).max(axis=1) / n
    assert ks_distance(m, frechet_cdf) < 0.05


def test_replicate_is_order_free():
    g = Grid.parse("0:2:1")
    a = S.replicate(_smith(g), 6, 1)
    b = S.replicate(_smith(g), 3, 1, start=3)
    assert np.array_equal(a[3:], b)
