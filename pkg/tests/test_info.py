import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from qtrack.channel import ChannelSpec
from qtrack.info import (
    ChannelStats,
    InfoError,
    capacity,
    channel_stats,
    dispersion,
    empirical_info,
    gaussian_cdf,
    gaussian_icdf,
    info_density,
    info_density_table,
    mutual_info,
    output_dist,
    third_moment,
    v_eps_from_set,
)

# reference channel (zeta=0.2, f(q)=2q+0.5) constants from a 30-digit mpmath root-find of dI/dp = 0
REF_C = 0.14764421641661736
REF_P = 0.23018018206801456
REF_V = 0.26018629914956936
REF_T = 0.24413799759740249
REF_I_HALF = 0.08228287850505185


def hb(x):
    return -x * np.log(x) - (1 - x) * np.log(1 - x)


def bsc_mi(p, e):
    return hb(p * (1 - e) + (1 - p) * e) - hb(e)


@pytest.fixture
def ref_channel():
    return ChannelSpec.md_bsc(0.2, 2.0, 0.5)


def bsc(e):
    return ChannelSpec.md_bsc(0.2, 0.0, e / 0.2)


def test_output_dist_examples():
    np.testing.assert_allclose(output_dist(0.5, 1.0, bsc(0.3)), [0.5, 0.5])
    np.testing.assert_allclose(output_dist(0.0, 1.0, bsc(0.2)), [0.8, 0.2])
    np.testing.assert_allclose(output_dist(0.3, 1.0, bsc(0.2)), [0.62, 0.38], atol=1e-15)


def test_info_density_examples():
    e = 0.3
    ch = ChannelSpec.md_bsc(0.2, 0, 1.5)
    assert info_density(0.5, 1.5, ch, 1, 1) == pytest.approx(math.log(2 * (1 - e)))
    assert info_density(0.5, 1.5, ch, 0, 1) == pytest.approx(math.log(2 * e))
    noiseless = ChannelSpec.md_bsc(0.2, 0, 0)
    assert info_density(0.5, 0.0, noiseless, 0, 0) == pytest.approx(math.log(2))


def test_info_density_zero_output():
    noiseless = ChannelSpec.md_bsc(0.2, 0, 0)
    with pytest.raises(InfoError):
        info_density(0.0, 0.0, noiseless, 0, 1)


def test_empirical_info():
    ch = ChannelSpec.md_bsc(0.2, 0, 1.5)
    assert empirical_info(0.5, [], [], [], ch) == 0.0
    assert empirical_info(0.5, [1.5, 1.5], [0, 1], [0, 1], ch) == pytest.approx(2 * math.log(1.4))
    with pytest.raises(InfoError):
        empirical_info(0.5, [1.5], [0, 1], [0, 1], ch)


def test_empirical_info_matches_resummation(ref_channel):
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(1, 40))
        q = ref_channel.size_map(rng.random(n))
        x = rng.integers(0, 2, n)
        y = rng.integers(0, 2, n)
        p = float(rng.uniform(0.05, 0.95))
        oracle = 0.0
        for qt, xt, yt in zip(q, x, y):
            e = 0.2 * qt
            w = 1 - e if xt == yt else e
            py = (1 - p) * ((1 - e) if yt == 0 else e) + p * (e if yt == 0 else (1 - e))
            oracle += math.log(w / py)
        assert empirical_info(p, q, x, y, ref_channel) == pytest.approx(oracle, rel=1e-12, abs=1e-12)


def test_mutual_info_is_expected_density(ref_channel):
    for p in (0.1, 0.23, 0.5, 0.9):
        q = float(ref_channel.size_map(p))
        w = np.array([[1 - 0.2 * q, 0.2 * q], [0.2 * q, 1 - 0.2 * q]])
        px = np.array([1 - p, p])
        table = info_density_table(p, q, ref_channel)
        assert mutual_info(p, ref_channel) == pytest.approx(float(np.sum(px[:, None] * w * table)), abs=1e-12)


def test_mutual_info_constant_map_is_bsc():
    for e in (0.05, 0.2, 0.45):
        for p in (0.1, 0.5, 0.7):
            assert mutual_info(p, bsc(e)) == pytest.approx(bsc_mi(p, e), abs=1e-12)


def test_mutual_info_endpoints(ref_channel):
    assert mutual_info(0.0, ref_channel) == 0.0
    assert mutual_info(1.0, ref_channel) == 0.0
    assert mutual_info(1e-9, ref_channel) < 1e-7


def test_mutual_info_reference_half(ref_channel):
    assert mutual_info(0.5, ref_channel) == pytest.approx(math.log(2) - hb(0.3), abs=1e-12)
    assert mutual_info(0.5, ref_channel) == pytest.approx(REF_I_HALF, abs=1e-12)


def test_capacity_bsc_closed_form():
    c, pca = capacity(bsc(0.2))
    assert c == pytest.approx(math.log(2) - hb(0.2), abs=1e-9)
    assert c == pytest.approx(0.19274, abs=1e-5)
    assert len(pca) == 1 and pca[0] == pytest.approx(0.5, abs=1e-6)


def test_capacity_noiseless():
    c, pca = capacity(ChannelSpec.md_bsc(0.2, 0.0, 0.0))
    assert c == pytest.approx(math.log(2), abs=1e-12)
    assert pca == [pytest.approx(0.5, abs=1e-6)]


def test_capacity_reference_against_fine_grid(ref_channel):
    # independent oracle: closed-form mutual information on a 1e-5 grid
    p = np.arange(1, 100_000) * 1e-5
    vals = bsc_mi(p, 0.2 * (2 * p + 0.5))
    c, pca = capacity(ref_channel)
    assert c >= vals.max() - 1e-12
    assert c == pytest.approx(vals.max(), abs=1e-9)
    assert c == pytest.approx(REF_C, abs=1e-12)
    assert pca == [pytest.approx(REF_P, abs=1e-6)]
    assert 0.22 <= pca[0] <= 0.23 + 1e-3
    assert c > REF_I_HALF


def test_capacity_dominates_grid(ref_channel):
    c, _ = capacity(ref_channel)
    p = np.linspace(1e-3, 1 - 1e-3, 2001)
    assert np.all(mutual_info(p, ref_channel) <= c + 1e-12)
    assert np.all(mutual_info(p, ref_channel) >= 0)


def test_capacity_grid_step_bound(ref_channel):
    with pytest.raises(InfoError):
        capacity(ref_channel, grid_step=1e-2)


def test_dispersion_and_third_moment(ref_channel):
    assert dispersion(REF_P, ref_channel) == pytest.approx(REF_V, abs=1e-12)
    assert third_moment(REF_P, ref_channel) == pytest.approx(REF_T, abs=1e-12)
    noiseless = ChannelSpec.md_bsc(0.2, 0, 0)
    assert dispersion(0.5, noiseless) == pytest.approx(0.0, abs=1e-15)
    assert third_moment(0.5, noiseless) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("e", [0.01, 0.11, 0.3, 0.49])
def test_dispersion_bsc_closed_form(e):
    assert dispersion(0.5, bsc(e)) == pytest.approx(e * (1 - e) * math.log((1 - e) / e) ** 2, rel=1e-12)


@pytest.mark.filterwarnings("ignore::UserWarning")
@settings(max_examples=100, deadline=None)
@given(p=st.floats(1e-4, 1 - 1e-4), a=st.floats(0, 3), b=st.floats(0, 1))
def test_moments_nonnegative(p, a, b):
    ch = ChannelSpec.md_bsc(1.0 / (a + b + 1.0), a, b)
    assert mutual_info(p, ch) >= 0
    assert dispersion(p, ch) >= 0
    assert third_moment(p, ch) >= 0
    assert math.isfinite(third_moment(p, ch))


def test_v_eps_case_split():
    assert v_eps_from_set([0.1, 0.3], 0.3) == 0.3
    assert v_eps_from_set([0.1, 0.3], 0.7) == 0.1
    assert v_eps_from_set([0.1, 0.3], 0.5) == 0.3
    with pytest.raises(InfoError):
        v_eps_from_set([], 0.3)


def test_v_eps_singleton_constant(ref_channel):
    stats = channel_stats(ref_channel)
    vals = {stats.v_eps(e) for e in np.linspace(0.01, 0.99, 50)}
    assert vals == {stats.V_at_pca[0]}


def test_channel_stats_fields(ref_channel):
    stats = channel_stats(ref_channel)
    assert isinstance(stats, ChannelStats)
    assert stats.singleton
    assert stats.p_ca_set[0] < 0.5
    d = stats.to_dict(0.1)
    assert d["units"] == "nats" and d["V_eps"] == stats.V_at_pca[0]


def test_gaussian_icdf_examples():
    assert gaussian_icdf(0.5) == 0.0
    assert gaussian_icdf(0.975) == pytest.approx(1.959963984540054, abs=1e-9)
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(InfoError):
            gaussian_icdf(bad)


def test_gaussian_icdf_against_scipy():
    rng = np.random.default_rng(7)
    ps = np.concatenate([rng.random(10_000), 10.0 ** -rng.uniform(1, 12, 2000)])
    ps = np.concatenate([ps, 1 - ps[-2000:]])
    ps = ps[(ps > 1e-12) & (ps < 1 - 1e-12)]
    got = np.array([gaussian_icdf(p) for p in ps])
    np.testing.assert_allclose(got, norm.ppf(ps), rtol=0, atol=1e-9)


def test_gaussian_icdf_round_trip():
    rng = np.random.default_rng(8)
    for p in rng.random(10_000):
        if 0 < p < 1:
            assert abs(norm.cdf(gaussian_icdf(p)) - p) <= 1e-9
            assert abs(gaussian_cdf(gaussian_icdf(p)) - p) <= 1e-9


def test_gaussian_icdf_monotone_and_odd():
    ps = np.linspace(1e-6, 1 - 1e-6, 5001)
    xs = np.array([gaussian_icdf(p) for p in ps])
    assert np.all(np.diff(xs) > 0)
    np.testing.assert_allclose(xs, -xs[::-1], atol=1e-9)
