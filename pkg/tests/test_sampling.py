import math

import numpy as np
import pytest
from scipy import stats

from meshprompt.errors import ConfigError
from meshprompt.sampling import (
    DEFAULT_RULE,
    SeededRng,
    ViewpointRule,
    rule_for_class,
    sample_viewpoint,
)

THETA_STD = math.pi / 18.0


def draw(rule, seed, n):
    rng = SeededRng(seed)
    return [sample_viewpoint(rule, rng) for _ in range(n)]


class TestDeterminism:
    def test_same_seed_same_sequence(self):
        a = draw(DEFAULT_RULE, 7, 100)
        b = draw(DEFAULT_RULE, 7, 100)
        assert a == b

    def test_different_seed_different_sequence(self):
        assert draw(DEFAULT_RULE, 7, 10) != draw(DEFAULT_RULE, 8, 10)

    def test_stream_is_pinned(self):
        # frozen regression values: the generator contract guarantees the
        # exact stream for a given seed on every platform
        rng = SeededRng(12345)
        assert rng.random() == 0.41661987254534116
        assert rng.uniform(2.0, 4.0) == 2.0203383389141365


class TestThetaStatistics:
    def test_mean_and_std_over_10k(self):
        thetas = np.array([v.theta for v in draw(DEFAULT_RULE, 123, 10_000)])
        assert -0.01 < thetas.mean() < 0.01
        assert abs(thetas.std() - THETA_STD) / THETA_STD < 0.05

    def test_symmetric_about_zero(self):
        thetas = np.array([v.theta for v in draw(DEFAULT_RULE, 41, 10_000)])
        assert abs((thetas > 0).mean() - 0.5) < 0.02

    def test_within_truncation_bounds(self):
        for v in draw(ViewpointRule(theta_std=1.0), 2, 2000):
            assert -math.pi / 2 <= v.theta <= math.pi / 2


class TestAzimuth:
    def test_all_mode_is_ks_uniform(self):
        azs = np.array([v.azimuth for v in draw(DEFAULT_RULE, 123, 10_000)])
        p = stats.kstest(azs, stats.uniform(loc=0.0, scale=2 * math.pi).cdf).pvalue
        assert p > 0.01

    def test_front_mode_stays_in_band(self):
        rule = ViewpointRule(azimuth_mode="front")
        for v in draw(rule, 5, 10_000):
            # stored normalized into [0, 2*pi); the band wraps around 0
            assert v.azimuth <= math.pi / 3 or v.azimuth >= 2 * math.pi - math.pi / 3


class TestElevation:
    def test_all_mode_band(self):
        for v in draw(DEFAULT_RULE, 9, 5000):
            assert -math.pi / 6 <= v.elevation <= math.pi / 3

    def test_top_mode_band(self):
        rule = ViewpointRule(elevation_mode="top")
        for v in draw(rule, 9, 5000):
            assert math.pi / 36 <= v.elevation <= math.pi / 2

    def test_top_mode_mean_is_raised(self):
        els = np.array([v.elevation for v in draw(ViewpointRule(elevation_mode="top"), 3, 5000)])
        assert abs(els.mean() - math.pi / 6) < 0.01


class TestDistance:
    def test_within_range(self):
        rule = ViewpointRule(distance_range=(2.0, 3.0))
        ds = [v.distance for v in draw(rule, 17, 5000)]
        assert min(ds) >= 2.0 and max(ds) < 3.0
        assert abs(np.mean(ds) - 2.5) < 0.02


class TestRuleForClass:
    def test_builtin_assignments(self):
        assert rule_for_class("school bus") == ViewpointRule("all", "all", THETA_STD)
        assert rule_for_class("printer").azimuth_mode == "front"
        assert rule_for_class("printer").elevation_mode == "top"
        assert rule_for_class("stove").elevation_mode == "top"
        assert rule_for_class("laptop").azimuth_mode == "front"
        assert rule_for_class("keyboard").elevation_mode == "top"

    def test_unknown_class_falls_back_to_default(self):
        assert rule_for_class("unlisted-class") == DEFAULT_RULE

    def test_config_table_wins_over_builtin(self):
        table = {"printer": ViewpointRule("all", "all")}
        assert rule_for_class("printer", table).azimuth_mode == "all"

    def test_config_default_entry(self):
        table = {"default": ViewpointRule(theta_std=0.5)}
        assert rule_for_class("whatever", table).theta_std == 0.5


class TestRuleValidation:
    def test_bad_modes(self):
        with pytest.raises(ConfigError):
            ViewpointRule(azimuth_mode="sideways")
        with pytest.raises(ConfigError):
            ViewpointRule(elevation_mode="bottom")

    def test_bad_theta_std(self):
        with pytest.raises(ConfigError):
            ViewpointRule(theta_std=0.0)

    def test_bad_distance_range(self):
        with pytest.raises(ConfigError):
            ViewpointRule(distance_range=(3.0, 2.0))
        with pytest.raises(ConfigError):
            ViewpointRule(distance_range=(0.0, 2.0))


class TestViewpointInvariants:
    def test_all_emitted_viewpoints_valid(self):
        for rule in (DEFAULT_RULE, ViewpointRule("front", "top")):
            for v in draw(rule, 31, 1000):
                assert 0 <= v.azimuth < 2 * math.pi
                assert -math.pi / 2 <= v.elevation <= math.pi / 2
                assert -math.pi < v.theta <= math.pi
                assert v.distance > 0
