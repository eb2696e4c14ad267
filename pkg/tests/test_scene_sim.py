import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sbas.network import PairSpec
from sbas.raster import Raster, SensorConstants
from sbas.scene_sim import (SceneTruth, forward_interferogram, make_atmosphere, make_scene, make_velocity_bowl,
                            model_phase, simulate_stack, wrap)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


class TestWrap:
    def test_zero(self):
        assert wrap(0.0) == 0.0

    def test_minus_pi_maps_to_pi(self):
        assert wrap(-math.pi) == math.pi

    def test_pi_is_kept(self):
        assert wrap(math.pi) == math.pi

    def test_subtracts_one_cycle(self):
        # 7.5 - 2*pi = 1.21681...
        assert wrap(7.5) == pytest.approx(1.2168, abs=5e-5)

    def test_array(self):
        out = wrap(np.array([0.0, -math.pi, 7.5, -7.5]))
        np.testing.assert_allclose(out, [0.0, math.pi, 7.5 - 2 * math.pi, -7.5 + 2 * math.pi])

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, bad):
        with pytest.raises(ValueError):
            wrap(bad)

    @given(finite)
    def test_range_and_congruence(self, x):
        y = wrap(x)
        assert -math.pi < y <= math.pi
        k = (x - y) / (2 * math.pi)
        assert abs(k - round(k)) < 1e-6

    @given(finite)
    def test_idempotent(self, x):
        assert wrap(wrap(x)) == wrap(x)


class TestVelocityBowl:
    def test_peak_at_center(self):
        bowl = make_velocity_bowl(-13.5, (20, 30), 5.0, (64, 64))
        assert bowl.values[30, 20] == -13.5
        assert bowl.values.min() == -13.5

    def test_zero_peak(self):
        assert not make_velocity_bowl(0.0, (5, 5), 2.0, (10, 10)).values.any()

    def test_three_sigma(self):
        bowl = make_velocity_bowl(-13.5, (10, 10), 4.0, (40, 40))
        # 3 sigma = 12 px along a row
        assert bowl.values[10, 22] == pytest.approx(-13.5 * math.exp(-4.5))
        assert bowl.values[10, 22] == pytest.approx(-0.15, abs=5e-3)

    def test_far_field(self):
        bowl = make_velocity_bowl(-13.5, (64, 64), 8.0, (128, 128))
        assert abs(bowl.values[0, 0]) < 1e-10

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_bad_sigma(self, sigma):
        with pytest.raises(ValueError):
            make_velocity_bowl(-1.0, (0, 0), sigma, (4, 4))


class TestAtmosphere:
    def test_sigma_zero(self):
        assert not make_atmosphere((32, 32), 5.0, 0.0, seed=1).values.any()

    def test_deterministic(self):
        a = make_atmosphere((64, 64), 10.0, 0.5, seed=(7, 3))
        b = make_atmosphere((64, 64), 10.0, 0.5, seed=(7, 3))
        assert np.array_equal(a.values, b.values)

    def test_seed_changes_field(self):
        a = make_atmosphere((64, 64), 10.0, 0.5, seed=1)
        b = make_atmosphere((64, 64), 10.0, 0.5, seed=2)
        assert not np.array_equal(a.values, b.values)

    def test_moments(self):
        a = make_atmosphere((256, 256), 20.0, 0.5, seed=42).values
        assert a.std() == pytest.approx(0.5, abs=0.05)
        assert abs(a.mean()) < 1e-12

    def test_smooth(self):
        a = make_atmosphere((128, 128), 10.0, 1.0, seed=3).values
        # neighbour differences much smaller than the field itself
        assert np.abs(np.diff(a, axis=1)).max() < 0.3

    def test_bad_length(self):
        with pytest.raises(ValueError):
            make_atmosphere((8, 8), 0.0, 1.0, seed=0)


EPOCHS = [dt.date(2003, 9, 26), dt.date(2003, 12, 5), dt.date(2004, 2, 13)]


def _truth(velocity=0.0, dem=0.0, shape=(8, 8), **kw):
    return SceneTruth(Raster(np.full(shape, velocity)), Raster(np.full(shape, dem)), **kw)


class TestForwardInterferogram:
    def test_deformation_phase(self):
        # v = -13.5 mm/yr over 70 days
        pair = PairSpec(0, 1, 0.0, 70)
        ifg = forward_interferogram(_truth(-13.5), pair, EPOCHS)
        np.testing.assert_allclose(ifg.phase.values, 0.5781, atol=5e-5)

    def test_bowl_center(self):
        truth = make_scene((33, 33), EPOCHS, peak=-13.5, center=(16, 16), sigma=4.0)
        ifg = forward_interferogram(truth, PairSpec(0, 1, 0.0, 70), EPOCHS)
        assert ifg.phase.values[16, 16] == pytest.approx(0.5781, abs=5e-5)

    def test_zero_truth(self):
        ifg = forward_interferogram(_truth(), PairSpec(0, 2, 120.0, 140), EPOCHS)
        assert not ifg.phase.values.any()
        assert np.all(ifg.coherence.values == 1.0)

    def test_topographic_phase(self):
        sensor = SensorConstants(0.05624, 850_000.0, 23.0)
        ifg = forward_interferogram(_truth(dem=10.0, sensor=sensor), PairSpec(0, 1, 100.0, 70), EPOCHS)
        # 4*pi/0.05624 * 100/(850e3*sin 23deg) * 10 = 223.4406 * 3.01095e-4 * 10
        np.testing.assert_allclose(ifg.phase.values, 0.67277, atol=5e-5)
        np.testing.assert_allclose(ifg.phase.values, 0.6729, atol=2e-4)

    def test_atmosphere_difference(self):
        shape = (6, 6)
        atm = {EPOCHS[0]: Raster(np.full(shape, 0.2)), EPOCHS[1]: Raster(np.full(shape, -0.3))}
        ifg = forward_interferogram(_truth(atmosphere=atm, shape=shape), PairSpec(0, 1, 0.0, 70), EPOCHS)
        np.testing.assert_allclose(ifg.phase.values, -0.5)

    def test_coherence_proxy(self):
        ifg = forward_interferogram(_truth(noise_sigma=0.3), PairSpec(0, 1, 0.0, 70), EPOCHS)
        np.testing.assert_allclose(ifg.coherence.values, math.exp(-0.09))

    def test_phase_in_principal_interval(self):
        truth = make_scene((40, 40), EPOCHS, peak=-200.0, sigma=8.0, noise_sigma=0.5, seed=1)
        ifg = forward_interferogram(truth, PairSpec(0, 2, 0.0, 140), EPOCHS)
        assert np.all(ifg.phase.values > -math.pi) and np.all(ifg.phase.values <= math.pi)

    def test_reversed_pair(self):
        with pytest.raises(ValueError):
            forward_interferogram(_truth(), PairSpec(1, 0, 0.0, 70), EPOCHS)

    def test_mismatched_dimensions(self):
        with pytest.raises(ValueError):
            SceneTruth(Raster(np.zeros((4, 4))), Raster(np.zeros((4, 5))))

    def test_noise_statistics(self):
        truth = _truth(noise_sigma=0.3, shape=(200, 200), seed=5)
        phase = model_phase(truth, PairSpec(0, 1, 0.0, 70), EPOCHS)
        assert phase.std() == pytest.approx(0.3, rel=0.03)

    def test_noise_depends_on_pair_not_order(self, table2):
        epochs, pairs = table2
        truth = make_scene((16, 16), epochs, noise_sigma=0.3, atm_sigma=0.2, seed=9)
        forward = simulate_stack(truth, pairs, epochs)
        backward = simulate_stack(truth, pairs[::-1], epochs)[::-1]
        threaded = simulate_stack(truth, pairs, epochs, threads=4)
        for a, b, c in zip(forward, backward, threaded):
            assert np.array_equal(a.phase.values, b.phase.values)
            assert np.array_equal(a.phase.values, c.phase.values)


class TestModelProperties:
    def test_loop_closure(self, table2):
        epochs, _ = table2
        truth = make_scene((24, 24), epochs, peak=-40.0, sigma=5.0, atm_sigma=0.8, atm_length=4.0, seed=3)
        for i, j, k in [(0, 1, 2), (0, 3, 9), (2, 5, 8), (1, 4, 6)]:
            def ph(a, b):
                return model_phase(truth, PairSpec(a, b, 0.0, (epochs[b] - epochs[a]).days), epochs)
            closure = ph(i, j) + ph(j, k) - ph(i, k)
            assert np.abs(closure).max() < 1e-9

    def test_deformation_linear_in_time(self):
        truth = _truth(-7.0)
        epochs = [dt.date(2004, 1, 1), dt.date(2004, 3, 1), dt.date(2004, 4, 30)]
        one = model_phase(truth, PairSpec(0, 1, 0.0, 60), epochs)
        two = model_phase(truth, PairSpec(0, 2, 0.0, 120), epochs)
        np.testing.assert_allclose(two, 2 * one, rtol=1e-12)

    @given(st.floats(-500, 500), st.floats(-30, 30))
    def test_topo_linear(self, bperp, dh):
        truth = _truth(dem=dh)
        phase = model_phase(truth, PairSpec(0, 1, bperp, 70), EPOCHS)[0, 0]
        unit = model_phase(_truth(dem=1.0), PairSpec(0, 1, 1.0, 70), EPOCHS)[0, 0]
        assert phase == pytest.approx(bperp * dh * unit, rel=1e-9, abs=1e-12)
