"""Geometry, link-budget and sync-error model tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopsense.numerology import FrequencyRange, Numerology, max_subcarriers
from coopsense.scene import (AccessPoint, ApRole, PathKind, Scene, SyncError,
                             Target, baseline_range, bistatic_doppler,
                             bistatic_geometry, noise_power_mw, path_amplitude,
                             range_resolution, sample_sync_errors, sbz_contains)

C0 = 299_792_458.0


def make_ap(ap_id, pos, role=ApRole.TRANSMIT, carrier=4.9e9, power=45.0,
            mu=1, fr=FrequencyRange.FR1, bw=50e6):
    return AccessPoint(id=ap_id, position=tuple(pos), role=role,
                       carrier_hz=carrier, tx_power_dbm=power,
                       bandwidth=max_subcarriers(mu, fr, bw),
                       numerology=Numerology(mu))


TAP = make_ap(1, (-100.0, 0.0))
RAP = make_ap(0, (100.0, 0.0), role=ApRole.RECEIVE)


class TestGeometry:
    def test_collinear_symmetry(self):
        d_t, d_r, d_s = bistatic_geometry(TAP, RAP, Target(position=(0, 0)))
        assert (d_t, d_r, d_s) == (100.0, 100.0, 200.0)

    def test_pythagoras(self):
        _, _, d_s = bistatic_geometry(TAP, RAP, Target(position=(0, 100)))
        assert d_s == pytest.approx(2 * math.sqrt(2) * 100, rel=1e-12)

    def test_on_baseline_degenerate_ellipse(self):
        _, _, d_s = bistatic_geometry(TAP, RAP, Target(position=(25.0, 0.0)))
        assert d_s == pytest.approx(baseline_range(TAP, RAP), rel=1e-12)

    @given(st.tuples(st.floats(-500, 500), st.floats(-500, 500)),
           st.tuples(st.floats(-500, 500), st.floats(-500, 500)),
           st.tuples(st.floats(-500, 500), st.floats(-500, 500)))
    @settings(max_examples=60, deadline=None)
    def test_triangle_inequality(self, a, r, q):
        tap = make_ap(1, a)
        rap = make_ap(0, r, role=ApRole.RECEIVE)
        d_t, d_r, d_s = bistatic_geometry(tap, rap, Target(position=q))
        d_b = baseline_range(tap, rap)
        assert abs(d_t - d_r) <= d_b + 1e-6
        assert d_b <= d_s + 1e-6
        assert d_s >= d_b - 1e-6


class TestDoppler:
    def test_zero_velocity(self):
        assert bistatic_doppler(TAP, RAP, Target(position=(0, 100)), 4.9e9) == 0.0

    def test_orthogonal_velocity(self):
        # On the y-axis both unit vectors have equal and opposite x parts,
        # so motion along x changes neither path sum.
        f = bistatic_doppler(TAP, RAP, Target(position=(0, 100),
                                              velocity=(7.0, 0.0)), 4.9e9)
        assert abs(f) < 1e-9

    def test_closing_target_positive_frozen_value(self):
        # Value frozen from an independent central-difference of d_s(t).
        f = bistatic_doppler(TAP, RAP, Target(position=(0, 100),
                                              velocity=(0, -10)), 4.9e9)
        assert f == pytest.approx(231.148125, rel=1e-6)
        assert f > 0

    @given(st.tuples(st.floats(-300, 300), st.floats(-300, 300)),
           st.tuples(st.floats(-30, 30), st.floats(-30, 30)))
    @settings(max_examples=60, deadline=None)
    def test_matches_finite_difference(self, q, v):
        tgt = Target(position=q, velocity=v)
        if (np.linalg.norm(tgt.xy - TAP.xy) < 1.0
                or np.linalg.norm(tgt.xy - RAP.xy) < 1.0):
            return
        f = bistatic_doppler(TAP, RAP, tgt, 4.9e9)
        lam = C0 / 4.9e9
        h = 1e-5

        def d_s(t):
            p = tgt.xy + tgt.v * t
            return (np.linalg.norm(p - TAP.xy) + np.linalg.norm(p - RAP.xy))

        fd = -(d_s(h) - d_s(-h)) / (2 * h) / lam
        assert f == pytest.approx(fd, rel=1e-6, abs=1e-6)

    def test_target_at_ap_rejected(self):
        with pytest.raises(ValueError):
            bistatic_doppler(TAP, RAP, Target(position=(-100.0, 0.0)), 4.9e9)


class TestPathAmplitude:
    def test_inverse_square_direct(self):
        a1 = path_amplitude(PathKind.LOS, tx_power_dbm=45, carrier_hz=4.9e9,
                            d_b=200.0)
        a2 = path_amplitude(PathKind.LOS, tx_power_dbm=45, carrier_hz=4.9e9,
                            d_b=400.0)
        assert a2 == pytest.approx(a1 / 2, rel=1e-12)

    def test_bistatic_exponents(self):
        a1 = path_amplitude(PathKind.SCATTERED, tx_power_dbm=45,
                            carrier_hz=4.9e9, d_t=150.0, d_r=250.0)
        a2 = path_amplitude(PathKind.SCATTERED, tx_power_dbm=45,
                            carrier_hz=4.9e9, d_t=300.0, d_r=500.0)
        assert a2 == pytest.approx(a1 / 4, rel=1e-12)

    def test_frozen_friis_value(self):
        # Independently computed: sqrt(10^4.5 mW * (c0/4.9e9)^2 / (4 pi 200)^2)
        a = path_amplitude(PathKind.LOS, tx_power_dbm=45.0, carrier_hz=4.9e9,
                           d_b=200.0)
        assert a == pytest.approx(0.00432897186472446, rel=1e-12)

    def test_rcs_scales_power(self):
        a1 = path_amplitude(PathKind.SCATTERED, tx_power_dbm=45,
                            carrier_hz=4.9e9, d_t=100, d_r=100, rcs_m2=1.0)
        a4 = path_amplitude(PathKind.SCATTERED, tx_power_dbm=45,
                            carrier_hz=4.9e9, d_t=100, d_r=100, rcs_m2=4.0)
        assert a4 == pytest.approx(2 * a1, rel=1e-12)

    def test_invalid_distances(self):
        with pytest.raises(ValueError):
            path_amplitude(PathKind.LOS, tx_power_dbm=45, carrier_hz=4.9e9,
                           d_b=0.0)
        with pytest.raises(ValueError):
            path_amplitude(PathKind.SCATTERED, tx_power_dbm=45,
                           carrier_hz=4.9e9, d_t=0.0, d_r=10.0)


class TestSbz:
    def test_on_baseline_always_inside(self):
        assert sbz_contains(TAP, RAP, Target(position=(0.0, 0.0)), 0.001)

    def test_boundary_inclusive(self):
        delta = 6.2613
        d_b = baseline_range(TAP, RAP)
        # Place the target on the ellipse d_s = d_b + 3.5 delta exactly.
        d_s = d_b + 3.5 * delta
        a = d_s / 2
        b = math.sqrt(a**2 - (d_b / 2) ** 2)
        assert sbz_contains(TAP, RAP, Target(position=(0.0, b)), delta)

    def test_outside(self):
        delta = 6.2613
        d_b = baseline_range(TAP, RAP)
        d_s = d_b + 4.0 * delta
        a = d_s / 2
        b = math.sqrt(a**2 - (d_b / 2) ** 2)
        assert not sbz_contains(TAP, RAP, Target(position=(0.0, b)), delta)


class TestRangeResolution:
    def test_golden_sub6(self):
        assert range_resolution(1596, 30e3) == pytest.approx(6.2613, abs=1e-3)

    def test_golden_fr2_half(self):
        assert range_resolution(1584, 120e3) / 2 == pytest.approx(0.7886,
                                                                  abs=1e-3)

    def test_doubling_subcarriers_halves(self):
        assert range_resolution(3192, 30e3) == pytest.approx(
            range_resolution(1596, 30e3) / 2, rel=1e-12)


class TestNoiseAndSync:
    def test_noise_power_formula(self):
        # -174 dBm/Hz over 1596 * 30 kHz.
        expect = 10 ** ((-174 + 10 * math.log10(1596 * 30e3)) / 10)
        assert noise_power_mw(1596, 30e3) == pytest.approx(expect, rel=1e-12)
        assert noise_power_mw(1596, 30e3, noise_figure_db=3.0) == pytest.approx(
            expect * 10**0.3, rel=1e-12)

    def test_sync_sampling_deterministic(self):
        a = sample_sync_errors(4, np.random.default_rng(5), 10e-9, 300.0)
        b = sample_sync_errors(4, np.random.default_rng(5), 10e-9, 300.0)
        assert a == b
        stos = [s.sto_s for s in a]
        assert len(set(stos)) == 4

    def test_sync_sampling_scale(self):
        rng = np.random.default_rng(0)
        draws = sample_sync_errors(20000, rng, 10e-9, 300.0)
        stos = np.array([s.sto_s for s in draws])
        cfos = np.array([s.cfo_hz for s in draws])
        assert np.std(stos) == pytest.approx(10e-9, rel=0.05)
        assert np.std(cfos) == pytest.approx(300.0, rel=0.05)
        assert abs(np.mean(stos)) < 3 * 10e-9 / math.sqrt(20000)


class TestScene:
    def make_scene(self, targets=((0.0, 100.0),)):
        return Scene(taps=(TAP,), rap=RAP,
                     targets=tuple(Target(position=t, velocity=(0, -10))
                                   for t in targets))

    def test_paths_structure(self):
        scene = self.make_scene()
        paths = scene.paths_for(TAP)
        assert len(paths) == 2
        los, scat = paths
        assert los.path_index == 0
        assert los.delay_s == pytest.approx(200.0 / C0, rel=1e-12)
        assert los.doppler_hz == 0.0
        assert scat.delay_s == pytest.approx(2 * math.sqrt(2) * 100 / C0,
                                             rel=1e-12)
        assert scat.doppler_hz == pytest.approx(231.148125, rel=1e-6)
        assert los.amplitude > scat.amplitude

    def test_duplicate_tap_positions_rejected(self):
        with pytest.raises(ValueError):
            Scene(taps=(TAP, make_ap(2, (-100.0, 0.0))), rap=RAP, targets=())

    def test_rap_role_enforced(self):
        with pytest.raises(ValueError):
            Scene(taps=(TAP,), rap=make_ap(9, (50, 50)), targets=())

    def test_rcs_positive(self):
        with pytest.raises(ValueError):
            Target(position=(0, 0), rcs_m2=0.0)

    def test_resolution_and_noise_helpers(self):
        scene = self.make_scene()
        assert scene.resolution_for(TAP) == pytest.approx(6.2613, abs=1e-3)
        assert scene.noise_power_for(TAP) == pytest.approx(
            noise_power_mw(1596, 30e3), rel=1e-12)
