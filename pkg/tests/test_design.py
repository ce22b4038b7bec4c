import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import direct_convolution
from voxelrun.design import (DesignMatrix, Event, HrfParams, SampledSignal,
                             assemble_design, build_design, convolve, drift_columns,
                             format_design, gamma_pdf, hemodynamic_regressor, hrf_samples,
                             load_events, neural_signal, parametric_regressor,
                             parse_design, sample_at)
from voxelrun.exceptions import (AllZeroColumn, DtMismatch, LengthMismatch, MalformedLine,
                                 NegativeOnset, UnsupportedOrder)

events_st = st.lists(
    st.tuples(st.integers(0, 150).map(lambda x: x / 10),
              st.integers(0, 50).map(lambda x: x / 10),
              st.integers(-3, 3).map(float)),
    max_size=5).map(lambda evs: [Event(*e) for e in evs])


class TestLoadEvents:
    def test_two_events(self, tmp_path):
        p = tmp_path / "cond.txt"
        p.write_text("0 10 1\n20 10 1\n")
        assert load_events(p) == [Event(0, 10, 1), Event(20, 10, 1)]

    def test_empty(self, tmp_path):
        p = tmp_path / "cond.txt"
        p.write_text("")
        assert load_events(p) == []

    def test_zero_duration_with_comments(self, tmp_path):
        p = tmp_path / "cond.txt"
        p.write_text("# onset duration amplitude\n\n4.5 0 2.2\n")
        assert load_events(p) == [Event(4.5, 0.0, 2.2)]

    @pytest.mark.parametrize("text", ["1 2\n", "1 2 3 4\n", "a 2 3\n"])
    def test_malformed(self, tmp_path, text):
        p = tmp_path / "cond.txt"
        p.write_text(text)
        with pytest.raises(MalformedLine):
            load_events(p)

    def test_negative_onset(self, tmp_path):
        p = tmp_path / "cond.txt"
        p.write_text("-1 2 3\n")
        with pytest.raises(NegativeOnset):
            load_events(p)


class TestNeuralSignal:
    def test_no_events(self):
        sig = neural_signal([], 0.1, 20)
        assert len(sig) == 200 and not sig.values.any()

    def test_single_block(self):
        sig = neural_signal([Event(0, 10, 1)], 0.1, 20)
        expected = np.r_[np.ones(100), np.zeros(100)]
        np.testing.assert_array_equal(sig.values, expected)

    def test_overlap_sums(self):
        one = neural_signal([Event(3, 4, 1.5)], 0.1, 20).values
        two = neural_signal([Event(3, 4, 1.5), Event(3, 4, 1.5)], 0.1, 20).values
        np.testing.assert_array_equal(two, 2 * one)

    def test_zero_duration_hits_one_sample(self):
        sig = neural_signal([Event(4.55, 0, 2.2)], 0.1, 10)
        assert np.count_nonzero(sig.values) == 1
        assert sig.values[45] == 2.2

    def test_indicator_definition(self):
        # brute-force check of onset <= m*dt < onset + duration
        ev = Event(1.25, 2.5, 3.0)
        sig = neural_signal([ev], 0.25, 6)
        brute = [3.0 if ev.onset_s <= m * 0.25 < ev.onset_s + ev.duration_s else 0.0
                 for m in range(24)]
        np.testing.assert_array_equal(sig.values, brute)

    @settings(max_examples=50, deadline=None)
    @given(events_st, events_st)
    def test_additive_over_event_lists(self, e1, e2):
        a = neural_signal(e1, 0.1, 25).values
        b = neural_signal(e2, 0.1, 25).values
        np.testing.assert_allclose(neural_signal(e1 + e2, 0.1, 25).values, a + b, atol=1e-12)

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            neural_signal([], 0, 10)


class TestHrf:
    def test_zero_at_origin(self):
        assert hrf_samples(HrfParams(), 0.1).values[0] == 0.0

    def test_peak_location_and_normalization(self):
        h = hrf_samples(HrfParams(), 0.01)
        assert h.values.max() == 1.0
        peak_t = np.argmax(h.values) * 0.01
        assert 4.5 <= peak_t <= 5.5
        assert len(h) == 3000

    def test_gamma_pdf_matches_closed_form(self):
        # integer shape: Gamma(6) = 5! = 120
        t = np.array([0.5, 1.0, 5.0, 12.0])
        expected = t ** 5 * np.exp(-t) / 120.0
        np.testing.assert_allclose(gamma_pdf(t, 6.0, 1.0), expected, rtol=1e-12)
        assert gamma_pdf(np.array([0.0, -1.0]), 6.0, 1.0).tolist() == [0.0, 0.0]

    def test_gamma_pdf_integrates_to_one(self):
        t = np.linspace(0, 80, 80001)
        y = gamma_pdf(t, 6.0, 1.3)
        assert abs(np.sum((y[1:] + y[:-1]) / 2) * (t[1] - t[0]) - 1.0) < 1e-8

    @pytest.mark.parametrize("kwargs", [dict(peak_shape=1.0), dict(peak_scale=0),
                                        dict(undershoot_ratio=1.0), dict(duration_s=0)])
    def test_param_invariants(self, kwargs):
        with pytest.raises(ValueError):
            HrfParams(**kwargs)


class TestConvolve:
    def test_identity_kernel(self, rng):
        dt = 0.5
        sig = SampledSignal(rng.normal(size=20), dt)
        kern = SampledSignal(np.r_[1 / dt, np.zeros(5)], dt)
        np.testing.assert_allclose(convolve(sig, kern).values, sig.values, atol=1e-14)

    def test_zero_signal(self):
        out = convolve(SampledSignal(np.zeros(10), 0.1), hrf_samples(dt_s=0.1))
        assert not out.values.any()

    def test_hand_example(self):
        out = convolve(SampledSignal([1, 0, 0, 0], 1.0), SampledSignal([1, 2, 0, 0], 1.0))
        np.testing.assert_array_equal(out.values, [1, 2, 0, 0])

    def test_matches_direct_summation(self, rng):
        s = rng.normal(size=30)
        k = rng.normal(size=12)
        out = convolve(SampledSignal(s, 0.2, 3.0), SampledSignal(k, 0.2))
        np.testing.assert_allclose(out.values, direct_convolution(s, k, 0.2), atol=1e-12)
        assert out.start_s == 3.0 and out.dt_s == 0.2

    def test_dt_mismatch(self):
        with pytest.raises(DtMismatch):
            convolve(SampledSignal([1.0], 0.1), SampledSignal([1.0], 0.2))

    def test_shift_property(self):
        h = hrf_samples(dt_s=0.1)
        n = 600
        for shift in (0, 7, 123):
            imp = np.zeros(n)
            imp[shift] = 1.0
            out = convolve(SampledSignal(imp, 0.1), h).values
            expected = np.zeros(n)
            stop = min(n, shift + len(h))
            expected[shift:stop] = 0.1 * h.values[:stop - shift]
            np.testing.assert_allclose(out, expected, atol=1e-12)


class TestSampleAt:
    def test_at_knots(self, rng):
        sig = SampledSignal(rng.normal(size=11), 0.5, 1.0)
        np.testing.assert_array_equal(sample_at(sig, sig.times), sig.values)

    def test_between_knots(self):
        assert sample_at(SampledSignal([0.0, 1.0], 1.0), [0.25])[0] == 0.25

    def test_out_of_range_is_zero(self):
        sig = SampledSignal([5.0, 6.0], 1.0, 2.0)
        np.testing.assert_array_equal(sample_at(sig, [1.9, 3.1, -5.0]), [0, 0, 0])
        np.testing.assert_array_equal(sample_at(sig, [2.0, 3.0]), [5.0, 6.0])

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=10),
           st.floats(0, 1, exclude_max=True))
    def test_between_neighbours(self, values, frac):
        sig = SampledSignal(values, 0.5)
        for m in range(len(values) - 1):
            v = sample_at(sig, [(m + frac) * 0.5])[0]
            lo, hi = sorted(values[m:m + 2])
            assert lo - 1e-9 <= v <= hi + 1e-9

    def test_non_finite_times(self):
        with pytest.raises(ValueError):
            sample_at(SampledSignal([1.0], 1.0), [np.nan])


class TestParametric:
    def test_equal_modulators(self):
        evs = [Event(i, 1) for i in range(3)]
        assert [e.amplitude for e in parametric_regressor(evs, [4, 4, 4])] == [0, 0, 0]

    def test_centering(self):
        evs = [Event(i, 1) for i in range(3)]
        out = parametric_regressor(evs, [1, 2, 3])
        assert [e.amplitude for e in out] == [-1.0, 0.0, 1.0]
        assert [e.onset_s for e in out] == [0, 1, 2]

    def test_singleton(self):
        assert parametric_regressor([Event(2, 1)], [5])[0].amplitude == 0.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            parametric_regressor([Event(0, 1)], [1, 2])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
    def test_mean_zero(self, mods):
        evs = [Event(float(i), 1.0) for i in range(len(mods))]
        amps = [e.amplitude for e in parametric_regressor(evs, mods)]
        assert abs(np.mean(amps)) < 1e-12 * max(1.0, max(abs(m) for m in mods))


class TestDrift:
    def test_linear(self):
        np.testing.assert_allclose(drift_columns(3, 1)[:, 0], [-1, 0, 1])

    def test_quadratic(self):
        np.testing.assert_allclose(drift_columns(3, 2)[:, 1], [1 / 3, -2 / 3, 1 / 3])

    def test_centered(self):
        cols = drift_columns(17, 2)
        np.testing.assert_allclose(cols.sum(axis=0), 0, atol=1e-12)

    def test_errors(self):
        with pytest.raises(UnsupportedOrder):
            drift_columns(10, 3)
        with pytest.raises(ValueError):
            drift_columns(2, 1)


class TestAssemble:
    def test_intercept_only(self):
        dm = assemble_design(n_scans=5)
        np.testing.assert_array_equal(dm.X, np.ones((5, 1)))
        assert dm.column_names == ["intercept"]

    def test_dummy_full_rank(self):
        dm = assemble_design([np.array([0, 0, 1, 1.0])], n_scans=4)
        assert dm.X.shape == (4, 2)
        assert np.linalg.matrix_rank(dm.X) == 2

    def test_duplicate_intercept_allowed(self):
        dm = assemble_design([np.ones(4)], n_scans=4)
        assert np.linalg.matrix_rank(dm.X) == 1

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            assemble_design([np.ones(3)], n_scans=4)
        with pytest.raises(AllZeroColumn):
            assemble_design([np.zeros(4)], n_scans=4)
        with pytest.raises(LengthMismatch):
            assemble_design([np.ones(4)], n_scans=4, task_names=["a", "b"])
        with pytest.raises(ValueError):
            assemble_design()

    def test_names_and_order(self):
        dm = assemble_design([np.arange(1, 6.0)], drift_columns(5, 1), 5, 2.0,
                             task_names=["motor"], confound_names=["lin"])
        assert dm.column_names == ["intercept", "motor", "lin"]
        assert dm.tr_s == 2.0 and dm.n_columns == 3 and dm.n_scans == 5

    def test_two_dimensional_column_block(self):
        dm = assemble_design(drift_columns(6, 2), n_scans=6)
        assert dm.X.shape == (6, 3)


class TestRegressor:
    def test_single_event_is_scaled_shifted_hrf(self):
        # with scans every dt the regressor is the convolution itself
        dt = 0.5
        out = convolve(neural_signal([Event(3.0, 0.0, 2.5)], dt, 40.0), hrf_samples(dt_s=dt))
        h = hrf_samples(dt_s=dt).values
        expected = np.zeros(80)
        expected[6:6 + len(h)] = 2.5 * dt * h[:74]
        np.testing.assert_allclose(out.values, expected, atol=1e-12)

    def test_block_regressor_shape(self):
        reg = hemodynamic_regressor([Event(0, 10, 1)], 30, 2.0)
        assert reg[0] == 0.0
        assert 2 <= np.argmax(reg) <= 6
        assert reg.max() > 4.0

    def test_resolution_convergence(self):
        evs = [Event(3.3, 7.1, 1.0), Event(41.7, 2.2, 1.0), Event(60.0, 15.0, 0.5)]
        a = hemodynamic_regressor(evs, 60, 2.0, dt_frac=100)
        b = hemodynamic_regressor(evs, 60, 2.0, dt_frac=200)
        assert np.max(np.abs(a - b)) < 1e-3

    def test_impulse_regressor_scales_with_grid(self):
        # a zero-duration event fills one grid sample, so its area is amplitude * dt
        ev = [Event(20.0, 0.0, 1.0)]
        a = hemodynamic_regressor(ev, 30, 2.0, dt_frac=100)
        b = hemodynamic_regressor(ev, 30, 2.0, dt_frac=200)
        np.testing.assert_allclose(b, a / 2, atol=1e-4)

    def test_build_design(self):
        dm = build_design([[Event(4, 8, 1)], [Event(20, 8, 1)]], 30, 2.0, drift_order=2,
                          names=["a", "b"])
        assert dm.column_names == ["intercept", "a", "b", "drift1", "drift2"]
        assert dm.X.shape == (30, 5)

    def test_design_text_round_trip(self):
        dm = build_design([[Event(4, 8, 1)]], 12, 2.0, drift_order=1)
        text = format_design(dm)
        assert text.splitlines()[0] == "# intercept task1 drift1"
        back = parse_design(text, 2.0)
        np.testing.assert_array_equal(back.X, dm.X)
        assert back.column_names == dm.column_names
        assert isinstance(back, DesignMatrix)

    def test_parse_design_requires_header(self):
        with pytest.raises(ValueError):
            parse_design("1 2\n")

    def test_bad_dt_frac(self):
        with pytest.raises(ValueError):
            hemodynamic_regressor([], 10, 2.0, dt_frac=0)


def test_sampled_signal_validation():
    with pytest.raises(ValueError):
        SampledSignal([1.0], 0.0)
    with pytest.raises(ValueError):
        SampledSignal([np.inf], 1.0)
    assert math.isclose(SampledSignal([0, 0, 0], 0.5, 1.0).times[-1], 2.0)
