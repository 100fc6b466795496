import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chansep.signals import (
    ClassSpec,
    FrameMatrix,
    Waveform,
    default_class_specs,
    energy,
    frame,
    mix,
    n_frames_for,
    overlap_add,
    scale_to_snr,
    snr_db,
    synth_source,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


class TestWaveform:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            Waveform([0.0, np.nan])
        with pytest.raises(ValueError, match="finite"):
            Waveform([np.inf])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Waveform([])

    def test_default_rate(self):
        assert Waveform([1.0]).sample_rate == 52734

    def test_samples_are_read_only(self):
        w = Waveform([1.0, 2.0])
        with pytest.raises(ValueError):
            w.samples[0] = 3.0


class TestFrame:
    def test_exact_fit(self):
        fm = frame(np.arange(8.0), 4)
        assert fm.n_frames == 3
        np.testing.assert_array_equal(fm.frames[:, 0], [0, 2, 4])

    def test_tail_padding(self):
        fm = frame(np.arange(1.0, 8.0), 4)
        assert fm.n_frames == 3
        assert fm.frames[-1, -1] == 0.0
        np.testing.assert_array_equal(fm.frames[-1], [5, 6, 7, 0])

    def test_single_frame(self):
        w = np.array([1.0, -2.0, 3.0, 4.0])
        fm = frame(w, 4)
        assert fm.n_frames == 1
        np.testing.assert_array_equal(fm.frames[0], w)

    def test_short_signal_padded_to_one_frame(self):
        fm = frame(np.ones(3), 8)
        assert fm.n_frames == 1
        np.testing.assert_array_equal(fm.frames[0], [1, 1, 1, 0, 0, 0, 0, 0])

    @pytest.mark.parametrize("length,frame_len", [(8, 4), (7, 4), (4, 4), (1, 2), (1000, 64), (65, 64)])
    def test_frame_count_formula(self, length, frame_len):
        hop = frame_len // 2
        expected = math.ceil(max(length - frame_len, 0) / hop) + 1
        assert frame(np.ones(length), frame_len).n_frames == expected == n_frames_for(length, frame_len)

    def test_odd_frame_len_rejected(self):
        with pytest.raises(ValueError, match="even"):
            frame(np.ones(10), 5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            frame(np.array([]), 4)

    @given(arrays(np.float64, 50, elements=finite), arrays(np.float64, 50, elements=finite), finite, finite)
    def test_linear(self, w1, w2, a, b):
        lhs = frame(a * w1 + b * w2, 16).frames
        rhs = a * frame(w1, 16).frames + b * frame(w2, 16).frames
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-6)


class TestOverlapAdd:
    def test_round_trip_length_16(self):
        w = np.random.default_rng(0).standard_normal(16)
        out = overlap_add(frame(w, 4))
        assert np.max(np.abs(np.asarray(out) - w)) < 1e-12

    @settings(max_examples=60)
    @given(st.sampled_from([4, 16, 64]), st.integers(1, 400), st.integers(0, 2**32 - 1))
    def test_round_trip_property(self, frame_len, length, seed):
        w = np.random.default_rng(seed).standard_normal(length)
        out = np.asarray(overlap_add(frame(w, frame_len)))
        assert out.shape == w.shape
        assert np.max(np.abs(out - w)) < 1e-12

    def test_zero_frames(self):
        out = overlap_add(FrameMatrix(np.zeros((5, 8)), 8, 24))
        assert np.all(np.asarray(out) == 0.0)

    def test_single_frame_is_truncated(self):
        f = np.arange(1.0, 9.0)
        out = overlap_add(FrameMatrix(f[None, :], 8, 5))
        np.testing.assert_array_equal(np.asarray(out), f[:5])

    def test_inconsistent_length_rejected(self):
        with pytest.raises(ValueError, match="inconsistent"):
            overlap_add(FrameMatrix(np.zeros((3, 4)), 4, 20))

    def test_interior_samples_average_two_frames(self):
        frames = np.array([[1.0, 1.0, 1.0, 1.0], [3.0, 3.0, 3.0, 3.0]])
        out = np.asarray(overlap_add(FrameMatrix(frames, 4, 6)))
        np.testing.assert_array_equal(out, [1, 1, 2, 2, 3, 3])

    def test_keeps_sample_rate(self):
        assert overlap_add(frame(Waveform(np.ones(10), 8000), 4)).sample_rate == 8000


class TestEnergyAndMixing:
    @pytest.mark.parametrize("x,e", [([1, 0, 0], 1.0), ([0, 0, 0], 0.0), ([3, 4], 25.0)])
    def test_energy(self, x, e):
        assert energy(np.array(x, dtype=float)) == e

    def test_scale_equal_energy_zero_db(self):
        sig, ref = Waveform([0.0, 1.0]), Waveform([1.0, 0.0])
        np.testing.assert_allclose(np.asarray(scale_to_snr(sig, ref, 0.0)), [0.0, 1.0], atol=1e-15)

    def test_scale_closed_form_gain_two(self):
        out = scale_to_snr(Waveform([1.0, 0.0]), Waveform([2.0, 0.0]), 0.0)
        np.testing.assert_allclose(np.asarray(out), [2.0, 0.0], rtol=1e-15)

    def test_scale_twenty_db(self):
        out = scale_to_snr(Waveform([1.0, 0.0]), Waveform([1.0, 0.0]), 20.0)
        np.testing.assert_allclose(np.asarray(out), [0.1, 0.0], rtol=1e-14)

    def test_scale_rejects_silence(self):
        with pytest.raises(ValueError):
            scale_to_snr(Waveform([0.0, 0.0]), Waveform([1.0, 0.0]), 0.0)
        with pytest.raises(ValueError):
            scale_to_snr(Waveform([1.0, 0.0]), Waveform([0.0, 0.0]), 0.0)

    def test_scale_rejects_mismatch(self):
        with pytest.raises(ValueError):
            scale_to_snr(Waveform([1.0, 0.0], 8000), Waveform([1.0, 0.0], 16000), 0.0)

    @settings(max_examples=200)
    @given(st.integers(0, 2**32 - 1), st.floats(-30, 30))
    def test_scale_exactness(self, seed, target):
        rng = np.random.default_rng(seed)
        sig, ref = Waveform(rng.standard_normal(64)), Waveform(rng.standard_normal(64) * rng.uniform(0.01, 10))
        assert abs(snr_db(ref, scale_to_snr(sig, ref, target)) - target) < 1e-9

    def test_mix_identities(self):
        s = Waveform([1.0, -2.0, 0.5])
        assert mix(s, Waveform.zeros(3)) == s
        assert np.all(np.asarray(mix(s, Waveform(-np.asarray(s)))) == 0.0)
        np.testing.assert_array_equal(np.asarray(mix([Waveform([1.0, 2.0]), Waveform([3.0, 4.0])])), [4, 6])

    def test_mix_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            mix(Waveform([1.0]), Waveform([1.0, 2.0]))
        with pytest.raises(ValueError, match="rate"):
            mix(Waveform([1.0], 8000), Waveform([1.0], 16000))
        with pytest.raises(ValueError):
            mix([])

    @given(st.lists(arrays(np.float64, 8, elements=st.integers(-1000, 1000).map(float)), min_size=3, max_size=3))
    def test_mix_associative_commutative(self, ws):
        a, b, c = (Waveform(w) for w in ws)
        assert mix(mix(a, b), c) == mix(a, mix(b, c)) == mix(c, b, a)


class TestSynthSource:
    def test_single_partial_energy(self):
        spec = ClassSpec("harmonic-complex", {"f0": 0.1, "partials": 1, "rolloff": 1.0, "jitter": 0.0})
        n = 4096
        e = energy(synth_source(spec, 3, n))
        assert abs(e - n / 2) / (n / 2) < 0.02

    @pytest.mark.parametrize("cls", ["A", "B", "C", "D"])
    def test_deterministic(self, cls):
        spec = default_class_specs()[cls]
        a, b = synth_source(spec, 42, 512), synth_source(spec, 42, 512)
        assert a.samples.tobytes() == b.samples.tobytes()

    @pytest.mark.parametrize("cls", ["A", "B", "C", "D"])
    def test_seeds_differ_rms_in_range(self, cls):
        spec = default_class_specs()[cls]
        draws = [synth_source(spec, s, 1024, 8000) for s in range(100)]
        assert len({d.samples.tobytes() for d in draws}) == 100
        lo, hi = spec.rms_range
        rms = [math.sqrt(energy(d) / len(d)) for d in draws]
        assert lo <= min(rms) and max(rms) <= hi
        assert all(np.max(np.abs(d.samples)) == pytest.approx(1.0) for d in draws)

    def test_bad_length(self):
        with pytest.raises(ValueError):
            synth_source(default_class_specs()["A"], 0, 0)

    def test_unknown_family(self):
        with pytest.raises(ValueError, match="family"):
            ClassSpec("whale-song")

    def test_spec_round_trip(self):
        spec = default_class_specs()["C"]
        assert ClassSpec.from_dict(spec.to_dict()) == spec
