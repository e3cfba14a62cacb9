import concurrent.futures

import numpy as np
import pytest

from csecg.detector import (
    DetectorConfig,
    bandpass,
    bandpass_taps,
    derivative,
    detect_r_peaks,
    map_to_original_timescale,
    square_and_integrate,
)
from csecg.errors import DetectorConfigError, InsufficientDataError
from csecg.pipeline import generate_synthetic_record
from csecg.sensing import SensingConfig, compress_channel, config_from_cr

FS = 360.0


def steady_amplitude(y):
    mid = y[y.size // 4: 3 * y.size // 4]
    return np.max(np.abs(mid))


class TestConfig:
    def test_defaults(self):
        c = DetectorConfig(45)
        assert c.window_samples == 7
        assert DetectorConfig(360).window_samples == 54

    @pytest.mark.parametrize("kw", [dict(sampling_rate=25), dict(sampling_rate=360, bandpass_low=0),
                                    dict(sampling_rate=360, bandpass_low=20),
                                    dict(sampling_rate=4, bandpass_low=0.5, bandpass_high=1.5, integration_window=0.1)])
    def test_invalid(self, kw):
        with pytest.raises(DetectorConfigError):
            DetectorConfig(**kw)

    @pytest.mark.parametrize("fs", [360, 180, 90, 45])
    def test_all_effective_rates_valid(self, fs):
        DetectorConfig(fs)


class TestBandpass:
    def test_zero(self):
        assert not bandpass(np.zeros(1000), DetectorConfig(FS)).any()

    @pytest.mark.parametrize("fs", [360, 180, 90, 45])
    def test_low_frequency_rejection(self, fs):
        cfg = DetectorConfig(fs)
        t = np.arange(int(20 * fs)) / fs
        slow = steady_amplitude(bandpass(np.sin(2 * np.pi * 1 * t), cfg))
        fast = steady_amplitude(bandpass(np.sin(2 * np.pi * 10 * t), cfg))
        assert fast >= 10 * slow

    def test_dc_step_removed(self):
        cfg = DetectorConfig(FS)
        x = np.r_[np.zeros(2000), np.full(4000, 3.0)]
        y = bandpass(x, cfg)
        assert abs(np.sum(bandpass_taps(cfg))) < 1e-15
        assert np.max(np.abs(y[2000 + cfg.num_taps:])) < 1e-12

    def test_linear_phase_alignment(self):
        cfg = DetectorConfig(FS)
        taps = bandpass_taps(cfg)
        np.testing.assert_allclose(taps, taps[::-1])
        x = np.zeros(2001)
        x[1000] = 1.0
        y = bandpass(x, cfg)
        assert int(np.argmax(np.abs(y))) == 1000

    def test_linearity(self, rng):
        cfg = DetectorConfig(FS)
        x, z = rng.standard_normal(3000), rng.standard_normal(3000)
        lhs = bandpass(2 * x - 0.5 * z, cfg)
        rhs = 2 * bandpass(x, cfg) - 0.5 * bandpass(z, cfg)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * np.max(np.abs(rhs)))

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            bandpass(np.zeros(10), DetectorConfig(FS))


class TestDerivative:
    def test_constant(self):
        assert not derivative(np.full(50, 4.0), DetectorConfig(FS)).any()
        np.testing.assert_allclose(derivative(np.full(50, 4.2), DetectorConfig(FS)), 0, atol=1e-12)

    def test_ramp(self):
        y = derivative(np.arange(50, dtype=float), DetectorConfig(FS))
        np.testing.assert_allclose(y, FS)

    def test_nyquist(self):
        # frequency response of the five-point kernel at pi, evaluated independently
        h = np.array([-1, -2, 0, 2, 1]) / 8.0
        gain_at_nyquist = abs(np.sum(h * np.exp(-1j * np.pi * np.arange(5))))
        x = (-1.0) ** np.arange(64)
        y = derivative(x, DetectorConfig(FS))
        np.testing.assert_allclose(np.abs(y[2:-2]), gain_at_nyquist * FS, atol=1e-9)
        w = np.linspace(0, np.pi, 1001)
        response = np.abs(np.exp(-1j * np.outer(w, np.arange(5))) @ h)
        assert response[-1] < response.max()

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            derivative([1, 2, 3], DetectorConfig(FS))


class TestIntegration:
    def test_zero(self):
        assert not square_and_integrate(np.zeros(100), DetectorConfig(FS)).any()

    def test_impulse(self):
        cfg = DetectorConfig(FS, integration_window=4 / FS)
        assert cfg.window_samples == 4
        x = np.zeros(12)
        x[3] = 1.0
        y = square_and_integrate(x, cfg)
        assert y.tolist() == [0, 0, 0, 0.25, 0.25, 0.25, 0.25, 0, 0, 0, 0, 0]

    def test_nonnegative(self, rng):
        assert (square_and_integrate(rng.standard_normal(500), DetectorConfig(FS)) >= 0).all()


class TestDetect:
    def test_flatline(self):
        assert detect_r_peaks(np.zeros(3600), DetectorConfig(FS)).peak_indices.size == 0

    def test_short(self):
        with pytest.raises(InsufficientDataError):
            detect_r_peaks(np.zeros(500), DetectorConfig(FS))

    def test_synthetic_train(self, synth60):
        truth = synth60.beat_samples
        res = detect_r_peaks(synth60.physical(0), DetectorConfig(FS))
        assert 29 <= res.peak_indices.size <= 30
        for p in res.peak_indices:
            assert np.min(np.abs(truth - p)) <= 0.020 * FS
        assert res.total_delay == (DetectorConfig(FS).num_taps - 1) // 2 + 2

    @pytest.mark.parametrize("cr,tol_ms", [(0.5, 25), (0.75, 35), (0.875, 60)])
    def test_compressed_train(self, synth60, cr, tol_ms):
        x = synth60.physical(0)
        n = x.size - x.size % 8
        cfg = config_from_cr(n, cr)
        comp = compress_channel(x[:n], cfg, FS)
        res = detect_r_peaks(comp.data, DetectorConfig(comp.effective_rate))
        mapped = map_to_original_timescale(res, cfg)
        truth = synth60.beat_samples
        assert mapped.size == truth.size
        assert np.max(np.abs(mapped - truth)) <= tol_ms / 1000 * FS

    def test_inverted_lead(self, synth60):
        res = detect_r_peaks(synth60.physical(1), DetectorConfig(FS))
        assert res.peak_indices.size == synth60.beat_samples.size

    @pytest.mark.parametrize("bpm", [45, 75, 110, 150])
    def test_rates(self, bpm):
        rec = generate_synthetic_record(bpm, 40, FS, seed=3)
        res = detect_r_peaks(rec.physical(0), DetectorConfig(FS))
        assert res.peak_indices.size == rec.beat_samples.size

    def test_refractory_and_order(self, rng):
        x = rng.standard_normal(20 * 360)
        cfg = DetectorConfig(FS)
        p = detect_r_peaks(x, cfg).peak_indices
        assert (np.diff(p) >= cfg.seconds(cfg.refractory)).all()

    def test_searchback_recovers_small_beat(self):
        rec = generate_synthetic_record(60, 30, FS, seed=5, noise=0.0)
        x = rec.physical(0)
        beat = rec.beat_samples[15]
        x[beat - 30:beat + 30] *= 0.3  # one weak beat
        with_sb = detect_r_peaks(x, DetectorConfig(FS))
        without = detect_r_peaks(x, DetectorConfig(FS, searchback=False))
        near = lambda r: np.min(np.abs(r.peak_indices - beat)) <= 7
        assert near(with_sb) and not near(without)

    @pytest.mark.parametrize("alpha", [0.5, 3, 100])
    def test_scale_invariance(self, synth60, rng, alpha):
        for x in (synth60.physical(0), synth60.physical(1) + 0.1 * rng.standard_normal(synth60.channels[0].size)):
            base = detect_r_peaks(x, DetectorConfig(FS)).peak_indices
            np.testing.assert_array_equal(detect_r_peaks(alpha * x, DetectorConfig(FS)).peak_indices, base)

    def test_backends_identical(self, kernels, synth60, rng):
        x = synth60.physical(0) + 0.2 * rng.standard_normal(synth60.channels[0].size)
        res = detect_r_peaks(x, DetectorConfig(FS))
        from csecg import _backend
        other = _backend.python_kernels if kernels is not _backend.python_kernels else _backend.compiled_kernels
        if other is None:
            pytest.skip("single backend")
        import csecg.detector as det
        saved = det.kernels
        det.kernels = other
        try:
            np.testing.assert_array_equal(detect_r_peaks(x, DetectorConfig(FS)).peak_indices, res.peak_indices)
        finally:
            det.kernels = saved

    def test_deterministic_across_threads(self, synth60):
        x = synth60.physical(0)
        base = detect_r_peaks(x, DetectorConfig(FS)).peak_indices
        with concurrent.futures.ThreadPoolExecutor(8) as pool:
            outs = list(pool.map(lambda _: detect_r_peaks(x, DetectorConfig(FS)).peak_indices, range(16)))
        for o in outs:
            np.testing.assert_array_equal(o, base)

    def test_json(self, synth60):
        import json
        res = detect_r_peaks(synth60.physical(0)[:3600], DetectorConfig(FS), {"record": "s"})
        doc = json.loads(res.to_json(SensingConfig(3600, 3600)))
        assert doc["original_indices"] == doc["peak_indices"] and doc["source"] == {"record": "s"}


class TestMapping:
    def _res(self, idx):
        from csecg.detector import DetectionResult
        return DetectionResult(np.asarray(idx), 45.0, 0)

    def test_identity(self):
        assert map_to_original_timescale(self._res([3, 9]), SensingConfig(10, 10)).tolist() == [3, 9]

    def test_block_centre(self):
        assert map_to_original_timescale(self._res([10]), SensingConfig(80, 10)).tolist() == [84]
