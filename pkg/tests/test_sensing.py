import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from csecg.errors import DimensionError, IncompatibleRatioError
from csecg.sensing import (
    MultiChannelCompressed,
    SensingConfig,
    build_dbbd_matrix,
    compress_channel,
    compress_multichannel,
    config_from_cr,
)


class TestConfig:
    @pytest.mark.parametrize("n,cr,m,d", [
        (10240, 0.5, 5120, 2), (10240, 0.75, 2560, 4), (10240, 0.875, 1280, 8),
        (256, 0.875, 32, 8), (256, 0.5, 128, 2), (256, 0.75, 64, 4), (100, 0, 100, 1),
    ])
    def test_from_cr(self, n, cr, m, d):
        cfg = config_from_cr(n, cr)
        assert (cfg.m, cfg.d) == (m, d)
        assert cfg.cr_fraction == Fraction(str(cr))

    @pytest.mark.parametrize("cr", [0.3, 1.0, -0.5, 0.999])
    def test_incompatible(self, cr):
        with pytest.raises(IncompatibleRatioError):
            config_from_cr(10240, cr)

    def test_bad_dimensions(self):
        with pytest.raises(IncompatibleRatioError):
            SensingConfig(10, 3)
        with pytest.raises(IncompatibleRatioError):
            SensingConfig(2, 4)


class TestMatrix:
    def test_small(self):
        assert build_dbbd_matrix(SensingConfig(4, 2)).tolist() == [[1, 1, 0, 0], [0, 0, 1, 1]]
        np.testing.assert_array_equal(build_dbbd_matrix(SensingConfig(3, 3)), np.eye(3, dtype=int))
        assert build_dbbd_matrix(SensingConfig(8, 2)).tolist() == [[1] * 4 + [0] * 4, [0] * 4 + [1] * 4]

    @pytest.mark.parametrize("n,m", [(16, 4), (64, 8), (30, 5)])
    def test_row_and_column_counts(self, n, m):
        phi = build_dbbd_matrix(SensingConfig(n, m))
        assert (phi.sum(axis=1) == n // m).all()
        assert (phi.sum(axis=0) == 1).all()


class TestCompress:
    def test_block_sums(self, kernels):
        assert compress_channel([1, 2, 3, 4], SensingConfig(4, 2, normalize=False)).data.tolist() == [3, 7]
        y = compress_channel([1, 1, 1, 1, 2, 2, 2, 2], SensingConfig(8, 2, normalize=True)).data
        assert y.tolist() == [1.0, 2.0]

    def test_protocol_length(self):
        x = np.zeros(10240)
        assert compress_channel(x, config_from_cr(10240, 0.875)).data.size == 1280

    def test_effective_rate(self):
        c = compress_channel(np.zeros(1024), config_from_cr(1024, 0.75), sampling_rate=360)
        assert c.effective_rate == 90
        assert c.effective_rate * c.config.d == 360

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            compress_channel(np.zeros(10), SensingConfig(8, 4))

    def test_integer_exact(self, kernels, rng):
        x = rng.integers(-2048, 2048, 4096)
        y = compress_channel(x, SensingConfig(4096, 512, normalize=False)).data
        assert y.dtype == np.int64
        np.testing.assert_array_equal(y, build_dbbd_matrix(SensingConfig(4096, 512)) @ x)

    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from([1, 2, 4, 8]), st.integers(1, 64), st.data())
    def test_oracle_equivalence(self, d, m, data):
        x = data.draw(arrays(np.int64, m * d, elements=st.integers(-2048, 2047)))
        cfg = SensingConfig(m * d, m, normalize=False)
        np.testing.assert_array_equal(compress_channel(x, cfg).data, build_dbbd_matrix(cfg) @ x)

    def test_linearity(self, rng):
        cfg = SensingConfig(800, 100, normalize=True)
        x, z = rng.standard_normal(800), rng.standard_normal(800)
        a, b = 2.5, -0.75
        lhs = compress_channel(a * x + b * z, cfg).data
        rhs = a * compress_channel(x, cfg).data + b * compress_channel(z, cfg).data
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
        xi, zi = rng.integers(-100, 100, 800), rng.integers(-100, 100, 800)
        cfg_i = SensingConfig(800, 100, normalize=False)
        np.testing.assert_array_equal(
            compress_channel(3 * xi - 2 * zi, cfg_i).data,
            3 * compress_channel(xi, cfg_i).data - 2 * compress_channel(zi, cfg_i).data,
        )

    @pytest.mark.parametrize("normalize,expected", [(False, 7 * 8), (True, 7)])
    def test_constant(self, normalize, expected):
        y = compress_channel(np.full(64, 7), SensingConfig(64, 8, normalize)).data
        assert (y == expected).all()

    def test_shift(self, rng):
        d, m = 4, 50
        x = rng.integers(-50, 50, d * (m + 1))
        cfg = SensingConfig(d * m, m, normalize=False)
        y0 = compress_channel(x[:d * m], cfg).data
        y1 = compress_channel(x[d:], cfg).data
        np.testing.assert_array_equal(y1[:-1], y0[1:])

    def test_identity(self, rng):
        x = rng.standard_normal(333)
        np.testing.assert_array_equal(compress_channel(x, config_from_cr(333, 0)).data, x)

    def test_backend_float_parity(self, rng):
        from csecg import _backend
        if _backend.compiled_kernels is None:
            pytest.skip("compiled kernels not loaded")
        x = rng.standard_normal(4096) * 1e3
        for d in (1, 2, 4, 8, 16):
            np.testing.assert_array_equal(_backend.compiled_kernels.block_sum(x, d),
                                          _backend.python_kernels.block_sum(x, d))


class TestMultichannel:
    def test_identical_channels(self, rng):
        x = rng.standard_normal(64)
        mc = compress_multichannel([x, x.copy()], SensingConfig(64, 16))
        assert mc.t == 2
        np.testing.assert_array_equal(mc.channels[0].data, mc.channels[1].data)
        assert mc.as_matrix().shape == (16, 2)

    def test_single_channel(self, rng):
        x = rng.standard_normal(64)
        cfg = SensingConfig(64, 16)
        np.testing.assert_array_equal(compress_multichannel([x], cfg).channels[0].data,
                                      compress_channel(x, cfg).data)

    def test_ragged(self):
        with pytest.raises(DimensionError):
            compress_multichannel([np.zeros(8), np.zeros(9)], SensingConfig(8, 4))

    def test_serialization(self, rng):
        cfg = config_from_cr(64, 0.75)
        mc = compress_multichannel([rng.standard_normal(64), rng.standard_normal(64)], cfg, 360)
        doc = json.loads(mc.to_json())
        assert doc["config"]["d"] == 4 and doc["effective_rate"] == 90
        back = MultiChannelCompressed.from_json(mc.to_json())
        np.testing.assert_array_equal(back.as_matrix(), mc.as_matrix())
        lines = mc.to_csv().splitlines()
        assert lines[0] == "ch0,ch1" and len(lines) == 17
