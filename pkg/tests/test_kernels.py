"""The numba kernels and their numpy fallbacks must agree."""

import numpy as np
import pytest

from pcbls import _kernels


requires_numba = pytest.mark.skipif(
    not _kernels.USE_NUMBA, reason="numba disabled or unavailable"
)


@requires_numba
class TestPathEquivalence:
    def test_conv2d(self, rng):
        for _ in range(20):
            h, w = rng.integers(1, 12, size=2)
            k = int(rng.choice([1, 3, 5]))
            src = rng.normal(size=(h, w))
            ker = rng.uniform(size=(k, k))
            ker /= ker.sum()
            a = _kernels.conv2d_replicate(src, ker)
            b = _kernels.conv2d_replicate_np(src, ker)
            assert np.allclose(a, b, atol=1e-12)

    def test_fcn_forward(self, rng):
        x = rng.normal(size=(6, 7, 3))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        a = _kernels.fcn_conv_forward(x, w, b)
        c = _kernels.fcn_conv_forward_np(x, w, b)
        assert np.allclose(a, c, atol=1e-12)

    def test_fcn_backward(self, rng):
        x = rng.normal(size=(5, 5, 2))
        w = rng.normal(size=(3, 2, 3, 3))
        dout = rng.normal(size=(5, 5, 3))
        dx1, dw1, db1 = _kernels.fcn_conv_backward(x, w, dout)
        dx2, dw2, db2 = _kernels.fcn_conv_backward_np(x, w, dout)
        assert np.allclose(dx1, dx2, atol=1e-12)
        assert np.allclose(dw1, dw2, atol=1e-12)
        assert np.allclose(db1, db2, atol=1e-12)

    def test_glass_swaps(self, rng):
        img = rng.uniform(size=(7, 6, 3))
        offsets = rng.integers(-2, 3, size=(2, 7, 6, 2)).astype(np.int64)
        a = _kernels.glass_swaps(img, offsets)
        b = _kernels.glass_swaps_np(img[:, :, :], offsets)
        assert np.array_equal(a, b)


class TestFallbackAlwaysAvailable:
    def test_numpy_conv_matches_definition(self, rng):
        src = rng.normal(size=(4, 4))
        out = _kernels.conv2d_replicate_np(src, np.array([[1.0]]))
        assert np.array_equal(out, src)

    def test_glass_swaps_preserves_multiset(self, rng):
        img = rng.uniform(size=(5, 5, 1))
        offsets = rng.integers(-1, 2, size=(3, 5, 5, 2)).astype(np.int64)
        out = _kernels.glass_swaps_np(img, offsets)
        assert np.allclose(np.sort(out.ravel()), np.sort(img.ravel()))
