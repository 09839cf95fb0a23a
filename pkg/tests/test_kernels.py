"""Backend parity: the compiled kernels must match the NumPy fallback bit-for-bit."""

import numpy as np
import pytest

from readgaze import kernels
from readgaze.kernels import fallback

native = pytest.importorskip(
    "readgaze.kernels._native", reason="compiled kernel module not built"
)


@pytest.fixture(params=[3, 17, 40])
def scanpath(request, rng):
    n = request.param
    px = rng.integers(0, 85, size=n)
    py = rng.integers(0, 110, size=n)
    f = np.linspace(0.0, 1.0, n)[:, None]
    colors = np.hstack([f, np.zeros_like(f), 1.0 - f])
    return px, py, colors


class TestRasterizeParity:
    def test_bit_identical(self, scanpath):
        px, py, colors = scanpath
        a = native.rasterize_scanpath(px, py, colors, 85, 110, 2)
        b = fallback.rasterize_scanpath(px, py, colors, 85, 110, 2)
        assert a.shape == (3, 110, 85)
        assert np.array_equal(a, b)

    def test_degenerate_single_point(self):
        px, py = np.array([42]), np.array([55])
        colors = np.array([[0.0, 0.0, 1.0]])
        a = native.rasterize_scanpath(px, py, colors, 85, 110, 2)
        b = fallback.rasterize_scanpath(px, py, colors, 85, 110, 2)
        assert np.array_equal(a, b)
        assert a[2, 55, 42] == 1.0  # blue disc present

    def test_coincident_vertices(self):
        px = np.array([10, 10, 30])
        py = np.array([20, 20, 20])
        colors = np.array([[0.0, 0.0, 1.0], [0.5, 0.0, 0.5], [1.0, 0.0, 0.0]])
        a = native.rasterize_scanpath(px, py, colors, 85, 110, 2)
        b = fallback.rasterize_scanpath(px, py, colors, 85, 110, 2)
        assert np.array_equal(a, b)

    def test_out_of_range_coordinates_clamped(self):
        px = np.array([-5, 200])
        py = np.array([-10, 300])
        colors = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        a = native.rasterize_scanpath(px, py, colors, 85, 110, 2)
        b = fallback.rasterize_scanpath(px, py, colors, 85, 110, 2)
        assert np.array_equal(a, b)

    def test_many_random_paths(self, rng):
        for _ in range(25):
            n = int(rng.integers(2, 30))
            px = rng.integers(0, 85, size=n)
            py = rng.integers(0, 110, size=n)
            colors = rng.random((n, 3))
            a = native.rasterize_scanpath(px, py, colors, 85, 110, 2)
            b = fallback.rasterize_scanpath(px, py, colors, 85, 110, 2)
            assert np.array_equal(a, b)


class TestIdtParity:
    def test_random_walks(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 200))
            x = np.cumsum(rng.normal(0, 0.004, n))
            y = np.cumsum(rng.normal(0, 0.004, n))
            t = np.cumsum(rng.choice([16.0, 17.0, 120.0], n, p=[0.5, 0.45, 0.05]))
            a = native.idt_spans(x, y, t, 0.01, 80.0, 75.0)
            b = fallback.idt_spans(x, y, t, 0.01, 80.0, 75.0)
            assert np.array_equal(a, b)

    def test_empty(self):
        e = np.empty(0)
        a = native.idt_spans(e, e, e, 0.01, 80.0, 75.0)
        b = fallback.idt_spans(e, e, e, 0.01, 80.0, 75.0)
        assert a.shape == (0, 2)
        assert np.array_equal(a, b)


class TestConvKernelsParity:
    @pytest.mark.parametrize("shape", [(1, 1, 4, 4), (2, 3, 8, 10), (4, 8, 22, 17)])
    def test_im2col(self, rng, shape):
        x = rng.normal(size=shape)
        assert np.array_equal(native.im2col3x3(x), fallback.im2col3x3(x))

    @pytest.mark.parametrize("shape", [(1, 1, 4, 4), (2, 3, 8, 10), (4, 8, 22, 17)])
    def test_col2im(self, rng, shape):
        n, c, h, w = shape
        cols = rng.normal(size=(c * 9, n * h * w))
        assert np.array_equal(
            native.col2im3x3(cols, n, c, h, w), fallback.col2im3x3(cols, n, c, h, w)
        )

    def test_col2im_adjoint_of_im2col(self, rng):
        # <im2col(x), c> == <x, col2im(c)> — the pair is a gather/scatter adjoint
        n, c, h, w = 2, 3, 6, 8
        x = rng.normal(size=(n, c, h, w))
        cols = rng.normal(size=(c * 9, n * h * w))
        lhs = float((fallback.im2col3x3(x) * cols).sum())
        rhs = float((x * fallback.col2im3x3(cols, n, c, h, w)).sum())
        assert lhs == pytest.approx(rhs, rel=1e-12)

    @pytest.mark.parametrize("shape", [(1, 1, 4, 4), (2, 3, 8, 10), (3, 5, 12, 20)])
    def test_maxpool(self, rng, shape):
        x = rng.normal(size=shape)
        o1, a1 = native.maxpool2x2(x)
        o2, a2 = fallback.maxpool2x2(x)
        assert np.array_equal(o1, o2)
        assert np.array_equal(a1, a2)

    def test_maxpool_tie_rule(self):
        # all-equal block: first cell in row-major scan order wins
        x = np.zeros((1, 1, 2, 2))
        for backend in (native, fallback):
            out, arg = backend.maxpool2x2(x)
            assert out[0, 0, 0, 0] == 0.0
            assert arg[0, 0, 0, 0] == 0

    def test_maxpool_backward(self, rng):
        x = rng.normal(size=(2, 4, 10, 8))
        _, arg = fallback.maxpool2x2(x)
        g = rng.normal(size=(2, 4, 5, 4))
        assert np.array_equal(
            native.maxpool2x2_backward(g, arg), fallback.maxpool2x2_backward(g, arg)
        )


class TestDispatch:
    def test_backend_reported(self):
        assert kernels.backend_name() in ("native", "fallback")

    def test_public_functions_bound(self):
        for name in (
            "rasterize_scanpath",
            "idt_spans",
            "im2col3x3",
            "col2im3x3",
            "maxpool2x2",
            "maxpool2x2_backward",
        ):
            assert callable(getattr(kernels, name))
