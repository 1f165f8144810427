import numpy as np
import pytest

from dopinv.grid import (
    GAMMA0,
    GAMMA1,
    BOUNDARY_SEGMENTS,
    ScalarField,
    Trace,
    constant_field,
    constant_trace,
    field_from_function,
    field_laplacian,
    integrate_trace,
    load_field,
    load_trace,
    make_grid,
    save_field,
    save_trace,
    symmetric_difference_error,
    trace_from_function,
)


class TestMakeGrid:
    def test_spacing_and_count(self):
        g = make_grid(4)
        assert g.h == 0.25
        assert g.cell_x.size == 4
        assert constant_field(g, 0.0).values.size == 16

    def test_finer_grid(self):
        assert make_grid(64).h == pytest.approx(1.0 / 64.0)

    def test_top_row_centers(self):
        for n in (4, 9, 32):
            g = make_grid(n)
            assert g.cell_y[-1] == pytest.approx(1.0 - g.h / 2.0)

    def test_rejects_small(self):
        with pytest.raises(ValueError):
            make_grid(3)

    def test_segments_partition_boundary(self):
        assert len(set(BOUNDARY_SEGMENTS)) == 4


class TestTraceIntegration:
    def test_constant(self):
        g = make_grid(8)
        assert integrate_trace(constant_trace(g, GAMMA1, 3.5)) == pytest.approx(3.5, rel=1e-15)

    def test_zero(self):
        g = make_grid(8)
        assert integrate_trace(constant_trace(g, GAMMA1, 0.0)) == 0.0

    def test_midpoint_by_hand(self):
        g = make_grid(4)
        t = Trace(g, GAMMA1, g.cell_x)
        assert integrate_trace(t) == pytest.approx(0.25 * (0.125 + 0.375 + 0.625 + 0.875), rel=1e-15)

    def test_exact_for_linear(self):
        g = make_grid(16)
        t = trace_from_function(g, GAMMA1, lambda x: 2.0 * x - 0.3)
        assert integrate_trace(t) == pytest.approx(1.0 - 0.3, rel=1e-13)

    def test_wrong_segment_rejected(self):
        g = make_grid(8)
        with pytest.raises(ValueError, match="gamma1"):
            integrate_trace(constant_trace(g, GAMMA0, 1.0))


class TestFieldLaplacian:
    def test_constant_annihilated(self):
        g = make_grid(16)
        lap = field_laplacian(constant_field(g, 4.2))
        assert np.max(np.abs(lap.values)) == 0.0

    def test_quadratic_interior(self):
        errs = []
        for n in (16, 32):
            g = make_grid(n)
            lap = field_laplacian(field_from_function(g, lambda x, y: x * x))
            x, y = g.cell_mesh()
            interior = (x > 0.2) & (x < 0.8) & (y > 0.2) & (y < 0.8)
            errs.append(np.max(np.abs(lap.values[interior] - 2.0)))
        assert errs[0] < 1e-10  # centered stencil is exact on quadratics
        assert errs[1] < 1e-10

    def test_affine_annihilated_on_interior(self):
        g = make_grid(16)
        lap = field_laplacian(field_from_function(g, lambda x, y: x + y))
        assert np.max(np.abs(lap.values[1:-1, 1:-1])) < 1e-12

    def test_one_sided_rows_exact_on_cubics(self):
        g = make_grid(16)
        lap = field_laplacian(field_from_function(g, lambda x, y: y ** 3))
        assert abs(lap.values[0, 0] - 6.0 * g.cell_y[0]) < 1e-10

    def test_one_sided_rows_second_order(self):
        # y^4 exposes the leading truncation term of the one-sided stencil
        errs = []
        for n in (16, 32):
            g = make_grid(n)
            lap = field_laplacian(field_from_function(g, lambda x, y: y ** 4))
            exact = 12.0 * g.cell_y[0] ** 2
            errs.append(abs(lap.values[0, 0] - exact))
        assert errs[0] / errs[1] > 3.0  # at least ~second order


class TestSymmetricDifference:
    def test_identical(self):
        g = make_grid(8)
        a = constant_field(g, 1.0)
        assert symmetric_difference_error(a, a) == 0.0

    def test_whole_square(self):
        g = make_grid(8)
        assert symmetric_difference_error(constant_field(g, 1.0), constant_field(g, 0.0)) == 1.0

    def test_half_overlap(self):
        g = make_grid(8)
        left = field_from_function(g, lambda x, y: (x < 0.5).astype(float))
        bottom = field_from_function(g, lambda x, y: (y < 0.5).astype(float))
        assert symmetric_difference_error(left, bottom) == pytest.approx(0.5, rel=1e-15)

    def test_rejects_non_indicator(self):
        g = make_grid(8)
        with pytest.raises(ValueError, match="indicator"):
            symmetric_difference_error(constant_field(g, 0.5), constant_field(g, 0.0))


class TestValidation:
    def test_field_must_be_finite(self):
        g = make_grid(4)
        values = np.zeros((4, 4))
        values[1, 1] = np.nan
        with pytest.raises(ValueError, match="finite"):
            ScalarField(g, values)

    def test_trace_shape(self):
        g = make_grid(4)
        with pytest.raises(ValueError):
            Trace(g, GAMMA1, np.zeros(5))

    def test_unknown_segment(self):
        g = make_grid(4)
        with pytest.raises(ValueError, match="segment"):
            Trace(g, "top", np.zeros(4))

    def test_fields_are_readonly(self):
        g = make_grid(4)
        f = constant_field(g, 1.0)
        with pytest.raises(ValueError):
            f.values[0, 0] = 2.0


class TestSerialization:
    def test_field_roundtrip_bit_exact(self, tmp_path):
        g = make_grid(8)
        rng = np.random.default_rng(0)
        f = ScalarField(g, rng.standard_normal((8, 8)) * 1e3)
        path = tmp_path / "field.txt"
        save_field(f, path)
        f2 = load_field(path)
        assert f2.grid.n == 8
        assert np.array_equal(f.values, f2.values)

    def test_field_rows_bottom_first(self, tmp_path):
        g = make_grid(4)
        f = field_from_function(g, lambda x, y: y)
        path = tmp_path / "field.txt"
        save_field(f, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "n=4"
        assert float(lines[1].split()[0]) == pytest.approx(g.cell_y[0])

    def test_trace_roundtrip_bit_exact(self, tmp_path):
        g = make_grid(8)
        rng = np.random.default_rng(1)
        t = Trace(g, GAMMA1, rng.standard_normal(8))
        path = tmp_path / "trace.csv"
        save_trace(t, path)
        t2 = load_trace(path, g, GAMMA1)
        assert np.array_equal(t.values, t2.values)

    def test_trace_header(self, tmp_path):
        g = make_grid(4)
        path = tmp_path / "trace.csv"
        save_trace(constant_trace(g, GAMMA0, 1.0), path)
        assert path.read_text().splitlines()[0] == "x,value"

    def test_repeated_save_byte_identical(self, tmp_path):
        g = make_grid(8)
        f = field_from_function(g, lambda x, y: np.sin(7 * x) + y / 3)
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        save_field(f, p1)
        save_field(f, p2)
        assert p1.read_bytes() == p2.read_bytes()
