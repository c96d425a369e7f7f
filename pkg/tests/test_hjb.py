"""Tests for the backward level-set solver and its update kernels."""

import subprocess
import sys

import numpy as np
import pytest

from stlt import _kernels
from stlt.dynamics import single_integrator, unicycle
from stlt.hjb import solve_backward
from stlt.regions import Disk, GridAxis, grid_points, sample_region

AXES_2D = (GridAxis(-4.0, 4.0, 81), GridAxis(-4.0, 4.0, 81))


def earliest_slice(terminal, dyn, t_end, axes, mode, step=0.05):
    times, fields = solve_backward(terminal, dyn, 0.0, t_end, axes, mode=mode, step=step)
    assert times[0] == 0.0 and times[-1] == t_end
    return np.asarray(fields[0].values, dtype=float).ravel()


class TestSolveBackward:
    def test_terminal_slice_stores_target_values(self):
        disk = Disk((0.0, 0.0), 1.2)
        _, fields = solve_backward(disk, single_integrator(1.0), 0.0, 2.0, AXES_2D)
        h = sample_region(disk, AXES_2D)
        # only the float32 cast separates the stored slice from h
        assert np.max(np.abs(np.asarray(fields[-1].values, dtype=float) - h)) <= 1e-5

    def test_max_mode_grows_disk(self):
        # a disk target under ball-bounded inputs grows linearly in time;
        # the exact earliest slice is min(r, r + T - d), with a gradient
        # kink at d = T that first-order upwinding rounds off.  Near the
        # zero level, where the slice defines a set, the error stays
        # within two grid cells.
        v = earliest_slice(Disk((0.0, 0.0), 1.2), single_integrator(1.0), 2.0, AXES_2D, "max")
        d = np.linalg.norm(grid_points(AXES_2D), axis=1)
        exact = np.minimum(1.2, 1.2 + 2.0 - d)
        two_cells = 2 * AXES_2D[0].spacing
        err = np.abs(v - exact)
        assert np.max(err[np.abs(1.2 + 2.0 - d) <= two_cells]) <= two_cells
        mismatch = (v >= 0) != (exact >= 0)
        assert not mismatch.any() or np.max(np.abs(1.2 + 2.0 - d)[mismatch]) <= two_cells
        assert np.max(err) <= 0.3

    def test_min_mode_shrinks_disk(self):
        # worst-case inputs retreat from the disk at full speed, so the
        # exact earliest slice is r - d - T
        v = earliest_slice(Disk((0.0, 0.0), 3.0), single_integrator(1.0), 1.0, AXES_2D, "min")
        d = np.linalg.norm(grid_points(AXES_2D), axis=1)
        exact = 3.0 - d - 1.0
        two_cells = 2 * AXES_2D[0].spacing
        assert np.max(np.abs(v - exact)[np.abs(exact) <= two_cells]) <= two_cells
        assert np.max(np.abs(v - exact)) <= 0.2

    def test_input_scale_shrinks_growth(self):
        disk = Disk((0.0, 0.0), 1.2)
        full = earliest_slice(disk, single_integrator(1.0), 2.0, AXES_2D, "max")
        again = earliest_slice(disk, single_integrator(1.0), 2.0, AXES_2D, "max")
        slower = earliest_slice(disk, single_integrator(0.5), 2.0, AXES_2D, "max")
        _, fields = solve_backward(
            disk, single_integrator(1.0), 0.0, 2.0, AXES_2D, input_scale=0.5
        )
        v_scaled = np.asarray(fields[0].values, dtype=float).ravel()
        # halving the input set equals halving the speed; growth stays
        # below the full-speed solve up to substep-count differences
        assert np.max(np.abs(v_scaled - slower)) <= 1e-5
        assert np.max(v_scaled - full) <= 1e-3
        assert np.array_equal(full, again)

    def test_slices_monotone_in_max_mode(self):
        # reachable sets nest as the remaining window lengthens; the
        # scheme honors this up to a small dissipation overshoot
        _, fields = solve_backward(
            Disk((0.0, 0.0), 1.2), single_integrator(1.0), 0.0, 2.0, AXES_2D
        )
        for k in range(len(fields) - 1):
            earlier = np.asarray(fields[k].values, dtype=float)
            later = np.asarray(fields[k + 1].values, dtype=float)
            assert np.min(earlier - later) >= -0.1

    def test_zero_span_returns_single_terminal_slice(self):
        disk = Disk((0.0, 0.0), 1.2)
        times, fields = solve_backward(disk, single_integrator(1.0), 3.0, 3.0, AXES_2D)
        assert times.tolist() == [3.0]
        assert len(fields) == 1
        h = sample_region(disk, AXES_2D)
        assert np.max(np.abs(np.asarray(fields[0].values, dtype=float) - h)) <= 1e-5

    def test_slice_grid_spacing(self):
        times, fields = solve_backward(
            Disk((0.0, 0.0), 1.2), single_integrator(1.0), 0.0, 2.0, AXES_2D, step=0.05
        )
        assert len(times) == 41 and len(fields) == 41
        np.testing.assert_allclose(times, np.linspace(0.0, 2.0, 41), atol=1e-12)

    def test_argument_validation(self):
        disk = Disk((0.0, 0.0), 1.2)
        with pytest.raises(ValueError):
            solve_backward(disk, single_integrator(1.0), 2.0, 1.0, AXES_2D)
        with pytest.raises(ValueError):
            solve_backward(disk, single_integrator(1.0), 0.0, 1.0, AXES_2D, mode="sup")


class TestUnicycleGrid:
    @pytest.fixture(scope="class")
    def earliest(self):
        axes = (
            GridAxis(-5.0, 5.0, 41),
            GridAxis(-5.0, 5.0, 41),
            GridAxis(-np.pi, np.pi, 25, periodic=True),
        )
        _, fields = solve_backward(
            Disk((0.0, 0.0), 1.0, projected=True), unicycle(1.0, 1.0), 0.0, 2.0, axes
        )
        return fields[0]

    def test_reachability_verdicts(self, earliest):
        # frozen from this solver configuration; signs carry the meaning
        # (the disk is reachable within 2 s from 2 away but not from 4.5)
        assert earliest.interpolate(np.array([0.0, 0.0, 0.0])) == pytest.approx(0.5645701885, abs=1e-6)
        assert earliest.interpolate(np.array([-2.0, 0.0, 0.0])) == pytest.approx(0.4024205208, abs=1e-6)
        assert earliest.interpolate(np.array([-4.5, 0.0, 0.0])) == pytest.approx(-1.6018791199, abs=1e-6)

    def test_mirror_symmetry(self, earliest):
        # (x, y, theta) -> (-x, -y, theta) maps trajectories to
        # trajectories when the speed bound is symmetric
        a = earliest.interpolate(np.array([-2.0, 0.0, 0.0]))
        b = earliest.interpolate(np.array([2.0, 0.0, 0.0]))
        assert abs(a - b) <= 1e-6

    def test_heading_wrap(self, earliest):
        x = np.array([1.3, -0.7, np.pi - 0.3])
        shifted = x - np.array([0.0, 0.0, 2 * np.pi])
        assert abs(earliest.interpolate(x) - earliest.interpolate(shifted)) <= 1e-12


class TestKernels:
    @pytest.mark.parametrize(
        "ndim,kind,periodic",
        [
            (2, _kernels.KIND_BOX, (False, False)),
            (2, _kernels.KIND_BALL, (False, True)),
            (3, _kernels.KIND_BOX, (False, False, True)),
            (3, _kernels.KIND_BALL, (True, False, True)),
        ],
    )
    def test_numba_matches_numpy(self, ndim, kind, periodic):
        if not _kernels.HAS_NUMBA:
            pytest.skip("numba not installed")
        rng = np.random.default_rng(7)
        shape = (20,) * ndim
        V = rng.normal(size=shape)
        F = rng.normal(size=shape + (ndim,))
        G = rng.normal(size=shape + (ndim, 2))
        dxs = np.full(ndim, 0.13)
        bounds = (1.3, 0.7) if kind == _kernels.KIND_BOX else (1.1,)
        alphas = np.full(ndim, 4.0)
        args = (V, F, G, dxs, periodic, kind, bounds, 1.0, alphas, 0.01)
        assert np.max(np.abs(_kernels.lf_step_numpy(*args) - _kernels.lf_step_numba(*args))) <= 1e-12

    def test_pure_numpy_env_flag(self, tmp_path):
        # the flag is read at import time, so the fallback path needs a
        # fresh interpreter; the solve itself must agree with this
        # process (float32 storage absorbs last-bit differences)
        out_file = tmp_path / "slice.npy"
        code = (
            "import numpy as np\n"
            "from stlt import _kernels\n"
            "assert _kernels.PURE_NUMPY and not _kernels.USE_NUMBA\n"
            "from stlt.dynamics import single_integrator\n"
            "from stlt.hjb import solve_backward\n"
            "from stlt.regions import Disk, GridAxis\n"
            "axes = (GridAxis(-4.0, 4.0, 41), GridAxis(-4.0, 4.0, 41))\n"
            "_, f = solve_backward(Disk((0.0, 0.0), 1.2), single_integrator(1.0),\n"
            "                      0.0, 1.0, axes, mode='max', step=0.1)\n"
            "np.save(%r, np.asarray(f[0].values))\n" % str(out_file)
        )
        import os

        env = dict(os.environ, STLT_PURE_NUMPY="1")
        proc = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, env=env
        )
        assert proc.returncode == 0, proc.stderr
        axes = (GridAxis(-4.0, 4.0, 41), GridAxis(-4.0, 4.0, 41))
        _, fields = solve_backward(
            Disk((0.0, 0.0), 1.2), single_integrator(1.0), 0.0, 1.0, axes, mode="max", step=0.1
        )
        pure = np.load(out_file)
        assert np.max(np.abs(pure - np.asarray(fields[0].values))) <= 1e-6
