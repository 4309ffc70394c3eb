import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bohmsim.grid import (BoundaryWarning, DensityField, Grid, WaveFunction, check_boundary, density, integrate,
                          make_grid, norm, normalize, read_field, sample_density, spectral_gradient,
                          spectral_laplacian, write_field)
from bohmsim.states import gaussian, plane_wave


def test_grid_rejects_small_or_degenerate():
    with pytest.raises(ValueError, match="too small"):
        make_grid(1, 8, 10.0)
    with pytest.raises(ValueError, match="positive"):
        make_grid(1, 64, -1.0)


def test_grid_geometry():
    g = make_grid(2, (32, 64), (4.0, 8.0))
    assert g.shape == (32, 64)
    assert g.spacing == (0.125, 0.125)
    assert g.axis(0)[0] == -2.0
    assert math.isclose(g.cell_volume, 0.125**2)
    assert g.contains(np.array([[0.0, 0.0], [2.0, 0.0], [-2.0, -4.0]])).tolist() == [True, False, True]


def test_gaussian_normalized_quadrature():
    g = make_grid(1, 256, 30.0)
    psi = gaussian(g, 0.5, 1.2, 0.3)
    assert abs(norm(psi) - 1) < 1e-12
    x = g.axis(0)
    var = integrate((x - 0.5) ** 2 * np.abs(psi.values) ** 2, g)
    assert abs(var - 1.2**2) < 1e-10


def test_normalize_zero_raises():
    g = make_grid(1, 32, 1.0)
    with pytest.raises(ValueError):
        normalize(WaveFunction(g, np.zeros(32)))


def test_wavefunction_values_read_only():
    g = make_grid(1, 32, 1.0)
    psi = WaveFunction(g, np.ones(32))
    with pytest.raises(ValueError):
        psi.values[0] = 2


def test_spectral_derivatives_exact_on_plane_wave():
    g = make_grid(1, 64, 10.0)
    psi = plane_wave(g, 3)
    k = 2 * np.pi * 3 / 10.0
    grad = spectral_gradient(psi.values, g)[0]
    assert np.max(np.abs(grad - 1j * k * psi.values)) < 1e-12
    lap = spectral_laplacian(psi.values, g)
    assert np.max(np.abs(lap + k**2 * psi.values)) < 1e-11


def test_density_rejects_negative():
    g = make_grid(1, 32, 1.0)
    with pytest.raises(ValueError):
        DensityField(g, -np.ones(32))


def test_sample_density_requires_normalization():
    g = make_grid(1, 64, 10.0)
    with pytest.raises(ValueError, match="normalized"):
        sample_density(DensityField(g, np.full(64, 2.0)), 10, 0)


def test_sample_density_reproducible_and_binned():
    g = make_grid(1, 128, 20.0)
    rho = density(gaussian(g, 0.0, 1.0))
    a = sample_density(rho, 5000, 42)
    b = sample_density(rho, 5000, 42)
    assert a.shape == (5000, 1)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_density(rho, 5000, 43))
    assert abs(a.mean()) < 4 / math.sqrt(5000)
    assert abs(a.std() - 1.0) < 0.05


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 200))
def test_samples_stay_on_grid(seed, n):
    g = make_grid(2, (16, 24), (3.0, 5.0))
    vals = np.random.default_rng(seed).random(g.shape) + 0.01
    rho = DensityField(g, vals / integrate(vals, g))
    pts = sample_density(rho, n, seed)
    assert pts.shape == (n, 2)
    assert np.all(g.contains(pts))


def test_boundary_warning():
    g = make_grid(1, 64, 10.0)
    with pytest.warns(BoundaryWarning):
        assert check_boundary(np.ones(64), g) is False
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_boundary(gaussian(g, 0.0, 0.3).values, g)


def test_field_roundtrip(tmp_path):
    g = make_grid(2, (16, 20), (2.0, 3.0))
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(2,) + g.shape) + 1j * rng.normal(size=(2,) + g.shape)
    write_field(tmp_path / "f.txt", vals, g, t=0.25)
    g2, v2, meta = read_field(tmp_path / "f.txt")
    assert g2 == g
    assert np.array_equal(v2, vals)
    assert float(meta["t"]) == 0.25
