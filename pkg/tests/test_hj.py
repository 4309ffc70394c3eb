import numpy as np
import pytest

from bohmsim import hj
from bohmsim.grid import DensityField, WaveFunction, density, integrate, make_grid, normalize
from bohmsim.schrodinger import evolve, free, harmonic
from bohmsim.states import coherent_state, gaussian, harmonic_ground, plane_wave, superposition


@pytest.fixture(scope="module")
def grid():
    return make_grid(1, 512, 40.0)


def test_riccati_free_closed_form():
    st = hj.QuadraticHJState(0.3, 0.2)
    out = hj.evolve_quadratic_S(st, 0.01, 200)
    assert abs(out.a - hj.riccati_free(0.3, 2.0)) < 1e-10
    assert out.t == pytest.approx(2.0)


def test_riccati_harmonic_closed_form():
    st = hj.QuadraticHJState(0.1, 0.0, omega=1.3)
    out = hj.evolve_quadratic_S(st, 0.001, 500)
    assert abs(out.a - hj.riccati_harmonic(0.1, 0.5, 1.3)) < 1e-10


def test_free_caustic_raises():
    # a0 < 0 focuses at t = -m / (2 a0) = 1
    with pytest.raises(hj.CausticError) as err:
        hj.evolve_quadratic_S(hj.QuadraticHJState(-0.5, 0.0), 0.001, 2000)
    assert abs(err.value.time - 1.0) < 0.01


def test_caustic_truncates_trajectories():
    tr = hj.integrate_zeta(hj.QuadraticHJState(-0.5, 0.0), 1.0, 2.0, 0.01)
    assert tr.status == "caustic"
    assert tr.times[-1] <= 1.0 + 1e-12


def test_free_zeta_exact():
    st = hj.QuadraticHJState(0.0, 0.7)
    tr = hj.integrate_zeta(st, [0.0, 1.0, -2.0], 3.0, 0.01)
    for t, q0 in zip(tr, [0.0, 1.0, -2.0]):
        assert np.max(np.abs(t.positions[:, 0] - (q0 + 0.7 * t.times))) < 1e-12


def test_zeta_fixed_point():
    # v = 2 a q / m vanishes at q = 0
    tr = hj.integrate_zeta(hj.QuadraticHJState(0.4, 0.0), 0.0, 1.0, 0.01)
    assert np.all(tr.positions == 0.0)


def test_zeta_follows_hamilton_in_harmonic_well():
    st = hj.QuadraticHJState(0.25, 0.5, omega=1.0)
    q0 = np.linspace(-2, 2, 5)
    paths, times, status = hj.zeta_paths(st, q0, 1.0, 0.001)
    p0 = 2 * st.a * q0 + st.b
    exact = hj.hamilton_flow(q0[None], p0[None], times[:, None], omega=1.0)
    assert status == "complete"
    assert np.max(np.abs(paths - exact)) < 1e-10


def test_transport_conserves_mass_and_scales_variance(grid):
    rho = density(gaussian(grid, 0.0, 1.0))
    st = hj.QuadraticHJState(0.5, 0.0)  # alpha(t) = 1 + 2 a0 t / m
    out, st2 = hj.transport_density(rho, st, 0.01, 100)
    x = grid.axis(0)
    assert abs(out.integral() - 1) < 1e-10
    alpha = 1 + 2 * 0.5 * 1.0
    assert abs(integrate(x**2 * out.values, grid) - alpha**2) < 1e-8


def test_zero_velocity_leaves_density(grid):
    rho = density(gaussian(grid, 0.3, 0.8))
    out, _ = hj.transport_density(rho, hj.QuadraticHJState(0.0, 0.0), 0.1, 10)
    assert np.max(np.abs(out.values - rho.values)) < 1e-12


def test_fourier_interpolation_exact_on_grid(grid):
    vals = np.abs(gaussian(grid, 0.0, 1.0).values) ** 2
    assert np.max(np.abs(hj.fourier_interpolate(vals, grid, grid.axis(0)) - vals)) < 1e-12


def test_zeta_ensemble_matches_transport(grid):
    rho = density(gaussian(grid, 0.0, 1.0))
    chk = hj.zeta_ensemble_check(hj.QuadraticHJState(0.2, 0.3), rho, 1.0, 0.01, 20000, 5)
    assert chk.tv < 0.05
    assert chk.mean_ok


def test_quantum_potential_gaussian(grid):
    # R ~ exp(-x^2 / 4 s^2) gives V_Q = (hbar^2 / 2m)(1 / 2 s^2 - x^2 / 4 s^4)
    s = 1.2
    vq = hj.quantum_potential(gaussian(grid, 0.0, s))
    x = grid.axis(0)
    exact = 1 / (4 * s**2) - x**2 / (8 * s**4)
    core = np.abs(x) < 4 * s
    assert abs(vq[np.argmin(np.abs(x))] - 1 / (4 * s**2)) < 1e-10
    assert np.max(np.abs(vq.filled(np.nan)[core] - exact[core])) < 1e-8


def test_quantum_potential_plane_wave(grid):
    assert np.max(np.abs(hj.quantum_potential(plane_wave(grid, 4)))) < 1e-12


def test_ground_state_identity(grid):
    # E = V + V_Q for a real stationary state
    psi = harmonic_ground(grid)
    x = grid.axis(0)
    vq = hj.quantum_potential(psi).filled(np.nan)
    core = np.abs(x) < 4
    assert np.max(np.abs(vq[core] + 0.5 * x[core] ** 2 - 0.5)) < 1e-9


def test_residual_with_and_without_quantum_potential(grid):
    rec = evolve(coherent_state(grid, 1.0), harmonic(), 0.2, 1e-4, 100)
    full = hj.classical_limit_residual(rec, 1, include_quantum=True)
    classical = hj.classical_limit_residual(rec, 1, include_quantum=False)
    assert full.residual < 1e-4
    assert abs(classical.residual - classical.quantum_norm) / classical.quantum_norm < 0.05
    assert classical.residual > 100 * full.residual


def test_residual_needs_neighbours(grid):
    rec = evolve(gaussian(grid), free(), 0.1, 0.01)
    with pytest.raises(ValueError, match="each side"):
        hj.classical_limit_residual(rec, 0)


def test_polar_fails_near_node(grid):
    psi = normalize(WaveFunction(grid, grid.axis(0) * np.exp(-grid.axis(0) ** 2 / 4) + 0j))
    with pytest.raises(ValueError, match="node at cell"):
        hj.polar_decomposition(psi, np.abs(grid.axis(0)) < 3)


def test_polar_recovers_linear_phase(grid):
    psi = gaussian(grid, 0.0, 1.0, 2.5)
    region = hj.probe_region(psi)
    R, S = hj.polar_decomposition(psi, region)
    x = grid.axis(0)
    slope = np.polyfit(x[region], S[region], 1)[0]
    assert abs(slope - 2.5) < 1e-10


def test_hbar_scaling_exponent():
    h = np.array([0.1, 0.2, 0.4])
    assert abs(hj.hbar_scaling_exponent(h, 3 * h**2) - 2) < 1e-12


def test_fluid_evolve_roundtrip(grid):
    rho = density(superposition(grid, [0.0], 1.0))
    fl = hj.HJFluid(hj.QuadraticHJState(0.0, 0.5), rho).evolve(1.0, 0.01)
    x = grid.axis(0)
    assert abs(integrate(x * fl.density.values, grid) - 0.5) < 1e-8
    assert isinstance(fl.density, DensityField)
