import numpy as np
import pytest

from bohmsim.grid import WaveFunction, integrate, make_grid, norm
from bohmsim.schrodinger import Potential, energy, evolve, fidelity, free, harmonic, linear, step_split_operator
from bohmsim.states import coherent_state, free_width, gaussian, harmonic_ground, plane_wave


@pytest.fixture
def grid():
    return make_grid(1, 512, 40.0)


def test_single_step_preserves_norm(grid):
    psi = gaussian(grid, 1.0, 0.8, 1.5)
    out = step_split_operator(psi, harmonic(), 0.01)
    assert abs(norm(out) - 1) < 1e-12
    assert out.time == pytest.approx(0.01)


def test_plane_wave_acquires_exact_phase(grid):
    psi = plane_wave(grid, 4)
    k = 2 * np.pi * 4 / 40.0
    out = step_split_operator(psi, free(), 0.3)
    assert np.max(np.abs(out.values - psi.values * np.exp(-0.5j * k**2 * 0.3))) < 1e-12


def test_free_width_follows_analytic_spread(grid):
    rec = evolve(gaussian(grid, 0.0, 1.0), free(), 2.0, 0.01, 50)
    x = grid.axis(0)
    for i, t in enumerate(rec.times):
        rho = np.abs(rec.values[i]) ** 2
        sd = np.sqrt(integrate(x**2 * rho, grid))
        assert abs(sd - free_width(t, 1.0)) < 1e-9


def test_ground_state_is_stationary(grid):
    psi = harmonic_ground(grid, 1.0)
    rec = evolve(psi, harmonic(), 1.0, 0.01, 100)
    assert fidelity(rec.values[-1], psi.values, grid) > 1 - 1e-9
    assert abs(energy(rec.snapshot(1), harmonic()) - 0.5) < 1e-9


def test_coherent_centre_follows_classical_orbit(grid):
    rec = evolve(coherent_state(grid, 2.0), harmonic(), np.pi, 0.001 * np.pi, 100)
    x = grid.axis(0)
    for i, t in enumerate(rec.times):
        assert abs(integrate(x * np.abs(rec.values[i]) ** 2, grid) - 2 * np.cos(t)) < 1e-5


def test_backward_step_reverses(grid):
    psi = gaussian(grid, 0.0, 1.0, 2.0)
    fwd = step_split_operator(psi, harmonic(), 0.05)
    back = step_split_operator(fwd, harmonic(), -0.05)
    assert np.max(np.abs(back.values - psi.values)) < 1e-12


def test_linear_force_accelerates_centre(grid):
    rec = evolve(gaussian(grid, 0.0, 1.0), linear(0.5), 2.0, 0.01, 200)
    x = grid.axis(0)
    assert abs(integrate(x * np.abs(rec.values[-1]) ** 2, grid) - 0.25 * 4.0) < 1e-8


def test_time_dependent_potential_sampled_at_midpoint(grid):
    seen = []

    def f(mesh, t):
        seen.append(t)
        return 0.0 * mesh[0]

    V = Potential("probe", f, time_dependent=True)
    evolve(gaussian(grid), V, 0.3, 0.1)
    assert seen == pytest.approx([0.05, 0.15, 0.25])


def test_rejects_bad_inputs(grid):
    psi = gaussian(grid)
    with pytest.raises(ValueError, match="integer multiple"):
        evolve(psi, free(), 1.0, 0.3)
    with pytest.raises(ValueError):
        evolve(psi, free(), 1.0, -0.1)
    bad = Potential("nan", lambda mesh, t: np.where(mesh[0] > 0, np.nan, 0.0))
    with pytest.raises(ValueError, match="not finite"):
        step_split_operator(psi, bad, 0.1)


def test_zero_steps_returns_initial(grid):
    psi = gaussian(grid)
    rec = evolve(psi, free(), 0.0, 0.1)
    assert len(rec) == 1
    assert np.array_equal(rec.values[0], psi.values)


def test_two_dimensional_separable(grid):
    g2 = make_grid(2, (96, 96), (30.0, 30.0))
    g1 = make_grid(1, 96, 30.0)
    a, b = gaussian(g1, 1.0, 1.0, 0.5), gaussian(g1, -1.0, 0.8)
    joint = WaveFunction(g2, np.outer(a.values, b.values))
    out = evolve(joint, harmonic(), 0.5, 0.01).values[-1]
    ea = evolve(a, harmonic(), 0.5, 0.01).values[-1]
    eb = evolve(b, harmonic(), 0.5, 0.01).values[-1]
    assert np.max(np.abs(out - np.outer(ea, eb))) < 1e-12
