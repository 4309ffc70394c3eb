"""Acceptance criteria 1-12.

Run with ``pytest tests/test_acceptance.py`` (or ``python tests/test_acceptance.py``);
a ``criterion N: PASS/FAIL`` line per criterion is printed at the end.
Shipped scenarios are executed once per session and reused across criteria.
"""
import math
import os
import sys

import numpy as np
import pytest

from bohmsim import bohm, measurement
from bohmsim.config import load_config, shipped_scenarios
from bohmsim.grid import integrate, make_grid
from bohmsim.io import read_summary, read_trajectories
from bohmsim.runner import build_measurement, run_scenario
from bohmsim.schrodinger import energy, evolve, free, harmonic
from bohmsim.states import coherent_state, free_width, gaussian

THREADS = min(4, os.cpu_count() or 1)
DATA_FILES = ("trajectories.csv", "field_final.txt")

pytestmark = pytest.mark.slow


@pytest.fixture(scope="session")
def shipped(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    out = {}
    for name, path in shipped_scenarios().items():
        cfg = load_config(path)
        res = run_scenario(cfg, root / "first" / name, THREADS)
        out[name] = (cfg, res, read_summary(root / "first" / name / "summary.json"), root / "first" / name)
    return out


def assertion(summary: dict, name: str, bound: float | None = None) -> dict:
    a = summary["assertions"][name]
    assert a["passed"], f"{summary['scenario']['name']}: {name} failed ({a})"
    if bound is not None:
        assert a["bound"] <= bound, f"{name} checked at {a['bound']}, looser than {bound}"
    return a


def kinds(shipped, *wanted):
    return {n: v for n, v in shipped.items() if v[0].kind in wanted}


def test_criterion_01_unitarity_and_energy():
    wide, grid = make_grid(1, 1024, 80.0), make_grid(1, 512, 40.0)
    cases = [(gaussian(wide, 0.0, 1.0, 0.5), free(), 4.0), (coherent_state(grid, 2.0), harmonic(), 2 * math.pi)]
    for psi0, V, T in cases:
        grid = psi0.grid
        rec = evolve(psi0, V, T, T / 10_000, 100)
        norms = np.array([integrate(np.abs(v) ** 2, grid) for v in rec.values])
        E = np.array([energy(rec.snapshot(i), V) for i in range(len(rec))])
        assert np.max(np.abs(norms - norms[0])) <= 1e-9
        assert np.max(np.abs(E - E[0])) / abs(E[0]) <= 1e-6


def test_criterion_02_free_gaussian_trajectory_oracle():
    grid = make_grid(1, 512, 40.0)
    s0 = 1.0
    rec = evolve(gaussian(grid, 0.0, s0), free(), 2 * s0**2, 0.005)
    x0 = np.linspace(-2 * s0, 2 * s0, 41)
    pos, status = bohm.integrate_trajectories(rec, x0[:, None])
    exact = x0[None] * free_width(rec.times, s0)[:, None] / s0
    assert np.all(status == bohm.COMPLETE)
    err = np.abs(pos[:, :, 0] - exact)
    nz = x0 != 0
    assert np.max(err[:, nz] / np.abs(exact[:, nz])) <= 1e-3
    assert np.max(err[:, ~nz]) <= 1e-3


def test_criterion_03_equivariance(shipped):
    for name in ("free-gaussian", "harmonic-coherent", "two-packet"):
        cfg, res, summary, _ = shipped[name]
        assert cfg.get("run", "n") >= 10_000
        assert cfg.get("output", "bins", 64) == 64
        assertion(summary, "tv", 0.05)


def test_criterion_04_expectation_matching(shipped):
    for name, (cfg, res, summary, _) in shipped.items():
        a = assertion(summary, "expectation")
        assert a["bound"] <= 1.0 and cfg.get("assert", "expectation_budget", 1e-3) <= 1e-3


def test_criterion_05_no_crossing(shipped):
    one_d = kinds(shipped, "trajectories", "pauli", "stern-gerlach")
    assert one_d
    for name, (cfg, res, summary, _) in one_d.items():
        assert assertion(summary, "no_crossing", 0)["value"] == 0
    for name, (cfg, res, summary, path) in kinds(shipped, "hj-compare").items():
        meta, data = read_trajectories(path / "trajectories.csv")
        ids = np.unique(data["id"])
        x = np.stack([data["x1"][data["id"] == i] for i in ids], axis=1)
        assert bohm.order_inversions(x[:, :, None], np.zeros(len(ids), dtype=int)) == 0


def test_criterion_06_born_rule():
    cfg = load_config(shipped_scenarios()["born-0.3"])
    mc = build_measurement(cfg)
    assert np.allclose(np.abs(mc.coefficients) ** 2, [0.3, 0.7])
    passes = []
    for k in range(5):
        rec = measurement.run_measurement_ensemble(mc, 10_000, cfg.seed + k, THREADS, drift=False)
        w1 = rec.counts(mc.J)[0] / rec.n
        passes.append(abs(w1 - 0.3) <= 0.014)
    assert sum(passes) >= 4, passes


def test_criterion_07_projection_rule(shipped, tmp_path):
    for name, (cfg, res, summary, _) in kinds(shipped, "measure").items():
        for key in ("a_weights", "b_flow", "c_density", "hermitian", "trace", "positive"):
            assertion(summary, f"projection_{key}")
    neg = load_config(shipped_scenarios(include_negative=True)["pointer-overlap"])
    res = run_scenario(neg, tmp_path / "neg", THREADS)
    assert res.exit_code == 1
    failed = {c.name for c in res.checks if not c.passed}
    assert failed == {"projection_c_density"}


def test_criterion_08_stern_gerlach(shipped):
    cfg, res, summary, _ = shipped["stern-gerlach-z"]
    assert cfg.get("run", "n") >= 10_000
    assertion(summary, "s3_constant")
    assertion(summary, "up_fraction")


def test_criterion_09_spin_precession(shipped):
    cfg, res, summary, _ = shipped["precession"]
    assert cfg.get("fields", "B")[1:] == [0, 0] or cfg.get("fields", "B")[1:] == [0.0, 0.0]
    assertion(summary, "precession", 1e-6)
    assertion(summary, "spin_mean", 1.0)


def test_criterion_10_classical_limit(shipped):
    cfg, res, summary, _ = shipped["hj-harmonic"]
    assert cfg.get("initial", "type") == "coherent"
    assert cfg.get("hj", "hbars") == [1.0, 0.5, 0.25]
    assertion(summary, "residual", 1e-4)
    assertion(summary, "hbar_exponent", 0.1)


def test_criterion_11_hj_comparator(shipped):
    cfg, res, summary, _ = shipped["hj-harmonic"]
    assert cfg.get("run", "n") >= 10_000
    assertion(summary, "zeta_oracle", 1e-6)
    assertion(summary, "zeta_tv", 0.05)


def test_criterion_12_determinism(shipped, tmp_path):
    for name, (cfg, res, summary, first) in shipped.items():
        again = tmp_path / name
        run_scenario(cfg, again, THREADS)
        for f in DATA_FILES:
            if (first / f).exists():
                assert (first / f).read_bytes() == (again / f).read_bytes(), f"{name}/{f} differs"
        a, b = read_summary(first / "summary.json"), read_summary(again / "summary.json")
        a.pop("meta"), b.pop("meta")
        assert a == b, f"{name}/summary.json differs outside meta"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
