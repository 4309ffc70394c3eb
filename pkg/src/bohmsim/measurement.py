"""Ideal von Neumann measurement on a joint system-pointer grid.

Axis 0 of the joint grid is the system coordinate ``x``, axis 1 the pointer
coordinate ``y``.  The coupling ``g F (x) P_y`` with ``F = sum_j lambda_j P_j``
is applied impulsively (free parts switched off), so branch ``j`` of the
pointer translates rigidly by ``g lambda_j T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfinv

from .bohm import BOUNDARY_EXIT, COMPLETE, STATUS_NAMES, _chunked, integrate_trajectories
from .grid import DensityField, Grid, WaveFunction, integrate, make_grid, sample_density
from .schrodinger import evolve, free
from .states import gaussian_values

UNCLASSIFIED = -1
SUPPORT_MASS = 1 - 1e-8
OVERLAP_EPS = 1e-6


def gaussian_overlap(c1: float, c2: float, width: float) -> float:
    """``|<g_1, g_2>|`` for two normalized real Gaussians of equal position spread."""
    return math.exp(-((c1 - c2) ** 2) / (8 * width**2))


def gaussian_support(center: float, width: float, mass: float = SUPPORT_MASS) -> tuple[float, float]:
    """Smallest interval holding ``mass`` of ``|g|^2``: symmetric about the centre."""
    half = math.sqrt(2) * width * float(erfinv(mass))
    return center - half, center + half


@dataclass(frozen=True)
class MeasurementConfig:
    coefficients: tuple
    centers: tuple  # system packet centres x_j
    width: float = 0.5  # system packet spread
    pointer_width: float = 0.5
    pointer_center: float = 0.0
    eigenvalues: tuple | None = None
    g: float = 3.0
    T: float = 1.0
    steps: int = 20
    points: tuple = (160, 128)
    extent: tuple = (20.0, 16.0)
    drift_window: float = 0.25  # fraction of T
    drift_steps: int = 25
    drift_mass: float = 10.0
    overlap_tol: float = OVERLAP_EPS
    hbar: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        object.__setattr__(self, "coefficients", tuple(c))
        object.__setattr__(self, "centers", tuple(float(x) for x in self.centers))
        if len(c) != len(self.centers):
            raise ValueError("need one packet centre per coefficient")
        if not 1 <= len(c) <= 3:
            raise ValueError("outcome count must be 1, 2 or 3")
        if abs(math.fsum(np.abs(c) ** 2) - 1) > 1e-10:
            raise ValueError(f"sum |c_j|^2 = {math.fsum(np.abs(c) ** 2)!r}, expected 1")
        if self.eigenvalues is None:
            lam = (1.0,) if len(c) == 1 else tuple(np.linspace(-1.0, 1.0, len(c)))
            object.__setattr__(self, "eigenvalues", lam)
        elif len(self.eigenvalues) != len(c):
            raise ValueError("need one eigenvalue per coefficient")
        if len(set(self.eigenvalues)) != len(c):
            raise ValueError("eigenvalues must be distinct")
        if self.T <= 0 or self.steps < 1:
            raise ValueError("T and steps must be positive")
        object.__setattr__(self, "points", tuple(int(p) for p in np.broadcast_to(self.points, (2,))))
        object.__setattr__(self, "extent", tuple(float(e) for e in np.broadcast_to(self.extent, (2,))))
        if max(self.points) > 512:
            raise ValueError("joint grids are limited to 512 x 512")

    @property
    def J(self) -> int:
        return len(self.coefficients)

    @property
    def grid(self) -> Grid:
        return make_grid(2, self.points, self.extent)

    @property
    def pointer_centers(self) -> tuple[float, ...]:
        return tuple(self.pointer_center + self.g * lam * self.T for lam in self.eigenvalues)

    def overlaps(self) -> dict[str, float]:
        out = {}
        for i in range(self.J):
            for j in range(i + 1, self.J):
                out[f"psi[{i}],psi[{j}]"] = gaussian_overlap(self.centers[i], self.centers[j], self.width)
                out[f"phi[{i}],phi[{j}]"] = gaussian_overlap(self.pointer_centers[i], self.pointer_centers[j],
                                                             self.pointer_width)
        return out

    def system_supports(self):
        return [gaussian_support(c, self.width) for c in self.centers]

    def pointer_supports(self):
        return [gaussian_support(c, self.pointer_width) for c in self.pointer_centers]


class OverlapError(ValueError):
    pass


def check_overlaps(config: MeasurementConfig) -> None:
    bad = {k: v for k, v in config.overlaps().items() if v > config.overlap_tol}
    if bad:
        worst = max(bad, key=bad.get)
        raise OverlapError(f"packets {worst} overlap by {bad[worst]:.3g} > {config.overlap_tol:g}; "
                           "separate the centres or raise the coupling")


def _packet(axis: np.ndarray, center: float, width: float, dx: float) -> np.ndarray:
    g = np.exp(-((axis - center) ** 2) / (4 * width**2)).astype(complex)
    return g / math.sqrt(math.fsum(np.abs(g) ** 2) * dx)


def system_packets(config: MeasurementConfig) -> np.ndarray:
    grid = config.grid
    return np.array([_packet(grid.axis(0), c, config.width, grid.spacing[0]) for c in config.centers])


def pointer_packets(config: MeasurementConfig, ready: bool = False) -> np.ndarray:
    grid = config.grid
    centers = [config.pointer_center] * config.J if ready else config.pointer_centers
    return np.array([_packet(grid.axis(1), c, config.pointer_width, grid.spacing[1]) for c in centers])


def packet_labels(x: np.ndarray, config: MeasurementConfig) -> np.ndarray:
    """Index of the nearest system packet centre, the support of ``F``'s eigenspaces."""
    centers = np.asarray(config.centers)
    return np.argmin(np.abs(np.asarray(x)[..., None] - centers), axis=-1)


def _check_grid(config: MeasurementConfig) -> None:
    grid = config.grid
    lo, hi = grid.lower, tuple(l + e for l, e in zip(grid.lower, grid.extent))
    for (a, b) in config.system_supports():
        if a < lo[0] or b > hi[0] - grid.spacing[0]:
            raise ValueError("system packet support leaves the grid; use a larger x extent")
    for (a, b) in config.pointer_supports() + [gaussian_support(config.pointer_center, config.pointer_width)]:
        if a < lo[1] or b > hi[1] - grid.spacing[1]:
            raise ValueError("pointer leaves the grid; use a larger y extent")


def build_joint_initial(config: MeasurementConfig) -> WaveFunction:
    check_overlaps(config)
    _check_grid(config)
    grid = config.grid
    psi = system_packets(config)
    phi0 = pointer_packets(config, ready=True)[0]
    vals = np.einsum("j,jx,y->xy", np.asarray(config.coefficients), psi, phi0)
    return WaveFunction(grid, vals / math.sqrt(integrate(np.abs(vals) ** 2, grid)), 0.0, config.hbar)


def target_final(config: MeasurementConfig) -> np.ndarray:
    """``sum_j c_j psi_j phi_j`` on the joint grid."""
    return np.einsum("j,jx,jy->xy", np.asarray(config.coefficients), system_packets(config), pointer_packets(config))


def coupling_propagator(config: MeasurementConfig, t: float) -> np.ndarray:
    """``exp(-i g lambda(x) p_y t / hbar)`` in the pointer Fourier basis."""
    grid = config.grid
    lam = np.asarray(config.eigenvalues)[packet_labels(grid.axis(0), config)]
    return np.exp(-1j * config.g * t * lam[:, None] * grid.wavenumbers(1)[None, :])


@dataclass(frozen=True)
class MeasurementRecord:
    grid: Grid
    times: np.ndarray
    values: np.ndarray = field(repr=False)  # (nsnap, nx, ny)

    def final(self) -> np.ndarray:
        return self.values[-1]


def evolve_measurement(psi_in: WaveFunction, config: MeasurementConfig) -> MeasurementRecord:
    """Snapshots of the joint state over the coupling interval ``[0, T]``."""
    times = np.linspace(0.0, config.T, config.steps + 1)
    hat = np.fft.fft(psi_in.values, axis=1)
    snaps = [np.fft.ifft(hat * coupling_propagator(config, t), axis=1) for t in times]
    snaps[0] = psi_in.values.copy()
    rho = np.abs(snaps[-1]) ** 2
    if max(rho[:, :3].max(), rho[:, -3:].max()) > 1e-8 * rho.max():
        raise ValueError("pointer reaches the grid edge; use a larger y extent")
    return MeasurementRecord(psi_in.grid, times, np.array(snaps))


def coupling_velocity(pts: np.ndarray, config: MeasurementConfig) -> np.ndarray:
    """Guidance velocity of ``g F P_y``: ``(0, g lambda(x))``, independent of the state."""
    v = np.zeros_like(pts)
    v[:, 1] = config.g * np.asarray(config.eigenvalues)[packet_labels(pts[:, 0], config)]
    return v


def coupling_paths(x0: np.ndarray, config: MeasurementConfig, times: np.ndarray) -> np.ndarray:
    """RK4 along the coupling velocity; exact here because ``v`` is constant on each path."""
    pos = np.empty((len(times),) + x0.shape)
    pos[0] = x = np.array(x0, dtype=float)
    for s in range(1, len(times)):
        h = times[s] - times[s - 1]
        k1 = coupling_velocity(x, config)
        k2 = coupling_velocity(x + h / 2 * k1, config)
        k3 = coupling_velocity(x + h / 2 * k2, config)
        k4 = coupling_velocity(x + h * k3, config)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        pos[s] = x
    return pos


def classify(pts: np.ndarray, config: MeasurementConfig) -> np.ndarray:
    """Outcome index whose ``supp psi_j x supp phi_j`` holds the point, else ``UNCLASSIFIED``."""
    hits = np.zeros((len(pts), config.J), dtype=bool)
    for j, ((xa, xb), (ya, yb)) in enumerate(zip(config.system_supports(), config.pointer_supports())):
        hits[:, j] = (pts[:, 0] >= xa) & (pts[:, 0] <= xb) & (pts[:, 1] >= ya) & (pts[:, 1] <= yb)
    out = np.full(len(pts), UNCLASSIFIED)
    one = hits.sum(axis=1) == 1
    out[one] = np.argmax(hits[one], axis=1)
    return out


@dataclass(frozen=True)
class OutcomeRecord:
    seed: int
    initial: np.ndarray
    final: np.ndarray
    outcome: np.ndarray
    times: np.ndarray
    positions: np.ndarray = field(repr=False)
    status: np.ndarray = field(repr=False)
    drift_final: np.ndarray | None = None
    drift_outcome: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.outcome)

    def counts(self, J: int) -> np.ndarray:
        return np.array([np.sum(self.outcome == j) for j in range(J)])

    @property
    def unclassified(self) -> int:
        return int(np.sum(self.outcome == UNCLASSIFIED))


def run_measurement_ensemble(config: MeasurementConfig, n: int, seed: int, threads: int = 1,
                             drift: bool = True) -> OutcomeRecord:
    if n < 1:
        raise ValueError("n must be >= 1")
    psi_in = build_joint_initial(config)
    x0 = sample_density(DensityField(psi_in.grid, np.abs(psi_in.values) ** 2), n, seed)
    times = np.linspace(0.0, config.T, config.steps + 1)
    parts = _chunked(lambda c, i: coupling_paths(c, config, times), x0, threads)
    pos = np.concatenate(parts, axis=1)
    final = pos[-1]
    status = np.where(config.grid.contains(final), COMPLETE, BOUNDARY_EXIT).astype(np.int8)
    outcome = classify(final, config)
    drift_final = drift_outcome = None
    if drift:
        drift_final, drift_status = drift_window(config, final, threads)
        drift_outcome = classify(drift_final, config)
        status = np.maximum(status, drift_status)
    return OutcomeRecord(seed, x0, final, outcome, times, pos, status, drift_final, drift_outcome)


def drift_record(config: MeasurementConfig):
    """Free evolution of the post-measurement state with heavy masses over ``T/4``."""
    psi_T = evolve_measurement(build_joint_initial(config), config).final()
    start = WaveFunction(config.grid, psi_T, config.T, config.hbar, (config.drift_mass, config.drift_mass))
    window = config.drift_window * config.T
    return evolve(start, free(), window, window / config.drift_steps)


def drift_window(config: MeasurementConfig, final: np.ndarray, threads: int = 1):
    rec = drift_record(config)
    pos, status = integrate_trajectories(rec, final, threads=threads)
    return pos[-1], status


def label_map(config: MeasurementConfig) -> np.ndarray:
    """Outcome of the flow started from every grid cell centre: the domains ``K_j`` at ``t = 0``."""
    grid = config.grid
    X, Y = grid.mesh()
    pts = np.column_stack([X.ravel(), Y.ravel()])
    final = coupling_paths(pts, config, np.linspace(0.0, config.T, config.steps + 1))[-1]
    return classify(final, config).reshape(grid.shape)


def partial_density_weights(record: OutcomeRecord, J: int) -> tuple[np.ndarray, float]:
    """``w_j = n_j / n`` and the unclassified fraction."""
    return record.counts(J) / record.n, record.unclassified / record.n


def quadrature_weights(config: MeasurementConfig, labels: np.ndarray | None = None) -> np.ndarray:
    """``w_j`` as the ``|Psi_in|^2`` mass of each initial domain ``K_j``."""
    labels = label_map(config) if labels is None else labels
    rho = np.abs(build_joint_initial(config).values) ** 2
    return np.array([integrate(np.where(labels == j, rho, 0.0), config.grid) for j in range(config.J)])


def _lookup_labels(labels: np.ndarray, pts: np.ndarray, grid: Grid) -> np.ndarray:
    idx = [np.clip(np.rint((pts[:, i] - grid.lower[i]) / grid.spacing[i]).astype(int), 0, grid.shape[i] - 1)
           for i in range(2)]
    return labels[idx[0], idx[1]]


def reduced_density(psi: np.ndarray, config: MeasurementConfig) -> np.ndarray:
    """System density matrix in the packet basis, with the pointer traced out.

    ``M_jk = int a_j(y) conj(a_k(y)) dy`` where ``a_j(y) = int conj(psi_j(x)) Psi(x, y) dx``.
    Before coupling this is ``c_j conj(c_k)``; afterwards the coherences carry
    the pointer overlap ``<phi_k, phi_j>``.
    """
    grid = config.grid
    dx, dy = grid.spacing
    a = np.einsum("jx,xy->jy", np.conj(system_packets(config)), np.asarray(psi)) * dx
    M = np.einsum("jy,ky->jk", a, np.conj(a)) * dy
    return 0.5 * (M + M.conj().T)


def density_matrix_checks(M: np.ndarray) -> dict[str, bool]:
    ev = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    return {
        "hermitian": bool(np.max(np.abs(M - M.conj().T)) <= 1e-12),
        "trace": bool(abs(np.trace(M) - 1) <= 1e-9),
        "positive": bool(ev.min() >= -1e-9),
    }


@dataclass
class ProjectionReport:
    weights: np.ndarray
    born: np.ndarray
    standard_errors: np.ndarray
    unclassified: float
    reduced: np.ndarray
    assembled: np.ndarray
    agreement: float
    quadrature: np.ndarray
    drift_changed: float | None
    checks: dict = field(default_factory=dict)
    messages: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        def mat(m):
            return {"real": np.real(m).tolist(), "imag": np.imag(m).tolist()}

        return {
            "weights": self.weights.tolist(), "born": self.born.tolist(),
            "standard_errors": self.standard_errors.tolist(), "unclassified_fraction": self.unclassified,
            "reduced_density": mat(self.reduced), "assembled_density": mat(self.assembled),
            "flow_agreement": self.agreement, "quadrature_weights": self.quadrature.tolist(),
            "drift_changed_fraction": self.drift_changed, "checks": self.checks, "messages": self.messages,
        }


def projection_rule_check(record: OutcomeRecord, psi_T: np.ndarray, config: MeasurementConfig,
                          labels: np.ndarray | None = None) -> ProjectionReport:
    """Checks that trajectory partitioning reproduces ``sum_j P_j rho P_j``.

    (a) ``w_j`` against the diagonal of the reduced density within 3 SE;
    (b) final classification equals the back-mapped initial domain for >= 99%;
    (c) ``diag(w)`` against the reduced density entrywise: 3 SE on the diagonal,
        ``|c_j||c_k| eps + eps`` off it with ``eps = 1e-6``.
    """
    J = config.J
    w, unc = partial_density_weights(record, J)
    M = reduced_density(psi_T, config)
    diag = np.real(np.diag(M))
    se = np.sqrt(np.clip(diag * (1 - diag), 0, None) / record.n)
    born = np.abs(np.asarray(config.coefficients)) ** 2
    labels = label_map(config) if labels is None else labels
    agree = float(np.mean(_lookup_labels(labels, record.initial, config.grid) == record.outcome))
    quad = quadrature_weights(config, labels)
    assembled = np.diag(w).astype(complex)
    msgs: list[str] = []

    ok_a = bool(np.all(np.abs(w - diag) <= 3 * se + 1e-12))
    if not ok_a:
        msgs.append(f"(a) weights {w.tolist()} vs reduced diagonal {diag.tolist()} (3 SE {(3 * se).tolist()})")
    ok_b = agree >= 0.99
    if not ok_b:
        msgs.append(f"(b) only {agree:.4f} of trajectories keep their back-mapped domain")
    absc = np.abs(np.asarray(config.coefficients))
    tol = np.outer(absc, absc) * OVERLAP_EPS + OVERLAP_EPS
    np.fill_diagonal(tol, 0.0)
    tol = np.maximum(tol, np.diag(3 * se + 1e-12))
    dev = np.abs(assembled - M)
    ok_c = bool(np.all(dev <= tol))
    if not ok_c:
        off = dev - np.diag(np.diag(dev))
        msgs.append(f"(c) assembled density differs from the reduced density by up to {off.max():.3g} off the "
                    "diagonal: decoherence is incomplete (pointer packets overlap)")
    checks = {"a_weights": ok_a, "b_flow": ok_b, "c_density": ok_c}
    checks.update(density_matrix_checks(M))
    drift_changed = None
    if record.drift_outcome is not None:
        drift_changed = float(np.mean(record.drift_outcome != record.outcome))
    return ProjectionReport(w, born, se, unc, M, assembled, agree, quad, drift_changed, checks, msgs)


def born_bound(p: float, n: int, k: float = 3.0) -> float:
    return k * math.sqrt(p * (1 - p) / n)


__all__ = [
    "MeasurementConfig", "OutcomeRecord", "ProjectionReport", "OverlapError", "UNCLASSIFIED", "build_joint_initial",
    "evolve_measurement", "run_measurement_ensemble", "partial_density_weights", "quadrature_weights",
    "reduced_density", "projection_rule_check", "label_map", "classify", "target_final", "born_bound",
    "density_matrix_checks", "gaussian_support", "gaussian_overlap", "drift_record", "STATUS_NAMES",
]
