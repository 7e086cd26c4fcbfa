"""Eigensolvers and time propagation: Lanczos ground states, dense spectra
for small dimensions, Krylov time evolution, and the adiabatic pulse sweep.

Ground states come from implicitly restarted Lanczos (ARPACK) seeded with a
deterministic start vector, then polished with explicit full-reorthogonalized
Lanczos restarts until the absolute residual ||Hv - Ev|| clears the
tolerance.  Time stepping treats the Hamiltonian as constant across each
step, sampled at the step midpoint, and advances with a fixed-size Krylov
approximation of exp(-i dt H).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import observables
from .gauge import ConstrainedBasis, enumerate_sector, full_dual_basis
from .geometry import PairArrayGeometry
from .hamiltonian import (DimensionCapError, SparseOperator,
                          build_effective_spin, build_transverse_drive,
                          linear_combination)

DENSE_CAP = 4096
KRYLOV_DIM = 20
STEP_ERROR_BUDGET = 1e-8
DEGENERACY_WINDOW_FACTOR = 100.0
_DENSE_FALLBACK = 16
_POLISH_SPACE = 30
_MAX_POLISH = 60


class ConvergenceError(RuntimeError):
    """Eigensolver failed to reach the requested residual."""


class StepBudgetError(RuntimeError):
    """A Krylov propagation step exceeded its error budget."""


@dataclass(frozen=True)
class GroundStateResult:
    """Converged extremal eigenpair with its certificate.

    degeneracy counts the computed low eigenvalues within 100 * tol of the
    ground energy (at least 1, at most the number of eigenvalues asked of
    the solver); ties inside a model should be lifted with pinning or
    detuning fields rather than left to solver arbitration.
    """

    energy: float
    vector: np.ndarray
    residual: float
    degeneracy: int


def _sign_fix(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    if v[i] < 0:
        return -v
    return v


def _lanczos_polish(op: SparseOperator, v: np.ndarray, m: int
                    ) -> tuple[float, np.ndarray]:
    """One full-reorthogonalization Lanczos restart from v; returns the
    Ritz ground pair of the m-dimensional Krylov space."""
    n = v.shape[0]
    m = min(m, n)
    V = np.zeros((m, n))
    alpha = np.zeros(m)
    beta = np.zeros(m - 1) if m > 1 else np.zeros(0)
    V[0] = v / np.linalg.norm(v)
    w = op.apply(V[0])
    alpha[0] = float(V[0] @ w)
    w = w - alpha[0] * V[0]
    k = 1
    for j in range(1, m):
        b = float(np.linalg.norm(w))
        if b < 1e-14:
            break
        beta[j - 1] = b
        V[j] = w / b
        w = op.apply(V[j]) - beta[j - 1] * V[j - 1]
        alpha[j] = float(V[j] @ w)
        w = w - alpha[j] * V[j]
        for i in range(j + 1):
            w = w - (V[i] @ w) * V[i]
        k = j + 1
    T = np.diag(alpha[:k])
    if k > 1:
        T += np.diag(beta[:k - 1], 1) + np.diag(beta[:k - 1], -1)
    ev, U = np.linalg.eigh(T)
    ritz = V[:k].T @ U[:, 0]
    ritz /= np.linalg.norm(ritz)
    return float(ev[0]), ritz


def ground_state(op: SparseOperator, tol: float = 1e-10,
                 max_iter: int = 5000, seed: int = 0) -> GroundStateResult:
    """Lowest eigenpair of a symmetric operator.

    Deterministic for a fixed seed and thread configuration.  Raises
    ConvergenceError when the absolute residual cannot be pushed under
    tol within the iteration budget.
    """
    dim = op.dim
    if dim < 1:
        raise ValueError("operator needs dim >= 1")
    if dim <= _DENSE_FALLBACK:
        ev, U = np.linalg.eigh(op.to_dense())
        energy = float(ev[0])
        vector = _sign_fix(U[:, 0])
        residual = float(np.linalg.norm(op.apply(vector) - energy * vector))
        degeneracy = int(np.sum(ev - ev[0] <= DEGENERACY_WINDOW_FACTOR * tol))
        return GroundStateResult(energy, vector, residual, degeneracy)

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(dim)
    v0 /= np.linalg.norm(v0)
    k = min(6, dim - 2)
    A = spla.LinearOperator((dim, dim), matvec=op.apply, dtype=np.float64)
    try:
        ev, U = spla.eigsh(A, k=k, which="SA", v0=v0, tol=tol,
                           maxiter=max_iter)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"Lanczos stalled: {exc}") from exc
    order = np.argsort(ev)
    ev = ev[order]
    vector = U[:, order[0]]
    energy = float(ev[0])
    residual = float(np.linalg.norm(op.apply(vector) - energy * vector))
    polish = 0
    while residual > tol and polish < _MAX_POLISH:
        energy, vector = _lanczos_polish(op, vector, _POLISH_SPACE)
        residual = float(np.linalg.norm(op.apply(vector) - energy * vector))
        polish += 1
    if residual > tol:
        raise ConvergenceError(
            f"residual {residual:.2e} above tol {tol:.2e} "
            f"after {polish} polish restarts")
    degeneracy = int(np.sum(ev - energy <= DEGENERACY_WINDOW_FACTOR * tol))
    return GroundStateResult(energy, _sign_fix(vector), residual,
                             max(degeneracy, 1))


def dense_spectrum(op: SparseOperator, vectors: bool = False):
    """Full ascending spectrum; refuses dimensions above 4096."""
    if op.dim > DENSE_CAP:
        raise DimensionCapError(
            f"dense spectrum capped at {DENSE_CAP}, got {op.dim}")
    if vectors:
        ev, U = np.linalg.eigh(op.to_dense())
        return ev, U
    return np.linalg.eigvalsh(op.to_dense())


def _krylov_step(apply_h, v: np.ndarray, dt: float, m: int
                 ) -> tuple[np.ndarray, float]:
    """y = exp(-i dt H) v via an m-dimensional Lanczos space with full
    reorthogonalization; returns (y, error estimate).

    The estimate is the weight the propagated T-space vector places on the
    last Krylov direction: the first neglected term of the expansion.
    """
    nrm0 = np.linalg.norm(v)
    n = v.shape[0]
    m = min(m, n)
    Vm = np.zeros((m, n), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m - 1) if m > 1 else np.zeros(0)
    Vm[0] = v / nrm0
    w = apply_h(Vm[0])
    alpha[0] = np.real(np.vdot(Vm[0], w))
    w = w - alpha[0] * Vm[0]
    k = 1
    exhausted = False
    for j in range(1, m):
        b = np.linalg.norm(w)
        if b < 1e-14:
            exhausted = True
            break
        beta[j - 1] = b
        Vm[j] = w / b
        w = apply_h(Vm[j]) - beta[j - 1] * Vm[j - 1]
        alpha[j] = np.real(np.vdot(Vm[j], w))
        w = w - alpha[j] * Vm[j]
        for i in range(j + 1):
            w = w - np.vdot(Vm[i], w) * Vm[i]
        k = j + 1
    T = np.diag(alpha[:k])
    if k > 1:
        T += np.diag(beta[:k - 1], 1) + np.diag(beta[:k - 1], -1)
    ev, U = np.linalg.eigh(T)
    coef = U @ (np.exp(-1j * dt * ev) * U[0])
    y = nrm0 * (Vm[:k].T @ coef)
    exact = exhausted or k == n
    estimate = 0.0 if exact else float(np.abs(coef[-1]))
    return y, estimate


@dataclass(frozen=True)
class EvolutionResult:
    """States recorded along a propagation, indexed by `times`; the initial
    state is not repeated.  max_step_error aggregates the per-step Krylov
    estimates and max_norm_drift tracks | ||v|| - ||v0|| |."""

    times: np.ndarray
    states: list
    max_step_error: float
    max_norm_drift: float


def evolve(op_family, v0: np.ndarray, t_grid,
           m: int = KRYLOV_DIM,
           step_tol: float = STEP_ERROR_BUDGET,
           record_every: int = 1) -> EvolutionResult:
    """Propagate v0 across a uniform time grid.

    op_family maps a time to the SparseOperator in force for the step
    around it; it is evaluated once per step, at the step midpoint.
    States are recorded after every record_every-th step and after the
    final one.  A step whose Krylov truncation estimate exceeds step_tol
    raises StepBudgetError.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2:
        raise ValueError("t_grid needs at least two points")
    steps = np.diff(t_grid)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise ValueError("t_grid must be uniform")
    if record_every < 1:
        raise ValueError("record_every must be positive")
    v = np.asarray(v0, dtype=complex).copy()
    nrm_in = float(np.linalg.norm(v))
    n_steps = len(t_grid) - 1
    times = []
    states = []
    worst = 0.0
    drift = 0.0
    for nstep in range(n_steps):
        dt = float(t_grid[nstep + 1] - t_grid[nstep])
        tmid = float(t_grid[nstep]) + 0.5 * dt
        op = op_family(tmid)
        if op.dim != v.shape[0]:
            raise ValueError("operator family changed dimension mid-flight")
        v, estimate = _krylov_step(op.apply, v, dt, m)
        worst = max(worst, estimate)
        if estimate > step_tol:
            raise StepBudgetError(
                f"step {nstep} at t={tmid:.4f}: Krylov estimate "
                f"{estimate:.2e} above budget {step_tol:.2e}")
        drift = max(drift, abs(float(np.linalg.norm(v)) - nrm_in))
        if (nstep + 1) % record_every == 0 or nstep == n_steps - 1:
            times.append(float(t_grid[nstep + 1]))
            states.append(v.copy())
    return EvolutionResult(np.asarray(times), states, worst, drift)


@dataclass(frozen=True)
class PulseSpec:
    """Quarter-sine ramp J(t) = J sin(pi t / (2 t_f)): zero at t = 0,
    reaching J at t = t_f.  dt defaults to 0.01 / J."""

    J: float
    t_f: float
    dt: float | None = None
    shape: str = "sine-quarter"

    def __post_init__(self) -> None:
        if self.shape != "sine-quarter":
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        if not self.t_f > 0:
            raise ValueError("pulse needs t_f > 0")
        if self.J == 0:
            raise ValueError("pulse needs a nonzero peak J")
        if self.dt is not None and not 0 < self.dt <= self.t_f:
            raise ValueError("dt must sit in (0, t_f]")

    @property
    def step(self) -> float:
        return self.dt if self.dt is not None else 0.01 / abs(self.J)

    def value(self, t: float) -> float:
        return self.J * math.sin(math.pi * t / (2.0 * self.t_f))


TRAJECTORY_COLUMNS = ("t", "J_t", "energy", "S00z", "Spipiz", "Spipix",
                      "fidelity_instantaneous")


@dataclass(frozen=True)
class SweepResult:
    """Adiabatic ramp outcome: the recorded trajectory (columns in
    TRAJECTORY_COLUMNS order), the final state over `basis`, its
    structure-factor report and RVBS diagnostic, the closing fidelity
    against the instantaneous constrained ground state, and the weight
    the state keeps inside the dynamically connected sector."""

    columns: tuple
    rows: np.ndarray
    basis: ConstrainedBasis
    final_state: np.ndarray
    report: observables.StructureFactorReport
    diagnostic: observables.RvbsDiagnostic
    final_fidelity: float
    sector_weight: float
    final_norm: float
    max_step_error: float


def adiabatic_sweep(geometry: PairArrayGeometry, pulse: PulseSpec,
                    delta: float,
                    record_every: int = 50,
                    m: int = KRYLOV_DIM,
                    step_tol: float = STEP_ERROR_BUDGET,
                    initial_mask: int = 0) -> SweepResult:
    """Ramp the pair-array spin model from its static part up to full
    kinetic strength and score the final state.

    H(t) = H_static + J(t) * drive, where H_static carries the Ising
    couplings of the array plus the detuning delta and the drive flips
    single spins everywhere with unit amplitude.  The sweep starts from
    the product state `initial_mask` on the full configuration space;
    fidelity is measured against the instantaneous ground state of H(t)
    restricted to the flip sector of the uniform reference.
    """
    lattice = geometry.lattice
    basis = full_dual_basis(lattice)
    sector = enumerate_sector(lattice)
    sec_idx = np.sort(basis.position(np.sort(sector.states)))
    if (sec_idx < 0).any():
        raise ValueError("sector does not embed in the full basis")
    h_static = build_effective_spin(geometry, 0.0, delta)
    drive = build_transverse_drive(basis, 1.0)

    def at(t: float) -> SparseOperator:
        return linear_combination(
            ((1.0, h_static), (pulse.value(t), drive)), model="ramp")

    v0 = np.zeros(len(basis), dtype=complex)
    v0[basis.index(initial_mask)] = 1.0
    n_steps = int(round(pulse.t_f / pulse.step))
    if n_steps < 1:
        raise ValueError("pulse shorter than one step")
    t_grid = np.arange(n_steps + 1) * pulse.step
    run = evolve(at, v0, t_grid, m=m, step_tol=step_tol,
                 record_every=record_every)

    rows = np.empty((len(run.times), len(TRAJECTORY_COLUMNS)))
    fid = 0.0
    for i, (t, v) in enumerate(zip(run.times, run.states)):
        h_now = at(float(t))
        energy = float(np.real(np.vdot(v, h_now.apply(v))))
        h_sec = h_now.matrix[np.ix_(sec_idx, sec_idx)].toarray()
        ev_s, u_s = np.linalg.eigh(h_sec)
        fid = float(np.abs(np.vdot(u_s[:, 0], v[sec_idx])) ** 2)
        snap = observables.compute_report(
            v, basis, momenta=(observables.MOMENTUM_ZERO,
                               observables.MOMENTUM_PI_PI))
        rows[i] = (t, pulse.value(float(t)), energy,
                   snap.value("z", observables.MOMENTUM_ZERO),
                   snap.value("z", observables.MOMENTUM_PI_PI),
                   snap.value("x", observables.MOMENTUM_PI_PI),
                   fid)
    final = run.states[-1]
    report = observables.compute_report(final, basis)
    diagnostic = observables.rvbs_signature(report)
    weight = float(np.sum(np.abs(final[sec_idx]) ** 2))
    return SweepResult(TRAJECTORY_COLUMNS, rows, basis, final, report,
                       diagnostic, fid, weight,
                       float(np.linalg.norm(final)), run.max_step_error)
