"""Sparse Hamiltonian builders for the link model, its dual, and the arrays.

Every builder returns a real symmetric SparseOperator over an explicit
basis.  Spin operators use S^z eigenvalues +-1/2 throughout; bit 1 of a
configuration mask is spin up.

Model zoo:

* build_original_rk: link-picture constrained model (plaquette flips plus
  a flippable-plaquette counting potential).
* build_dual_rk: one spin per plaquette, flips gated by aligned dual
  neighborhoods, same counting potential.
* build_rydberg_rk: the dual model as realized by generalized blockade,
  with the counting potential replaced by the pattern combination the
  pair couplings actually produce (aligned minus alternating patterns).
* build_effective_spin: the raw pair-array Ising model (A and B couplings
  of the first two neighbor shells, transverse drive, detuning) on the
  full 2^N space; the blockade constraint emerges from the couplings.
* build_atom_level: the microscopic two-level atom model for a handful of
  pairs, with all-to-all van der Waals interactions.
* build_pxp_chain: blockade-constrained open chain (no two adjacent down
  spins).
* add_penalty / add_pinning: diagonal extras (forbidden 2x2 pattern
  penalty; local longitudinal fields).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .gauge import ConstrainedBasis, full_dual_basis
from .geometry import (
    PairArrayGeometry,
    ising_coupling_A,
    onsite_coefficient_B,
)
from .lattice import CHAIN, OPEN_SQUARE, PERIODIC_LADDER, LatticeSpec

HERMITICITY_TOL = 1e-12


class BasisMismatchError(ValueError):
    """Operator and basis (or vector) do not belong together."""


class DimensionCapError(RuntimeError):
    """Requested full-space model is larger than the configured cap."""


@dataclass(frozen=True)
class SparseOperator:
    """Real symmetric operator over a configuration basis.

    The matrix is stored fully (symmetric_storage False) or as the upper
    triangle (True; apply() then symmetrizes on the fly).
    """

    matrix: sp.csr_matrix
    basis: ConstrainedBasis | None
    model: str
    symmetric_storage: bool = False

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        if v.shape[0] != self.dim:
            raise BasisMismatchError(
                f"vector of length {v.shape[0]} against operator of dim {self.dim}")
        if self.symmetric_storage:
            upper = self.matrix @ v
            lower = self.matrix.T @ v
            return upper + lower - self.matrix.diagonal() * v
        return self.matrix @ v

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def to_dense(self) -> np.ndarray:
        m = self.matrix.toarray()
        if self.symmetric_storage:
            m = m + m.T - np.diag(self.matrix.diagonal())
        return m

    def hermiticity_defect(self) -> float:
        if self.symmetric_storage:
            return 0.0
        d = self.matrix - self.matrix.T
        return float(np.abs(d.data).max()) if d.nnz else 0.0

    def with_added_diagonal(self, extra: np.ndarray, model: str | None = None
                            ) -> "SparseOperator":
        extra = np.asarray(extra, dtype=float)
        if extra.shape != (self.dim,):
            raise BasisMismatchError("diagonal length does not match operator")
        mat = (self.matrix + sp.diags(extra, format="csr")).tocsr()
        return SparseOperator(mat, self.basis, model or self.model,
                              self.symmetric_storage)

    def export_coo(self, path: str) -> None:
        """Text export: one `i j value` line per stored nonzero."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            fh.write(f"# dim={self.dim} model={self.model}\n")
            for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{int(i)} {int(j)} {float(v)!r}\n")


@dataclass(frozen=True)
class ModelParams:
    """Shared parameter bundle.

    lam is the dimensionless ratio Lambda / J; when both lam and Lambda
    are given they must agree.  Energies are in the caller's units
    (conventionally J = 1 or C6/a_x^6 = 1).
    """

    J: float = 1.0
    lam: float | None = None
    Lambda: float | None = None
    G: float | None = None
    delta: float = 0.0
    penalty: float = 0.0
    pinning: float = 0.0
    pinning_sites: tuple = ()
    pulse: object = None

    def __post_init__(self) -> None:
        for name in ("J", "delta", "penalty", "pinning"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        for name in ("lam", "Lambda", "G"):
            v = getattr(self, name)
            if v is not None and not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if self.lam is not None and self.Lambda is not None:
            if self.J == 0:
                raise ValueError("lam = Lambda/J needs J != 0")
            if abs(self.lam - self.Lambda / self.J) > 1e-9 * max(1.0, abs(self.lam)):
                raise ValueError("inconsistent lam vs Lambda/J")

    @property
    def lam_effective(self) -> float:
        if self.lam is not None:
            return self.lam
        if self.Lambda is not None:
            return self.Lambda / self.J
        return 0.0


# ---------------------------------------------------------------------------
# shared vectorized helpers


def _sigma_table(masks: np.ndarray, n_bits: int) -> np.ndarray:
    """sig[p, i] = +-1 for bit p of mask i."""
    sig = np.empty((n_bits, len(masks)), dtype=np.int8)
    for p in range(n_bits):
        sig[p] = (2 * ((masks >> p) & 1) - 1).astype(np.int8)
    return sig


def _neighbor_sigmas(lattice: LatticeSpec, sig: np.ndarray, p: int) -> list:
    """Neighbor sign columns of dual site p; frozen boundary entries are +1."""
    cols = []
    for q in lattice.dual_neighbors(p):
        if q < 0:
            cols.append(np.ones(sig.shape[1], dtype=np.int8))
        else:
            cols.append(sig[q])
    return cols


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise BasisMismatchError(msg)


def _kinetic_terms(basis: ConstrainedBasis, allowed_by_site: list, J: float):
    """COO pieces for -J single-site flips gated by allowed_by_site masks."""
    masks = basis.states
    rows, cols, vals = [], [], []
    for p, ok in enumerate(allowed_by_site):
        src = np.nonzero(ok)[0]
        if len(src) == 0:
            continue
        flipped = masks[src] ^ np.int64(1 << p)
        tgt = basis.position(basis.canonicalize(flipped))
        if (tgt < 0).any():
            raise BasisMismatchError(
                f"flip at site {p} leaves the basis; sector and operator disagree")
        rows.append(src)
        cols.append(tgt)
        vals.append(np.full(len(src), -J))
    return rows, cols, vals


def _assemble(rows, cols, vals, diag, basis, model) -> SparseOperator:
    n = len(diag)
    rows = rows + [np.arange(n)]
    cols = cols + [np.arange(n)]
    vals = vals + [diag]
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    op = SparseOperator(mat, basis, model)
    defect = op.hermiticity_defect()
    if defect > HERMITICITY_TOL * max(1.0, float(np.abs(mat.data).max())):
        raise AssertionError(f"assembled operator not symmetric ({defect})")
    return op


# ---------------------------------------------------------------------------
# constrained models


def build_original_rk(basis: ConstrainedBasis, J: float, lam: float) -> SparseOperator:
    """Link-picture model: -J per plaquette flip, +J*lam per flippable
    plaquette on the diagonal."""
    _require(basis.picture == "link", "build_original_rk needs a link basis")
    lattice = basis.lattice
    masks = basis.states
    n = len(masks)
    diag = np.zeros(n)
    rows, cols, vals = [], [], []
    for p in range(lattice.n_plaquettes):
        b, r, t, l = lattice.plaquette_links(p)
        bb = (masks >> b) & 1
        br = (masks >> r) & 1
        bt = (masks >> t) & 1
        bl = (masks >> l) & 1
        ok = (bb == br) & (bt == bl) & (bb != bt)
        diag += J * lam * ok
        src = np.nonzero(ok)[0]
        if len(src) == 0:
            continue
        flip = np.int64((1 << b) | (1 << r) | (1 << t) | (1 << l))
        tgt = basis.position(masks[src] ^ flip)
        if (tgt < 0).any():
            raise BasisMismatchError("plaquette flip leaves the basis")
        rows.append(src)
        cols.append(tgt)
        vals.append(np.full(len(src), -J))
    return _assemble(rows, cols, vals, diag, basis, "original-rk")


def _aligned_by_site(lattice: LatticeSpec, sig: np.ndarray) -> list:
    out = []
    for p in range(lattice.n_plaquettes):
        nb = _neighbor_sigmas(lattice, sig, p)
        ok = np.ones(sig.shape[1], dtype=bool)
        for col in nb[1:]:
            ok &= col == nb[0]
        out.append(ok)
    return out


def build_dual_rk(basis: ConstrainedBasis, J: float, lam: float,
                  lattice: LatticeSpec | None = None) -> SparseOperator:
    """Dual-picture model: flips gated by aligned neighborhoods, +J*lam per
    flippable dual spin on the diagonal."""
    _require(basis.picture == "dual", "build_dual_rk needs a dual basis")
    if lattice is None:
        lattice = basis.lattice
    _require(lattice == basis.lattice, "lattice does not match the basis")
    sig = _sigma_table(basis.states, lattice.n_plaquettes)
    allowed = _aligned_by_site(lattice, sig)
    diag = np.zeros(len(basis.states))
    for ok in allowed:
        diag += J * lam * ok
    rows, cols, vals = _kinetic_terms(basis, allowed, J)
    return _assemble(rows, cols, vals, diag, basis, "dual-rk")


def _pattern_weight(lattice: LatticeSpec, sig: np.ndarray, p: int) -> np.ndarray:
    """+1 aligned, -1 alternating, 0 otherwise, per basis state.

    Ladder (3 neighbors left, right, opposite-leg): sigma_V (sigma_L +
    sigma_R) / 2.  Square (4 neighbors): (sigma_L + sigma_R)(sigma_U +
    sigma_D) / 4, with frozen boundary neighbors counted as up.
    """
    nb = _neighbor_sigmas(lattice, sig, p)
    if lattice.kind == PERIODIC_LADDER:
        left, right, opposite = nb
        return opposite * (left.astype(np.float64) + right) / 2.0
    left, right, up, down = nb
    return (left.astype(np.float64) + right) * (up.astype(np.float64) + down) / 4.0


def build_rydberg_rk(basis: ConstrainedBasis, J: float, solution,
                     lattice: LatticeSpec | None = None,
                     delta: float = 0.0) -> SparseOperator:
    """Blockade realization of the dual model.

    Kinetic part identical to build_dual_rk; the diagonal carries the
    pattern combination the second-shell couplings produce (+Lambda for
    aligned neighborhoods, -Lambda for alternating ones) plus an optional
    uniform detuning delta * sum_p S^z_p.  `solution` supplies Lambda: a
    geometry solution object, a mapping with key "Lambda", or a float.
    """
    _require(basis.picture == "dual", "build_rydberg_rk needs a dual basis")
    if lattice is None:
        lattice = basis.lattice
    _require(lattice == basis.lattice, "lattice does not match the basis")
    if hasattr(solution, "Lambda"):
        Lam = float(solution.Lambda)
    elif isinstance(solution, dict):
        Lam = float(solution["Lambda"])
    else:
        Lam = float(solution)
    n_sites = lattice.n_plaquettes
    sig = _sigma_table(basis.states, n_sites)
    diag = np.zeros(len(basis.states))
    for p in range(n_sites):
        diag += Lam * _pattern_weight(lattice, sig, p)
    if delta:
        for p in range(n_sites):
            diag += delta * 0.5 * sig[p]
    allowed = _aligned_by_site(lattice, sig)
    rows, cols, vals = _kinetic_terms(basis, allowed, J)
    return _assemble(rows, cols, vals, diag, basis, "rydberg-rk")


# ---------------------------------------------------------------------------
# pair-array models (full space)


def _ladder_bonds(geom: PairArrayGeometry):
    """Unordered bonds (p, q, offset, k) of the decorated ladder, k <= 2.

    Offsets are the geometric separations q - p used for A and B;
    orientation follows the stored (p, q) order.
    """
    lat = geom.lattice
    nx = lat.nx
    ax, ay = geom.a_x, geom.a_y

    def site(x, y):
        return (y % 2) * nx + (x % nx)

    bonds = []
    for y in (0, 1):
        for x in range(nx):
            bonds.append((site(x, y), site(x + 1, y), (ax, 0.0, 0.0), 1))
            dy = ay if y == 0 else -ay
            bonds.append((site(x, y), site(x + 1, 1 - y), (ax, dy, 0.0), 2))
    for x in range(nx):
        bonds.append((site(x, 0), site(x, 1), (0.0, ay, 0.0), 1))
    return bonds


def _square_positions(geom: PairArrayGeometry, i: int, j: int):
    y = j * geom.a_y + ((i + j) % 2) * geom.d_y
    return (i * geom.a_x, y, 0.0)


def _square_bonds(geom: PairArrayGeometry):
    """Bonds of the decorated square interior plus its frozen ring.

    Returns (interior_bonds, boundary_terms): interior_bonds are
    (p, q, offset); boundary_terms are (p, offset, q_is_forward) for bonds
    between interior site p and a frozen ring spin (up), where offset is
    the separation of the pair in the stored orientation.
    """
    pnx, pny = geom.lattice.plaquette_shape

    def interior(i, j):
        return 0 <= i < pnx and 0 <= j < pny

    steps = [((1, 0), 1), ((0, 1), 1), ((1, 1), 2), ((-1, 1), 2)]
    inter, boundary = [], []
    for j in range(-1, pny + 1):
        for i in range(-1, pnx + 1):
            for (di, dj), k in steps:
                i2, j2 = i + di, j + dj
                if not (-1 <= i2 <= pnx and -1 <= j2 <= pny):
                    continue
                a_in, b_in = interior(i, j), interior(i2, j2)
                if not (a_in or b_in):
                    continue
                p1 = np.array(_square_positions(geom, i, j))
                p2 = np.array(_square_positions(geom, i2, j2))
                off = tuple(p2 - p1)
                if a_in and b_in:
                    inter.append((geom.lattice.plaquette_index(i, j),
                                  geom.lattice.plaquette_index(i2, j2), off, k))
                elif a_in:
                    boundary.append((geom.lattice.plaquette_index(i, j), off, True, k))
                else:
                    boundary.append((geom.lattice.plaquette_index(i2, j2), off, False, k))
    return inter, boundary


def build_effective_spin(geometry: PairArrayGeometry, J: float,
                         delta: float = 0.0,
                         k_max: int = 2,
                         include_B: bool = True,
                         max_spins: int = 16) -> SparseOperator:
    """Raw pair-array spin model on the full 2^N space.

    H = sum_p (-2 J S^x_p + delta S^z_p)
      + sum_bonds [2 A S^z_p S^z_q + B (S^z_q - S^z_p)]

    with A, B evaluated at the true pair separations for the first k_max
    neighbor shells (the rest dropped).  No projector shortcut: the
    blockade structure must emerge from the couplings themselves.  On the
    open square the frozen boundary ring contributes longitudinal fields
    and a constant.  include_B=False drops the antisymmetric terms (they
    cancel exactly on the periodic ladder anyway).
    """
    if k_max not in (1, 2):
        raise ValueError("k_max must be 1 or 2")
    lattice = geometry.lattice
    n = lattice.n_plaquettes
    if n > max_spins or n > 24:
        raise DimensionCapError(f"{n} spins exceeds the full-space cap")
    dim = 1 << n
    masks = np.arange(dim, dtype=np.int64)
    sig = _sigma_table(masks, n)
    diag = np.zeros(dim)
    eta = geometry.eta
    c6 = geometry.C6

    def a_of(off):
        return ising_coupling_A(off, eta, c6)

    def b_of(off):
        if not include_B:
            return 0.0
        return onsite_coefficient_B(off, eta, c6)

    if lattice.kind == PERIODIC_LADDER:
        bonds = _ladder_bonds(geometry)
        boundary = []
    elif lattice.kind == OPEN_SQUARE:
        bonds, boundary = _square_bonds(geometry)
    else:
        raise ValueError("effective spin model needs a ladder or square array")
    for p, q, off, k in bonds:
        if k > k_max:
            continue
        A = a_of(off)
        B = b_of(off)
        diag += (A / 2.0) * sig[p] * sig[q]
        diag += (B / 2.0) * (sig[q].astype(np.float64) - sig[p])
    for p, off, forward, k in boundary:
        if k > k_max:
            continue
        A = a_of(off)
        B = b_of(off)
        if forward:
            # interior p, frozen up neighbor at p + off
            diag += (A / 2.0) * sig[p] + (B / 2.0) * (1.0 - sig[p])
        else:
            diag += (A / 2.0) * sig[p] + (B / 2.0) * (sig[p] - 1.0)
    if delta:
        for p in range(n):
            diag += delta * 0.5 * sig[p]
    rows, cols, vals = [], [], []
    for p in range(n):
        rows.append(masks)
        cols.append(masks ^ np.int64(1 << p))
        vals.append(np.full(dim, -J))
    basis = full_dual_basis(lattice)
    return _assemble(rows, cols, vals, diag, basis, "effective-spin")


def build_atom_level(geometry: PairArrayGeometry, Omega: float, Delta: float,
                     n_pairs: int = 2, delta: float = 0.0) -> SparseOperator:
    """Microscopic two-level model for the first n_pairs pair sites.

    Atoms sit at R_p +- eta/2 for the first n_pairs dual sites in
    row-major order.  H = sum_atoms [-Omega sx_I + Delta n_I]
    + sum_pairs C6 n_I n_J / r^6, plus a differential intra-pair
    detuning delta (energy +delta/2 for the forward atom Rydberg,
    -delta/2 for the backward one).
    """
    if not 1 <= n_pairs <= 4:
        raise DimensionCapError("atom-level model supports 1..4 pairs")
    lattice = geometry.lattice
    if lattice.kind == PERIODIC_LADDER:
        def pair_pos(m):
            x, y = m % lattice.nx, m // lattice.nx
            return np.array([x * geometry.a_x, y * geometry.a_y, 0.0])
    else:
        pnx, _ = lattice.plaquette_shape
        def pair_pos(m):
            i, j = m % pnx, m // pnx
            return np.array(_square_positions(geometry, i, j))
    eta = np.asarray(geometry.eta, dtype=float)
    atoms = []
    for m in range(n_pairs):
        center = pair_pos(m)
        atoms.append(center - eta / 2.0)   # atom 2m ("backward", S^z = -1/2)
        atoms.append(center + eta / 2.0)   # atom 2m+1 ("forward", S^z = +1/2)
    n_atoms = 2 * n_pairs
    dim = 1 << n_atoms
    masks = np.arange(dim, dtype=np.int64)
    occ = [((masks >> i) & 1).astype(np.float64) for i in range(n_atoms)]
    diag = np.zeros(dim)
    for i in range(n_atoms):
        diag += Delta * occ[i]
    for m in range(n_pairs):
        diag += (delta / 2.0) * (occ[2 * m + 1] - occ[2 * m])
    for i in range(n_atoms):
        for j in range(i + 1, n_atoms):
            r = float(np.linalg.norm(atoms[i] - atoms[j]))
            diag += (geometry.C6 / r**6) * occ[i] * occ[j]
    rows, cols, vals = [], [], []
    for i in range(n_atoms):
        rows.append(masks)
        cols.append(masks ^ np.int64(1 << i))
        vals.append(np.full(dim, -Omega))
    return _assemble(rows, cols, vals, diag, None, "atom-level")


# ---------------------------------------------------------------------------
# blockade-constrained chain


def pxp_chain_basis(N: int) -> ConstrainedBasis:
    """Masks of N-site chains with no two adjacent down spins; the all-up
    reference leads, the rest ascend."""
    if N < 2:
        raise ValueError("chain needs N >= 2")
    masks = np.arange(1 << N, dtype=np.int64)
    down = ~masks
    bad = (down & (down >> 1)) & np.int64((1 << (N - 1)) - 1)
    keep = masks[bad == 0]
    full = np.int64((1 << N) - 1)
    keep = np.concatenate(([full], keep[keep != full]))
    return ConstrainedBasis(
        lattice=LatticeSpec(CHAIN, N, 1),
        states=keep,
        picture="dual",
    )


def build_pxp_chain(N: int, J: float, lam: float) -> SparseOperator:
    """Open chain with flips gated by both existing neighbors up, and
    +J*lam on the diagonal for every site whose neighbor projectors are
    satisfied.  Missing end neighbors impose no condition."""
    basis = pxp_chain_basis(N)
    masks = basis.states
    diag = np.zeros(len(masks))
    allowed = []
    for p in range(N):
        ok = np.ones(len(masks), dtype=bool)
        if p > 0:
            ok &= ((masks >> (p - 1)) & 1) == 1
        if p < N - 1:
            ok &= ((masks >> (p + 1)) & 1) == 1
        diag += J * lam * ok
        allowed.append(ok)
    rows, cols, vals = _kinetic_terms(basis, allowed, J)
    return _assemble(rows, cols, vals, diag, basis, "pxp-chain")


def build_transverse_drive(basis: ConstrainedBasis, J: float = 1.0) -> SparseOperator:
    """Ungated transverse drive -2 J sum_p S^x_p: every single spin flip
    whose image stays in the basis carries amplitude -J, with no diagonal
    (flips leaving a restricted basis are projected away).

    On the full configuration space this is exactly the kinetic part of
    build_effective_spin, which makes it the swept term of a ramp
    H(t) = H_static + J(t) * drive."""
    _require(basis.picture == "dual", "transverse drive needs a dual basis")
    n = basis.lattice.n_plaquettes
    masks = basis.states
    rows, cols, vals = [], [], []
    for p in range(n):
        tgt = basis.position(basis.canonicalize(masks ^ np.int64(1 << p)))
        src = np.nonzero(tgt >= 0)[0]
        if len(src) == 0:
            continue
        rows.append(src)
        cols.append(tgt[src])
        vals.append(np.full(len(src), -J))
    return _assemble(rows, cols, vals, np.zeros(len(masks)), basis,
                     "transverse-drive")


# ---------------------------------------------------------------------------
# diagonal extras


def _penalty_blocks(lattice: LatticeSpec):
    """2x2 dual-site blocks (p, p+x, p+y, p+x+y); square blocks may carry
    frozen ring members (index -1, always up)."""
    blocks = []
    if lattice.kind == PERIODIC_LADDER:
        nx = lattice.nx

        def site(x, y):
            return (y % 2) * nx + (x % nx)

        for y in (0, 1):
            for x in range(nx):
                blocks.append((site(x, y), site(x + 1, y),
                               site(x, y + 1), site(x + 1, y + 1)))
        return blocks
    pnx, pny = lattice.plaquette_shape

    def site(i, j):
        if 0 <= i < pnx and 0 <= j < pny:
            return lattice.plaquette_index(i, j)
        return -1

    for j in range(-1, pny):
        for i in range(-1, pnx):
            blocks.append((site(i, j), site(i + 1, j),
                           site(i, j + 1), site(i + 1, j + 1)))
    return blocks


def add_penalty(op: SparseOperator, E: float) -> SparseOperator:
    """Add E per 2x2 dual block whose two diagonals are both anti-aligned
    (the four forbidden patterns); sector states cost exactly zero."""
    basis = op.basis
    _require(basis is not None and basis.picture == "dual",
             "penalty terms need a dual-configuration basis")
    lattice = basis.lattice
    masks = basis.states
    ones = np.ones(len(masks), dtype=np.int8)

    def col(s):
        if s < 0:
            return ones
        return (2 * ((masks >> s) & 1) - 1).astype(np.int8)

    extra = np.zeros(len(masks))
    for (p, px, py, pxy) in _penalty_blocks(lattice):
        bad = (col(p) != col(pxy)) & (col(px) != col(py))
        extra += E * bad
    return op.with_added_diagonal(extra, f"{op.model}+penalty")


DEFAULT_PINNING_SITES = ((0, 0), (1, 0), (1, 1))


def add_pinning(op: SparseOperator, delta_tilde: float,
                sites=None) -> SparseOperator:
    """Add delta_tilde * sum_{s in sites} S^z_s on dual sites given as
    (x, y) plaquette coordinates; defaults to the corner trio."""
    basis = op.basis
    _require(basis is not None and basis.picture == "dual",
             "pinning fields need a dual-configuration basis")
    lattice = basis.lattice
    if sites is None:
        sites = DEFAULT_PINNING_SITES
    masks = basis.states
    extra = np.zeros(len(masks))
    for (x, y) in sites:
        p = lattice.plaquette_index(x, y)
        extra += delta_tilde * 0.5 * (2 * ((masks >> p) & 1) - 1)
    return op.with_added_diagonal(extra, f"{op.model}+pinning")


def apply(op: SparseOperator, v: np.ndarray) -> np.ndarray:
    """y = H v."""
    return op.apply(np.asarray(v))


def linear_combination(terms, model: str | None = None) -> SparseOperator:
    """sum_i c_i * op_i for (coefficient, SparseOperator) pairs sharing one
    basis; duplicate entries merge, so stored zeros stay harmless."""
    terms = list(terms)
    _require(len(terms) > 0, "linear_combination needs at least one term")
    ops = [op for _, op in terms]
    first = ops[0]
    for op in ops[1:]:
        if op.dim != first.dim or op.basis is not first.basis and (
                op.basis is None or first.basis is None
                or not np.array_equal(op.basis.states, first.basis.states)):
            raise BasisMismatchError("operators live on different bases")
        _require(op.symmetric_storage == first.symmetric_storage,
                 "mixed storage conventions")
    mat = sum(float(c) * op.matrix for c, op in terms).tocsr()
    name = model or "+".join(f"{c:g}*{op.model}" for c, op in terms)
    return SparseOperator(mat, first.basis, name, first.symmetric_storage)
