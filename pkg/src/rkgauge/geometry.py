"""Van der Waals couplings of decorated atom-pair arrays.

Each lattice site hosts a pair of atoms displaced by a vector eta about
the pair center.  Driving the pair into its single-excitation manifold
turns it into a pseudo-spin; residual van der Waals interactions between
pairs at separation ``sep`` reduce to an Ising coupling ``A(sep, eta)``
plus an onsite coefficient ``B(sep, eta)``.

The solvers in this module pick the lattice spacing ``a_y`` so that the
nearest-neighbor Ising couplings around a site sum to zero.  Any proper
subset of them then sums to a nonzero energy whose minimum magnitude is
the generalized blockade gap G, and the leading diagonal coupling gives
the potential coefficient Lambda.

All lengths are in units of a_x = 1 and energies in units of C6/a_x**6.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .lattice import LatticeSpec, OPEN_SQUARE, PERIODIC_LADDER

MIN_ATOM_SEPARATION = 0.05


class GeometryError(ValueError):
    """Base class for geometry failures."""


class DegenerateGeometryError(GeometryError):
    """Atoms closer than the minimum separation guard."""


class PoleError(GeometryError):
    """Drive parameters sit on a resonance pole."""


class NoRootError(GeometryError):
    """Bracketing interval contains no sign change."""


class BlockadeDegeneracyError(GeometryError):
    """Some subset of couplings sums to (numerically) zero."""

    def __init__(self, message: str, subset: tuple[int, ...], total: float):
        super().__init__(message)
        self.subset = subset
        self.total = total


def _vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    return a


def ising_coupling_A(sep, eta, C6: float = 1.0,
                     min_separation: float = MIN_ATOM_SEPARATION) -> float:
    """Ising coupling between two atom pairs separated by ``sep``.

    A = C6 (2/|sep|^6 - 1/|sep+eta|^6 - 1/|sep-eta|^6).  Symmetric in
    sep -> -sep and eta -> -eta.  Callers must keep |sep| > |eta| so the
    pairs do not interleave.
    """
    s = _vec(sep)
    e = _vec(eta)
    d0 = np.linalg.norm(s)
    dp = np.linalg.norm(s + e)
    dm = np.linalg.norm(s - e)
    if min(d0, dp, dm) < min_separation:
        raise DegenerateGeometryError(
            f"atom distance below guard {min_separation}: "
            f"|s|={d0:.4g}, |s+eta|={dp:.4g}, |s-eta|={dm:.4g}")
    return C6 * (2.0 / d0**6 - 1.0 / dp**6 - 1.0 / dm**6)


def onsite_coefficient_B(sep, eta, C6: float = 1.0,
                         min_separation: float = MIN_ATOM_SEPARATION) -> float:
    """Onsite coefficient B = C6 (1/|sep+eta|^6 - 1/|sep-eta|^6).

    Antisymmetric under sep -> -sep, so its sum over any inversion
    symmetric shell of neighbors vanishes identically.
    """
    s = _vec(sep)
    e = _vec(eta)
    dp = np.linalg.norm(s + e)
    dm = np.linalg.norm(s - e)
    if min(dp, dm) < min_separation:
        raise DegenerateGeometryError(
            f"atom distance below guard {min_separation}: "
            f"|s+eta|={dp:.4g}, |s-eta|={dm:.4g}")
    return C6 * (1.0 / dp**6 - 1.0 / dm**6)


@dataclass
class DriveParams:
    """Two-photon drive of an atom pair.

    Omega: Rabi frequency; Delta: detuning (negative in the intended
    regime); delta: intra-pair detuning offset; J: derived effective
    Rabi frequency, filled by :func:`effective_rabi`.
    """

    Omega: float
    Delta: float
    delta: float = 0.0
    J: float | None = None

    def regime_valid(self, eta_len: float, C6: float = 1.0,
                     min_ratio: float = 10.0) -> bool:
        """True when Omega is weak against both -Delta and C6/|eta|^6."""
        if self.Delta >= 0 or self.Omega == 0:
            return False
        w = abs(self.Omega)
        return (-self.Delta >= min_ratio * w
                and C6 / eta_len**6 >= min_ratio * w)


def effective_rabi(drive: DriveParams, eta_len: float, C6: float = 1.0) -> float:
    """Effective pair Rabi frequency J = Omega^2 (1/Delta + |eta|^6/(C6 - Delta |eta|^6))."""
    if drive.Delta == 0:
        raise PoleError("detuning must be nonzero")
    e6 = eta_len**6
    denom = C6 - drive.Delta * e6
    if abs(denom) < 1e-12 * max(abs(C6), 1.0):
        raise PoleError("drive sits on the pair resonance C6 = Delta |eta|^6")
    return drive.Omega**2 * (1.0 / drive.Delta + e6 / denom)


@dataclass(frozen=True)
class PairArrayGeometry:
    """Physical layout of a decorated pair array.

    Pair centers sit on the lattice (spacings a_x = 1, a_y; on the
    square lattice the odd sublattice is raised by d_y), and the two
    atoms of a pair sit at center +- eta/2.
    """

    lattice: LatticeSpec
    a_y: float
    eta: tuple[float, float, float]
    d_y: float = 0.0
    a_x: float = 1.0
    C6: float = 1.0

    def __post_init__(self) -> None:
        e = _vec(self.eta)
        if np.linalg.norm(e) <= 0:
            raise GeometryError("eta must have positive length")
        if self.a_y <= 0:
            raise GeometryError("a_y must be positive")
        if self.lattice.kind == PERIODIC_LADDER:
            if self.d_y != 0 or e[1] != 0 or e[2] != 0:
                raise GeometryError(
                    "ladder mode requires eta along x and d_y = 0")
        elif self.lattice.kind == OPEN_SQUARE:
            if e[1] != 0:
                raise GeometryError("square mode requires eta in the xz-plane")
        else:
            raise GeometryError(
                f"no pair-array layout for lattice kind {self.lattice.kind!r}")
        eta_len = float(np.linalg.norm(e))
        for off in self.neighbor_offsets(1):
            s = _vec(off)
            dmin = min(np.linalg.norm(s),
                       np.linalg.norm(s + e), np.linalg.norm(s - e))
            if dmin <= eta_len:
                raise DegenerateGeometryError(
                    f"inter-pair atom distance {dmin:.4g} at offset {off} "
                    f"does not exceed |eta| = {eta_len:.4g}")

    def neighbor_offsets(self, k: int) -> list[tuple[float, float, float]]:
        """Center-to-center offsets of the k-th neighbor shell.

        Offsets are quoted from an even-sublattice site (the square
        lattice's odd sublattice is raised by d_y).
        """
        ax, ay, dy = self.a_x, self.a_y, self.d_y
        if self.lattice.kind == PERIODIC_LADDER:
            if k == 1:
                return [(ax, 0.0, 0.0), (-ax, 0.0, 0.0), (0.0, ay, 0.0)]
            if k == 2:
                return [(ax, ay, 0.0), (-ax, ay, 0.0)]
        else:
            if k == 1:
                return [(ax, dy, 0.0), (-ax, dy, 0.0),
                        (0.0, ay + dy, 0.0), (0.0, -(ay - dy), 0.0)]
            if k == 2:
                return [(ax, ay, 0.0), (-ax, ay, 0.0),
                        (ax, -ay, 0.0), (-ax, -ay, 0.0)]
        raise ValueError("neighbor order k must be 1 or 2")


@dataclass(frozen=True)
class CouplingEntry:
    offset: tuple[float, float, float]
    k: int
    A: float
    B: float


def coupling_table(geom: PairArrayGeometry, k_max: int) -> list[CouplingEntry]:
    """A and B for every neighbor offset up to order ``k_max`` (1 or 2)."""
    if k_max not in (1, 2):
        raise ValueError("k_max must be 1 or 2; farther couplings are "
                         "treated as zero")
    out: list[CouplingEntry] = []
    for k in range(1, k_max + 1):
        for off in geom.neighbor_offsets(k):
            out.append(CouplingEntry(
                offset=off, k=k,
                A=ising_coupling_A(off, geom.eta, geom.C6),
                B=onsite_coefficient_B(off, geom.eta, geom.C6)))
    return out


def validate_generalized_blockade(couplings: Sequence[float],
                                  epsilon: float = 1e-6) -> float:
    """Minimum |sum| over nonempty proper subsets of the couplings.

    The full set sums to zero by construction, so the proper subsets
    carry the energy cost of any partial flip; their minimum is the
    generalized blockade gap G.  Raises when a subset sum vanishes
    within epsilon * max|A|.
    """
    vals = [float(c) for c in couplings]
    n = len(vals)
    if n < 2:
        raise ValueError("need at least two couplings")
    threshold = epsilon * max(abs(v) for v in vals)
    best = math.inf
    best_subset: tuple[int, ...] = ()
    for mask in range(1, (1 << n) - 1):
        total = sum(vals[i] for i in range(n) if mask >> i & 1)
        if abs(total) <= threshold:
            subset = tuple(i for i in range(n) if mask >> i & 1)
            raise BlockadeDegeneracyError(
                f"couplings subset {subset} sums to {total:.3e}; "
                "generalized blockade is degenerate", subset, total)
        if abs(total) < best:
            best = abs(total)
            best_subset = tuple(i for i in range(n) if mask >> i & 1)
    del best_subset
    return best


@dataclass
class BlockadeSolution:
    """Solved pair-array geometry with its derived energy scales."""

    a_y: float
    G: float
    Lambda: float
    couplings: list[CouplingEntry]
    eta: tuple[float, float, float]
    theta: float
    d_y: float
    geometry: PairArrayGeometry | None = field(default=None, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "eta": list(self.eta),
            "theta": self.theta,
            "d_y": self.d_y,
            "a_y": self.a_y,
            "G": self.G,
            "Lambda": self.Lambda,
            "couplings": [
                {"offset": list(c.offset), "k": c.k, "A": c.A, "B": c.B}
                for c in self.couplings],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def solution_from_json_dict(d: dict,
                            lattice: LatticeSpec | None = None) -> BlockadeSolution:
    couplings = [CouplingEntry(offset=tuple(c["offset"]), k=int(c["k"]),
                               A=float(c["A"]), B=float(c["B"]))
                 for c in d["couplings"]]
    eta = tuple(float(x) for x in d["eta"])
    geom = None
    if lattice is not None:
        geom = PairArrayGeometry(lattice=lattice, a_y=float(d["a_y"]),
                                 eta=eta, d_y=float(d["d_y"]))
    return BlockadeSolution(
        a_y=float(d["a_y"]), G=float(d["G"]), Lambda=float(d["Lambda"]),
        couplings=couplings, eta=eta, theta=float(d["theta"]),
        d_y=float(d["d_y"]), geometry=geom)


def _bracketed_root(f, lo: float, hi: float, what: str) -> float:
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise NoRootError(
            f"no sign change for {what} on [{lo:.6g}, {hi:.6g}] "
            f"(f = {flo:.3e}, {fhi:.3e})")
    return float(brentq(f, lo, hi, xtol=1e-14, rtol=1e-12))


def solve_ladder_geometry(eta_len: float, C6: float = 1.0,
                          lattice: LatticeSpec | None = None) -> BlockadeSolution:
    """Ladder spacing a_y with 2 A(x, eta) = -A(a_y y, eta), eta along x.

    Returns the solved geometry with G = -A(x, eta) and
    Lambda = A(x + a_y y, eta) / 2.
    """
    if not 0 < eta_len < 0.5:
        raise GeometryError("ladder mode needs 0 < |eta| < a_x/2 so atoms "
                            "of adjacent pairs on a leg stay apart")
    eta = (eta_len, 0.0, 0.0)
    a_leg = ising_coupling_A((1.0, 0.0, 0.0), eta, C6)

    def f(ay: float) -> float:
        return 2.0 * a_leg + ising_coupling_A((0.0, ay, 0.0), eta, C6)

    lo = max(eta_len + 1e-6, 2 * MIN_ATOM_SEPARATION)
    a_y = _bracketed_root(f, lo, 1.0, "ladder rung spacing")
    G = -a_leg
    if G <= 0:
        raise GeometryError("leg coupling is not negative; no blockade")
    lam = ising_coupling_A((1.0, a_y, 0.0), eta, C6) / 2.0
    if lattice is None:
        lattice = LatticeSpec(PERIODIC_LADDER, 6, 2)
    geom = PairArrayGeometry(lattice=lattice, a_y=a_y, eta=eta, C6=C6)
    return BlockadeSolution(a_y=a_y, G=G, Lambda=lam,
                            couplings=coupling_table(geom, 2),
                            eta=eta, theta=0.0, d_y=0.0, geometry=geom)


def solve_square_geometry(eta_len: float, theta: float, d_y: float,
                          C6: float = 1.0,
                          lattice: LatticeSpec | None = None) -> BlockadeSolution:
    """Square-lattice spacing a_y for a pair array with tilted eta.

    eta = |eta| (cos(theta), 0, sin(theta)) lies in the xz-plane and the
    odd sublattice is raised by d_y, so the four nearest-neighbor
    couplings from any site are {A_h, A_h, A_top, A_bottom}.  a_y solves
    -2 A(x + d_y y, eta) = A((a_y - d_y) y, eta) + A((a_y + d_y) y, eta);
    G is the minimum proper-subset gap of those couplings and
    Lambda = A(x + a_y y, eta).
    """
    if eta_len <= 0:
        raise GeometryError("|eta| must be positive")
    if d_y < 0:
        raise GeometryError("d_y must be nonnegative")
    eta = (eta_len * math.cos(theta), 0.0, eta_len * math.sin(theta))
    a_h = ising_coupling_A((1.0, d_y, 0.0), eta, C6)

    def f(ay: float) -> float:
        return (2.0 * a_h
                + ising_coupling_A((0.0, ay - d_y, 0.0), eta, C6)
                + ising_coupling_A((0.0, ay + d_y, 0.0), eta, C6))

    a_y = _bracketed_root(f, d_y + 2 * MIN_ATOM_SEPARATION, 2.0,
                          "square row spacing")
    a_top = ising_coupling_A((0.0, a_y + d_y, 0.0), eta, C6)
    a_bot = ising_coupling_A((0.0, a_y - d_y, 0.0), eta, C6)
    G = validate_generalized_blockade([a_h, a_h, a_top, a_bot])
    lam = ising_coupling_A((1.0, a_y, 0.0), eta, C6)
    if lattice is None:
        lattice = LatticeSpec(OPEN_SQUARE, 5, 5)
    geom = PairArrayGeometry(lattice=lattice, a_y=a_y, eta=eta, d_y=d_y, C6=C6)
    return BlockadeSolution(a_y=a_y, G=G, Lambda=lam,
                            couplings=coupling_table(geom, 2),
                            eta=eta, theta=theta, d_y=d_y, geometry=geom)
