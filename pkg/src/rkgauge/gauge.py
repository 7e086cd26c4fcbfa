"""Electric link configurations, dual plaquette spins, and the maps between them.

A link configuration stores one bit per lattice link (bit 1 means the link
spin points up, S^z = +1/2).  The physical subspace is selected by a Gauss
law at every site; within it, plaquette operators flip the four links of a
flippable plaquette.  The dual picture trades links for one spin per
plaquette: a plaquette spin flips only when all of its dual neighbors are
aligned, and the two pictures are intertwined by an exact configuration map.
Open lattices freeze the dual spins on the boundary ring to up, which pins
the electric boundary to the staggered reference state.

Configurations are plain integers (little-endian bitmasks in the link or
plaquette index order of the lattice module), so sets of them can be stored
and searched as numpy int64 arrays.
"""

from __future__ import annotations

import json
import struct
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    CHAIN,
    OPEN_SQUARE,
    PERIODIC_LADDER,
    LatticeSpec,
)

VACUUM = "vacuum"
STAGGERED = "staggered"

_EXPORT_MAGIC = b"RKGB"
_EXPORT_VERSION = 1
_KIND_CODES = {CHAIN: 0, PERIODIC_LADDER: 1, OPEN_SQUARE: 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}

DEFAULT_STATE_CAP = 1 << 26


class GaussViolationError(ValueError):
    """The link configuration violates the Gauss law."""


class BoundaryMismatchError(ValueError):
    """Gauss-legal configuration that cannot be reached from the reference
    boundary (wrong winding or boundary assignment)."""


class SectorSizeError(RuntimeError):
    """Sector enumeration exceeded the configured state cap."""


@dataclass(frozen=True)
class ChargeBackground:
    """Static charge assignment entering the Gauss law.

    vacuum: every site charge is zero.  staggered: site s carries
    (-1)^s, the dimer-model background.
    """

    mode: str = VACUUM

    def __post_init__(self) -> None:
        if self.mode not in (VACUUM, STAGGERED):
            raise ValueError(f"unknown charge background {self.mode!r}")

    def charge(self, lattice: LatticeSpec, x: int, y: int) -> int:
        if self.mode == VACUUM:
            return 0
        return lattice.site_parity(x, y)


def _link_value(lattice: LatticeSpec, mask: int, entry) -> int:
    """Signed value 2*E = +-1 for a site_links entry (real or virtual)."""
    if isinstance(entry, tuple):
        bit = entry[1]
    else:
        bit = (mask >> entry) & 1
    return 2 * bit - 1


def site_divergence(lattice: LatticeSpec, mask: int, x: int, y: int) -> int:
    """Integer out-minus-in electric flux at site (x, y), in units of 1/2.

    Equals (E_out_x + E_out_y - E_in_x - E_in_y) / (1/2); virtual links on
    open lattices contribute their frozen reference values.
    """
    out_x, out_y, in_x, in_y = lattice.site_links(x, y)
    div = _link_value(lattice, mask, out_x) + _link_value(lattice, mask, out_y)
    div -= _link_value(lattice, mask, in_x) + _link_value(lattice, mask, in_y)
    return div // 2


def check_gauss_law(
    lattice: LatticeSpec,
    mask: int,
    background: ChargeBackground = ChargeBackground(),
) -> list[tuple[int, int]]:
    """Sites whose local flux does not match the background charge.

    Empty list means the configuration is physical for that background.
    """
    bad = []
    for y in range(lattice.ny):
        for x in range(lattice.nx):
            if site_divergence(lattice, mask, x, y) != background.charge(lattice, x, y):
                bad.append((x, y))
    return bad


def list_physical_vertex_configs(background: ChargeBackground = ChargeBackground(),
                                 parity: int = 1) -> set[int]:
    """4-bit link patterns (out_x, out_y, in_x, in_y little-endian) allowed
    by the single-site Gauss law.

    parity (+1 even site, -1 odd) only matters for the staggered
    background, whose target charge alternates.
    """
    target = 0 if background.mode == VACUUM else parity
    allowed = set()
    for pattern in range(16):
        b = [(pattern >> i) & 1 for i in range(4)]
        if (b[0] + b[1]) - (b[2] + b[3]) == target:
            allowed.add(pattern)
    return allowed


# ---------------------------------------------------------------------------
# plaquette operators, link picture


def plaquette_flippable(lattice: LatticeSpec, mask: int, p: int) -> bool:
    """True when plaquette p carries one of the two flippable patterns.

    In (bottom, right, top, left) order those are (1,1,0,0) and (0,0,1,1):
    the bottom/right pair aligned, the top/left pair aligned, and the two
    pairs opposite.
    """
    b, r, t, l = (int((mask >> l_) & 1) for l_ in lattice.plaquette_links(p))
    return b == r and t == l and b != t


def apply_plaquette(lattice: LatticeSpec, mask: int, p: int) -> int | None:
    """Flip plaquette p if flippable, else None (the operator annihilates
    the other fourteen patterns)."""
    if not plaquette_flippable(lattice, mask, p):
        return None
    flip = 0
    for l_ in lattice.plaquette_links(p):
        flip |= 1 << l_
    return mask ^ flip


# ---------------------------------------------------------------------------
# duality map


def _dual_sigma(lattice: LatticeSpec, dual_mask: int, i: int, j: int) -> int:
    """Dual spin sign at plaquette coords (i, j); off-grid cells are the
    frozen boundary (up) on open lattices."""
    pnx, pny = lattice.plaquette_shape
    if lattice.kind == PERIODIC_LADDER:
        p = lattice.plaquette_index(i % pnx, j % pny)
        return 2 * ((dual_mask >> p) & 1) - 1
    if 0 <= i < pnx and 0 <= j < pny:
        p = lattice.plaquette_index(i, j)
        return 2 * ((dual_mask >> p) & 1) - 1
    return 1


def from_dual(lattice: LatticeSpec, dual_mask: int) -> int:
    """Link configuration of a dual spin configuration.

    The x link below plaquette p gets S^z = -2(-1)^p S^z_p S^z_{p-y},
    the y link left of p gets S^z = +2(-1)^p S^z_p S^z_{p-x}; the frozen
    boundary ring supplies the off-grid factors on open lattices.  The
    all-up dual maps to the staggered reference configuration.
    """
    if lattice.kind == CHAIN:
        raise ValueError("chains have no link picture")
    mask = 0
    # x links: one per (x, y) site position that carries an x link
    if lattice.kind == PERIODIC_LADDER:
        xs, ys = lattice.nx, 2
    else:
        xs, ys = lattice.nx - 1, lattice.ny
    for y in range(ys):
        for x in range(xs):
            par = 1 - 2 * ((x + y) % 2)
            s_here = _dual_sigma(lattice, dual_mask, x, y)
            s_below = _dual_sigma(lattice, dual_mask, x, y - 1)
            if -par * s_here * s_below > 0:
                mask |= 1 << lattice.xlink_index(x, y)
    if lattice.kind == PERIODIC_LADDER:
        xs, ys = lattice.nx, 2
    else:
        xs, ys = lattice.nx, lattice.ny - 1
    for y in range(ys):
        for x in range(xs):
            par = 1 - 2 * ((x + y) % 2)
            s_here = _dual_sigma(lattice, dual_mask, x, y)
            s_left = _dual_sigma(lattice, dual_mask, x - 1, y)
            if par * s_here * s_left > 0:
                mask |= 1 << lattice.ylink_index(x, y)
    return mask


def to_dual(lattice: LatticeSpec, link_mask: int) -> int:
    """Invert from_dual.

    Requires a vacuum-physical configuration compatible with the reference
    boundary (open lattices) or reference winding (ladder); the returned
    ladder representative is the one with dual bit (0, 0) up.
    """
    if lattice.kind == CHAIN:
        raise ValueError("chains have no link picture")
    bad = check_gauss_law(lattice, link_mask)
    if bad:
        raise GaussViolationError(f"Gauss law violated at sites {bad}")
    pnx, pny = lattice.plaquette_shape
    sig = {}
    if lattice.kind == OPEN_SQUARE:
        # integrate row by row from the frozen left boundary column
        for j in range(pny):
            left = 1  # virtual (-1, j)
            for i in range(pnx):
                par = 1 - 2 * ((i + j) % 2)
                ylink_bit = (link_mask >> lattice.ylink_index(i, j)) & 1
                sig[(i, j)] = left * par * (2 * ylink_bit - 1)
                left = sig[(i, j)]
            # closure against the right virtual column
            par = 1 - 2 * ((pnx + j) % 2)
            ylink_bit = (link_mask >> lattice.ylink_index(pnx, j)) & 1
            if left * par * (2 * ylink_bit - 1) != 1:
                raise BoundaryMismatchError(
                    f"row {j} does not close onto the fixed boundary")
    else:
        sig[(0, 0)] = 1
        for x in range(1, pnx):
            par = 1 - 2 * (x % 2)
            ylink_bit = (link_mask >> lattice.ylink_index(x, 0)) & 1
            sig[(x, 0)] = sig[(x - 1, 0)] * par * (2 * ylink_bit - 1)
        for x in range(pnx):
            # rung: x link on row 1 relates the two rows
            par = 1 - 2 * ((x + 1) % 2)
            xlink_bit = (link_mask >> lattice.xlink_index(x, 1)) & 1
            sig[(x, 1)] = -sig[(x, 0)] * par * (2 * xlink_bit - 1)
    dual_mask = 0
    for (i, j), s in sig.items():
        if s > 0:
            dual_mask |= 1 << lattice.plaquette_index(i, j)
    if from_dual(lattice, dual_mask) != link_mask:
        raise BoundaryMismatchError(
            "configuration is Gauss-legal but not in the reference sector")
    return dual_mask


# ---------------------------------------------------------------------------
# plaquette operators, dual picture


def dual_plaquette_flippable(lattice: LatticeSpec, dual_mask: int, p: int) -> bool:
    """All dual neighbors of p aligned (boundary neighbors count as up)."""
    first = None
    for q in lattice.dual_neighbors(p):
        s = 1 if q < 0 else (dual_mask >> q) & 1
        if first is None:
            first = s
        elif s != first:
            return False
    return True


def apply_dual_plaquette(lattice: LatticeSpec, dual_mask: int, p: int) -> int | None:
    """Flip dual spin p when its neighborhood is aligned, else None."""
    if not dual_plaquette_flippable(lattice, dual_mask, p):
        return None
    return dual_mask ^ (1 << p)


def reference_dual_config(lattice: LatticeSpec) -> int:
    """All dual spins up."""
    return (1 << lattice.n_plaquettes) - 1


# ---------------------------------------------------------------------------
# sector enumeration


@dataclass(frozen=True)
class ConstrainedBasis:
    """Reachable sector of configurations, in deterministic BFS order.

    states[0] is the reference.  picture is "dual" or "link";
    identify_global_flip marks ladder quotient bases whose members are
    canonical representatives (dual bit 0 up) of global-flip pairs.
    """

    lattice: LatticeSpec
    states: np.ndarray
    picture: str = "dual"
    identify_global_flip: bool = False
    _sorted: np.ndarray = field(init=False, repr=False, compare=False)
    _order: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=np.int64)
        object.__setattr__(self, "states", states)
        order = np.argsort(states, kind="stable")
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_sorted", states[order])

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def full_flip_mask(self) -> int:
        n = (self.lattice.n_plaquettes if self.picture == "dual"
             else self.lattice.n_links)
        return (1 << n) - 1

    def canonicalize(self, masks: np.ndarray) -> np.ndarray:
        """Map masks to their stored representative (quotient bases fold
        the global flip onto dual bit 0 up)."""
        masks = np.asarray(masks, dtype=np.int64)
        if not self.identify_global_flip:
            return masks
        full = np.int64(self.full_flip_mask())
        return np.where(masks & 1, masks, masks ^ full)

    def position(self, masks) -> np.ndarray:
        """Index of each mask in discovery order, -1 when absent."""
        arr = np.atleast_1d(np.asarray(masks, dtype=np.int64))
        j = np.searchsorted(self._sorted, arr)
        j = np.clip(j, 0, len(self._sorted) - 1)
        hit = self._sorted[j] == arr
        out = np.where(hit, self._order[j], -1)
        return out.astype(np.int64)

    def index(self, mask: int) -> int:
        i = int(self.position(np.array([mask], dtype=np.int64))[0])
        if i < 0:
            raise KeyError(f"configuration {mask} not in basis")
        return i

    def __contains__(self, mask: int) -> bool:
        return int(self.position(np.array([mask], dtype=np.int64))[0]) >= 0

    # -- export ------------------------------------------------------------

    def export_binary(self, path: str) -> None:
        """Little-endian u64 masks after a 16-byte header."""
        flags = 1 if self.identify_global_flip else 0
        if self.picture == "link":
            flags |= 2
        header = struct.pack(
            "<4sHBBHHI",
            _EXPORT_MAGIC,
            _EXPORT_VERSION,
            _KIND_CODES[self.lattice.kind],
            flags,
            self.lattice.nx,
            self.lattice.ny,
            len(self.states),
        )
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.states.astype("<u8").tobytes())

    def export_json(self, path: str, limit: int = 1 << 16) -> None:
        if len(self.states) > limit:
            raise SectorSizeError(
                f"sector of {len(self.states)} states exceeds JSON limit {limit}")
        doc = {
            "kind": self.lattice.kind,
            "nx": self.lattice.nx,
            "ny": self.lattice.ny,
            "picture": self.picture,
            "identify_global_flip": self.identify_global_flip,
            "states": [int(s) for s in self.states],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)


def load_basis_binary(path: str) -> ConstrainedBasis:
    with open(path, "rb") as fh:
        header = fh.read(16)
        magic, version, kind_code, flags, nx, ny, count = struct.unpack(
            "<4sHBBHHI", header)
        if magic != _EXPORT_MAGIC:
            raise ValueError("not a basis export file")
        if version != _EXPORT_VERSION:
            raise ValueError(f"unsupported export version {version}")
        states = np.frombuffer(fh.read(8 * count), dtype="<u8").astype(np.int64)
    return ConstrainedBasis(
        lattice=LatticeSpec(_KIND_NAMES[kind_code], nx, ny),
        states=states,
        picture="link" if flags & 2 else "dual",
        identify_global_flip=bool(flags & 1),
    )


def full_dual_basis(lattice: LatticeSpec, max_states: int = DEFAULT_STATE_CAP) -> ConstrainedBasis:
    """Unconstrained basis of all 2^n dual configurations, mask order.

    Used by the models whose constraint is emergent rather than imposed.
    """
    n = lattice.n_plaquettes
    if (1 << n) > max_states:
        raise SectorSizeError(
            f"full space of {1 << n} states exceeds the cap of {max_states}")
    return ConstrainedBasis(
        lattice=lattice,
        states=np.arange(1 << n, dtype=np.int64),
        picture="dual",
    )


def enumerate_sector(
    lattice: LatticeSpec,
    reference: int | None = None,
    identify_global_flip: bool = False,
    max_states: int = DEFAULT_STATE_CAP,
) -> ConstrainedBasis:
    """Breadth-first closure of the dual reference under dual plaquette flips.

    Deterministic: FIFO over states, plaquettes tried in index order.
    identify_global_flip (periodic ladder only) folds each state onto the
    representative with dual bit 0 up, halving the basis; it is only valid
    for flip-even operators.
    """
    n = lattice.n_plaquettes
    if reference is None:
        reference = reference_dual_config(lattice)
    full = (1 << n) - 1
    if identify_global_flip:
        if lattice.kind != PERIODIC_LADDER:
            raise ValueError("global-flip quotient applies to the periodic ladder")
        if not reference & 1:
            reference ^= full
    order = [reference]
    seen = {reference}
    queue = deque([reference])
    while queue:
        m = queue.popleft()
        for p in range(n):
            m2 = apply_dual_plaquette(lattice, m, p)
            if m2 is None:
                continue
            if identify_global_flip and not m2 & 1:
                m2 ^= full
            if m2 not in seen:
                if len(seen) >= max_states:
                    raise SectorSizeError(
                        f"sector exceeds the cap of {max_states} states")
                seen.add(m2)
                order.append(m2)
                queue.append(m2)
    return ConstrainedBasis(
        lattice=lattice,
        states=np.array(order, dtype=np.int64),
        picture="dual",
        identify_global_flip=identify_global_flip,
    )


def enumerate_link_sector(
    lattice: LatticeSpec,
    reference: int | None = None,
    max_states: int = DEFAULT_STATE_CAP,
) -> ConstrainedBasis:
    """BFS closure of a link configuration under plaquette flips.

    Independent of the dual machinery: used to cross-check that the two
    pictures span matching sectors.
    """
    if reference is None:
        reference = lattice.reference_link_config()
    n = lattice.n_plaquettes
    order = [reference]
    seen = {reference}
    queue = deque([reference])
    while queue:
        m = queue.popleft()
        for p in range(n):
            m2 = apply_plaquette(lattice, m, p)
            if m2 is not None and m2 not in seen:
                if len(seen) >= max_states:
                    raise SectorSizeError(
                        f"sector exceeds the cap of {max_states} states")
                seen.add(m2)
                order.append(m2)
                queue.append(m2)
    return ConstrainedBasis(
        lattice=lattice,
        states=np.array(order, dtype=np.int64),
        picture="link",
    )


# ---------------------------------------------------------------------------
# dimer basis rotation and heights


def rotate_to_dimer_basis(lattice: LatticeSpec, link_mask: int) -> int:
    """Flip the bottom and left links of every odd interior plaquette.

    An involution; it carries the staggered reference configuration to the
    columnar pattern (all bulk vertical links colored), and flippable
    plaquettes to parallel-dimer plaquettes.
    """
    if lattice.kind != OPEN_SQUARE:
        raise ValueError("the dimer rotation is defined on the open square lattice")
    flip = 0
    pnx, pny = lattice.plaquette_shape
    for j in range(pny):
        for i in range(pnx):
            if (i + j) % 2 == 1:
                bottom, _, _, left = lattice.plaquette_links(
                    lattice.plaquette_index(i, j))
                flip |= (1 << bottom) | (1 << left)
    return link_mask ^ flip


def height_field(lattice: LatticeSpec, link_mask: int) -> np.ndarray:
    """Binary height representative per plaquette, from integer heights.

    Integer heights h obey h_p - h_{p-y} = 2 E_{p,x} and
    h_{p-x} - h_p = 2 E_{p,y} (steps of +-1), anchored on the frozen
    boundary ring (open square) or at plaquette (0, 0) (ladder, canonical
    anchor h = 2).  The returned bit ((h - parity) / 2 mod 2) matches the
    dual spin picture; the two constructions share no code.
    """
    if lattice.kind == CHAIN:
        raise ValueError("chains have no link picture")
    bad = check_gauss_law(lattice, link_mask)
    if bad:
        raise GaussViolationError(f"Gauss law violated at sites {bad}")
    pnx, pny = lattice.plaquette_shape
    h = np.zeros((pnx, pny), dtype=np.int64)

    def estep(link_idx: int) -> int:
        return 2 * ((link_mask >> link_idx) & 1) - 1

    if lattice.kind == OPEN_SQUARE:
        for j in range(pny):
            for i in range(pnx):
                if i == 0:
                    left_h = ((i - 1) + j) % 2 + 2  # virtual column anchor
                else:
                    left_h = h[i - 1, j]
                # h_{p-x} - h_p = 2 E_{p,y}
                h[i, j] = left_h - estep(lattice.ylink_index(i, j))
            # right closure
            right_h = (pnx + j) % 2 + 2
            if right_h != h[pnx - 1, j] - estep(lattice.ylink_index(pnx, j)):
                raise BoundaryMismatchError(
                    f"height row {j} does not close onto the fixed boundary")
        # cross-check the x-link equations against the virtual rows
        for i in range(pnx):
            below_h = (i + (-1)) % 2 + 2
            if h[i, 0] - below_h != estep(lattice.xlink_index(i, 0)):
                raise BoundaryMismatchError("bottom height row inconsistent")
            above_h = (i + pny) % 2 + 2
            if above_h - h[i, pny - 1] != estep(lattice.xlink_index(i, pny)):
                raise BoundaryMismatchError("top height row inconsistent")
        for j in range(1, pny):
            for i in range(pnx):
                if h[i, j] - h[i, j - 1] != estep(lattice.xlink_index(i, j)):
                    raise BoundaryMismatchError("interior heights inconsistent")
    else:
        h[0, 0] = 2
        for i in range(1, pnx):
            h[i, 0] = h[i - 1, 0] - estep(lattice.ylink_index(i, 0))
        if h[pnx - 1, 0] - h[0, 0] != estep(lattice.ylink_index(0, 0)):
            raise BoundaryMismatchError("heights do not close around the ladder")
        for i in range(pnx):
            # x link on row 1 separates the two rows: h(i,1) - h(i,0) = 2E
            h[i, 1] = h[i, 0] + estep(lattice.xlink_index(i, 1))
        for i in range(pnx):
            if h[i, 0] - h[i, 1] != estep(lattice.xlink_index(i, 0)):
                raise BoundaryMismatchError("rung heights inconsistent")
            left = h[(i - 1) % pnx, 1]
            if left - h[i, 1] != estep(lattice.ylink_index(i, 1)):
                raise BoundaryMismatchError("upper-row heights inconsistent")
    bits = np.zeros((pnx, pny), dtype=np.int64)
    for j in range(pny):
        for i in range(pnx):
            bits[i, j] = ((h[i, j] - (i + j) % 2) // 2) % 2
    return bits
