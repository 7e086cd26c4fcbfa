"""Lattice geometry and index layout.

Three lattice kinds are supported:

* ``open-square``: an N_x x N_y grid of sites with open boundaries.  Links
  live on the edges, dynamical dual (plaquette) spins live on the
  (N_x-1) x (N_y-1) interior plaquettes, and the surrounding ring of
  plaquettes is frozen in the up state.
* ``periodic-ladder``: an N_x x 2 torus (periodic in both directions, so
  each column carries two distinct rungs).  Every plaquette is dynamical.
* ``chain``: N_x sites in a row; used by the one-dimensional
  blockade-constrained model.  It has no link degrees of freedom.

All index layouts are row-major with x fastest.  They are part of the
public contract: test fixtures rely on the exact bit positions.
"""
from __future__ import annotations

from dataclasses import dataclass

OPEN_SQUARE = "open-square"
PERIODIC_LADDER = "periodic-ladder"
CHAIN = "chain"

_KINDS = (OPEN_SQUARE, PERIODIC_LADDER, CHAIN)


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice kind plus extents.

    ``nx``, ``ny`` count sites.  For ``chain`` use ``ny = 1``.
    """

    kind: str
    nx: int
    ny: int = 2

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown lattice kind {self.kind!r}")
        if self.kind == CHAIN:
            if self.nx < 2 or self.ny != 1:
                raise ValueError("chain requires nx >= 2 and ny = 1")
            return
        if self.nx < 2 or self.ny < 2:
            raise ValueError("lattice extents must be at least 2 x 2")
        if self.kind == PERIODIC_LADDER:
            if self.ny != 2:
                raise ValueError("periodic ladder requires ny = 2")
            if self.nx % 2:
                # The staggered reference state needs an even circumference.
                raise ValueError("periodic ladder requires even nx")

    # ---- sites ----

    @property
    def n_sites(self) -> int:
        return self.nx * self.ny

    def site_index(self, x: int, y: int) -> int:
        if self.kind == PERIODIC_LADDER:
            return (y % 2) * self.nx + (x % self.nx)
        if not (0 <= x < self.nx and 0 <= y < self.ny):
            raise IndexError(f"site ({x}, {y}) outside {self.nx} x {self.ny}")
        return y * self.nx + x

    def site_coord(self, s: int) -> tuple[int, int]:
        return s % self.nx, s // self.nx

    @staticmethod
    def site_parity(x: int, y: int) -> int:
        """+1 on the even sublattice, -1 on the odd one."""
        return 1 - 2 * ((x + y) % 2)

    # ---- links ----

    @property
    def n_links(self) -> int:
        if self.kind == CHAIN:
            return 0
        if self.kind == PERIODIC_LADDER:
            return 4 * self.nx
        return (self.nx - 1) * self.ny + self.nx * (self.ny - 1)

    def xlink_index(self, x: int, y: int) -> int:
        """Link from site (x, y) toward +x."""
        if self.kind == PERIODIC_LADDER:
            return (y % 2) * self.nx + (x % self.nx)
        if not (0 <= x < self.nx - 1 and 0 <= y < self.ny):
            raise IndexError(f"no x-link at ({x}, {y})")
        return y * (self.nx - 1) + x

    def ylink_index(self, x: int, y: int) -> int:
        """Link from site (x, y) toward +y."""
        if self.kind == PERIODIC_LADDER:
            return 2 * self.nx + (y % 2) * self.nx + (x % self.nx)
        if not (0 <= x < self.nx and 0 <= y < self.ny - 1):
            raise IndexError(f"no y-link at ({x}, {y})")
        return (self.nx - 1) * self.ny + y * self.nx + x

    # ---- plaquettes (dynamical dual spins) ----

    @property
    def plaquette_shape(self) -> tuple[int, int]:
        if self.kind == CHAIN:
            return self.nx, 1
        if self.kind == PERIODIC_LADDER:
            return self.nx, 2
        return self.nx - 1, self.ny - 1

    @property
    def n_plaquettes(self) -> int:
        px, py = self.plaquette_shape
        return px * py

    def plaquette_index(self, i: int, j: int) -> int:
        px, py = self.plaquette_shape
        if self.kind == PERIODIC_LADDER:
            return (j % 2) * px + (i % px)
        if not (0 <= i < px and 0 <= j < py):
            raise IndexError(f"plaquette ({i}, {j}) outside {px} x {py}")
        return j * px + i

    def plaquette_coord(self, p: int) -> tuple[int, int]:
        px, _ = self.plaquette_shape
        return p % px, p // px

    def plaquette_parity(self, p: int) -> int:
        i, j = self.plaquette_coord(p)
        return self.site_parity(i, j)

    def plaquette_links(self, p: int) -> tuple[int, int, int, int]:
        """Link indices (bottom, right, top, left) of plaquette p.

        Plaquette (i, j) is the square whose lower-left corner is site
        (i, j).
        """
        if self.kind == CHAIN:
            raise ValueError("chain has no plaquettes with links")
        i, j = self.plaquette_coord(p)
        return (
            self.xlink_index(i, j),
            self.ylink_index(i + 1, j),
            self.xlink_index(i, j + 1),
            self.ylink_index(i, j),
        )

    def dual_neighbors(self, p: int) -> tuple[int, ...]:
        """Indices of the dual spins blockading plaquette p.

        Entries of -1 stand for frozen boundary spins (always up).  The
        order is left, right, up, down for the square (the ladder merges
        up and down into the single opposite-leg neighbor; the chain has
        only left and right).
        """
        i, j = self.plaquette_coord(p)
        if self.kind == CHAIN:
            left = self.plaquette_index(i - 1, 0) if i > 0 else -1
            right = self.plaquette_index(i + 1, 0) if i < self.nx - 1 else -1
            return (left, right)
        if self.kind == PERIODIC_LADDER:
            return (
                self.plaquette_index(i - 1, j),
                self.plaquette_index(i + 1, j),
                self.plaquette_index(i, 1 - j),
            )
        px, py = self.plaquette_shape
        left = self.plaquette_index(i - 1, j) if i > 0 else -1
        right = self.plaquette_index(i + 1, j) if i < px - 1 else -1
        up = self.plaquette_index(i, j + 1) if j < py - 1 else -1
        down = self.plaquette_index(i, j - 1) if j > 0 else -1
        return (left, right, up, down)

    # ---- site link stars (for the Gauss law) ----

    def site_links(self, x: int, y: int):
        """Outgoing and incoming link slots at site (x, y).

        Returns ``(out_x, out_y, in_x, in_y)`` where each slot is either
        a link index or, on the open square, ``("virtual", bit)`` for a
        frozen exterior link of the staggered reference continuation.
        """
        if self.kind == CHAIN:
            raise ValueError("chain has no link structure")
        if self.kind == PERIODIC_LADDER:
            return (
                self.xlink_index(x, y),
                self.ylink_index(x, y),
                self.xlink_index(x - 1, y),
                self.ylink_index(x, y - 1),
            )
        def virtual_x(px: int, py: int):
            return ("virtual", (px + py) % 2)

        def virtual_y(px: int, py: int):
            return ("virtual", 1 - (px + py) % 2)

        out_x = self.xlink_index(x, y) if x < self.nx - 1 else virtual_x(x, y)
        out_y = self.ylink_index(x, y) if y < self.ny - 1 else virtual_y(x, y)
        in_x = self.xlink_index(x - 1, y) if x > 0 else virtual_x(x - 1, y)
        in_y = self.ylink_index(x, y - 1) if y > 0 else virtual_y(x, y - 1)
        return (out_x, out_y, in_x, in_y)

    def reference_link_config(self) -> int:
        """Bitmask of the staggered reference state.

        x-links are up on odd sites, y-links on even sites.  This is the
        fully flippable configuration that maps to the all-up dual state.
        """
        if self.kind == CHAIN:
            raise ValueError("chain has no link structure")
        bits = 0
        if self.kind == PERIODIC_LADDER:
            for y in (0, 1):
                for x in range(self.nx):
                    if (x + y) % 2:
                        bits |= 1 << self.xlink_index(x, y)
                    else:
                        bits |= 1 << self.ylink_index(x, y)
            return bits
        for y in range(self.ny):
            for x in range(self.nx - 1):
                if (x + y) % 2:
                    bits |= 1 << self.xlink_index(x, y)
        for y in range(self.ny - 1):
            for x in range(self.nx):
                if (x + y) % 2 == 0:
                    bits |= 1 << self.ylink_index(x, y)
        return bits
