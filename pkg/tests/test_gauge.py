"""Gauss law, dual/link dictionary, and sector enumeration.

The direct-count helper below enumerates Gauss-legal link configurations
by brute force, sharing no code with the BFS enumeration it checks.
"""
import numpy as np
import pytest

from rkgauge import gauge
from rkgauge.gauge import (
    BoundaryMismatchError,
    ConstrainedBasis,
    GaussViolationError,
    SectorSizeError,
    apply_dual_plaquette,
    apply_plaquette,
    check_gauss_law,
    dual_plaquette_flippable,
    enumerate_link_sector,
    enumerate_sector,
    from_dual,
    full_dual_basis,
    height_field,
    list_physical_vertex_configs,
    load_basis_binary,
    plaquette_flippable,
    reference_dual_config,
    to_dual,
)
from rkgauge.lattice import LatticeSpec, OPEN_SQUARE, PERIODIC_LADDER

SQ2 = LatticeSpec(OPEN_SQUARE, 2, 2)
SQ3 = LatticeSpec(OPEN_SQUARE, 3, 3)
SQ4 = LatticeSpec(OPEN_SQUARE, 4, 4)
LAD4 = LatticeSpec(PERIODIC_LADDER, 4, 2)
LAD6 = LatticeSpec(PERIODIC_LADDER, 6, 2)

# interior k x k sector sizes, frozen from the brute-force count
SQUARE_SECTOR_DIMS = {2: 2, 3: 7, 4: 64, 5: 1322}
LADDER_SECTOR_DIMS = {2: 12, 4: 76, 6: 564, 8: 4428}


def brute_force_gauss_count(lattice: LatticeSpec) -> int:
    """Exhaustive count of Gauss-legal link masks (small lattices only)."""
    assert lattice.n_links <= 16
    return sum(1 for m in range(1 << lattice.n_links)
               if not check_gauss_law(lattice, m))


def test_vertex_patterns_six_of_sixteen():
    allowed = list_physical_vertex_configs()
    assert len(allowed) == 6
    # two in, two out: population balance bit-by-bit
    for pattern in allowed:
        b = [(pattern >> i) & 1 for i in range(4)]
        assert b[0] + b[1] == b[2] + b[3]


def test_reference_configs_are_physical():
    for lat in (SQ2, SQ3, SQ4, LAD4, LAD6):
        assert check_gauss_law(lat, lat.reference_link_config()) == []


def test_gauss_law_flags_single_flip():
    ref = SQ3.reference_link_config()
    bad = check_gauss_law(SQ3, ref ^ (1 << SQ3.xlink_index(0, 1)))
    assert sorted(bad) == [(0, 1), (1, 1)]


@pytest.mark.parametrize("lat", [SQ2, SQ3])
def test_sector_matches_brute_force(lat):
    basis = enumerate_sector(lat)
    assert basis.dim == brute_force_gauss_count(lat)


@pytest.mark.parametrize("n,dim", sorted(SQUARE_SECTOR_DIMS.items()))
def test_square_sector_dims_frozen(n, dim):
    assert enumerate_sector(LatticeSpec(OPEN_SQUARE, n, n)).dim == dim


@pytest.mark.parametrize("nx,dim", sorted(LADDER_SECTOR_DIMS.items()))
def test_ladder_sector_dims_frozen(nx, dim):
    lat = LatticeSpec(PERIODIC_LADDER, nx, 2)
    assert enumerate_sector(lat).dim == dim
    assert enumerate_sector(lat, identify_global_flip=True).dim == dim // 2


def test_quotient_requires_ladder():
    with pytest.raises(ValueError):
        enumerate_sector(SQ3, identify_global_flip=True)


def test_sector_size_cap():
    with pytest.raises(SectorSizeError):
        enumerate_sector(LAD6, max_states=100)


def test_reference_dual_is_all_up():
    assert reference_dual_config(LAD6) == (1 << 12) - 1


@pytest.mark.parametrize("lat", [SQ2, SQ3, SQ4])
def test_square_duality_bijection(lat):
    dual = enumerate_sector(lat)
    link = enumerate_link_sector(lat)
    images = [from_dual(lat, int(m)) for m in dual.states]
    assert sorted(images) == sorted(int(m) for m in link.states)
    for m, img in zip(dual.states, images):
        assert to_dual(lat, img) == int(m)


@pytest.mark.parametrize("lat", [LAD4, LAD6])
def test_ladder_duality_two_to_one(lat):
    full = (1 << lat.n_plaquettes) - 1
    quotient = enumerate_sector(lat, identify_global_flip=True)
    link = enumerate_link_sector(lat)
    images = [from_dual(lat, int(m)) for m in quotient.states]
    assert sorted(images) == sorted(int(m) for m in link.states)
    for m, img in zip(quotient.states, images):
        # the global flip maps to the same link configuration
        assert from_dual(lat, int(m) ^ full) == img
        assert to_dual(lat, img) == int(m)


@pytest.mark.parametrize("lat", [SQ2, SQ3, SQ4, LAD4])
def test_plaquette_intertwining(lat):
    quotient = lat.kind == PERIODIC_LADDER
    dual = enumerate_sector(lat, identify_global_flip=quotient)
    for m in dual.states:
        m = int(m)
        img = from_dual(lat, m)
        for p in range(lat.n_plaquettes):
            assert dual_plaquette_flippable(lat, m, p) == \
                plaquette_flippable(lat, img, p)
            m2 = apply_dual_plaquette(lat, m, p)
            l2 = apply_plaquette(lat, img, p)
            assert (m2 is None) == (l2 is None)
            if m2 is not None:
                assert from_dual(lat, m2) == l2


def test_to_dual_rejects_gauss_violation():
    ref = SQ3.reference_link_config()
    with pytest.raises(GaussViolationError):
        to_dual(SQ3, ref ^ 1)


def test_dual_flippability_examples():
    # all-up dual state: every plaquette aligned with its neighbors
    all_up = reference_dual_config(LAD6)
    assert all(dual_plaquette_flippable(LAD6, all_up, p) for p in range(12))
    assert apply_plaquette(LAD6, LAD6.reference_link_config(), 0) is not None
    # flipping one spin leaves its neighbors unflippable
    one_down = all_up ^ 1
    left, right, opposite = LAD6.dual_neighbors(0)
    for q in (left, right, opposite):
        assert not dual_plaquette_flippable(LAD6, one_down, q)
    assert dual_plaquette_flippable(LAD6, one_down, 0)


def test_height_field_matches_dual_spins():
    # independent construction: integer heights from the link picture
    for lat in (SQ3, SQ4):
        basis = enumerate_sector(lat)
        pnx, pny = lat.plaquette_shape
        for m in basis.states:
            m = int(m)
            bits = height_field(lat, from_dual(lat, m))
            for j in range(pny):
                for i in range(pnx):
                    expect = (m >> lat.plaquette_index(i, j)) & 1
                    assert bits[i, j] == expect


def test_height_field_rejects_bad_input():
    with pytest.raises(GaussViolationError):
        height_field(SQ3, SQ3.reference_link_config() ^ 1)


def test_full_dual_basis_plain_order():
    basis = full_dual_basis(LAD4)
    assert basis.dim == 256
    assert np.array_equal(basis.states, np.arange(256))
    with pytest.raises(SectorSizeError):
        full_dual_basis(LAD6, max_states=1000)


def test_basis_lookup_and_membership():
    basis = enumerate_sector(LAD6)
    m0 = int(basis.states[0])
    assert basis.index(m0) == 0
    assert m0 in basis
    assert 0b11 not in basis  # adjacent pair on one leg cannot be reached
    with pytest.raises(KeyError):
        basis.index(0b11)
    # vectorized positions: -1 for misses
    pos = basis.position(np.array([m0, 0b11]))
    assert pos[0] == 0 and pos[1] == -1


def test_quotient_canonicalize():
    basis = enumerate_sector(LAD6, identify_global_flip=True)
    full = (1 << 12) - 1
    m = int(basis.states[5])
    assert m & 1  # representatives carry dual bit 0 up
    flipped = np.array([m ^ full])
    assert int(basis.canonicalize(flipped)[0]) == m
    assert int(basis.position(basis.canonicalize(flipped))[0]) == 5


def test_export_roundtrip_binary(tmp_path):
    for basis in (enumerate_sector(LAD4, identify_global_flip=True),
                  enumerate_link_sector(SQ3),
                  enumerate_sector(SQ3)):
        path = str(tmp_path / "basis.bin")
        basis.export_binary(path)
        back = load_basis_binary(path)
        assert back.lattice == basis.lattice
        assert back.picture == basis.picture
        assert back.identify_global_flip == basis.identify_global_flip
        assert np.array_equal(back.states, basis.states)


def test_export_json(tmp_path):
    import json

    basis = enumerate_sector(SQ3)
    path = str(tmp_path / "basis.json")
    basis.export_json(path)
    doc = json.loads(open(path).read())
    assert doc["kind"] == OPEN_SQUARE
    assert doc["states"] == [int(m) for m in basis.states]
    with pytest.raises(SectorSizeError):
        basis.export_json(path, limit=3)


def test_bfs_order_deterministic():
    a = enumerate_sector(LAD6)
    b = enumerate_sector(LAD6)
    assert np.array_equal(a.states, b.states)
    assert int(a.states[0]) == reference_dual_config(LAD6)
