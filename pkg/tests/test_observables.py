"""Structure factors, reports, and the resonating-dimer signature.

Frozen reference numbers come from independent dense-diagonalization runs.
"""
import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from rkgauge import gauge, hamiltonian as ham, observables as obs
from rkgauge.geometry import solve_ladder_geometry
from rkgauge.lattice import LatticeSpec, OPEN_SQUARE, PERIODIC_LADDER

PI = math.pi
LAD4 = LatticeSpec(PERIODIC_LADDER, 4, 2)
LAD6 = LatticeSpec(PERIODIC_LADDER, 6, 2)


@pytest.fixture(scope="module")
def fb6():
    return gauge.full_dual_basis(LAD6)


@pytest.fixture(scope="module")
def sec6():
    return gauge.enumerate_sector(LAD6)


def test_product_state_structure_factors(fb6):
    v_up = np.zeros(4096)
    v_up[4095] = 1.0
    rep = obs.compute_report(v_up, fb6)
    assert abs(rep.value("z", (0, 0)) - 1.0) < 1e-14
    assert abs(rep.value("z", (PI, PI))) < 1e-14
    for k in ((0, 0), (PI, PI), (PI / 2, PI / 2)):
        assert abs(rep.value("x", k) - 1.0 / 12) < 1e-14
    diag = obs.rvbs_signature(rep)
    assert abs(diag.ratio) < 1e-12 and not diag.verdict
    assert abs(obs.correlation(v_up, fb6, "z", (0, 0), (2, 1)) - 0.25) < 1e-15
    assert abs(obs.correlation(v_up, fb6, "x", 0, 5)) < 1e-15


def test_staggered_state_and_ratio_guard(fb6):
    stag = 0
    for p in range(12):
        x, y = LAD6.plaquette_coord(p)
        if (x + y) % 2 == 0:
            stag |= 1 << p
    v = np.zeros(4096)
    v[stag] = 1.0
    rep = obs.compute_report(v, fb6)
    assert abs(rep.value("z", (PI, PI)) - 1.0) < 1e-14
    assert abs(rep.value("z", (0, 0))) < 1e-14
    diag = obs.rvbs_signature(rep)
    assert diag.ratio == math.inf and not diag.verdict


def test_parseval_every_basis_kind(fb6, sec6):
    rng = np.random.default_rng(11)
    bases = (fb6, sec6,
             gauge.enumerate_sector(LAD6, identify_global_flip=True),
             ham.pxp_chain_basis(10))
    for basis in bases:
        v = rng.normal(size=len(basis))
        v /= np.linalg.norm(v)
        grid = obs.reciprocal_grid(basis.lattice)
        rep = obs.compute_report(v, basis, momenta=grid)
        for mu in ("z", "x"):
            assert abs(sum(rep.value(mu, k) for k in grid) - 1.0) < 1e-10


def test_parseval_complex_state(sec6):
    rng = np.random.default_rng(12)
    v = rng.normal(size=564) + 1j * rng.normal(size=564)
    v /= np.linalg.norm(v)
    grid = obs.reciprocal_grid(LAD6)
    rep = obs.compute_report(v, sec6, momenta=grid)
    assert abs(sum(rep.value("z", k) for k in grid) - 1.0) < 1e-10
    assert abs(sum(rep.value("x", k) for k in grid) - 1.0) < 1e-10


@pytest.mark.parametrize("mu", ["z", "x"])
@pytest.mark.parametrize("k", [(0, 0), (PI, PI), (0.7, 1.3)])
def test_structure_factor_two_code_paths(mu, k):
    # pairwise-correlation route, sharing nothing with the vectorized one
    sec4 = gauge.enumerate_sector(LAD4)
    rng = np.random.default_rng(21)
    v = rng.normal(size=len(sec4))
    v /= np.linalg.norm(v)
    fast = obs.structure_factor(v, sec4, mu, k)
    slow = 0.0
    for p in range(8):
        xp, yp = LAD4.plaquette_coord(p)
        for q in range(8):
            xq, yq = LAD4.plaquette_coord(q)
            ph = np.exp(1j * (k[0] * (xp - xq) + k[1] * (yp - yq)))
            slow += (ph * obs.correlation(v, sec4, mu, p, q)).real
    slow *= 4.0 / 64
    assert abs(fast - slow) < 1e-10


def test_structure_factor_two_paths_complex():
    sec4 = gauge.enumerate_sector(LAD4)
    rng = np.random.default_rng(22)
    v = rng.normal(size=len(sec4)) + 1j * rng.normal(size=len(sec4))
    v /= np.linalg.norm(v)
    fast = obs.structure_factor(v, sec4, "x", (PI, PI))
    slow = 0.0
    for p in range(8):
        xp, yp = LAD4.plaquette_coord(p)
        for q in range(8):
            xq, yq = LAD4.plaquette_coord(q)
            ph = np.exp(1j * PI * ((xp - xq) + (yp - yq)))
            slow += (ph * obs.correlation(v, sec4, "x", p, q)).real
    slow *= 4.0 / 64
    assert abs(fast - slow) < 1e-10


@pytest.mark.parametrize("lam", [0.0, -3.0])
def test_quotient_embedding_matches_full(fb6, lam):
    # symmetric lift of a quotient eigenstate gives identical reports
    qb = gauge.enumerate_sector(LAD6, identify_global_flip=True)
    full_mask = (1 << 12) - 1
    vq = np.linalg.eigh(ham.build_dual_rk(qb, 1.0, lam).to_dense())[1][:, 0]
    psi = np.zeros(4096)
    for i, m in enumerate(qb.states):
        psi[int(m)] = vq[i] / math.sqrt(2)
        psi[int(m) ^ full_mask] = vq[i] / math.sqrt(2)
    rq = obs.compute_report(vq, qb)
    rf = obs.compute_report(psi, fb6)
    dmax = max(abs(rq.values[k] - rf.values[k]) for k in rq.values)
    assert dmax < 1e-12


def test_flippable_vector_three_routes(fb6):
    fv = obs.flippable_vector(fb6)
    assert np.array_equal(fv, ham.build_dual_rk(fb6, 1.0, 1.0).diagonal())
    rng = np.random.default_rng(13)
    for i in rng.integers(0, 4096, 60):
        direct = sum(gauge.dual_plaquette_flippable(LAD6, int(i), p)
                     for p in range(12))
        assert fv[i] == direct
    assert fv[4095] == 12.0
    chain6 = ham.pxp_chain_basis(6)
    assert np.array_equal(obs.flippable_vector(chain6),
                          ham.build_pxp_chain(6, 1.0, 1.0).diagonal())
    sq = LatticeSpec(OPEN_SQUARE, 4, 4)
    fbsq = gauge.full_dual_basis(sq)
    fsq = obs.flippable_vector(fbsq)
    assert fsq[(1 << 9) - 1] == 9.0
    assert np.array_equal(fsq, ham.build_dual_rk(fbsq, 1.0, 1.0).diagonal())


def test_fidelity_basics():
    rng = np.random.default_rng(14)
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    v /= np.linalg.norm(v)
    assert abs(obs.fidelity(v, v) - 1.0) < 1e-14
    e0 = np.zeros(4)
    e0[0] = 1.0
    e1 = np.zeros(4)
    e1[1] = 1.0
    assert obs.fidelity(e0, e1) == 0.0
    with pytest.raises(ValueError):
        obs.fidelity(e0, np.zeros(5))


# (lam, ratio, x peak, z00, connected z peak) for the pinned 6x2 component,
# frozen from a dense-diagonalization run
PINNED_6X2_ROWS = [
    (-3.0, 0.05829289812917688, 0.0888116368283026,
     0.90914349333184, 0.052152711659275416),
    (-1.0, 0.9855086456494828, 0.14349171078686174,
     0.3911455257090867, 0.3846786625821563),
    (-0.2, 0.9979830871751814, 0.16950782618021057,
     0.30459059485584267, 0.30381255832983706),
    (0.0, 0.9983827250182109, 0.16503245863841842,
     0.2896552598933049, 0.289038256109835),
    (0.3, 0.9986690446102736, 0.15022994764279624,
     0.26959877447641356, 0.2691036568295078),
    (0.8, 0.9987132748554132, 0.10429955611209796,
     0.23017158855874292, 0.2297631823887262),
]


@pytest.mark.parametrize("lam,r_raw,x33,z00,z33c", PINNED_6X2_ROWS)
def test_pinned_ladder_signature_frozen(sec6, lam, r_raw, x33, z00, z33c):
    H = ham.add_pinning(ham.build_dual_rk(sec6, 1.0, lam), 0.01)
    U = np.linalg.eigh(H.to_dense())[1]
    rep = obs.compute_report(U[:, 0], sec6, connected=True)
    diag = obs.rvbs_signature(rep)
    assert abs(diag.ratio - r_raw) < 1e-6
    assert abs(rep.value("x", (PI, PI)) - x33) < 1e-6
    assert abs(rep.value("z", (0, 0)) - z00) < 1e-6
    assert abs(rep.connected[("z", PI, PI)] - z33c) < 1e-6


def test_pinned_8x2_verdict_flips_with_lambda():
    # frozen endpoints: uniform phase at lam = -3, resonating at lam = 0
    lad8 = LatticeSpec(PERIODIC_LADDER, 8, 2)
    sec8 = gauge.enumerate_sector(lad8)
    results = {}
    for lam in (-3.0, 0.0):
        H = ham.add_pinning(ham.build_dual_rk(sec8, 1.0, lam), 0.01)
        _, U = spla.eigsh(H.matrix, k=1, which="SA", tol=1e-10, maxiter=5000)
        results[lam] = obs.rvbs_signature(obs.compute_report(U[:, 0], sec8))
    assert not results[-3.0].verdict
    assert abs(results[-3.0].ratio - 0.004019830867793701) < 1e-6
    assert results[0.0].verdict
    assert abs(results[0.0].ratio - 0.9974400410021932) < 1e-6
    assert abs(results[0.0].x_peak - 0.13575210718031483) < 1e-6


def test_static_ground_state_report_frozen(fb6, sec6):
    # atom-pair model at J = 1, delta = 0.1, restricted to the component
    sol = solve_ladder_geometry(0.38)
    H = ham.build_rydberg_rk(fb6, 1.0, sol, delta=0.1)
    sec_idx = np.sort(np.asarray([int(m) for m in sec6.states]))
    Hsec = H.to_dense()[np.ix_(sec_idx, sec_idx)]
    U = np.linalg.eigh(Hsec)[1]
    phi = np.zeros(4096)
    phi[sec_idx] = U[:, 0]
    rep = obs.compute_report(phi, fb6, connected=True)
    diag = obs.rvbs_signature(rep)
    assert abs(diag.ratio - 0.059545643663407435) < 1e-6
    assert abs(diag.x_peak - 0.11701866334153421) < 1e-6
    assert abs(rep.value("z", (0, 0)) - 0.7831199860388972) < 1e-6
    assert abs(rep.value("x", (0, 0)) - 0.23445996506639563) < 1e-6
    assert abs(rep.connected[("z", 0.0, 0.0)] - 0.036048751397440015) < 1e-6


def test_report_plumbing(fb6):
    v_up = np.zeros(4096)
    v_up[4095] = 1.0
    rep = obs.compute_report(v_up, fb6)
    rows = rep.csv_rows()
    assert len(rows) == 6 and rows[0][0] == "x"
    jd = rep.to_json_dict()
    assert jd["extents"] == [6, 2] and len(jd["values"]) == 6
    rc = obs.compute_report(v_up, fb6, connected=True)
    assert abs(rc.connected[("z", 0.0, 0.0)]) < 1e-14
