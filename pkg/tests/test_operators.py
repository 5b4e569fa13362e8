import numpy as np
import pytest
import scipy.sparse as sp

import stagheis as sh
from stagheis.operators import (full_dim, sector_decomposition, site_operator,
                                total_sz_diagonal, two_site_operator)
from conftest import dense_ring_hamiltonian


@pytest.mark.parametrize("S", [0.5, 1.0, 1.5, 2.0])
def test_spin_commutation_relations(S):
    m = sh.spin_matrices(S)
    comps = [m.s1, m.s2, m.s3]
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        comm = comps[i] @ comps[j] - comps[j] @ comps[i]
        np.testing.assert_allclose(comm, 1j * comps[k], atol=1e-14)
    casimir = m.s1 @ m.s1 + m.s2 @ m.s2 + m.s3 @ m.s3
    np.testing.assert_allclose(casimir, S * (S + 1) * np.eye(m.dim),
                               atol=1e-13)


def test_spin_half_s3_is_diagonal():
    m = sh.spin_matrices(0.5)
    np.testing.assert_array_equal(m.s3, np.diag([0.5, -0.5]))


def test_spin_one_casimir_is_2():
    m = sh.spin_matrices(1.0)
    casimir = m.s1 @ m.s1 + m.s2 @ m.s2 + m.s3 @ m.s3
    np.testing.assert_allclose(casimir, 2.0 * np.eye(3), atol=1e-14)


def test_spin_matrices_reject_bad_magnitude():
    with pytest.raises(ValueError):
        sh.spin_matrices(0.3)
    with pytest.raises(ValueError):
        sh.spin_matrices(0.0)


def test_spin_reality_structure():
    m = sh.spin_matrices(1.5)
    assert np.abs(m.s1.imag).max() == 0.0
    assert np.abs(m.s3.imag).max() == 0.0
    assert np.abs(m.s2.real).max() == 0.0
    np.testing.assert_allclose(m.s2, -m.s2.T, atol=0)


def test_sector_decomposition_partitions(ring4):
    sectors = sector_decomposition(ring4)
    dims = [s.dim for s in sectors]
    assert sum(dims) == full_dim(ring4)
    all_states = np.concatenate([s.states for s in sectors])
    assert len(set(all_states.tolist())) == full_dim(ring4)
    # binomial sector sizes for 4 spins 1/2
    assert dims == [1, 4, 6, 4, 1]


def test_sector_conservation_exact(ring6):
    H = sh.build_hamiltonian(ring6, 0.3)
    sz = sp.diags(total_sz_diagonal(ring6)).tocsr()
    comm = H.matrix @ sz - sz @ H.matrix
    assert comm.nnz == 0 or np.abs(comm.data).max() == 0.0


def test_two_site_singlet_energy(chain2):
    H = sh.build_hamiltonian(chain2, 0.0)
    vals = np.linalg.eigvalsh(H.dense())
    assert vals[0] == pytest.approx(-0.75, abs=1e-14)
    np.testing.assert_allclose(vals[1:], 0.25, atol=1e-14)


def test_four_ring_against_independent_kron_oracle(ring4):
    H = sh.build_hamiltonian(ring4, 0.2)
    # oracle indexes sites around the ring; map package sites by coordinate
    order = np.argsort(ring4.coords[:, 0])
    signs = [int(ring4.signs[i]) for i in order]
    oracle = dense_ring_hamiltonian(4, 0.2, signs=signs)
    ov = np.linalg.eigvalsh(oracle)
    pv = np.linalg.eigvalsh(H.dense())
    np.testing.assert_allclose(pv, ov, atol=1e-12)
    assert pv[0] == pytest.approx(-2.0 - 0.0, abs=0.2)  # near ring value


def test_four_ring_ground_energy_exact(ring4):
    H = sh.build_hamiltonian(ring4, 0.0)
    vals = np.linalg.eigvalsh(H.dense())
    assert vals[0] == pytest.approx(-2.0, abs=1e-10)


def test_two_site_field_closed_form(chain2):
    for B in (0.1, 0.5, 2.0):
        H = sh.build_hamiltonian(chain2, B)
        e0 = np.linalg.eigvalsh(H.dense())[0]
        assert e0 == pytest.approx(-0.25 - np.sqrt(0.25 + B * B), abs=1e-12)


def test_order_parameter_diagonal_and_traceless(ring4):
    O = sh.build_order_parameter(ring4)
    dense = O.dense()
    assert np.abs(dense - np.diag(np.diag(dense))).max() == 0.0
    assert np.trace(dense) == pytest.approx(0.0, abs=0)


def test_order_parameter_single_site_region(ring6):
    reg = sh.region(ring6, 1)
    even = [s for s in reg.sites if ring6.signs[s] == 1]
    single = sh.Region(R=1, sites=np.array([even[0]]), clipped=True)
    O = sh.build_order_parameter(ring6, single)
    m = sh.spin_matrices(0.5)
    expected = site_operator(ring6, even[0], m.s3)
    assert abs(O.matrix - expected).max() == 0.0


def test_order_parameter_two_site_eigenvalues(chain2):
    O = sh.build_order_parameter(chain2)
    diag = np.diag(O.dense()).real
    # sz = 0 sector holds the +-1 eigenvalues
    assert set(np.round(diag, 12).tolist()) == {1.0, -1.0, 0.0}


def test_staggered_probe_norm_and_values(ring6):
    A = sh.build_staggered_sy(ring6, 1)
    assert sh.operator_norm(A) <= 0.5 + 1e-12
    reg = sh.region(ring6, 1)
    m = sh.spin_matrices(0.5)
    expected = sum(float(ring6.signs[x]) * site_operator(ring6, x, m.s2)
                   for x in reg.sites) / 3.0
    assert abs(A.matrix - expected).max() == 0.0


def test_staggered_probe_ground_expectation_vanishes(ring6):
    # spin-flip symmetry about the 3-axis kills the transverse expectation
    H = sh.build_hamiltonian(ring6, 0.4)
    es = sh.diagonalize(H, lattice=ring6)
    gs = sh.ground_sector(es)
    A = sh.build_staggered_sy(ring6, 1)
    assert abs(sh.ground_expectation(gs, A)) < 1e-12


def test_boundary_field_zero_profile(ring4):
    H1, H2 = sh.build_boundary_field(ring4, np.zeros(4))
    assert H1.nnz == 0 and H2 == 0.0


def test_field_hamiltonian_decomposition_identity(ring6):
    lam, B = 0.3, 0.2
    f = sh.ramp_field(ring6, 1)
    H = sh.build_hamiltonian(ring6, B)
    H1, H2 = sh.build_boundary_field(ring6, f)
    lhs = sh.build_field_hamiltonian(ring6, B, lam * f.values).matrix
    rhs = (H.matrix + lam * H1.matrix
           + 0.5 * lam * lam * H2 * sp.identity(H.dim, dtype=complex,
                                                format="csr"))
    diff = abs(lhs - rhs)
    assert (diff.max() if diff.nnz else 0.0) <= 1e-12


def test_field_hamiltonian_reduces_to_plain(ring4):
    plain = sh.build_hamiltonian(ring4, 0.3).matrix
    viafield = sh.build_field_hamiltonian(ring4, 0.3, np.zeros(4)).matrix
    diff = abs(plain - viafield)
    assert (diff.max() if diff.nnz else 0.0) <= 1e-12


def test_constant_field_raises_energy(ring4):
    base = sh.ground_energy(sh.build_hamiltonian(ring4, 0.1))
    for c in (0.2, 1.0):
        e = sh.ground_energy(sh.build_field_hamiltonian(
            ring4, 0.1, np.full(4, c)))
        assert e >= base - 1e-10


def test_random_field_energy_dominance(ring4, rng):
    base = sh.ground_energy(sh.build_hamiltonian(ring4, 0.2))
    for _ in range(25):
        f = rng.standard_normal(4)
        e = sh.ground_energy(sh.build_field_hamiltonian(ring4, 0.2, f))
        assert e >= base - 1e-10


def test_boundary_field_ground_expectation_zero(ring6):
    f = sh.ramp_field(ring6, 1)
    H1, _ = sh.build_boundary_field(ring6, f)
    H = sh.build_hamiltonian(ring6, 0.2)
    es = sh.diagonalize(H, lattice=ring6)
    gs = sh.ground_sector(es)
    assert abs(sh.ground_expectation(gs, H1)) <= 1e-13


def test_fourier_spin_basics(ring4):
    S0 = sh.fourier_spin(ring4, [0.0], 2)
    m = sh.spin_matrices(0.5)
    expected = sum(site_operator(ring4, x, m.s2) for x in range(4)) / 2.0
    assert abs(S0.matrix - expected).max() <= 1e-14
    with pytest.raises(ValueError):
        sh.fourier_spin(ring4, [0.3], 2)


def test_fourier_adjoint_identity(ring4):
    grid = sh.momentum_grid(ring4)
    for k in range(grid.n_points):
        p = grid.points[k]
        A = sh.fourier_spin(ring4, p, 2)
        B = sh.fourier_spin(ring4, -p, 2)
        diff = abs(B.matrix.getH() - A.matrix)
        assert (diff.max() if diff.nnz else 0.0) <= 1e-12


def test_fourier_staggered_momentum_matches_signs(ring4):
    # at the corner momentum the phases reduce to the sublattice signs
    A = sh.fourier_spin(ring4, [np.pi], 2)
    m = sh.spin_matrices(0.5)
    expected = sum(float(ring4.signs[x]) * site_operator(ring4, x, m.s2)
                   for x in range(4)) / 2.0
    assert abs(A.matrix - expected).max() <= 1e-12
    assert A.hermitian


def test_commutator_with_total_sz_vanishes(ring4):
    H = sh.build_hamiltonian(ring4, 0.0)
    sz = sh.OperatorHandle(matrix=sp.diags(total_sz_diagonal(ring4)).tocsr(),
                           label="Sz")
    comm = sh.commutator(H, sz)
    assert comm.nnz == 0 or np.abs(comm.matrix.data).max() == 0.0


def test_single_site_norm_is_spin():
    for S in (0.5, 1.0, 1.5):
        lat = sh.build_lattice(sh.LatticeSpec(d=1, L=1, S=S))
        m = sh.spin_matrices(S)
        op = sh.OperatorHandle(matrix=site_operator(lat, 0, m.s2),
                               label="S2_0")
        assert sh.operator_norm(op) == pytest.approx(S, abs=1e-12)


def test_uniform_weight_single_commutator_vanishes():
    # [S1_x + S1_y, S_x.S_y] = 0: the bond scalar is rotation invariant
    lat = sh.build_lattice(sh.LatticeSpec(d=1, L=1, S=0.5))
    m = sh.spin_matrices(0.5)
    ss = sum(site_operator(lat, 0, m.component(i))
             @ site_operator(lat, 1, m.component(i)) for i in (1, 2, 3))
    c_equal = (site_operator(lat, 0, m.s1) + site_operator(lat, 1, m.s1))
    comm = c_equal @ ss - ss @ c_equal
    assert comm.nnz == 0 or np.abs(comm.data).max() <= 1e-15
    # unequal weights do not commute
    c_uneq = (2.0 * site_operator(lat, 0, m.s1) + site_operator(lat, 1, m.s1))
    comm2 = c_uneq @ ss - ss @ c_uneq
    assert np.abs(comm2.data).max() > 1e-3


def test_basis_mismatch_rejected(ring4, chain2):
    a = sh.build_hamiltonian(ring4, 0.0)
    b = sh.build_hamiltonian(chain2, 0.0)
    with pytest.raises(ValueError):
        sh.commutator(a, b)


def test_hermiticity_flag_enforced(ring4):
    mat = sh.build_hamiltonian(ring4, 0.0).matrix.tolil()
    mat[0, 1] += 0.5
    with pytest.raises(ValueError):
        sh.OperatorHandle(matrix=mat.tocsr(), label="broken")


def test_two_site_embedding_matches_products(ring4):
    m = sh.spin_matrices(0.5)
    block = np.kron(m.s1, m.s2)
    emb = two_site_operator(ring4, 0, 2, block)
    direct = site_operator(ring4, 0, m.s1) @ site_operator(ring4, 2, m.s2)
    assert abs(emb - direct).max() <= 1e-14


def test_dump_triplets_roundtrip(tmp_path, chain2):
    H = sh.build_hamiltonian(chain2, 0.5)
    path = tmp_path / "op.txt"
    from stagheis.operators import dump_triplets
    dump_triplets(H, path)
    rows = []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            continue
        r, c, re, im = line.split()
        rows.append((int(r), int(c), float(re), float(im)))
    rebuilt = np.zeros((4, 4), dtype=complex)
    for r, c, re, im in rows:
        rebuilt[r, c] = re + 1j * im
    np.testing.assert_allclose(rebuilt, H.dense(), atol=0)


def test_operator_metadata(ring4):
    meta = sh.build_hamiltonian(ring4, 0.1).metadata()
    assert meta["dim"] == 16 and meta["hermitian"]
    assert meta["nnz"] > 0 and meta["norm"] > 0
