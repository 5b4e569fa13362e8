"""Shared fixtures and independent oracles for the test suite.

The oracle builders here deliberately avoid the package's operator
machinery: dense Hamiltonians are assembled from raw numpy kron chains so
cross-checks exercise two genuinely different construction paths.
"""

import numpy as np
import pytest

import stagheis as sh


def pauli_spin_half():
    sx = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex)
    sy = np.array([[0.0, -0.5j], [0.5j, 0.0]], dtype=complex)
    sz = np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex)
    return sx, sy, sz


def kron_site(op, site, n):
    """Embed a 2x2 matrix at `site` in an n-site spin-1/2 chain (site 0 is
    the most significant factor)."""
    out = np.array([[1.0 + 0.0j]])
    for k in range(n):
        out = np.kron(out, op if k == site else np.eye(2))
    return out


def dense_ring_hamiltonian(n, B, signs=None):
    """Independent spin-1/2 Heisenberg ring with staggered field.

    Bonds {k, k+1 mod n} deduplicated (n=2 keeps a single bond).
    """
    sx, sy, sz = pauli_spin_half()
    dim = 2 ** n
    H = np.zeros((dim, dim), dtype=complex)
    bonds = {tuple(sorted((k, (k + 1) % n))) for k in range(n)}
    for a, b in sorted(bonds):
        for op in (sx, sy, sz):
            H += kron_site(op, a, n) @ kron_site(op, b, n)
    if signs is None:
        signs = [(-1) ** k for k in range(n)]
    for k in range(n):
        H -= B * signs[k] * kron_site(sz, k, n)
    return H


@pytest.fixture(scope="session")
def chain2():
    return sh.build_lattice(sh.LatticeSpec(d=1, L=1, S=0.5))


@pytest.fixture(scope="session")
def ring4():
    return sh.build_lattice(sh.LatticeSpec(d=1, L=2, S=0.5))


@pytest.fixture(scope="session")
def ring6():
    return sh.build_lattice(sh.LatticeSpec(d=1, L=3, S=0.5))


@pytest.fixture(scope="session")
def torus22():
    return sh.build_lattice(sh.LatticeSpec(d=2, L=1, S=0.5))


@pytest.fixture()
def rng():
    return np.random.default_rng(20240901)


def diagonalized(lattice, B, dense_cap=4096):
    H = sh.build_hamiltonian(lattice, B)
    es = sh.diagonalize(H, lattice=lattice, dense_cap=dense_cap)
    return H, es, sh.ground_sector(es)
