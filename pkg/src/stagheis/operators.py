"""Sparse operator construction for the staggered-field Heisenberg model.

Every operator is a scipy CSR matrix over the full product basis (or a
total-S3 sector of it), wrapped in an :class:`OperatorHandle` that records
the defining formula tag, the basis, and hermiticity.  The full-space basis
index of a configuration is sum_i level_i * D**(n-1-i) where D = 2S+1 and
level 0 is the m = +S state at each site, matching the lexicographic site
order of :mod:`stagheis.lattice`.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lattice import RampField, StateSpaceError, region

HERMITICITY_TOL = 1e-12

# Deterministic per-bond jitter used by the negative-control hook; chosen to
# break the proportionality [H1', A_R] ~ O without breaking hermiticity.
_CORRUPTION_SCALE = 3e-3


@dataclass(frozen=True)
class SpinMatrices:
    """Spin-S matrices in the S3 eigenbasis, m descending from +S."""

    S: float
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray

    @property
    def dim(self):
        return self.s3.shape[0]

    def component(self, i):
        return (self.s1, self.s2, self.s3)[i - 1]


def spin_matrices(S):
    """Standard spin matrices; raises for non-half-integer S."""
    two_s = 2.0 * S
    if two_s <= 0 or abs(two_s - round(two_s)) > 1e-12:
        raise ValueError(f"spin magnitude must be a positive half-integer, got {S}")
    dim = int(round(two_s)) + 1
    m = S - np.arange(dim)
    s3 = np.diag(m).astype(complex)
    # <m+1| S+ |m> = sqrt(S(S+1) - m(m+1)); raising moves one row up.
    raise_amp = np.sqrt(S * (S + 1.0) - m[1:] * (m[1:] + 1.0))
    splus = np.zeros((dim, dim), dtype=complex)
    splus[np.arange(dim - 1), np.arange(1, dim)] = raise_amp
    sminus = splus.conj().T
    s1 = 0.5 * (splus + sminus)
    s2 = -0.5j * (splus - sminus)
    return SpinMatrices(S=S, s1=s1, s2=s2, s3=s3)


@dataclass(frozen=True)
class SectorBasis:
    """Product-basis states with a fixed total S3 eigenvalue."""

    sz_total: float
    states: np.ndarray  # ascending full-space indices

    @property
    def dim(self):
        return int(self.states.size)


@dataclass
class OperatorHandle:
    """Sparse operator tagged with its defining formula and basis.

    Hermitian handles are verified elementwise at construction; plain
    commutators and Fourier sums may carry hermitian=False.
    """

    matrix: sp.csr_matrix
    label: str
    basis: str = "full"
    hermitian: bool = True

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)
        if self.hermitian:
            defect = hermiticity_defect(self.matrix)
            if defect > HERMITICITY_TOL:
                raise ValueError(
                    f"operator '{self.label}' flagged hermitian but defect={defect:g}"
                )

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def nnz(self):
        return self.matrix.nnz

    def dense(self):
        return self.matrix.toarray()

    def norm(self):
        return operator_norm(self)

    def metadata(self):
        return {
            "label": self.label,
            "basis": self.basis,
            "dim": self.dim,
            "nnz": int(self.nnz),
            "norm": float(self.norm()),
            "hermitian": bool(self.hermitian),
        }


def hermiticity_defect(matrix):
    diff = matrix - matrix.getH()
    return 0.0 if diff.nnz == 0 else float(np.abs(diff.data).max())


def full_dim(lattice):
    dim_float = float(lattice.spec.local_dim) ** lattice.spec.n_sites
    if dim_float > 2**30:
        raise StateSpaceError(f"full space dimension {dim_float:g} is not buildable")
    return int(round(dim_float))


def site_operator(lattice, site, local):
    """Embed a single-site matrix at `site` into the full product space."""
    D = lattice.spec.local_dim
    n = lattice.spec.n_sites
    left = D**site
    right = D ** (n - 1 - site)
    op = sp.csr_matrix(local)
    if left > 1:
        op = sp.kron(sp.identity(left, format="csr"), op, format="csr")
    if right > 1:
        op = sp.kron(op, sp.identity(right, format="csr"), format="csr")
    return op


def two_site_operator(lattice, x, y, block):
    """Embed a (D^2 x D^2) two-site matrix acting on (x, y), x factor first.

    The block is split into a sum of A_k (x) B_k via its operator-Schmidt
    decomposition, so arbitrary two-site couplings embed without assuming a
    product form.
    """
    D = lattice.spec.local_dim
    block = np.asarray(block, dtype=complex).reshape(D, D, D, D)
    # R[(a,c),(b,d)] = block[a,b,c,d]; SVD gives the Schmidt factors.
    r = block.transpose(0, 2, 1, 3).reshape(D * D, D * D)
    u, s, vh = np.linalg.svd(r)
    out = None
    for k in range(s.size):
        if s[k] < 1e-14:
            continue
        a_k = (np.sqrt(s[k]) * u[:, k]).reshape(D, D)
        b_k = (np.sqrt(s[k]) * vh[k, :]).reshape(D, D)
        term = site_operator(lattice, x, a_k) @ site_operator(lattice, y, b_k)
        out = term if out is None else out + term
    if out is None:
        dim = full_dim(lattice)
        out = sp.csr_matrix((dim, dim), dtype=complex)
    return out


def site_levels(lattice, site):
    """Level digit (0 = m=+S) of every basis state at one site."""
    D = lattice.spec.local_dim
    n = lattice.spec.n_sites
    idx = np.arange(full_dim(lattice), dtype=np.int64)
    return (idx // D ** (n - 1 - site)) % D


def total_sz_diagonal(lattice):
    """Total S3 eigenvalue of every product-basis state."""
    S = lattice.spec.S
    total = np.zeros(full_dim(lattice))
    for x in range(lattice.spec.n_sites):
        total += S - site_levels(lattice, x)
    return total


def sector_decomposition(lattice):
    """Partition of the product basis into total-S3 sectors, sz descending."""
    sz = total_sz_diagonal(lattice)
    # sz values are half-integers; key on 2*sz to stay in exact integers
    keys = np.round(2 * sz).astype(np.int64)
    sectors = []
    for key in sorted(set(keys.tolist()), reverse=True):
        states = np.flatnonzero(keys == key)
        sectors.append(SectorBasis(sz_total=key / 2.0, states=states))
    return sectors


def restrict(matrix, states):
    """Cut a full-space matrix down to the rows/columns of one sector."""
    return sp.csr_matrix(matrix)[np.ix_(states, states)].tocsr()


def _bond_weights(n_bonds, corruption):
    """Per-bond multipliers; non-uniform jitter when the hook is armed."""
    if not corruption:
        return np.ones(n_bonds)
    k = np.arange(n_bonds, dtype=np.int64)
    return 1.0 + _CORRUPTION_SCALE * (((k + 1) * 2654435761) % 97) / 97.0


def build_hamiltonian(lattice, B, corruption=False):
    """H(B) = sum_bonds S_x . S_y  -  B * (staggered S3 sum)."""
    spins = spin_matrices(lattice.spec.S)
    dim = full_dim(lattice)
    H = sp.csr_matrix((dim, dim), dtype=complex)
    comps = [spins.s1, spins.s2, spins.s3]
    for x, y in lattice.bonds:
        for c in comps:
            H = H + site_operator(lattice, x, c) @ site_operator(lattice, y, c)
    if B != 0.0:
        H = H - B * build_order_parameter(lattice).matrix
    label = f"H(B={B:g})"
    if corruption:
        H = H + 0.01 * site_operator(lattice, 0, spins.s1)
        label += " (corrupted)"
    return OperatorHandle(matrix=H, label=label)


def build_order_parameter(lattice, reg=None):
    """Staggered magnetization sum(sign(x) * S3_x) over a region or the box."""
    spins = spin_matrices(lattice.spec.S)
    dim = full_dim(lattice)
    O = sp.csr_matrix((dim, dim), dtype=complex)
    sites = range(lattice.spec.n_sites) if reg is None else reg.sites
    for x in sites:
        O = O + float(lattice.signs[x]) * site_operator(lattice, x, spins.s3)
    tag = "full" if reg is None else f"R={reg.R}"
    return OperatorHandle(matrix=O, label=f"O({tag})")


def build_staggered_sy(lattice, R, clip=False):
    """Region-averaged staggered transverse spin (the local probe operator).

    (1/|region|) * sum_{x in region} sign(x) * S2_x; mixes total-S3 sectors,
    so it lives in the full space.
    """
    reg = region(lattice, R, clip=clip)
    spins = spin_matrices(lattice.spec.S)
    dim = full_dim(lattice)
    A = sp.csr_matrix((dim, dim), dtype=complex)
    for x in reg.sites:
        A = A + float(lattice.signs[x]) * site_operator(lattice, x, spins.s2)
    A = A / reg.size
    label = f"A(R={R})" + (" clipped" if reg.clipped else "")
    return OperatorHandle(matrix=A, label=label)


def _field_values(f):
    return f.values if isinstance(f, RampField) else np.asarray(f, dtype=float)


def build_boundary_field(lattice, f, corruption=False):
    """Bond-summed transverse boundary operator and its scalar companion.

    Returns (H1', H2') with H1' = sum_bonds (S1_x + S1_y)(f_x + f_y) and the
    scalar H2' = sum_bonds (f_x + f_y)^2.
    """
    values = _field_values(f)
    spins = spin_matrices(lattice.spec.S)
    dim = full_dim(lattice)
    weights = _bond_weights(lattice.n_bonds, corruption)
    H1 = sp.csr_matrix((dim, dim), dtype=complex)
    h2 = 0.0
    for k, (x, y) in enumerate(lattice.bonds):
        c = (values[x] + values[y]) * weights[k]
        if c != 0.0:
            H1 = H1 + c * (site_operator(lattice, x, spins.s1)
                           + site_operator(lattice, y, spins.s1))
        h2 += (values[x] + values[y]) ** 2
    label = "H1'" + (" (corrupted)" if corruption else "")
    return OperatorHandle(matrix=H1, label=label), float(h2)


def build_field_hamiltonian(lattice, B, f):
    """Hamiltonian with the transverse bond field completing a square.

    Built literally from its three-term form
      sum_bonds [S2 S2 + S3 S3] - B O
      + 1/2 sum_bonds [(S1_x + S1_y + f_x + f_y)^2 - (S1_x)^2 - (S1_y)^2]
    so it provides a construction path independent of H(B) + f-expansion.
    """
    values = _field_values(f)
    spins = spin_matrices(lattice.spec.S)
    D = spins.dim
    dim = full_dim(lattice)
    eye = np.eye(D, dtype=complex)
    H = sp.csr_matrix((dim, dim), dtype=complex)
    for x, y in lattice.bonds:
        c = values[x] + values[y]
        shifted = np.kron(spins.s1, eye) + np.kron(eye, spins.s1) + c * np.eye(D * D)
        block = (np.kron(spins.s2, eye) @ np.kron(eye, spins.s2)
                 + np.kron(spins.s3, eye) @ np.kron(eye, spins.s3)
                 + 0.5 * (shifted @ shifted
                          - np.kron(spins.s1 @ spins.s1, eye)
                          - np.kron(eye, spins.s1 @ spins.s1)))
        H = H + two_site_operator(lattice, x, y, block)
    if B != 0.0:
        H = H - B * build_order_parameter(lattice).matrix
    return OperatorHandle(matrix=H, label=f"H(B={B:g},f)")


def fourier_spin(lattice, p, component):
    """Momentum-space spin component |L|^{-1/2} sum_x e^{-ipx} S_x^{(i)}.

    Momenta are 2*pi periodic on the integer lattice, so any p congruent to
    a grid point is accepted and folded into the grid window.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    L = lattice.spec.L
    n = p * L / np.pi
    if np.abs(n - np.round(n)).max() > 1e-9:
        raise ValueError(f"momentum {p} is not on the lattice grid")
    n = ((np.round(n).astype(int) - (-L + 1)) % (2 * L)) + (-L + 1)
    p = np.pi * n / L
    spins = spin_matrices(lattice.spec.S)
    local = spins.component(component)
    dim = full_dim(lattice)
    out = sp.csr_matrix((dim, dim), dtype=complex)
    phases = np.exp(-1j * lattice.coords @ p)
    for x in range(lattice.spec.n_sites):
        out = out + phases[x] * site_operator(lattice, x, local)
    out = out / np.sqrt(lattice.spec.n_sites)
    # hermitian exactly when every phase is real, i.e. each p_i in {0, pi}
    herm = bool(np.isin(n % (2 * L), (0, L)).all())
    return OperatorHandle(matrix=out, label=f"S^({component})_p", hermitian=herm)


def commutator(a, b):
    """[a, b] as a handle; bases must match."""
    ma, mb = _paired_matrices(a, b)
    mat = ma @ mb - mb @ ma
    return OperatorHandle(matrix=mat, label=f"[{_label(a)},{_label(b)}]",
                          basis=_basis(a), hermitian=False)


def anticommutator(a, b):
    ma, mb = _paired_matrices(a, b)
    mat = ma @ mb + mb @ ma
    herm = _is_handle_hermitian(a) and _is_handle_hermitian(b)
    return OperatorHandle(matrix=mat, label=f"{{{_label(a)},{_label(b)}}}",
                          basis=_basis(a), hermitian=herm)


def operator_norm(a, dense_cap=4096):
    """Spectral norm: largest |eigenvalue| if hermitian, else largest singular value."""
    mat = a.matrix if isinstance(a, OperatorHandle) else sp.csr_matrix(a)
    herm = a.hermitian if isinstance(a, OperatorHandle) else False
    if mat.shape[0] <= dense_cap:
        dense = mat.toarray()
        if herm:
            return float(np.abs(np.linalg.eigvalsh(dense)).max())
        return float(np.linalg.norm(dense, 2))
    if herm:
        lo = sp.linalg.eigsh(mat, k=1, which="SA", return_eigenvectors=False)
        hi = sp.linalg.eigsh(mat, k=1, which="LA", return_eigenvectors=False)
        return float(max(abs(lo[0]), abs(hi[0])))
    return float(sp.linalg.svds(mat, k=1, return_singular_vectors=False)[0])


def dump_triplets(handle, path):
    """Write the matrix in the documented `row col re im` text format."""
    coo = handle.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# label: {handle.label}\n")
        fh.write(f"# basis: {handle.basis}  dim: {handle.dim}  nnz: {handle.nnz}\n")
        for k in order:
            fh.write(f"{coo.row[k]} {coo.col[k]} "
                     f"{coo.data[k].real:.17g} {coo.data[k].imag:.17g}\n")


def _paired_matrices(a, b):
    ma = a.matrix if isinstance(a, OperatorHandle) else sp.csr_matrix(a)
    mb = b.matrix if isinstance(b, OperatorHandle) else sp.csr_matrix(b)
    if isinstance(a, OperatorHandle) and isinstance(b, OperatorHandle):
        if a.basis != b.basis:
            raise ValueError(f"basis mismatch: {a.basis} vs {b.basis}")
    if ma.shape != mb.shape:
        raise ValueError(f"shape mismatch: {ma.shape} vs {mb.shape}")
    return ma, mb


def _label(a):
    return a.label if isinstance(a, OperatorHandle) else "op"


def _basis(a):
    return a.basis if isinstance(a, OperatorHandle) else "full"


def _is_handle_hermitian(a):
    return a.hermitian if isinstance(a, OperatorHandle) else False
