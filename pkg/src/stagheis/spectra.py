"""Exact spectral decompositions and spectral-function machinery.

Dense eigendecompositions (per total-S3 sector where the operator allows
it), ground-sector averages, fractional powers / resolvents of the shifted
Hamiltonian, the smooth energy-cutoff family, and the frequency-filtered
quasi-local operator.  All spectral functions act on H - E0, and inverse
powers are only ever evaluated with the ground sector excluded by index.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .operators import OperatorHandle, total_sz_diagonal

DENSE_CAP = 4096


@dataclass
class EigenSystem:
    """Full spectral decomposition; eigenvalues ascending, columns orthonormal."""

    values: np.ndarray
    vectors: np.ndarray
    basis: str = "full"
    sectors: np.ndarray = None  # total-S3 label per eigenpair when block-solved

    @property
    def dim(self):
        return self.values.size

    def transform(self, matrix):
        """Represent a matrix in this eigenbasis: V^dag M V."""
        mat = matrix.matrix if isinstance(matrix, OperatorHandle) else matrix
        if sp.issparse(mat):
            return self.vectors.conj().T @ (mat @ self.vectors)
        return self.vectors.conj().T @ (np.asarray(mat) @ self.vectors)

    def validate(self, matrix, tol=1e-10):
        """Residual and orthonormality checks against the source operator."""
        mat = matrix.matrix if isinstance(matrix, OperatorHandle) else matrix
        scale = max(1.0, float(np.abs(self.values).max()))
        resid = np.abs(mat @ self.vectors - self.vectors * self.values).max()
        ortho = np.abs(self.vectors.conj().T @ self.vectors
                       - np.eye(self.dim)).max()
        if resid > tol * scale or ortho > tol:
            raise ValueError(
                f"eigensystem of '{getattr(matrix, 'label', '?')}' failed "
                f"validation: residual={resid:g}, orthogonality={ortho:g}"
            )

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("index,sector,value\n")
            for i, v in enumerate(self.values):
                sec = "" if self.sectors is None else f"{self.sectors[i]:g}"
                fh.write(f"{i},{sec},{float(v)!r}\n")


def diagonalize(op, lattice=None, dense_cap=DENSE_CAP, validate=None):
    """Full dense decomposition of a Hermitian operator.

    When `lattice` is given the operator is required to be block diagonal
    over total-S3 sectors; each block is solved independently and the
    eigenpairs are merged (ascending, stable).  Raises if any block exceeds
    `dense_cap` or the operator is not Hermitian.
    """
    if not op.hermitian:
        raise ValueError(f"cannot eigendecompose non-hermitian '{op.label}'")
    mat = op.matrix
    dim = mat.shape[0]
    if lattice is None:
        if dim > dense_cap:
            raise ValueError(f"dimension {dim} exceeds dense cap {dense_cap}")
        values, vectors = np.linalg.eigh(mat.toarray())
        es = EigenSystem(values=values, vectors=vectors, basis=op.basis)
    else:
        sz = total_sz_diagonal(lattice)
        _assert_block_diagonal(op, sz)
        vals_parts, vecs_parts, sec_parts = [], [], []
        from .operators import sector_decomposition
        for sec in sector_decomposition(lattice):
            states = sec.states
            if states.size > dense_cap:
                raise ValueError(
                    f"sector sz={sec.sz_total:g} has dim {states.size} > "
                    f"dense cap {dense_cap}"
                )
            block = mat[np.ix_(states, states)].toarray()
            vals, vecs = np.linalg.eigh(block)
            full_vecs = np.zeros((dim, states.size), dtype=complex)
            full_vecs[states, :] = vecs
            vals_parts.append(vals)
            vecs_parts.append(full_vecs)
            sec_parts.append(np.full(states.size, sec.sz_total))
        values = np.concatenate(vals_parts)
        vectors = np.concatenate(vecs_parts, axis=1)
        sectors = np.concatenate(sec_parts)
        order = np.argsort(values, kind="stable")
        es = EigenSystem(values=values[order], vectors=vectors[:, order],
                         basis=op.basis, sectors=sectors[order])
    if validate is None:
        validate = dim <= 1024
    if validate:
        es.validate(op)
    return es


def _assert_block_diagonal(op, sz_diag):
    coo = op.matrix.tocoo()
    if coo.nnz == 0:
        return
    defect = np.abs(sz_diag[coo.row] - sz_diag[coo.col]).max()
    if defect > 0:
        raise ValueError(
            f"'{op.label}' is not block diagonal over total-S3 sectors "
            f"(max sector jump {defect:g})"
        )


def ground_energy(op, dense_cap=DENSE_CAP):
    """Lowest eigenvalue only; Lanczos above the dense cap."""
    mat = op.matrix
    if not op.hermitian:
        raise ValueError(f"ground energy of non-hermitian '{op.label}'")
    if mat.shape[0] <= dense_cap:
        return float(np.linalg.eigvalsh(mat.toarray())[0])
    val = sp.linalg.eigsh(mat, k=1, which="SA", return_eigenvectors=False)
    return float(val[0])


@dataclass
class GroundSector:
    """Ground energy, degeneracy, and the projector data of the lowest level."""

    es: EigenSystem
    E0: float
    q: int
    indices: np.ndarray
    degeneracy_tol: float
    near_degenerate: bool = False

    def vectors(self):
        return self.es.vectors[:, self.indices]

    def projector(self):
        V0 = self.vectors()
        return V0 @ V0.conj().T

    def excited_indices(self):
        mask = np.ones(self.es.dim, dtype=bool)
        mask[self.indices] = False
        return np.flatnonzero(mask)


def ground_sector(es, tol=None):
    """Identify the ground multiplet within `tol` of the lowest eigenvalue.

    The default tolerance is 1e-8 * max(1, |E0|).  If the multiplet size
    changes when the tolerance moves a decade either way, the sector is
    flagged near-degenerate.
    """
    E0 = float(es.values[0])
    if tol is None:
        tol = 1e-8 * max(1.0, abs(E0))
    counts = [int(np.count_nonzero(es.values <= E0 + f * tol))
              for f in (0.1, 1.0, 10.0)]
    q = counts[1]
    return GroundSector(es=es, E0=E0, q=q, indices=np.arange(q),
                        degeneracy_tol=tol,
                        near_degenerate=not (counts[0] == counts[2] == q))


def ground_expectation(gs, op):
    """Trace average over the ground sector: Tr(P0 op) / q."""
    mat = op.matrix if isinstance(op, OperatorHandle) else op
    V0 = gs.vectors()
    if sp.issparse(mat):
        acc = (V0.conj() * (mat @ V0)).sum()
    else:
        acc = (V0.conj() * (np.asarray(mat) @ V0)).sum()
    return complex(acc) / gs.q


def _phi_weights(es, gs, phi, exclude_ground):
    lam = es.values - gs.E0
    weights = np.zeros(es.dim)
    if exclude_ground:
        keep = gs.excited_indices()
    else:
        keep = np.arange(es.dim)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.asarray(phi(lam[keep]), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("spectral function is singular at a retained eigenvalue")
    weights[keep] = vals
    return weights


def sandwich(es, gs, X, phi, exclude_ground=False):
    """Ground average of X^dag phi(H - E0) X.

    This is the sum-over-states form (1/q) sum_{j,n} phi(E_n - E0)
    |<n|X|g_j>|^2; with exclude_ground=True the ground multiplet is removed
    from the sum by index, which realizes compositions with the excited
    projector exactly.
    """
    mat = X.matrix if isinstance(X, OperatorHandle) else X
    W = es.vectors.conj().T @ (mat @ gs.vectors())
    weights = _phi_weights(es, gs, phi, exclude_ground)
    return float((weights[:, None] * np.abs(W) ** 2).sum() / gs.q)


def cross_sandwich(es, gs, Xl, Xr, phi, exclude_ground=False):
    """Ground average of Xl phi(H - E0) Xr (complex in general)."""
    ml = Xl.matrix if isinstance(Xl, OperatorHandle) else Xl
    mr = Xr.matrix if isinstance(Xr, OperatorHandle) else Xr
    ml_dag = ml.getH().tocsr() if sp.issparse(ml) else np.asarray(ml).conj().T
    A = es.vectors.conj().T @ (ml_dag @ gs.vectors())
    B = es.vectors.conj().T @ (mr @ gs.vectors())
    weights = _phi_weights(es, gs, phi, exclude_ground)
    return complex((weights[:, None] * A.conj() * B).sum() / gs.q)


def spectral_apply(es, gs, phi, target, exclude_ground=False):
    """Apply phi(H - E0) (optionally projected off the ground sector).

    Accepts a state vector, a dense/sparse matrix, or an OperatorHandle and
    returns the same kind of object.
    """
    weights = _phi_weights(es, gs, phi, exclude_ground)
    V = es.vectors
    if isinstance(target, OperatorHandle):
        out = V @ (weights[:, None] * (V.conj().T @ target.matrix.toarray()))
        return OperatorHandle(matrix=sp.csr_matrix(out),
                              label=f"phi(H-E0).{target.label}",
                              basis=target.basis, hermitian=False)
    arr = np.asarray(target.toarray() if sp.issparse(target) else target,
                     dtype=complex)
    if arr.ndim == 1:
        return V @ (weights * (V.conj().T @ arr))
    return V @ (weights[:, None] * (V.conj().T @ arr))


def kappa(epsilon):
    """Optimal constant with t^(1-2*eps) <= kappa + t for all t >= 0.

    The supremum of t^(1-2*eps) - t is attained at t = (1-2*eps)^(1/(2*eps)),
    giving kappa = 2*eps * (1-2*eps)^((1-2*eps)/(2*eps)); it vanishes as
    eps -> 0.
    """
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"exponent must lie in (0, 1/2), got {epsilon}")
    u = 1.0 - 2.0 * epsilon
    return 2.0 * epsilon * u ** (u / (2.0 * epsilon))


@dataclass(frozen=True)
class FilterParams:
    epsilon: float
    kappa: float


def filter_params(epsilon):
    return FilterParams(epsilon=epsilon, kappa=kappa(epsilon))


def _smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    def m(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out
    a = m(u)
    b = m(1.0 - u)
    return a / (a + b + 1e-300)


def _bump(u):
    """C-infinity bump: exp(1 - 1/(1-u^2)) inside |u|<1, 0 outside."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


@dataclass
class CutoffFamily:
    """Smooth energy-cutoff functions eta, g1, g, h with their parameters.

    g1 is a mollifier step (1 below gamma1, 0 above gamma2); g approximates
    eta*g1 from below with a deficit h = (eta*g1)^2 - g^2 kept under
    M2 / R^(d-1) by subtracting a bump of height `bump_height` near zero,
    which also opens a zero margin of g around the origin.
    """

    epsilon: float
    gamma1: float
    gamma2: float
    M1: float
    M2: float
    R: int
    d: int = 1
    bump_height: float = field(init=False, default=0.0)

    def __post_init__(self):
        grid = np.linspace(0.0, self.gamma2, 4097)
        peak = float((self.eta(grid) * self.g1_hat(grid)).max()) ** 2
        self.bump_height = min(self.M2 / self.R ** (self.d - 1), peak)

    def eta(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = s[pos] ** (self.epsilon / 2.0)
        return out

    def g1_hat(self, s):
        s = np.asarray(s, dtype=float)
        return 1.0 - _smooth_step((s - self.gamma1) / (self.gamma2 - self.gamma1))

    def _bump_at(self, s):
        return self.bump_height * _bump(np.asarray(s, dtype=float) / self.gamma1)

    def g_hat(self, s):
        base = (self.eta(s) * self.g1_hat(s)) ** 2 - self._bump_at(s)
        return np.sqrt(np.clip(base, 0.0, None))

    def h_hat(self, s):
        return (self.eta(s) * self.g1_hat(s)) ** 2 - self.g_hat(s) ** 2

    @property
    def h_cap(self):
        return self.M2 / self.R ** (self.d - 1)

    @property
    def support_gap(self):
        """Analytic margin s* with g_hat = 0 on [0, s*] (may underflow to 0)."""
        if self.bump_height <= 0.0:
            return 0.0
        return (0.5 * self.bump_height) ** (1.0 / self.epsilon)


def cutoff_family(epsilon, gamma1, gamma2, M1, M2, R, d=1, grid_points=10001):
    """Build and verify a cutoff family; raises naming any violated constraint.

    Feasibility of the linear domination of eta^2 (1 - g1^2) is partly
    analytic (the tail needs gamma2^(eps-1) <= M1) and partly checked on a
    dense grid across the step region.
    """
    if not (0.0 < gamma1 < gamma2):
        raise ValueError(f"need 0 < gamma1 < gamma2, got {gamma1}, {gamma2}")
    if M1 <= 0 or M2 <= 0:
        raise ValueError("smallness parameters must be positive")
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"exponent must lie in (0, 1/2), got {epsilon}")
    fam = CutoffFamily(epsilon=epsilon, gamma1=gamma1, gamma2=gamma2,
                       M1=M1, M2=M2, R=R, d=d)
    tail = gamma2 ** (epsilon - 1.0)
    if tail > M1 * (1.0 + 1e-12):
        raise ValueError(
            f"infeasible cutoff: eta^2(1-g1^2) <= M1*s fails in the tail, "
            f"gamma2^(eps-1) = {tail:g} > M1 = {M1:g}"
        )
    s = np.linspace(0.0, max(4.0 * gamma2, 2.0), grid_points)
    pos = s > 0
    lin = fam.eta(s) ** 2 * (1.0 - fam.g1_hat(s) ** 2)
    worst = float((lin[pos] / s[pos]).max())
    if worst > M1 * (1.0 + 1e-12):
        raise ValueError(
            f"infeasible cutoff: eta^2(1-g1^2)/s reaches {worst:g} > M1 = {M1:g} "
            f"in the step region"
        )
    chain = fam.eta(s) * fam.g1_hat(s) - fam.g_hat(s)
    if chain.min() < -1e-12:
        raise ValueError("cutoff construction broke eta*g1 >= g >= 0")
    if float(fam.h_hat(s).max()) > fam.h_cap * (1.0 + 1e-12):
        raise ValueError("cutoff construction broke h <= M2 / R^(d-1)")
    if fam.g_hat(np.array([0.0])).item() != 0.0 or fam.g_hat(s[s >= gamma2]).max() != 0.0:
        raise ValueError("cutoff support is not contained in (0, gamma2)")
    return fam


def filtered_identities(es, gs, A, g_hat):
    """Both routes to the two filtered-operator identities.

    Returns the spectral-function evaluations omega(A g(H')^2 H'^k A) for
    k = 1, 0 next to the same quantities computed from the filtered matrix
    elements g_hat(E_m - E_n) <m|A|n>; they must agree because the ground
    sector sits at E0 up to the degeneracy tolerance.
    """
    A_eig = es.transform(A)
    gcol = gs.indices
    bohr = es.values[:, None] - es.values[gcol][None, :]
    tau_cols = np.asarray(g_hat(bohr)) * A_eig[:, gcol]
    w = np.abs(tau_cols) ** 2
    return {
        "energy_spectral": sandwich(es, gs, A,
                                    lambda t: np.asarray(g_hat(t)) ** 2
                                    * np.asarray(t, dtype=float)),
        "energy_filtered": float((bohr * w).sum() / gs.q),
        "norm_spectral": sandwich(es, gs, A,
                                  lambda t: np.asarray(g_hat(t)) ** 2),
        "norm_filtered": float(w.sum() / gs.q),
    }


def filtered_operator(es, g_hat, A, gs=None, verify=True, rtol=1e-9):
    """Frequency-filtered operator: <m|tau(A)|n> = g_hat(E_m - E_n) <m|A|n>.

    This realizes the time-smeared evolution integral exactly in the
    eigenbasis.  With verify=True the two defining identities are checked
    against the ground sector:
      omega(A g(H') H' g(H') A) = omega(tau(A)^dag [H, tau(A)])
      omega(A g(H')^2 A)        = omega(tau(A)^dag tau(A))
    where H' = H - E0.
    """
    if gs is None:
        gs = ground_sector(es)
    A_eig = es.transform(A)
    diffs = es.values[:, None] - es.values[None, :]
    tau_eig = np.asarray(g_hat(diffs)) * A_eig
    if verify:
        idents = filtered_identities(es, gs, A, g_hat)
        for name in ("energy", "norm"):
            lhs = idents[f"{name}_spectral"]
            rhs = idents[f"{name}_filtered"]
            scale = max(1e-30, abs(lhs), abs(rhs))
            if abs(lhs - rhs) > rtol * scale:
                raise ValueError(
                    f"filtered-operator {name} identity broken: "
                    f"{lhs!r} vs {rhs!r}"
                )
    tau = es.vectors @ tau_eig @ es.vectors.conj().T
    base_label = A.label if isinstance(A, OperatorHandle) else "A"
    return OperatorHandle(matrix=sp.csr_matrix(tau), label=f"tau_g({base_label})",
                          basis=getattr(A, "basis", "full"), hermitian=False)
