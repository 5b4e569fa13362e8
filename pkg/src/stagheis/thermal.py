"""Finite-temperature states, Duhamel inner products, structure quantities.

Gibbs weights are always computed relative to the ground energy, so large
beta underflows harmlessly instead of overflowing the partition function;
the absolute log partition function is kept separately.
"""

from dataclasses import dataclass

import numpy as np

from .lattice import momentum_grid
from .operators import (OperatorHandle, build_hamiltonian,
                        build_order_parameter, fourier_spin, spin_matrices,
                        site_operator)
from .reports import InequalityReport, StructureRow, scaled_tol
from .spectra import diagonalize, ground_expectation, ground_sector, sandwich

# Duhamel weights switch to the analytic degenerate limit below this gap.
DEGENERATE_GAP = 1e-12


@dataclass
class GibbsState:
    """Thermal state exp(-beta H)/Z represented in the eigenbasis."""

    beta: float
    B: float
    es: "EigenSystem"
    weights: np.ndarray     # normalized Boltzmann weights per eigenstate
    log_z: float            # absolute log partition function

    @property
    def Z(self):
        return float(np.exp(self.log_z)) if self.log_z < 700 else float("inf")

    def density(self):
        V = self.es.vectors
        return (V * self.weights) @ V.conj().T

    def relative_weights(self):
        """exp(-beta (E_n - E0)) without normalization."""
        return np.exp(-self.beta * (self.es.values - self.es.values[0]))


def gibbs_state(es, beta, B=0.0):
    if beta <= 0:
        raise ValueError(f"inverse temperature must be positive, got {beta}")
    rel = np.exp(-beta * (es.values - es.values[0]))
    z_rel = rel.sum()
    log_z = float(np.log(z_rel) - beta * es.values[0])
    return GibbsState(beta=beta, B=B, es=es, weights=rel / z_rel, log_z=log_z)


def thermal_expectation(state, op):
    """Tr(rho op) via eigenstate diagonal elements."""
    mat = op.matrix if isinstance(op, OperatorHandle) else op
    V = state.es.vectors
    diag = np.einsum("ij,ij->j", V.conj(), mat @ V)
    return complex(np.dot(state.weights, diag))


def free_energy_entropy(state):
    """(F, S) with F = -log(Z)/beta and S = beta(<H> - F)."""
    energy = float(np.dot(state.weights, state.es.values))
    F = -state.log_z / state.beta
    return F, state.beta * (energy - F)


def _entropy_of_density(sigma):
    mu = np.linalg.eigvalsh(sigma)
    if mu.min() < -1e-10:
        raise ValueError(f"trial density has negative eigenvalue {mu.min():g}")
    mu = np.clip(mu, 0.0, None)
    pos = mu > 0
    return float(-(mu[pos] * np.log(mu[pos])).sum())


def gibbs_variational_check(state, hamiltonian, trial_densities, rtol=1e-10):
    """Free-energy minimality of the Gibbs state against trial densities.

    Checks F_Gibbs <= Tr(sigma H) - S(sigma)/beta for every trial; the
    report carries the tightest slack and the full slack list.
    """
    F, _ = free_energy_entropy(state)
    H = hamiltonian.matrix.toarray()
    slacks = []
    for sigma in trial_densities:
        sigma = np.asarray(sigma, dtype=complex)
        tr = float(np.trace(sigma).real)
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"trial density has trace {tr!r}, expected 1")
        energy = float(np.trace(sigma @ H).real)
        slacks.append(energy - _entropy_of_density(sigma) / state.beta - F)
    worst = min(slacks) if slacks else 0.0
    return InequalityReport(
        name="gibbs-variational",
        anchor="free-energy-minimality",
        params={"beta": state.beta, "B": state.B, "n_trials": len(slacks)},
        lhs=F,
        rhs=F + worst,
        tolerance=scaled_tol(rtol, F),
        intermediates={"slacks": slacks},
    )


def duhamel_inner(state, A):
    """Imaginary-time averaged two-point function (A, A) >= 0.

    In the eigenbasis this is sum_{m,n} |<n|A|m>|^2 times the Duhamel
    weight (e^{-beta E_m} - e^{-beta E_n}) / (beta (E_n - E_m)) / Z, with
    the analytic limit e^{-beta E_m} at degenerate levels.
    """
    values = state.es.values
    A_eig = state.es.transform(A)
    rel = state.relative_weights()
    z_rel = rel.sum()
    gap = values[None, :] - values[:, None]          # E_n - E_m at [m, n]
    degenerate = np.abs(gap) < DEGENERATE_GAP * np.maximum(
        1.0, np.abs(values[:, None]))
    safe_gap = np.where(degenerate, 1.0, gap)
    w = np.where(degenerate, rel[:, None],
                 (rel[:, None] - rel[None, :]) / (state.beta * safe_gap))
    amp2 = np.abs(A_eig.T) ** 2                      # |<n|A|m>|^2 at [m, n]
    return float((amp2 * w).sum() / z_rel)


def _pair_expectations(state, A_eig):
    """(<A A^dag>, <A^dag A>) from eigenbasis matrix elements."""
    amp_rows = (np.abs(A_eig) ** 2).sum(axis=1)   # sum_n |<m|A|n>|^2
    amp_cols = (np.abs(A_eig) ** 2).sum(axis=0)   # sum_n |<n|A|m>|^2
    return (float(np.dot(state.weights, amp_rows)),
            float(np.dot(state.weights, amp_cols)))


def _double_commutator(state, A_eig):
    """<[A^dag, [H, A]]> from eigenbasis matrix elements (real).

    Per diagonal slot m this is sum_n (E_n - E_m)(|A_nm|^2 + |A_mn|^2).
    """
    values = state.es.values
    gap = values[:, None] - values[None, :]          # E_n - E_m at [n, m]
    amp2 = np.abs(A_eig) ** 2
    per_m = (gap * amp2).sum(axis=0) + (gap.T * amp2).sum(axis=1)
    return float(np.dot(state.weights, per_m))


def structure_quantities(state, lattice, grid=None, indices=None):
    """Momentum sweep of the symmetrized, Duhamel, and double-commutator
    two-point quantities with every applicable bound attached.

    Bounds dividing by eps' are skipped at the staggered corner momentum
    and flagged.  At nonzero field the field-free double-commutator bound
    is replaced by the empirical linear coefficient (c - 4 S^2 eps)/|B|.
    """
    if grid is None:
        grid = momentum_grid(lattice)
    spec = lattice.spec
    beta, B = state.beta, state.B
    mult = bond_multiplicity(lattice)
    rows = []
    sweep = range(grid.n_points) if indices is None else indices
    for k in sweep:
        p = grid.points[k]
        A = fourier_spin(lattice, p, 2)
        A_eig = state.es.transform(A)
        corr, corr_rev = _pair_expectations(state, A_eig)
        g = 0.5 * (corr + corr_rev)
        b = duhamel_inner(state, A)
        c = _double_commutator(state, A_eig)
        eps = float(grid.eps[k])
        eps_p = float(grid.eps_prime[k])
        row = StructureRow(
            d=spec.d, L=spec.L, S=spec.S, beta=beta, B=B,
            n=tuple(grid.integers[k]), p=tuple(p),
            eps=eps, eps_prime=eps_p, g=g, b=b, c=c, corr=corr)
        _attach_thermal_bounds(row, spec.S, beta, B, mult)
        rows.append(row)
    return rows


def bond_multiplicity(lattice):
    """Wrap-collapse factor d |sites| / |bonds|: 1 normally, 2 at side 2.

    On side-2 tori the direct and wrap bond between a pair coincide and are
    kept once, which halves the coupling entering the infrared (Gaussian
    domination) argument; the Duhamel bound constants scale accordingly.
    """
    return lattice.spec.d * lattice.n_sites / lattice.n_bonds


def _attach_thermal_bounds(row, S, beta, B, mult):
    g, b, c, eps, eps_p = row.g, row.b, row.c, row.eps, row.eps_prime
    singular = eps_p <= 1e-12
    if mult != 1.0:
        row.flags.append("side2-bond-multiplicity")
    if singular:
        row.flags.append("staggered-corner-momentum")
    else:
        row.bounds["duhamel_ir"] = _bound(b, mult / (2.0 * beta * eps_p))
    fb_den = 4.0 * g + beta * c
    if fb_den > 1e-14:
        row.bounds["falk_bruch"] = _bound(4.0 * g * g / fb_den, b)
    else:
        row.flags.append("falk-bruch-degenerate")
    disc = b * b + beta * b * c
    if disc >= 0.0:
        row.bounds["sym_from_duhamel"] = _bound(
            g, 0.5 * (b + np.sqrt(disc)))
    if B == 0.0:
        row.bounds["double_comm"] = _bound(c, 4.0 * S * S * eps)
    else:
        row.bounds["double_comm"] = {
            "rhs": None, "slack": None,
            "empirical_linear_coeff": (c - 4.0 * S * S * eps) / abs(B),
        }
    row.bounds["duhamel_le_sym"] = _bound(b, g)
    row.bounds["adjoint_pair"] = _bound(row.corr, 2.0 * g)
    if not singular and B == 0.0:
        rhs = mult / (beta * eps_p) + np.sqrt(
            mult * 2.0 * S * S * eps / eps_p)
        row.bounds["corr_ir"] = _bound(row.corr, rhs)


def zero_temperature_structure(es, gsec, lattice, B, grid=None, indices=None):
    """Ground-sector version of the structure sweep (beta -> infinity)."""
    if grid is None:
        grid = momentum_grid(lattice)
    spec = lattice.spec
    mult = bond_multiplicity(lattice)
    rows = []
    sweep = range(grid.n_points) if indices is None else indices
    for k in sweep:
        p = grid.points[k]
        A = fourier_spin(lattice, p, 2)
        A_dag = OperatorHandle(matrix=A.matrix.getH().tocsr(),
                               label=A.label + "^dag", basis=A.basis,
                               hermitian=A.hermitian)
        one = lambda t: np.ones_like(t)
        ident = lambda t: t
        corr = sandwich(es, gsec, A_dag, one)       # <A A^dag>
        corr_rev = sandwich(es, gsec, A, one)       # <A^dag A>
        g = 0.5 * (corr + corr_rev)
        c = sandwich(es, gsec, A, ident) + sandwich(es, gsec, A_dag, ident)
        eps = float(grid.eps[k])
        eps_p = float(grid.eps_prime[k])
        row = StructureRow(
            d=spec.d, L=spec.L, S=spec.S, beta=None, B=B,
            n=tuple(grid.integers[k]), p=tuple(p),
            eps=eps, eps_prime=eps_p, g=g, b=None, c=c, corr=corr)
        if mult != 1.0:
            row.flags.append("side2-bond-multiplicity")
        if eps_p <= 1e-12:
            row.flags.append("staggered-corner-momentum")
        else:
            row.bounds["sym_zero_t"] = _bound(
                g, 0.5 * np.sqrt(mult * max(c, 0.0) / (2.0 * eps_p)))
            if B == 0.0:
                row.bounds["corr_ir_zero_t"] = _bound(
                    corr, np.sqrt(mult * 2.0 * spec.S ** 2 * eps / eps_p))
            else:
                need = (corr * corr * eps_p / mult
                        - 2.0 * spec.S ** 2 * eps) / abs(B)
                row.bounds["corr_ir_zero_t"] = {
                    "rhs": None, "slack": None,
                    "empirical_linear_coeff": max(need, 0.0),
                }
        if eps <= 1e-12:
            row.flags.append("zero-momentum")
        rows.append(row)
    return rows


def _bound(lhs, rhs):
    return {"lhs": float(lhs), "rhs": float(rhs),
            "slack": float(rhs) - float(lhs)}


def magnetization_curve(lattice, B_grid, beta=None, dense_cap=4096):
    """Order-parameter density per field value, thermal or ground-sector."""
    out = []
    n = lattice.spec.n_sites
    O = build_order_parameter(lattice)
    for B in B_grid:
        H = build_hamiltonian(lattice, B)
        es = diagonalize(H, lattice=lattice, dense_cap=dense_cap)
        if beta is None:
            gs = ground_sector(es)
            m = ground_expectation(gs, O).real / n
        else:
            state = gibbs_state(es, beta, B)
            m = thermal_expectation(state, O).real / n
        out.append((float(B), float(m)))
    return out


def transverse_correlations(lattice, expect):
    """Matrix C[x, y] = <S2_x S2_y> under the supplied expectation map."""
    spins = spin_matrices(lattice.spec.S)
    n = lattice.spec.n_sites
    ops = [site_operator(lattice, x, spins.s2) for x in range(n)]
    C = np.zeros((n, n))
    for x in range(n):
        for y in range(n):
            C[x, y] = complex(expect(ops[x] @ ops[y])).real
    return C


def plancherel_reconstruction(lattice, state):
    """Reassemble <S2_x S2_y> from the momentum-space two-point values.

    Returns (direct, reconstructed) matrices; translation invariance of the
    transverse correlator makes the reconstruction pointwise.
    """
    grid = momentum_grid(lattice)
    n = lattice.spec.n_sites
    direct = transverse_correlations(
        lattice, lambda op: thermal_expectation(state, op))
    recon = np.zeros((n, n), dtype=complex)
    for k in range(grid.n_points):
        p = grid.points[k]
        A = fourier_spin(lattice, p, 2)
        A_eig = state.es.transform(A)
        corr, _ = _pair_expectations(state, A_eig)
        phase = np.exp(1j * (lattice.coords @ p))
        recon += corr * phase[:, None] * phase[None, :].conj()
    return direct, (recon / n).real
