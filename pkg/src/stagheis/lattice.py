"""Geometry of the finite periodic hypercubic lattice.

The lattice is the box {-L+1, ..., L}^d with periodic boundary conditions,
so the side length is 2L and the site count is (2L)^d.  Sites are indexed
lexicographically on the shifted coordinates (x + L - 1); this ordering is
fixed so that every downstream array and report is reproducible
bit-for-bit.  Regions and ramp fields are measured in the sup norm of the
*stored* coordinates and never wrap around the torus.
"""

from dataclasses import dataclass, field

import numpy as np

# Hilbert-space guard: refuse to enumerate product bases beyond 2**DEFAULT_STATE_BITS.
DEFAULT_STATE_BITS = 18


class GeometryError(ValueError):
    """Region or ramp does not fit inside the lattice."""


class StateSpaceError(ValueError):
    """Requested Hilbert space exceeds the configured cap."""


def _check_half_integer(S):
    two_s = 2.0 * S
    if two_s <= 0 or abs(two_s - round(two_s)) > 1e-12:
        raise ValueError(f"spin magnitude must be a positive half-integer, got S={S}")
    return round(two_s)


@dataclass(frozen=True)
class LatticeSpec:
    """Parameters of a periodic hypercube: dimension d, half side L, spin S."""

    d: int
    L: int
    S: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.L < 1:
            raise ValueError(f"half side length must be >= 1, got {self.L}")
        _check_half_integer(self.S)

    @property
    def side(self):
        return 2 * self.L

    @property
    def n_sites(self):
        return self.side ** self.d

    @property
    def local_dim(self):
        return _check_half_integer(self.S) + 1

    @property
    def state_bits(self):
        """log2 of the full product-space dimension."""
        return self.n_sites * np.log2(self.local_dim)


@dataclass(frozen=True)
class Region:
    """Sites with |x|_inf <= R.  `clipped` marks intersection with the box."""

    R: int
    sites: np.ndarray
    clipped: bool = False

    @property
    def size(self):
        return int(self.sites.size)


@dataclass(frozen=True)
class RampField:
    """Plateau / linear ramp / zero profile around the origin.

    f = 1 for |x|_inf <= R+1, falls off linearly with slope 1/R out to
    |x|_inf = 2R, and vanishes beyond.  `clipped` marks lattices too small
    to hold the full profile, where the same formula is evaluated on the
    sites that do exist.
    """

    R: int
    values: np.ndarray
    clipped: bool = False


@dataclass(frozen=True)
class MomentumGrid:
    """All momenta p_i = pi*n_i/L with n_i in {-L+1,...,L}, plus dispersions."""

    integers: np.ndarray      # (n_p, d) integer labels n
    points: np.ndarray        # (n_p, d) momenta
    eps: np.ndarray           # d - sum_i cos(p_i)
    eps_prime: np.ndarray     # d + sum_i cos(p_i)

    @property
    def n_points(self):
        return self.points.shape[0]

    def index_of(self, p):
        """Index of an on-grid momentum; raises for off-grid input."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        diff = np.abs(self.points - p[None, :]).max(axis=1)
        k = int(np.argmin(diff))
        if diff[k] > 1e-9:
            raise ValueError(f"momentum {p} is not on the grid")
        return k


@dataclass(frozen=True)
class Lattice:
    """Immutable geometry: coordinates, sublattice signs, deduplicated bonds."""

    spec: LatticeSpec
    coords: np.ndarray      # (n, d) integer coordinates in {-L+1,...,L}
    signs: np.ndarray       # (n,) +1 on the even sublattice, -1 on the odd
    bonds: np.ndarray       # (nb, 2) site-index pairs, i < j, lexicographic
    bond_axes: np.ndarray   # (nb,) axis along which each bond steps

    _index: dict = field(repr=False, default_factory=dict)

    @property
    def n_sites(self):
        return self.spec.n_sites

    @property
    def n_bonds(self):
        return self.bonds.shape[0]

    def site_index(self, coord):
        return self._index[tuple(int(c) for c in coord)]

    def sup_norms(self):
        """|x|_inf per site, in the stored (unwrapped) coordinates."""
        return np.abs(self.coords).max(axis=1)

    def to_json_dict(self):
        """Geometry summary for report embedding."""
        return {
            "d": self.spec.d,
            "L": self.spec.L,
            "S": self.spec.S,
            "n_sites": int(self.n_sites),
            "n_bonds": int(self.n_bonds),
            "sites": [list(map(int, c)) for c in self.coords],
            "signs": [int(s) for s in self.signs],
            "bonds": [[int(a), int(b)] for a, b in self.bonds],
        }


def build_lattice(spec, max_state_bits=DEFAULT_STATE_BITS):
    """Construct the periodic hypercube described by `spec`.

    `max_state_bits` caps the implied Hilbert-space size; pass None for
    geometry-only lattices (ramp scans at large R) on which no operators
    will be built.  Wrap bonds that coincide with direct bonds on side-2
    lattices are kept with multiplicity one (set semantics over unordered
    pairs).
    """
    if max_state_bits is not None and spec.state_bits > max_state_bits:
        raise StateSpaceError(
            f"state space needs {spec.state_bits:.1f} bits > cap {max_state_bits}; "
            f"raise the cap only for geometry-only work"
        )
    d, L, side = spec.d, spec.L, spec.side
    axes_vals = np.arange(-L + 1, L + 1)
    grids = np.meshgrid(*([axes_vals] * d), indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
    signs = np.where(coords.sum(axis=1) % 2 == 0, 1, -1).astype(np.int64)

    index = {tuple(int(c) for c in row): i for i, row in enumerate(coords)}
    seen = {}
    for i, row in enumerate(coords):
        for axis in range(d):
            nb = row.copy()
            nb[axis] += 1
            if nb[axis] > L:
                nb[axis] = -L + 1
            j = index[tuple(int(c) for c in nb)]
            key = (min(i, j), max(i, j))
            if key not in seen:
                seen[key] = axis
    pairs = sorted(seen)
    bonds = np.array(pairs, dtype=np.int64).reshape(len(pairs), 2)
    bond_axes = np.array([seen[k] for k in pairs], dtype=np.int64)
    return Lattice(spec=spec, coords=coords, signs=signs, bonds=bonds,
                   bond_axes=bond_axes, _index=index)


def region(lattice, R, clip=False):
    """Sites of the ball |x|_inf <= R.

    With clip=False the ball must fit inside the box (R <= L-1); with
    clip=True the intersection is returned and flagged, which is how the
    smallest benchmark lattices host local observables.
    """
    if R < 1:
        raise GeometryError(f"region radius must be >= 1, got R={R}")
    norms = lattice.sup_norms()
    sites = np.flatnonzero(norms <= R)
    full_size = (2 * R + 1) ** lattice.spec.d
    if sites.size != full_size:
        if not clip:
            raise GeometryError(
                f"region R={R} has {full_size} sites but only {sites.size} fit in "
                f"the box (need R <= L-1 = {lattice.spec.L - 1})"
            )
        return Region(R=R, sites=sites, clipped=True)
    return Region(R=R, sites=sites, clipped=False)


def ramp_field(lattice, R, clip=False):
    """Ramp profile f: 1 on the plateau, linear through the shell, 0 outside.

    The full profile needs the ball of radius 2R inside the box
    (2R <= L-1); clip=True evaluates the same formula on whatever sites
    exist and flags the result.
    """
    if R < 1:
        raise GeometryError(f"ramp radius must be >= 1, got R={R}")
    L = lattice.spec.L
    clipped = 2 * R > L - 1
    if clipped and not clip:
        raise GeometryError(
            f"ramp R={R} needs 2R <= L-1 but L={L}; the support would wrap"
        )
    norms = lattice.sup_norms().astype(float)
    values = np.clip(1.0 - (norms - (R + 1)) / R, 0.0, 1.0)
    return RampField(R=R, values=values, clipped=clipped)


def momentum_grid(lattice):
    """Momentum grid dual to the box, with both dispersions attached."""
    d, L = lattice.spec.d, lattice.spec.L
    axes_vals = np.arange(-L + 1, L + 1)
    grids = np.meshgrid(*([axes_vals] * d), indexing="ij")
    integers = np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
    points = np.pi * integers / L
    cos_sum = np.cos(points).sum(axis=1)
    return MomentumGrid(integers=integers, points=points,
                        eps=d - cos_sum, eps_prime=d + cos_sum)
