"""Force operators and energies for the periodic chain.

Three linearized force operators act on periodic displacements, all
linearized about the uniformly stretched state y = gamma*x (so every
stencil coefficient is phi_xx(k*gamma); gamma = 1 recovers the
reference linearization):

    atomistic   F_ell = -sum_k phi_xx(k g) (u_{ell+k} - 2 u_ell + u_{ell-k}) / a^2
    continuum   F_ell = -(sum_k k^2 phi_xx(k g)) (u_{ell+1} - 2 u_ell + u_{ell-1}) / a^2
    blended     per neighbor k, the pair weight
                w_{ell,k} = (beta_{ell-k} + 2 beta_ell + beta_{ell+k}) / 4
                multiplies the atomistic k-stencil and (1 - w_{ell,k})
                multiplies k^2 times the nearest stencil.

With this sign convention the quadratic form <F u, u> is positive for
stable configurations, e.g. <F u, u> = phi_xx(1) |u'|^2 for N = 1.

Operators are stored as 2N+1 periodic diagonals and applied in the
row-difference form

    (A u)_ell = sum_{o != 0} d_o[ell] (u_{ell+o} - u_ell) + rowsum[ell] u_ell,

which annihilates constant fields exactly in floating point whenever the
row sums vanish (true for every assembled operator here).

The nonlinear atomistic force and the energy functionals (nonlinear
atomistic, linearized atomistic/continuum) live here too.

Operators are immutable once assembled and safe to share across
threads; assembly and application have no shared mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blending import pair_weight_field
from .lattice import ChainConfig, PeriodicField, forward_diff, inner
from .potential import PairPotential


@dataclass
class BandedPeriodicOperator:
    """Periodic banded matrix stored as per-offset diagonals.

    diagonals[o][p] is the entry coupling row p to column (p+o) mod 2M.
    form_bound, when set, is sum_k k^2 |phi_xx(k gamma)|, a safe scale
    for the operator's H1 Rayleigh quotient used by the eigensolver.
    row_sums may be supplied when known analytically (assembly passes
    exact zeros; sums of operators propagate them), otherwise it is
    recomputed from the diagonals.
    """

    config: ChainConfig
    diagonals: dict
    form_bound: float | None = None
    row_sums: np.ndarray | None = None

    def __post_init__(self):
        n = self.config.n_atoms
        clean = {}
        for o in sorted(self.diagonals):
            arr = np.asarray(self.diagonals[o], dtype=float)
            if arr.shape == ():
                arr = np.full(n, float(arr))
            if arr.shape != (n,):
                raise ValueError(f"diagonal {o} has shape {arr.shape}, expected ({n},)")
            if abs(o) > self.config.N:
                raise ValueError(f"offset {o} exceeds interaction range N={self.config.N}")
            clean[int(o)] = arr
        self.diagonals = clean
        if self.row_sums is None:
            # off-diagonals first, in sorted order, so a diagonal built as
            # the negated sorted sum of the others cancels bit-for-bit
            rs = np.zeros(n)
            for o in sorted(clean):
                if o != 0:
                    rs = rs + clean[o]
            if 0 in clean:
                rs = rs + clean[0]
            self.row_sums = rs
        else:
            self.row_sums = np.asarray(self.row_sums, dtype=float)
            if self.row_sums.shape != (n,):
                raise ValueError("row_sums has wrong shape")

    @property
    def bandwidth(self) -> int:
        return max((abs(o) for o in self.diagonals), default=0)

    def apply_values(self, v: np.ndarray) -> np.ndarray:
        """Matrix-vector product on a raw value array.

        Uses the row-difference form, which annihilates constants exactly
        whenever row_sums is exactly zero.
        """
        out = self.row_sums * v
        for o in sorted(self.diagonals):
            if o == 0:
                continue
            out = out + self.diagonals[o] * (np.roll(v, -o) - v)
        return out

    def apply(self, u: PeriodicField) -> PeriodicField:
        if u.config != self.config:
            raise ValueError("field and operator configs differ")
        return PeriodicField(self.config, self.apply_values(u.values))

    def to_dense(self) -> np.ndarray:
        n = self.config.n_atoms
        A = np.zeros((n, n))
        idx = np.arange(n)
        for o, d in self.diagonals.items():
            A[idx, (idx + o) % n] += d
        return A

    def transpose(self) -> "BandedPeriodicOperator":
        """Transpose; its row sums are this operator's column sums."""
        diags = {-o: np.roll(d, o) for o, d in self.diagonals.items()}
        return BandedPeriodicOperator(self.config, diags, self.form_bound)

    def symmetric_part(self) -> "BandedPeriodicOperator":
        t = self.transpose()
        offs = set(self.diagonals) | set(t.diagonals)
        n = self.config.n_atoms
        diags = {
            o: 0.5 * (self.diagonals.get(o, 0.0) + t.diagonals.get(o, np.zeros(n)))
            for o in offs
        }
        rs = 0.5 * (self.row_sums + t.row_sums)
        return BandedPeriodicOperator(self.config, diags, self.form_bound, rs)

    def add(self, other: "BandedPeriodicOperator") -> "BandedPeriodicOperator":
        if other.config != self.config:
            raise ValueError("operator configs differ")
        offs = sorted(set(self.diagonals) | set(other.diagonals))
        n = self.config.n_atoms
        diags = {
            o: self.diagonals.get(o, np.zeros(n)) + other.diagonals.get(o, np.zeros(n))
            for o in offs
        }
        fb = None
        if self.form_bound is not None and other.form_bound is not None:
            fb = self.form_bound + other.form_bound
        return BandedPeriodicOperator(
            self.config, diags, fb, self.row_sums + other.row_sums
        )

    def to_sparse(self):
        """CSR matrix (scipy) with periodic wraparound."""
        from scipy.sparse import csr_matrix

        n = self.config.n_atoms
        idx = np.arange(n)
        rows, cols, vals = [], [], []
        for o, d in self.diagonals.items():
            rows.append(idx)
            cols.append((idx + o) % n)
            vals.append(d)
        return csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )


def dump_dense_csv(op: BandedPeriodicOperator, path) -> None:
    """Debug dump as a dense CSV matrix (row-major, 2M columns)."""
    np.savetxt(path, op.to_dense(), delimiter=",")


def _zero_row_sum_diagonal(diags: dict, n: int) -> np.ndarray:
    """Diagonal making row sums vanish, matching the reduction order used
    in BandedPeriodicOperator so the cancellation is exact in floats."""
    s = np.zeros(n)
    for o in sorted(diags):
        if o != 0:
            s = s + diags[o]
    return -s


def _accumulate(diags: dict, offset: int, values, n: int) -> None:
    arr = diags.get(offset)
    if arr is None:
        arr = np.zeros(n)
    diags[offset] = arr + np.broadcast_to(values, (n,))


def per_neighbor_operators(
    which: str,
    pot: PairPotential,
    config: ChainConfig,
    beta: PeriodicField | None = None,
    gamma: float = 1.0,
) -> list:
    """One operator per neighbor index k = 1..N; their sum is the full model.

    which: 'atomistic' | 'continuum' | 'bqcf'.  beta is only consulted for
    'bqcf'.  All coefficients are evaluated at the stretched bond length
    k*gamma.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if which not in ("atomistic", "continuum", "bqcf"):
        raise ValueError(f"unknown operator kind {which!r}")
    if which == "bqcf":
        if beta is None:
            raise ValueError("bqcf assembly needs a sampled blending field")
        if beta.config != config:
            raise ValueError("beta sampled on a different config")
    n = config.n_atoms
    inv_a2 = float(config.M) ** 2
    ops = []
    for k in range(1, config.N + 1):
        c = float(pot.phi_xx(k * gamma))
        diags: dict = {}
        if which == "atomistic":
            _accumulate(diags, k, -c * inv_a2, n)
            _accumulate(diags, -k, -c * inv_a2, n)
        elif which == "continuum":
            _accumulate(diags, 1, -(c * k * k) * inv_a2, n)
            _accumulate(diags, -1, -(c * k * k) * inv_a2, n)
        else:
            w = pair_weight_field(beta, k)
            _accumulate(diags, k, -(w * c) * inv_a2, n)
            _accumulate(diags, -k, -(w * c) * inv_a2, n)
            _accumulate(diags, 1, -((1.0 - w) * (c * k * k)) * inv_a2, n)
            _accumulate(diags, -1, -((1.0 - w) * (c * k * k)) * inv_a2, n)
        diags[0] = _zero_row_sum_diagonal(diags, n)
        ops.append(
            BandedPeriodicOperator(
                config, diags, form_bound=k * k * abs(c), row_sums=np.zeros(n)
            )
        )
    return ops


def assemble_linear(
    which: str,
    pot: PairPotential,
    config: ChainConfig,
    beta: PeriodicField | None = None,
    gamma: float = 1.0,
) -> BandedPeriodicOperator:
    """Assemble the full linearized force operator (sum over neighbors)."""
    ops = per_neighbor_operators(which, pot, config, beta, gamma)
    full = ops[0]
    for op in ops[1:]:
        full = full.add(op)
    return full


def apply(op: BandedPeriodicOperator, u: PeriodicField) -> PeriodicField:
    """Matrix-vector product with periodic wraparound."""
    return op.apply(u)


def bilinear(op: BandedPeriodicOperator, u: PeriodicField, v: PeriodicField) -> float:
    """<A u, v> in the a-weighted inner product."""
    return inner(op.apply(u), v)


def _stretched_bonds(u: PeriodicField, k: int, gamma: float) -> np.ndarray:
    """Signed bond arguments gamma*k + (u_{ell+k} - u_ell)/a for one k."""
    v = u.values
    return gamma * k + (np.roll(v, -k) - v) * u.config.M


def _check_bonds_positive(u: PeriodicField, config: ChainConfig, gamma: float) -> None:
    for k in range(1, config.N + 1):
        b = _stretched_bonds(u, k, gamma)
        if np.any(b <= 0.0):
            raise ValueError(
                f"non-physical configuration: bond of neighbor {k} crosses (min {b.min():.3g})"
            )


def energy_atomistic(
    u: PeriodicField, pot: PairPotential, config: ChainConfig, gamma: float = 1.0
) -> float:
    """Total interaction energy of the deformation y = gamma*x + u.

    E = sum_ell sum_{k=-N..N, k!=0} (a/2) phi((y_{ell+k} - y_ell)/a),
    where bonds crossing the periodic seam use the periodic image of u
    (so the bond argument is gamma*k + (u_{ell+k} - u_ell)/a).  The
    potential is even, so the k < 0 half equals the k > 0 half and the
    sum folds to sum_ell sum_{k=1..N} a phi(bond).
    """
    _check_bonds_positive(u, config, gamma)
    a = config.a
    total = 0.0
    for k in range(1, config.N + 1):
        total += float(np.sum(pot.phi(_stretched_bonds(u, k, gamma)))) * a
    return total


def energy_linearized(
    u: PeriodicField,
    pot: PairPotential,
    config: ChainConfig,
    which: str,
    gamma: float = 1.0,
) -> float:
    """Quadratic energy of the linearized atomistic or continuum model.

    atomistic:  sum_ell sum_k (a/2) ((u_{ell+k}-u_ell)/a)^2 phi_xx(k g)
    continuum:  sum_ell sum_k (a/2) k^2 (u'_ell)^2 phi_xx(k g)
    (both folded over +-k).
    """
    a = config.a
    if which == "atomistic":
        total = 0.0
        for k in range(1, config.N + 1):
            d = (u.shifted(k) - u.values) * config.M
            total += 0.5 * a * float(pot.phi_xx(k * gamma)) * float(np.sum(d * d))
        return total
    if which == "continuum":
        du = forward_diff(u).values
        coef = sum(
            k * k * float(pot.phi_xx(k * gamma)) for k in range(1, config.N + 1)
        )
        return 0.5 * a * coef * float(np.sum(du * du))
    raise ValueError(f"which must be 'atomistic' or 'continuum', got {which!r}")


def force_nonlinear_atomistic(
    u: PeriodicField, pot: PairPotential, config: ChainConfig, gamma: float = 1.0
) -> PeriodicField:
    """Nonlinear atomistic force at the deformation y = gamma*x + u.

    F_ell = -sum_{k=-N..N, k!=0} (1/2a) [phi_x(g k + (u_{ell+k}-u_ell)/a)
                                         - phi_x(g k + (u_ell-u_{ell-k})/a)],
    which equals (1/a) times the gradient of energy_atomistic.  The odd
    extension of phi_x supplies the k < 0 terms.
    """
    _check_bonds_positive(u, config, gamma)
    v = u.values
    M = config.M
    out = np.zeros(config.n_atoms)
    half_inv_a = 0.5 * M
    for k in list(range(1, config.N + 1)) + [-k for k in range(1, config.N + 1)]:
        fwd = pot.phi_x(gamma * k + (np.roll(v, -k) - v) * M)
        bwd = pot.phi_x(gamma * k + (v - np.roll(v, k)) * M)
        out -= half_inv_a * (fwd - bwd)
    return PeriodicField(config, out)
