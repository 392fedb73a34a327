"""Coercivity of the blended operator and critical-strain sweeps.

The stability measure is the minimal H1 Rayleigh quotient over mean-zero
periodic displacements,

    c_min = min_u <A u, u> / |u'|^2_{l2},

which only sees the symmetric part of A.  It is computed as the smallest
generalized eigenvalue of the pencil (S, G) restricted to the mean-zero
subspace, where S = a*(A + A^T)/2 and G = a D^T D is the Gram matrix of
the H1 semi-norm (D the forward difference).  Constants span the shared
kernel of G and of the restricted S, so they are deflated by explicit
projection; the projected resolvent is applied through a bordered sparse
factorization (the non-symmetric blend makes S itself couple constants
to the complement, which is why the projection sits on both sides).

Small problems (2M <= dense_cutoff) go through a dense generalized
eigensolver; larger ones use shift-invert Lanczos with the shift placed
safely below the spectrum, warm-started along parameter sweeps.

A uniform stretch gamma enters the operators through their coefficients;
the critical strain is the largest grid point gamma = 1 + i*dgamma at
which c_min stays positive, located by a coarse scan plus bisection
(or an exact grid walk on request).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import bmat, csr_matrix
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from .blending import constant_profile, sample_beta, symmetric_profile
from .lattice import ChainConfig, PeriodicField, forward_diff, higher_diff, l2_norm
from .operators import (
    BandedPeriodicOperator,
    assemble_linear,
    bilinear,
    per_neighbor_operators,
)
from .potential import PairPotential


class EigenSolveError(RuntimeError):
    """Eigen-iteration failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class StrainSweepError(RuntimeError):
    """Critical-strain sweep could not bracket a stability loss.

    reason is 'unstable_at_start' (coercivity already lost at gamma = 1)
    or 'no_instability' (still coercive at gamma_max).
    """

    def __init__(self, message: str, reason: str):
        super().__init__(message)
        self.reason = reason


@dataclass
class CoercivityReport:
    """Result of one coercivity computation.

    residual is the generalized eigen-residual |S v - c G v| / |G v|
    (eigenvalue units); mode is the minimizing displacement, mean-zero
    and G-normalized.
    """

    c_min: float
    gamma: float
    L: int
    family: str
    M: int
    N: int
    iterations: int
    residual: float
    mode: np.ndarray = field(repr=False)


def h1_gram_sparse(config: ChainConfig):
    """G = a D^T D for the periodic forward difference D (sparse CSR)."""
    n = config.n_atoms
    a = config.a
    idx = np.arange(n)
    rows = np.concatenate([idx, idx, idx])
    cols = np.concatenate([idx, (idx + 1) % n, (idx - 1) % n])
    vals = np.concatenate([np.full(n, 2.0 / a), np.full(n, -1.0 / a), np.full(n, -1.0 / a)])
    return csr_matrix((vals, (rows, cols)), shape=(n, n))


def _weighted_sym_sparse(op: BandedPeriodicOperator):
    """S = a * (A + A^T) / 2 as sparse CSR."""
    return op.symmetric_part().to_sparse() * op.config.a


def _make_s_apply(op: BandedPeriodicOperator):
    """S v through the row-difference form of the symmetric part.

    The stencil entries are O(1/a^2) but cancel against each other; the
    difference form subtracts neighbor values before multiplying, which
    keeps the roundoff at the scale of the result instead of the entries.
    """
    sym = op.symmetric_part()
    a = op.config.a

    def s_apply(v):
        return sym.apply_values(v) * a

    return s_apply


def _make_g_apply(config: ChainConfig):
    """G v = a D^T D v evaluated as a second difference."""
    a = config.a

    def g_apply(v):
        return (2.0 * v - np.roll(v, -1) - np.roll(v, 1)) / a

    return g_apply


def _circulant_cmin(op: BandedPeriodicOperator):
    """Exact minimum quotient for constant-coefficient (circulant) operators.

    Fourier modes diagonalize both the operator's symmetric part and the
    H1 Gram matrix, so the quotient at wavenumber theta_m = 2 pi m / 2M is

        q_m = a * sum_o d_o cos(o theta_m) / (4 sin^2(theta_m / 2) / a),

    minimized over m = 1 .. 2M-1.
    """
    config = op.config
    n = config.n_atoms
    a = config.a
    theta = 2.0 * np.pi * np.arange(1, n) / n
    sym = np.zeros(n - 1)
    for o, d in op.diagonals.items():
        sym += d[0] * np.cos(o * theta)
    quot = (a * sym) / (4.0 * np.sin(theta / 2.0) ** 2 / a)
    m_star = int(np.argmin(quot)) + 1
    lam = float(quot[m_star - 1])
    # reduce the phase modulo the period in exact integer arithmetic;
    # large raw angles would cost ~m*p*eps of phase accuracy
    phase = (m_star * np.arange(n, dtype=np.int64)) % n
    v = np.cos(2.0 * np.pi * phase / n)
    v = v - v.mean()
    s_apply = _make_s_apply(op)
    g_apply = _make_g_apply(config)
    v = v / np.sqrt(v @ g_apply(v))
    sv = s_apply(v)
    sv = sv - sv.mean()
    gv = g_apply(v)
    res = float(np.linalg.norm(sv - lam * gv) / np.linalg.norm(gv))
    return lam, v, res, 0


def _dense_cmin(op: BandedPeriodicOperator):
    from scipy.linalg import eigh, null_space

    n = op.config.n_atoms
    A = op.to_dense()
    S = op.config.a * 0.5 * (A + A.T)
    G = h1_gram_sparse(op.config).toarray()
    Q = null_space(np.ones((1, n)))  # orthonormal basis of the mean-zero subspace
    Sp = Q.T @ S @ Q
    Gp = Q.T @ G @ Q
    w, z = eigh(Sp, Gp, subset_by_index=[0, 0])
    v = Q @ z[:, 0]
    v = v - v.mean()
    s_apply = _make_s_apply(op)
    g_apply = _make_g_apply(op.config)
    v = v / np.sqrt(v @ g_apply(v))
    lam = float(v @ s_apply(v))  # v is G-normalized
    # pencil residual in eigenvalue units; constants are projected out of
    # S v since they sit outside the admissible space
    sv = s_apply(v)
    sv = sv - sv.mean()
    gv = g_apply(v)
    res = float(np.linalg.norm(sv - lam * gv) / np.linalg.norm(gv))
    return lam, v, res, 0


def _bordered_lu(S, G, sigma, ebar):
    """Factor [[S - sigma G, e], [e^T, 0]]; natural ordering keeps the
    band structure (the matrix is strongly dominant at the safe shift)."""
    K = bmat(
        [[S - sigma * G, ebar.reshape(-1, 1)], [ebar.reshape(1, -1), None]],
        format="csc",
    )
    return splu(K, permc_spec="NATURAL")


def _iterative_cmin(op, x0, tol, maxiter):
    config = op.config
    n = config.n_atoms
    a = config.a
    S = _weighted_sym_sparse(op)
    G = h1_gram_sparse(config)
    s_apply = _make_s_apply(op)
    g_apply = _make_g_apply(config)
    ebar = np.full(n, 1.0 / np.sqrt(n))

    def project(x):
        return x - (ebar @ x) * ebar

    def residual_of(v):
        """G-normalized copy, its quotient, and the pencil residual
        |P S v - lam G v| / |G v| (eigenvalue units)."""
        v = project(v)
        v = v / np.sqrt(v @ g_apply(v))
        lam = float(v @ s_apply(v))
        sv = project(s_apply(v))
        gv = g_apply(v)
        return v, lam, float(np.linalg.norm(sv - lam * gv) / np.linalg.norm(gv))

    fb = op.form_bound
    if fb is None:
        fb = float(np.max(np.abs(op.diagonals.get(0, np.zeros(n))))) * a * a
    sigma = -(2.0 * fb + 50.0)  # strictly below the H1 quotient range
    tau_g = 1.0
    tau_s = 100.0 * (2.0 * fb + 100.0)  # pinned eigenvalue, far above the physical ones

    if x0 is not None and np.shape(x0) == (n,):
        v0 = project(np.asarray(x0, dtype=float))
    else:
        rng = np.random.default_rng(7)
        v0 = project(rng.standard_normal(n))
    nv0 = np.linalg.norm(v0)
    if nv0 == 0.0:
        raise ValueError("initial vector has no mean-zero component")
    v0 = v0 / nv0

    lu = _bordered_lu(S, G, sigma, ebar)
    counter = {"solves": 0}

    def solve_projected(b):
        counter["solves"] += 1
        z = lu.solve(np.append(project(b), 0.0))
        return project(z[:n])

    def op_inv(b):
        return solve_projected(b) + (ebar @ b) / (tau_s - sigma * tau_g) * ebar

    def a_mv(x):
        return project(s_apply(project(x))) + tau_s * (ebar @ x) * ebar

    def m_mv(x):
        return g_apply(x) + tau_g * (ebar @ x) * ebar

    k = min(4, n - 2)
    try:
        vals, vecs = eigsh(
            LinearOperator((n, n), matvec=a_mv, dtype=float),
            k=k,
            M=LinearOperator((n, n), matvec=m_mv, dtype=float),
            sigma=sigma,
            which="LM",
            mode="normal",
            OPinv=LinearOperator((n, n), matvec=op_inv, dtype=float),
            v0=v0,
            maxiter=maxiter,
            # on tightly clustered spectra a machine-precision residual is
            # unattainable (Ritz residuals floor at the local eigenvalue
            # spacing); converge loosely here and refine below
            tol=1e-7,
        )
    except ArpackNoConvergence as exc:
        raise EigenSolveError(
            f"eigen-iteration did not converge within {maxiter} iterations",
            float("nan"),
        ) from exc

    v, lam, res = residual_of(vecs[:, int(np.argmin(vals))])

    # Lanczos residuals come back through the shift-invert transform and can
    # sit near the contract; polish with inverse iterations on the existing
    # factorization, then a Rayleigh-shifted factorization if needed.
    steps = 0
    while res > tol * (abs(lam) + 1.0) and steps < 60:
        v, lam, res = residual_of(solve_projected(g_apply(v)))
        steps += 1
    rounds = 0
    while res > 0.5e-8 * (abs(lam) + 1.0) and rounds < 3:
        shift = lam - 1e-9 * (abs(lam) + 1.0)
        try:
            lu_r = _bordered_lu(S, G, shift, ebar)
            z = lu_r.solve(np.append(project(g_apply(v)), 0.0))
            counter["solves"] += 1
            v, lam, res = residual_of(project(z[:n]))
        except RuntimeError:  # factorization hit the eigenvalue exactly
            break
        rounds += 1
    return lam, v, res, counter["solves"]


def coercivity_constant(
    op: BandedPeriodicOperator,
    *,
    gamma: float = 1.0,
    L: int = 0,
    family: str = "",
    x0: np.ndarray | None = None,
    dense_cutoff: int = 256,
    tol: float = 1e-10,
    maxiter: int = 10000,
) -> CoercivityReport:
    """Minimal H1 Rayleigh quotient of the operator over mean-zero fields.

    gamma, L and family are carried through into the report for sweep
    bookkeeping.  x0 warm-starts the iterative eigensolver.  Raises
    EigenSolveError when the eigen-residual cannot be driven down.

    Constant-coefficient operators (pure atomistic and continuum) take an
    exact Fourier route; otherwise small chains use a dense generalized
    eigensolver and large ones shift-invert Lanczos.
    """
    config = op.config
    if all(np.ptp(d) == 0.0 for d in op.diagonals.values()):
        lam, v, res, iters = _circulant_cmin(op)
    elif config.M <= dense_cutoff:
        lam, v, res, iters = _dense_cmin(op)
    else:
        lam, v, res, iters = _iterative_cmin(op, x0, tol, maxiter)
    report = CoercivityReport(
        c_min=lam,
        gamma=gamma,
        L=L,
        family=family,
        M=config.M,
        N=config.N,
        iterations=iters,
        residual=res,
        mode=v,
    )
    if not res <= 1e-8 * (abs(lam) + 1.0):
        raise EigenSolveError(
            f"eigen-residual {res:.3e} exceeds 1e-8 * (|c_min| + 1)", res
        )
    return report


def critical_strain(
    build_operator,
    dgamma: float = 1e-5,
    gamma_max: float = 1.5,
    *,
    coarse: float = 1e-3,
    scan_exact: bool = False,
    report_sink=None,
    coercivity_kwargs: dict | None = None,
) -> float:
    """Largest grid stretch gamma = 1 + i*dgamma with positive coercivity.

    build_operator(gamma) must return the assembled operator at that
    stretch.  The scan walks a coarse grid (default 1e-3) until the first
    non-positive c_min and bisects the bracketing cell down to the dgamma
    grid; detection therefore assumes a single sign change (the coarse
    values are monitored and a non-monotone step triggers a warning).
    With scan_exact the grid is walked in steps of dgamma directly.
    """
    if dgamma <= 0:
        raise ValueError(f"dgamma must be positive, got {dgamma}")
    if gamma_max <= 1.0:
        raise ValueError(f"gamma_max must exceed 1, got {gamma_max}")
    kwargs = dict(coercivity_kwargs or {})
    state = {"mode": None}

    def evaluate(i_units: int) -> CoercivityReport:
        gamma = 1.0 + i_units * dgamma
        rep = coercivity_constant(
            build_operator(gamma), gamma=gamma, x0=state["mode"], **kwargs
        )
        state["mode"] = rep.mode
        if report_sink is not None:
            report_sink(rep)
        return rep

    rep = evaluate(0)
    if rep.c_min <= 0.0:
        raise StrainSweepError(
            f"operator is not coercive at gamma = 1 (c_min = {rep.c_min:.6g})",
            "unstable_at_start",
        )

    step = 1 if scan_exact else max(1, int(round(coarse / dgamma)))
    max_units = int(np.floor((gamma_max - 1.0) / dgamma))
    prev_units, prev_c = 0, rep.c_min
    bracket = None
    i = step
    while i <= max_units:
        rep = evaluate(i)
        if rep.c_min > prev_c + 1e-9 * (abs(prev_c) + 1.0):
            warnings.warn(
                f"coercivity increased from gamma={1 + prev_units * dgamma:.6f} "
                f"to gamma={1 + i * dgamma:.6f}; sweep assumes a single sign change",
                RuntimeWarning,
                stacklevel=2,
            )
        if rep.c_min <= 0.0:
            bracket = (prev_units, i)
            break
        prev_units, prev_c = i, rep.c_min
        i += step
    if bracket is None:
        raise StrainSweepError(
            f"coercivity still positive at gamma_max = {gamma_max} (c_min = {prev_c:.6g})",
            "no_instability",
        )

    lo, hi = bracket
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if evaluate(mid).c_min > 0.0:
            lo = mid
        else:
            hi = mid
    return 1.0 + lo * dgamma


@dataclass
class DecompositionReport:
    """Both sides of the next-nearest-neighbor bilinear-form identity.

    direct is <F_2 u, u> evaluated through the assembled operator;
    via_identity is T1 + T2 + R + S with

        T1 = 4 phi_xx(2g) |u'|^2
        T2 = -phi_xx(2g) a^2 |sqrt(beta) u''|^2
             + phi_xx(2g) a^2 |sqrt(|beta''|) u'|^2
        R, S = twice the printed residual sums.

    t2_signed replaces |beta''| by the signed beta'' weight; the signed
    variant is reported alongside because the absolute value in the
    identity is suspect (see term_table()).
    """

    T1: float
    T2: float
    R: float
    S: float
    direct: float
    via_identity: float
    identity_residual: float
    t2_signed: float
    via_identity_signed: float
    identity_residual_signed: float

    def term_table(self) -> str:
        rows = [
            ("direct  <F_2 u, u>", self.direct),
            ("T1      4 c2 |u'|^2", self.T1),
            ("T2      c2 a^2 (|sqrt(|b''|) u'|^2 - |sqrt(b) u''|^2)", self.T2),
            ("R       residual sum (x2)", self.R),
            ("S       residual sum (x2)", self.S),
            ("sum     T1 + T2 + R + S", self.via_identity),
            ("residual (as printed)", self.identity_residual),
            ("T2 with signed b'' weight", self.t2_signed),
            ("sum with signed b''", self.via_identity_signed),
            ("residual (signed variant)", self.identity_residual_signed),
        ]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value: .12e}" for name, value in rows)


def decompose_bilinear_n2(
    u: PeriodicField,
    beta: PeriodicField,
    pot: PairPotential,
    config: ChainConfig,
    gamma: float = 1.0,
) -> DecompositionReport:
    """Evaluate <F_2 u, u> directly and through its norm decomposition.

    Requires N = 2.  The decomposition terms use the package's exact
    difference stencils for u', u'', beta', beta'', beta'''.
    """
    if config.N != 2:
        raise ValueError(f"decomposition requires N = 2, got N = {config.N}")
    a = config.a
    c2 = float(pot.phi_xx(2.0 * gamma))

    op2 = per_neighbor_operators("bqcf", pot, config, beta, gamma)[1]
    direct = bilinear(op2, u, u)

    up = forward_diff(u)
    upp = higher_diff(u, 2)
    b1 = forward_diff(beta)
    b2 = higher_diff(beta, 2)
    b3 = higher_diff(beta, 3)

    norm_up_sq = l2_norm(up) ** 2
    sqrt_beta_upp_sq = float(np.sum(beta.values * upp.values**2) * a)
    abs_bpp_up_sq = float(np.sum(np.abs(b2.values) * up.values**2) * a)
    signed_bpp_up_sq = float(np.sum(b2.values * up.values**2) * a)

    r_printed = (
        0.5
        * c2
        * a**3
        * float(
            np.sum(
                up.values * np.roll(b3.values, 1) * np.roll(u.values, 1)
                - upp.values * b2.values * up.values * a
            )
        )
    )
    s_printed = (
        0.5
        * c2
        * a**2
        * float(
            np.sum(
                up.values
                * (b1.values * up.values - np.roll(b1.values, 2) * np.roll(up.values, 2))
            )
        )
    )

    T1 = 4.0 * c2 * norm_up_sq
    T2 = -c2 * a**2 * sqrt_beta_upp_sq + c2 * a**2 * abs_bpp_up_sq
    t2_signed = -c2 * a**2 * sqrt_beta_upp_sq + c2 * a**2 * signed_bpp_up_sq
    R = 2.0 * r_printed
    S = 2.0 * s_printed

    via = T1 + T2 + R + S
    via_signed = T1 + t2_signed + R + S
    scale = max(abs(direct), abs(via), 1e-30)
    scale_signed = max(abs(direct), abs(via_signed), 1e-30)
    return DecompositionReport(
        T1=T1,
        T2=T2,
        R=R,
        S=S,
        direct=direct,
        via_identity=via,
        identity_residual=abs(direct - via) / scale,
        t2_signed=t2_signed,
        via_identity_signed=via_signed,
        identity_residual_signed=abs(direct - via_signed) / scale_signed,
    )


def blend_size_for_rule(rule: str, M: int, fixed: int | None = None) -> int:
    """Blend size prescribed by a growth rule: 'M^(1/5)', 'M^(1/3)' or 'fixed'."""
    if rule == "M^(1/5)":
        return int(np.ceil(M ** (1.0 / 5.0)))
    if rule == "M^(1/3)":
        return int(np.ceil(M ** (1.0 / 3.0)))
    if rule == "fixed":
        if fixed is None or fixed < 1:
            raise ValueError("fixed rule needs a positive blend size")
        return int(fixed)
    raise ValueError(f"unknown blend-size rule {rule!r}")


def scaling_study(
    family: str,
    L_rule: str,
    M_list,
    pot: PairPotential,
    N: int,
    *,
    gamma: float = 1.0,
    fixed_L: int | None = None,
    core_fraction: float = 0.5,
    dense_cutoff: int = 256,
) -> list:
    """Coercivity of the blended operator as the chain grows.

    For each M the blend size follows L_rule and the operator is
    assembled at the given stretch; returns one CoercivityReport per M.
    """
    if list(M_list) != sorted(M_list):
        raise ValueError("M_list must be sorted ascending")
    reports = []
    for M in M_list:
        config = ChainConfig(M=M, N=N)
        L = blend_size_for_rule(L_rule, M, fixed_L)
        if family in ("constant_one", "constant_zero"):
            profile = constant_profile(family)
        else:
            profile = symmetric_profile(config, family, L, core_fraction)
        beta = sample_beta(profile, config)
        op = assemble_linear("bqcf", pot, config, beta, gamma)
        reports.append(
            coercivity_constant(
                op, gamma=gamma, L=L, family=family, dense_cutoff=dense_cutoff
            )
        )
    return reports
