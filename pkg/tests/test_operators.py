import numpy as np
import pytest

from bqcf.blending import constant_profile, sample_beta, symmetric_profile
from bqcf.lattice import ChainConfig, PeriodicField, forward_diff, h1_seminorm, inner
from bqcf.operators import (
    BandedPeriodicOperator,
    assemble_linear,
    bilinear,
    dump_dense_csv,
    energy_atomistic,
    energy_linearized,
    force_nonlinear_atomistic,
    per_neighbor_operators,
)
from conftest import loglog_slope


def random_field(cfg, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return PeriodicField(cfg, scale * rng.standard_normal(cfg.n_atoms))


def cubic_beta(cfg, L=3):
    return sample_beta(symmetric_profile(cfg, "cubic", L), cfg)


def brute_force_energy(u, pot, cfg, gamma=1.0):
    """Literal double sum over ell and k = -N..N, k != 0."""
    total = 0.0
    ells = cfg.logical_indices()
    for ell in ells:
        for k in range(-cfg.N, cfg.N + 1):
            if k == 0:
                continue
            bond = gamma * k + (u.at(ell + k) - u.at(ell)) / cfg.a
            total += 0.5 * cfg.a * float(pot.phi(bond))
    return total


def dense_bqcf(pot, cfg, beta, gamma=1.0):
    return assemble_linear("bqcf", pot, cfg, beta, gamma).to_dense()


# ---------------------------------------------------------------- operators


def test_apply_annihilates_constants_exactly(morse):
    for which, gamma in (("atomistic", 1.0), ("continuum", 1.2), ("bqcf", 1.1)):
        cfg = ChainConfig(M=20, N=2)
        op = assemble_linear(which, morse, cfg, cubic_beta(cfg), gamma)
        c = PeriodicField(cfg, np.full(cfg.n_atoms, -3.7))
        assert np.max(np.abs(op.apply(c).values)) == 0.0


def test_apply_matches_dense_oracle(morse):
    cfg = ChainConfig(M=8, N=2)
    op = assemble_linear("bqcf", morse, cfg, cubic_beta(cfg, 2), 1.05)
    u = random_field(cfg, 3)
    dense = op.to_dense() @ u.values
    banded = op.apply(u).values
    scale = np.max(np.abs(dense)) + 1.0
    assert np.max(np.abs(dense - banded)) / scale < 1e-13


def test_apply_linearity(morse):
    cfg = ChainConfig(M=8, N=2)
    op = assemble_linear("atomistic", morse, cfg)
    u, v = random_field(cfg, 1), random_field(cfg, 2)
    lhs = op.apply(PeriodicField(cfg, 2.5 * u.values - 0.5 * v.values)).values
    rhs = 2.5 * op.apply(u).values - 0.5 * op.apply(v).values
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-9)


def test_transpose_and_symmetric_part_match_dense(morse):
    cfg = ChainConfig(M=8, N=2)
    op = assemble_linear("bqcf", morse, cfg, cubic_beta(cfg, 2), 1.0)
    A = op.to_dense()
    np.testing.assert_allclose(op.transpose().to_dense(), A.T, atol=1e-12)
    np.testing.assert_allclose(
        op.symmetric_part().to_dense(), 0.5 * (A + A.T), atol=1e-12
    )


def test_bandwidth_within_interaction_range(morse):
    cfg = ChainConfig(M=10, N=3)
    op = assemble_linear("bqcf", morse, cfg, cubic_beta(cfg, 2), 1.0)
    assert op.bandwidth <= cfg.N
    with pytest.raises(ValueError):
        BandedPeriodicOperator(cfg, {4: np.ones(cfg.n_atoms)})


def test_beta_one_degenerates_to_atomistic(morse):
    cfg = ChainConfig(M=12, N=3)
    beta1 = sample_beta(constant_profile("constant_one"), cfg)
    bq = assemble_linear("bqcf", morse, cfg, beta1, 1.07)
    at = assemble_linear("atomistic", morse, cfg, gamma=1.07)
    offsets = set(bq.diagonals) | set(at.diagonals)
    for o in offsets:
        lhs = bq.diagonals.get(o, np.zeros(cfg.n_atoms))
        rhs = at.diagonals.get(o, np.zeros(cfg.n_atoms))
        assert np.array_equal(lhs, rhs), f"offset {o} differs"


def test_beta_zero_degenerates_to_continuum(morse):
    cfg = ChainConfig(M=12, N=3)
    beta0 = sample_beta(constant_profile("constant_zero"), cfg)
    bq = assemble_linear("bqcf", morse, cfg, beta0, 1.07)
    co = assemble_linear("continuum", morse, cfg, gamma=1.07)
    offsets = set(bq.diagonals) | set(co.diagonals)
    for o in offsets:
        lhs = bq.diagonals.get(o, np.zeros(cfg.n_atoms))
        rhs = co.diagonals.get(o, np.zeros(cfg.n_atoms))
        assert np.array_equal(lhs, rhs), f"offset {o} differs"


def test_per_neighbor_sum_is_full_operator(morse):
    cfg = ChainConfig(M=10, N=3)
    beta = cubic_beta(cfg, 2)
    parts = per_neighbor_operators("bqcf", morse, cfg, beta, 1.1)
    total = parts[0]
    for p in parts[1:]:
        total = total.add(p)
    full = assemble_linear("bqcf", morse, cfg, beta, 1.1)
    assert set(total.diagonals) == set(full.diagonals)
    for o in full.diagonals:
        assert np.array_equal(total.diagonals[o], full.diagonals[o])


def test_bqcf_matches_brute_force_formula(morse):
    # row-by-row evaluation of the blended stencil as written
    cfg = ChainConfig(M=8, N=2)
    beta = cubic_beta(cfg, 2)
    u = random_field(cfg, 7)
    op = assemble_linear("bqcf", morse, cfg, beta, 1.0)
    got = op.apply(u).values
    ells = cfg.logical_indices()
    a2 = cfg.a**2
    expected = np.zeros(cfg.n_atoms)
    for p, ell in enumerate(ells):
        acc = 0.0
        for k in range(1, cfg.N + 1):
            c = float(morse.phi_xx(float(k)))
            w = (beta.at(ell - k) + 2 * beta.at(ell) + beta.at(ell + k)) / 4.0
            acc -= w * c * (u.at(ell + k) - 2 * u.at(ell) + u.at(ell - k)) / a2
            acc -= (
                (1 - w) * c * k * k * (u.at(ell + 1) - 2 * u.at(ell) + u.at(ell - 1)) / a2
            )
        expected[p] = acc
    scale = np.max(np.abs(expected)) + 1.0
    assert np.max(np.abs(got - expected)) / scale < 1e-12


def test_assemble_validation(morse):
    cfg = ChainConfig(M=8, N=2)
    with pytest.raises(ValueError):
        assemble_linear("bqcf", morse, cfg)  # beta missing
    with pytest.raises(ValueError):
        assemble_linear("atomistic", morse, cfg, gamma=0.0)
    with pytest.raises(ValueError):
        assemble_linear("magic", morse, cfg)


def test_dense_csv_dump_roundtrip(tmp_path, morse):
    cfg = ChainConfig(M=4, N=2)
    op = assemble_linear("atomistic", morse, cfg)
    path = tmp_path / "op.csv"
    dump_dense_csv(op, path)
    back = np.loadtxt(path, delimiter=",")
    np.testing.assert_allclose(back, op.to_dense(), rtol=1e-15)


# ------------------------------------------------------------------ energies


def test_energy_reference_is_zero(morse):
    cfg = ChainConfig(M=16, N=1)
    u = PeriodicField.zeros(cfg)
    assert energy_atomistic(u, morse, cfg) == pytest.approx(0.0, abs=1e-14)


def test_energy_uniform_stretch_closed_form(morse):
    cfg = ChainConfig(M=16, N=2)
    u = PeriodicField.zeros(cfg)
    gamma = 1.13
    expected = 2.0 * (float(morse.phi(gamma)) + float(morse.phi(2 * gamma)))
    assert energy_atomistic(u, morse, cfg, gamma) == pytest.approx(expected, rel=1e-13)


def test_energy_matches_brute_force(morse):
    cfg = ChainConfig(M=8, N=2)
    u = random_field(cfg, 12, scale=0.02)
    got = energy_atomistic(u, morse, cfg)
    expected = brute_force_energy(u, morse, cfg)
    assert got == pytest.approx(expected, rel=1e-12)


def test_energy_rejects_crossing(morse):
    cfg = ChainConfig(M=8, N=1)
    values = np.zeros(cfg.n_atoms)
    values[3] = -1.5 * cfg.a  # pushes one bond argument negative
    with pytest.raises(ValueError, match="bond"):
        energy_atomistic(PeriodicField(cfg, values), morse, cfg)


def test_linearized_energy_constant_is_zero(morse):
    cfg = ChainConfig(M=8, N=2)
    c = PeriodicField(cfg, np.full(cfg.n_atoms, 0.4))
    assert energy_linearized(c, morse, cfg, "atomistic") == 0.0
    assert energy_linearized(c, morse, cfg, "continuum") == 0.0


def test_linearized_energy_hand_field(morse):
    cfg = ChainConfig(M=4, N=2)
    u = PeriodicField(cfg, [0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0])
    a = cfg.a
    # atomistic: per k, sum_ell (a/2) ((u_{l+k}-u_l)/a)^2 phi_xx(k)
    d1 = (np.roll(u.values, -1) - u.values) / a
    d2 = (np.roll(u.values, -2) - u.values) / a
    exp_atom = 0.5 * a * float(morse.phi_xx(1.0)) * np.sum(d1**2) + 0.5 * a * float(
        morse.phi_xx(2.0)
    ) * np.sum(d2**2)
    assert energy_linearized(u, morse, cfg, "atomistic") == pytest.approx(
        exp_atom, rel=1e-13
    )
    coef = float(morse.phi_xx(1.0)) + 4 * float(morse.phi_xx(2.0))
    exp_cont = 0.5 * a * coef * np.sum(d1**2)
    assert energy_linearized(u, morse, cfg, "continuum") == pytest.approx(
        exp_cont, rel=1e-13
    )


def test_energy_consistency_rate(morse):
    ms = [250, 500, 1000, 2000]
    gaps = []
    for M in ms:
        cfg = ChainConfig(M=M, N=2)
        u = PeriodicField.from_function(cfg, lambda x: np.sin(np.pi * x))
        gaps.append(
            abs(
                energy_linearized(u, morse, cfg, "continuum")
                - energy_linearized(u, morse, cfg, "atomistic")
            )
        )
    slope = -loglog_slope(ms, gaps)
    assert 1.9 <= slope <= 2.1


# -------------------------------------------------------------------- forces


def test_nonlinear_force_zero_at_reference(morse):
    cfg = ChainConfig(M=12, N=3)
    f = force_nonlinear_atomistic(PeriodicField.zeros(cfg), morse, cfg)
    assert np.max(np.abs(f.values)) == 0.0


def test_nonlinear_force_is_energy_gradient(morse):
    cfg = ChainConfig(M=8, N=2)
    u = random_field(cfg, 21, scale=0.01)
    f = force_nonlinear_atomistic(u, morse, cfg).values
    h = 1e-7
    fd = np.zeros(cfg.n_atoms)
    for p in range(cfg.n_atoms):
        up = u.values.copy()
        up[p] += h
        um = u.values.copy()
        um[p] -= h
        fd[p] = (
            energy_atomistic(PeriodicField(cfg, up), morse, cfg)
            - energy_atomistic(PeriodicField(cfg, um), morse, cfg)
        ) / (2 * h * cfg.a)
    scale = np.max(np.abs(fd)) + 1e-12
    assert np.max(np.abs(f - fd)) / scale < 1e-6


def test_nonlinear_force_linearization(morse):
    # the gap to the linearized force is quadratic in the displacement,
    # so the relative error shrinks linearly with the amplitude
    cfg = ChainConfig(M=16, N=2)

    def rel_gap(eps):
        u = random_field(cfg, 5, scale=eps)
        f_nl = force_nonlinear_atomistic(u, morse, cfg).values
        f_lin = assemble_linear("atomistic", morse, cfg).apply(u).values
        return np.max(np.abs(f_nl - f_lin)) / (np.max(np.abs(f_lin)) + 1e-12)

    r1, r2 = rel_gap(1e-6), rel_gap(1e-7)
    assert r1 < 1e-3
    assert 5.0 < r1 / r2 < 20.0


def test_nonlinear_force_rejects_crossing(morse):
    cfg = ChainConfig(M=8, N=1)
    values = np.zeros(cfg.n_atoms)
    values[2] = -2.0 * cfg.a
    with pytest.raises(ValueError, match="bond"):
        force_nonlinear_atomistic(PeriodicField(cfg, values), morse, cfg)


def test_force_consistency_rate(morse):
    for N in (2, 3):
        ms = [100, 200, 400, 800]
        errs = []
        for M in ms:
            cfg = ChainConfig(M=M, N=N)
            u = PeriodicField.from_function(cfg, lambda x: np.sin(np.pi * x))
            fa = assemble_linear("atomistic", morse, cfg).apply(u).values
            fc = assemble_linear("continuum", morse, cfg).apply(u).values
            errs.append(np.max(np.abs(fa - fc)))
        slope = -loglog_slope(ms, errs)
        assert 1.8 <= slope <= 2.2


# ------------------------------------------------------------------ bilinear


def test_bilinear_nearest_neighbor_identity(morse):
    # with one neighbor the blended rows coincide with the atomistic ones
    # for any blending field, and <F u, u> = phi_xx(gamma) |u'|^2
    cfg = ChainConfig(M=32, N=1)
    rng = np.random.default_rng(8)
    beta = PeriodicField(cfg, rng.uniform(0, 1, cfg.n_atoms))
    for gamma in (1.0, 1.1):
        op = assemble_linear("bqcf", morse, cfg, beta, gamma)
        u = random_field(cfg, 17)
        expected = float(morse.phi_xx(gamma)) * h1_seminorm(u) ** 2
        assert bilinear(op, u, u) == pytest.approx(expected, rel=1e-11)


def test_bilinear_constant_is_zero(morse):
    cfg = ChainConfig(M=8, N=2)
    op = assemble_linear("bqcf", morse, cfg, cubic_beta(cfg, 2), 1.0)
    c = PeriodicField(cfg, np.full(cfg.n_atoms, 1.3))
    u = random_field(cfg, 2)
    assert bilinear(op, c, u) == 0.0


def test_bilinear_matches_dense_oracle(morse):
    cfg = ChainConfig(M=8, N=2)
    beta = cubic_beta(cfg, 2)
    op = assemble_linear("bqcf", morse, cfg, beta, 1.1)
    A = op.to_dense()
    u, v = random_field(cfg, 31), random_field(cfg, 32)
    expected = cfg.a * float(v.values @ (A @ u.values))
    assert bilinear(op, u, v) == pytest.approx(expected, rel=1e-12)


def test_bilinear_per_neighbor_decomposition(morse):
    cfg = ChainConfig(M=16, N=3)
    beta = cubic_beta(cfg, 3)
    u = random_field(cfg, 6)
    parts = per_neighbor_operators("bqcf", morse, cfg, beta, 1.0)
    full = assemble_linear("bqcf", morse, cfg, beta, 1.0)
    total = sum(bilinear(p, u, u) for p in parts)
    assert total == pytest.approx(bilinear(full, u, u), rel=1e-12)
