"""Pair interaction potentials.

A potential is even in the signed bond length, phi(r) = phi(|r|), so the
first derivative extends oddly and the second evenly to negative
arguments (needed when summing interactions over left neighbors).  The
stability theory requires a stiff nearest bond and a softening tail:

    phi_xx(1) > 0   and   phi_xx(k) <= 0 for integer k >= 2,

which is checked at construction up to a configurable k_max.

Only the Morse potential is shipped:

    phi(r) = D_e * (1 - exp(-alpha (r - r_e)))^2

with well depth D_e, width parameter alpha and equilibrium distance r_e
(default 1 so the reference lattice is the energy minimum).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KMAX_DEFAULT = 10


@dataclass(frozen=True)
class MorseParams:
    D_e: float = 3.0
    alpha: float = 3.0
    r_e: float = 1.0

    def __post_init__(self):
        if not (self.D_e > 0 and self.alpha > 0 and self.r_e > 0):
            raise ValueError(f"Morse parameters must be positive, got {self}")


class PairPotential:
    """Even pair potential with first and second derivatives.

    Subclasses implement _phi, _phi_x, _phi_xx for strictly positive
    arguments; the public methods fold in the parity and reject r = 0.
    """

    def __init__(self, k_max: int = KMAX_DEFAULT):
        self.check_assumptions(k_max)

    def _phi(self, r):
        raise NotImplementedError

    def _phi_x(self, r):
        raise NotImplementedError

    def _phi_xx(self, r):
        raise NotImplementedError

    @staticmethod
    def _checked_abs(r):
        r = np.asarray(r, dtype=float)
        if np.any(r == 0.0):
            raise ValueError("pair potential is undefined at r = 0")
        return np.abs(r)

    def phi(self, r):
        """phi(|r|); r may be negative but not zero."""
        return self._phi(self._checked_abs(r))

    def phi_x(self, r):
        """Odd extension sign(r) * phi'(|r|)."""
        rr = np.asarray(r, dtype=float)
        return np.sign(rr) * self._phi_x(self._checked_abs(rr))

    def phi_xx(self, r):
        """Even extension phi''(|r|)."""
        return self._phi_xx(self._checked_abs(r))

    def check_assumptions(self, k_max: int = KMAX_DEFAULT):
        """Verify phi_xx(1) > 0 and phi_xx(k) <= 0 for k = 2..k_max."""
        if not self._phi_xx(np.float64(1.0)) > 0:
            raise ValueError("potential violates phi_xx(1) > 0")
        ks = np.arange(2, k_max + 1, dtype=float)
        bad = ks[self._phi_xx(ks) > 0]
        if bad.size:
            raise ValueError(f"potential violates phi_xx(k) <= 0 at k = {bad}")


class Morse(PairPotential):
    def __init__(self, params: MorseParams = MorseParams(), k_max: int = KMAX_DEFAULT):
        self.params = params
        super().__init__(k_max)

    def _exp_term(self, r):
        p = self.params
        return np.exp(-p.alpha * (r - p.r_e))

    def _phi(self, r):
        q = self._exp_term(r)
        return self.params.D_e * (1.0 - q) ** 2

    def _phi_x(self, r):
        p = self.params
        q = self._exp_term(r)
        return 2.0 * p.D_e * p.alpha * q * (1.0 - q)

    def _phi_xx(self, r):
        p = self.params
        q = self._exp_term(r)
        return 2.0 * p.D_e * p.alpha**2 * q * (2.0 * q - 1.0)


def morse_eval(p: MorseParams, r: float, deriv: int = 0) -> float:
    """Evaluate the Morse potential or one of its first two derivatives.

    Requires r > 0; deriv in {0, 1, 2}.
    """
    if r <= 0:
        raise ValueError(f"bond length must be positive, got {r}")
    q = np.exp(-p.alpha * (r - p.r_e))
    if deriv == 0:
        return float(p.D_e * (1.0 - q) ** 2)
    if deriv == 1:
        return float(2.0 * p.D_e * p.alpha * q * (1.0 - q))
    if deriv == 2:
        return float(2.0 * p.D_e * p.alpha**2 * q * (2.0 * q - 1.0))
    raise ValueError(f"deriv must be 0, 1 or 2, got {deriv}")


def stability_constant(pot: PairPotential, N: int, gamma: float) -> float:
    """A_N(gamma) = sum_{k=1..N} k^2 phi_xx(k*gamma).

    This is the long-wave stability constant of the chain linearized
    about the uniform stretch y = gamma*x; positivity of A_N(1) is the
    stability assumption of the coupled model.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    ks = np.arange(1, N + 1, dtype=float)
    return float(np.sum(ks**2 * pot.phi_xx(ks * gamma)))
