"""High-precision Weierstrass function backend for the genus-1 torus.

All values refer to the lattice ZZ + tau*ZZ with Im(tau) > 0.  Pointwise
values of wp, wp' and zeta come from Jacobi theta quotients (mpmath's
``jtheta``); local expansions come from two classical recursions that are
independent of the theta route and therefore double as internal oracles:

* the Laurent recursion at the pole,
  wp(z) = z^-2 + (g2/20) z^2 + (g3/28) z^4 + ...,
* the Taylor recursion wp'' = 6 wp^2 - g2/2 at a regular point, seeded by
  the theta values wp(d), wp'(d).

Quasi-period constants: eta1 = zeta(1/2) and eta2 = zeta(tau/2), with
zeta(z+1) = zeta(z) + 2*eta1, zeta(z+tau) = zeta(z) + 2*eta2 and the
Legendre relation eta1*tau - eta2 = pi*i.
"""

from __future__ import annotations

import mpmath
from mpmath import mp

from .errors import ConfigError


class TorusFunctions:
    """Weierstrass wp, wp', zeta and their expansions for one modulus."""

    def __init__(self, tau: mpmath.mpc, working_dps: int):
        self.working_dps = working_dps
        with mp.workdps(working_dps):
            self.tau = mpmath.mpc(tau)
            if self.tau.imag <= 0:
                raise ConfigError("modulus tau must have positive imaginary part")
            self.q = mpmath.exp(1j * mpmath.pi * self.tau)
            tp0 = self._theta(1, 0)
            tp3 = self._theta(3, 0)
            self.eta1 = -(mpmath.pi**2) * tp3 / (6 * tp0)
            self.eta2 = self.eta1 * self.tau - 1j * mpmath.pi
            self.g2, self.g3 = self._eisenstein()
        self._laurent_cache: list | None = None

    # -- theta machinery -------------------------------------------------

    def _theta(self, der: int, v) -> mpmath.mpc:
        return mpmath.jtheta(1, v, self.q, derivative=der)

    def _eisenstein(self):
        Q = self.q**2
        tol = mpmath.mpf(10) ** (-(self.working_dps + 10))
        e4 = mpmath.mpc(0)
        e6 = mpmath.mpc(0)
        n = 1
        while True:
            Qn = Q**n
            if abs(Qn) * n**6 < tol:
                break
            e4 += n**3 * Qn / (1 - Qn)
            e6 += n**5 * Qn / (1 - Qn)
            n += 1
        E4 = 1 + 240 * e4
        E6 = 1 - 504 * e6
        g2 = 4 * mpmath.pi**4 / 3 * E4
        g3 = 8 * mpmath.pi**6 / 27 * E6
        return g2, g3

    # -- lattice reduction ------------------------------------------------

    def reduce(self, z: mpmath.mpc):
        """Return (z0, m, n) with z = z0 + m + n*tau and z0 near the origin cell."""
        with mp.workdps(self.working_dps):
            z = mpmath.mpc(z)
            b = z.imag / self.tau.imag
            n = int(mpmath.nint(b))
            a = z.real - b * self.tau.real
            m = int(mpmath.nint(a))
            return z - m - n * self.tau, m, n

    def nearest_lattice_distance(self, z) -> mpmath.mpf:
        with mp.workdps(self.working_dps):
            z0, _, _ = self.reduce(z)
            best = None
            for dm in (-1, 0, 1):
                for dn in (-1, 0, 1):
                    d = abs(z0 - dm - dn * self.tau)
                    if best is None or d < best:
                        best = d
            return best

    # -- pointwise values --------------------------------------------------

    def zeta(self, z) -> mpmath.mpc:
        with mp.workdps(self.working_dps):
            z0, m, n = self.reduce(z)
            v = mpmath.pi * z0
            val = 2 * self.eta1 * z0 + mpmath.pi * self._theta(1, v) / self._theta(0, v)
            return val + 2 * m * self.eta1 + 2 * n * self.eta2

    def wp(self, z) -> mpmath.mpc:
        with mp.workdps(self.working_dps):
            z0, _, _ = self.reduce(z)
            v = mpmath.pi * z0
            t0 = self._theta(0, v)
            t1 = self._theta(1, v)
            t2 = self._theta(2, v)
            return -2 * self.eta1 - mpmath.pi**2 * (t2 * t0 - t1 * t1) / (t0 * t0)

    def wp_prime(self, z) -> mpmath.mpc:
        with mp.workdps(self.working_dps):
            z0, _, _ = self.reduce(z)
            v = mpmath.pi * z0
            t0 = self._theta(0, v)
            t1 = self._theta(1, v)
            t2 = self._theta(2, v)
            t3 = self._theta(3, v)
            num = t3 * t0 * t0 - 3 * t2 * t1 * t0 + 2 * t1**3
            return -(mpmath.pi**3) * num / t0**3

    # -- local expansions ---------------------------------------------------

    def wp_laurent(self, max_exponent: int) -> list:
        """Coefficients of wp at the origin for exponents -2..max_exponent."""
        with mp.workdps(self.working_dps):
            need_k = max_exponent // 2 + 2
            cache = self._laurent_cache
            if cache is None or len(cache) < need_k + 1:
                c = [mpmath.mpc(0)] * (need_k + 1)
                if need_k >= 2:
                    c[2] = self.g2 / 20
                if need_k >= 3:
                    c[3] = self.g3 / 28
                for k in range(4, need_k + 1):
                    acc = mpmath.mpc(0)
                    for m in range(2, k - 1):
                        acc += c[m] * c[k - m]
                    c[k] = 3 * acc / ((2 * k + 1) * (k - 3))
                self._laurent_cache = c
                cache = c
            out = [mpmath.mpc(0)] * (max_exponent + 3)
            out[0] = mpmath.mpc(1)  # z^-2
            for k in range(2, max_exponent // 2 + 2):
                e = 2 * k - 2
                if e <= max_exponent:
                    out[e + 2] = cache[k]
            return out

    def zeta_laurent(self, max_exponent: int) -> list:
        """Coefficients of zeta at the origin for exponents -1..max_exponent."""
        with mp.workdps(self.working_dps):
            wp = self.wp_laurent(max_exponent + 1)
            out = [mpmath.mpc(0)] * (max_exponent + 2)
            out[0] = mpmath.mpc(1)  # z^-1
            # zeta' = -wp termwise: coefficient at e integrates wp at e-1
            for e in range(1, max_exponent + 1):
                w = wp[(e - 1) + 2]
                if w != 0:
                    out[e + 1] = -w / e
            return out

    def wp_taylor(self, d, order: int) -> list:
        """Taylor coefficients of wp(d + t) in t up to t^order (d regular)."""
        with mp.workdps(self.working_dps):
            w = [mpmath.mpc(0)] * (order + 1)
            w[0] = self.wp(d)
            if order >= 1:
                w[1] = self.wp_prime(d)
            half_g2 = self.g2 / 2
            for k in range(0, order - 1):
                acc = mpmath.mpc(0)
                for i in range(0, k + 1):
                    acc += w[i] * w[k - i]
                rhs = 6 * acc - (half_g2 if k == 0 else 0)
                w[k + 2] = rhs / ((k + 1) * (k + 2))
            return w

    def zeta_taylor(self, d, order: int) -> list:
        """Taylor coefficients of zeta(d + t) in t up to t^order (d regular)."""
        with mp.workdps(self.working_dps):
            w = self.wp_taylor(d, max(order - 1, 0))
            out = [mpmath.mpc(0)] * (order + 1)
            out[0] = self.zeta(d)
            for k in range(1, order + 1):
                out[k] = -w[k - 1] / k
            return out


def coefflist_derivative(coeffs: list, lead: int) -> tuple[list, int]:
    """d/dz of a dense coefficient list starting at exponent ``lead``."""
    out = []
    for i, c in enumerate(coeffs):
        e = lead + i
        out.append(e * c)
    return out, lead - 1
