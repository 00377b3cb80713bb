"""Construction, validation and persistence of two-point basis atlases.

An atlas holds, for every weight ``lam`` in its range and every index n in
its window, the pair of local expansions of the basis section f_{lam,n} at
the two marked points, normalized so that the leading coefficient at P+ is
1 and the duality pairing

    Res( f_{lam,n} * f_{1-lam,-m} ) = delta_{n,m}

holds exactly (genus 0) or to tolerance (genus 1).

Genus 0 sections are monomials in the charts z at P+ and w = 1/z at P-,
with the chart twist (dz)^lam = (-w^-2)^lam (dw)^lam kept explicitly.
Genus 1 sections are assembled from Weierstrass building blocks
{1, zeta(z-p+)-zeta(z-p-), wp^(k)(z-p+), wp^(k)(z-p-)} by solving the
linear systems that force the prescribed pole and zero orders.  Higher
genus atlases enter only through :func:`load_atlas`.

Index conventions: ``n2`` denotes the doubled index 2n; upper indices obey
f^m = f_{lam,-m}.  The exceptional "middle range" exponents at the minus
point follow the reading documented on :func:`expected_lead`; at genus 1
the same two exceptional members (n = 1/2 constant, n = -1/2 with two
simple poles) occur at every weight, which is forced by degree counting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction

import mpmath
from mpmath import mp

from .errors import (
    ConfigError,
    FaithfulWindowError,
    PrecisionError,
    SingularSystemError,
    WindowOverflowError,
)
from .indices import check_index, fmt_index, index_range
from .reports import CheckRecord, Report
from .scalars import Mode, Scalar, ScalarContext, parse_complex_literal
from .series import (
    LaurentExpansion,
    Point,
    expansion_from_items,
    residue_of_product,
)

FORMAT_VERSION = 1


def s_lambda2(genus: int, lam: int) -> int:
    """Doubled weight offset 2*s_lambda with s_lambda = (1-2*lam)*g/2 + lam."""
    return (1 - 2 * lam) * genus + 2 * lam


def s_lambda(genus: int, lam: int) -> Fraction:
    """The offset s_lambda as an exact rational."""
    return Fraction(s_lambda2(genus, lam), 2)


def expected_lead(genus: int, lam: int, n2: int, point: Point) -> int:
    """Leading exponent of f_{lam,n} in the local coordinate at ``point``.

    Generic behaviour is z^(n - s_lambda) at P+ and z^(-n - s_lambda) at
    P-.  The documented exceptions, all at the minus point except for the
    two order-zero members:

    * genus 0: none (the generic formulas already cover A_0 = 1 and
      omega^0 = dz/z);
    * genus 1: for every weight, n = 1/2 is the constant section with
      exponents (0, 0) and n = -1/2 has two simple poles, (-1, -1);
    * genus >= 2: weight 0 has A_{g/2} = 1 and a -1 shift at P- for
      -g/2 <= n < g/2; weight 1 dually has the +1 shift and the level-line
      differential omega^{g/2} with exponents (-1, -1).
    """
    s2 = s_lambda2(genus, lam)
    generic = (n2 - s2) // 2 if point is Point.PLUS else (-n2 - s2) // 2
    if genus == 0:
        return generic
    if genus == 1:
        if n2 == 1:
            return 0
        if n2 == -1:
            return -1
        return generic
    # genus >= 2: exceptions only for weights 0 and 1
    if lam == 0:
        if n2 == genus:
            return 0
        if -genus <= n2 <= genus - 2 and point is Point.MINUS:
            return generic - 1
    elif lam == 1:
        if n2 == -genus:
            return -1
        if -genus + 2 <= n2 <= genus and point is Point.MINUS:
            return generic + 1
    return generic


@dataclass(frozen=True)
class AtlasConfig:
    """Geometry, window and precision parameters of one atlas.

    ``window2`` is the doubled bound on reported indices (|n| <= window2/2);
    ``extent2`` is the doubled bound on *constructed* indices.  The extent
    includes working margin beyond the report window so that derivative
    chains and normal-ordered coefficient sums near the window edge stay
    inside constructed data.  ``trunc`` must be at least 3*extent2 + 6 so
    that triple products of extreme sections keep the exponent -1 inside
    the faithful window.
    """

    genus: int
    window2: int
    trunc: int
    lambdas: tuple
    mode: Mode
    extent2: int = 0
    precision: int | None = None
    tau: str | None = None
    p_plus: str | None = None
    p_minus: str | None = None
    tolerance_exp: int | None = None

    def __post_init__(self):
        if self.genus < 0:
            raise ConfigError("genus must be non-negative")
        if self.window2 <= 0:
            raise ConfigError("window must be positive")
        check_index(self.genus, self.window2)
        if self.extent2 == 0:
            object.__setattr__(self, "extent2", self.window2)
        if self.extent2 < self.window2:
            raise ConfigError("extent must cover the report window")
        check_index(self.genus, self.extent2)
        if self.trunc < 3 * self.extent2 + 6:
            raise ConfigError(
                f"trunc {self.trunc} below required 3*extent+6 = {3 * self.extent2 + 6}"
            )
        lambdas = tuple(sorted(set(self.lambdas)))
        object.__setattr__(self, "lambdas", lambdas)
        for needed in (-1, 0, 1):
            if needed not in lambdas:
                raise ConfigError("lambda range must contain {-1, 0, 1}")
        if self.genus == 0:
            if self.mode is not Mode.EXACT:
                raise ConfigError("genus 0 atlases are exact")
        elif self.genus == 1:
            if self.mode is not Mode.COMPLEX:
                raise ConfigError("genus 1 atlases use big-complex scalars")
            if not (self.tau and self.p_plus and self.p_minus):
                raise ConfigError("genus 1 needs tau, p_plus and p_minus")
            if not self.precision:
                raise ConfigError("genus 1 needs a precision")

    def scalar_context(self, working_dps: int | None = None) -> ScalarContext:
        tol = None
        if self.tolerance_exp is not None:
            if self.mode is Mode.EXACT:
                tol = Fraction(0)
            else:
                with mp.workdps(working_dps or (2 * (self.precision or 15) + 20)):
                    tol = mpmath.mpf(10) ** (-self.tolerance_exp)
        return ScalarContext(
            self.mode, self.precision, tolerance=tol, working_dps=working_dps
        )

    def indices(self) -> list[int]:
        return index_range(self.genus, self.extent2)

    def report_indices(self) -> list[int]:
        return index_range(self.genus, self.window2)

    def to_json_dict(self) -> dict:
        return {
            "genus": self.genus,
            "window2": self.window2,
            "extent2": self.extent2,
            "trunc": self.trunc,
            "lambdas": list(self.lambdas),
            "mode": self.mode.value,
            "precision": self.precision,
            "tau": self.tau,
            "p_plus": self.p_plus,
            "p_minus": self.p_minus,
            "tolerance_exp": self.tolerance_exp,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "AtlasConfig":
        return AtlasConfig(
            genus=int(d["genus"]),
            window2=int(d["window2"]),
            trunc=int(d["trunc"]),
            lambdas=tuple(int(x) for x in d["lambdas"]),
            mode=Mode(d["mode"]),
            extent2=int(d.get("extent2") or 0),
            precision=d.get("precision"),
            tau=d.get("tau"),
            p_plus=d.get("p_plus"),
            p_minus=d.get("p_minus"),
            tolerance_exp=d.get("tolerance_exp"),
        )


class BasisAtlas:
    """The family f_{lam,n} as expansion pairs plus normalization constants."""

    def __init__(
        self,
        config: AtlasConfig,
        ctx: ScalarContext,
        sections: dict,
        normalizations: dict,
    ):
        self.config = config
        self.ctx = ctx
        self.sections = sections
        self.normalizations = normalizations
        self.genus = config.genus

    # -- index helpers ---------------------------------------------------

    def s2(self, lam: int) -> int:
        return s_lambda2(self.genus, lam)

    def expected_lead(self, lam: int, n2: int, point: Point) -> int:
        return expected_lead(self.genus, lam, n2, point)

    def in_extent(self, n2: int) -> bool:
        return abs(n2) <= self.config.extent2

    # -- section accessors -------------------------------------------------

    def section(self, lam: int, n2: int, point: Point) -> LaurentExpansion:
        key = (lam, n2)
        try:
            return self.sections[key][point]
        except KeyError:
            if lam not in self.config.lambdas:
                raise WindowOverflowError(f"weight {lam} not in atlas lambda range")
            raise WindowOverflowError(
                f"section f_({lam},{fmt_index(n2)}) outside constructed window"
            )

    def f_upper(self, lam: int, m2: int, point: Point) -> LaurentExpansion:
        """Upper-index section f^m_lam = f_{lam,-m}."""
        return self.section(lam, -m2, point)

    def A(self, n2: int, point: Point) -> LaurentExpansion:
        return self.section(0, n2, point)

    def omega(self, n2: int, point: Point) -> LaurentExpansion:
        """omega^n = f_{1,-n}."""
        return self.section(1, -n2, point)

    def e_distinguished(self, point: Point) -> LaurentExpansion:
        """The vector field used by the global derivative: e at index 3g/2-1."""
        return self.section(-1, 3 * self.genus - 2, point)

    # -- duality ------------------------------------------------------------

    def duality_residue(self, lam: int, n2: int, m2: int, point: Point) -> Scalar:
        """Res( f_{lam,n} f_{1-lam,-m} ) evaluated at one point."""
        a = self.section(lam, n2, point)
        b = self.section(1 - lam, -m2, point)
        return residue_of_product(a, b)

    def verify_duality(self, lambdas=None, window2: int | None = None) -> Report:
        """Residuals of the duality relations over the constructed window.

        For each weight pair (lam, 1-lam) available in the atlas and each
        index pair (n, m), compares the oriented residue at both points
        against delta_{n,m} and reports the worst deviation plus the worst
        disagreement between the two points.
        """
        ctx = self.ctx
        cfg = self.config
        lam_set = []
        for lam in cfg.lambdas if lambdas is None else lambdas:
            if 1 - lam in cfg.lambdas and lam in cfg.lambdas:
                lam_set.append(lam)
        if not lam_set:
            raise ConfigError("no dual weight pairs available")
        idx = index_range(self.genus, min(window2 or cfg.extent2, cfg.extent2))
        report = Report()
        for lam in lam_set:
            worst = ctx.zero_mag()
            worst_cross = ctx.zero_mag()
            worst_pair = None
            with ctx.workdps():
                for n2 in idx:
                    for m2 in idx:
                        expect = ctx.one() if n2 == m2 else ctx.zero()
                        try:
                            r_plus = self.duality_residue(lam, n2, m2, Point.PLUS)
                            r_minus = self.duality_residue(lam, n2, m2, Point.MINUS)
                        except FaithfulWindowError as exc:
                            raise FaithfulWindowError(
                                f"duality residue ({fmt_index(n2)},{fmt_index(m2)}) "
                                f"at weight {lam}: {exc}"
                            ) from exc
                        dev = max(ctx.abs(r_plus - expect), ctx.abs(r_minus - expect))
                        cross = ctx.abs(r_plus - r_minus)
                        if dev > worst:
                            worst = dev
                            worst_pair = (fmt_index(n2), fmt_index(m2))
                        if cross > worst_cross:
                            worst_cross = cross
            tol = ctx.tolerance
            report.add(
                CheckRecord(
                    name="duality",
                    passed=bool(worst <= tol),
                    residual=ctx.residual_str(worst),
                    tolerance=ctx.residual_str(tol),
                    params={"lambda": lam},
                    details={"worst_pair": worst_pair},
                )
            )
            report.add(
                CheckRecord(
                    name="duality-cross-point",
                    passed=bool(worst_cross <= tol),
                    residual=ctx.residual_str(worst_cross),
                    tolerance=ctx.residual_str(tol),
                    params={"lambda": lam},
                )
            )
        return report

    # -- persistence ----------------------------------------------------------

    def to_json_text(self) -> str:
        ctx = self.ctx
        sections = []
        for (lam, n2) in sorted(self.sections):
            for point in (Point.PLUS, Point.MINUS):
                exp = self.sections[(lam, n2)][point]
                sections.append(
                    {
                        "lambda": lam,
                        "doubled_index": n2,
                        "point": point.value,
                        "lead": exp.lead,
                        "trunc": exp.trunc,
                        "coeffs": [ctx.format(c) for c in exp.coeffs],
                    }
                )
        norms = []
        for (lam, n2, point) in sorted(
            self.normalizations, key=lambda k: (k[0], k[1], k[2].value)
        ):
            norms.append(
                {
                    "lambda": lam,
                    "doubled_index": n2,
                    "point": point.value,
                    "value": ctx.format(self.normalizations[(lam, n2, point)]),
                }
            )
        doc = {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_json_dict(),
            "sections": sections,
            "normalizations": norms,
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json_text())


def build_atlas(config: AtlasConfig) -> BasisAtlas:
    """Construct the atlas for the configured geometry."""
    if config.genus == 0:
        return build_genus0(config)
    if config.genus == 1:
        return build_genus1(config)
    raise ConfigError("genus >= 2 atlases must be supplied via load_atlas")


# ---------------------------------------------------------------------------
# genus 0
# ---------------------------------------------------------------------------


def build_genus0(config: AtlasConfig) -> BasisAtlas:
    """Exact rational atlas on the sphere: f_{lam,n} = z^(n-lam) (dz)^lam.

    At the minus point, w = 1/z gives (dz)^lam = (-1)^lam w^(-2 lam) (dw)^lam,
    so the expansion there is (-1)^lam w^(-n-lam) and the sign is recorded in
    the normalization table.
    """
    if config.genus != 0:
        raise ConfigError("build_genus0 requires genus 0")
    ctx = config.scalar_context()
    one = Fraction(1)
    sections = {}
    norms = {}
    for lam in config.lambdas:
        sign = one if lam % 2 == 0 else -one
        for n2 in config.indices():
            n = n2 // 2
            plus = expansion_from_items(
                Point.PLUS, lam, {n - lam: one}, config.trunc, Mode.EXACT
            )
            minus = expansion_from_items(
                Point.MINUS, lam, {-n - lam: sign}, config.trunc, Mode.EXACT
            )
            sections[(lam, n2)] = {Point.PLUS: plus, Point.MINUS: minus}
            norms[(lam, n2, Point.PLUS)] = one
            norms[(lam, n2, Point.MINUS)] = sign
    return BasisAtlas(config, ctx, sections, norms)


# ---------------------------------------------------------------------------
# genus 1
# ---------------------------------------------------------------------------


class _Genus1Builder:
    """Solves the Weierstrass block systems for one torus geometry."""

    def __init__(self, config: AtlasConfig):
        from .elliptic import TorusFunctions

        self.config = config
        base_dps = 2 * config.precision + 20
        tau = parse_complex_literal(config.tau, base_dps)
        p_plus = parse_complex_literal(config.p_plus, base_dps)
        p_minus = parse_complex_literal(config.p_minus, base_dps)
        probe = TorusFunctions(tau, base_dps)
        with mp.workdps(base_dps):
            d = p_plus - p_minus
            eps = mpmath.mpf(10) ** (-base_dps // 2)
            r = probe.nearest_lattice_distance(d)
            if r < eps:
                raise ConfigError("marked points coincide on the torus")
            # k-torsion of p+ - p- makes the basis member at |n| = k - 1/2
            # degenerate (its free zero collides with a marked point), so
            # reject torsion up to the largest pole order in the extent.
            max_order = (config.extent2 + 1) // 2 + 1
            for k in range(2, max_order + 1):
                if probe.nearest_lattice_distance(k * d) < eps:
                    raise ConfigError(
                        f"p_plus - p_minus is a lattice {k}-torsion point; "
                        "the marked points must be in general position for "
                        f"the requested window (torsion order > {max_order} needed)"
                    )
            # Taylor-series loss: coefficients at distance r grow like r^-k.
            loss = 0
            if r < 1:
                loss = int(
                    mpmath.ceil((config.trunc + config.extent2 + 6) * -mpmath.log10(r))
                )
        self.working_dps = config.precision + 50 + loss
        self.tf = TorusFunctions(tau, self.working_dps)
        with mp.workdps(self.working_dps):
            self.tau = mpmath.mpc(tau)
            self.p_plus = mpmath.mpc(p_plus)
            self.p_minus = mpmath.mpc(p_minus)
            self.d = self.p_plus - self.p_minus
        self.ctx = config.scalar_context(working_dps=self.working_dps)
        self.trunc = config.trunc
        self._block_cache: dict = {}

    # block expansions ----------------------------------------------------

    def _const_block(self, point: Point) -> LaurentExpansion:
        return expansion_from_items(
            point, 0, {0: mpmath.mpc(1)}, self.trunc, Mode.COMPLEX
        )

    def _wp_block(self, pole_at: Point, der: int) -> dict:
        """Expansions of wp^(der)(z - p) at both points, pole at ``pole_at``."""
        from .elliptic import coefflist_derivative

        key = (pole_at, der)
        if key in self._block_cache:
            return self._block_cache[key]
        tf = self.tf
        with mp.workdps(self.working_dps):
            lau = tf.wp_laurent(self.trunc + der)
            lead = -2
            coeffs = lau
            for _ in range(der):
                coeffs, lead = coefflist_derivative(coeffs, lead)
            own = LaurentExpansion(
                pole_at, 0, lead, tuple(coeffs[: self.trunc - lead + 1]), self.trunc,
                Mode.COMPLEX,
            )
            offset = self.d if pole_at is Point.MINUS else -self.d
            tay = tf.wp_taylor(offset, self.trunc + der)
            tlead = 0
            tcoeffs = tay
            for _ in range(der):
                tcoeffs, tlead = coefflist_derivative(tcoeffs, tlead)
            # derivative of a Taylor list shifts lead below zero with zero rows
            drop = -tlead
            tcoeffs = tcoeffs[drop:]
            other_point = Point.PLUS if pole_at is Point.MINUS else Point.MINUS
            other = LaurentExpansion(
                other_point, 0, 0, tuple(tcoeffs[: self.trunc + 1]), self.trunc,
                Mode.COMPLEX,
            )
        block = {pole_at: own, other_point: other}
        self._block_cache[key] = block
        return block

    def _z_block(self) -> dict:
        """zeta(z-p+) - zeta(z-p-) at both points (simple poles, residues +-1)."""
        tf = self.tf
        with mp.workdps(self.working_dps):
            lau = tf.zeta_laurent(self.trunc)  # exponents -1..trunc
            tay_d = tf.zeta_taylor(self.d, self.trunc)  # zeta(d + t)
            tay_md = tf.zeta_taylor(-self.d, self.trunc)  # zeta(-d + t)
            plus_coeffs = [mpmath.mpc(c) for c in lau]
            for e in range(0, self.trunc + 1):
                plus_coeffs[e + 1] -= tay_d[e]
            minus_coeffs = [-mpmath.mpc(c) for c in lau]
            for e in range(0, self.trunc + 1):
                minus_coeffs[e + 1] += tay_md[e]
            plus = LaurentExpansion(
                Point.PLUS, 0, -1, tuple(plus_coeffs), self.trunc, Mode.COMPLEX
            )
            minus = LaurentExpansion(
                Point.MINUS, 0, -1, tuple(minus_coeffs), self.trunc, Mode.COMPLEX
            )
        return {Point.PLUS: plus, Point.MINUS: minus}

    # linear solve ----------------------------------------------------------

    def _solve_function(self, n2: int, blocks: list, pole_point: Point) -> dict:
        """Combine blocks into the function with the prescribed local data.

        ``blocks`` have poles only at ``pole_point``; the conditions force a
        zero of the exact complementary order at the other point with unit
        leading coefficient there ... unless the unit normalization sits at
        the pole side (negative index family), in which case the leading
        pole coefficient at P+ is set to 1.
        """
        other = Point.PLUS if pole_point is Point.MINUS else Point.MINUS
        zero_order = (abs(n2) - 1) // 2
        with mp.workdps(self.working_dps):
            rows = []
            rhs = []
            # vanishing conditions at the zero-side point
            for e in range(zero_order):
                rows.append([b[other].coefficient(e) for b in blocks])
                rhs.append(mpmath.mpc(0))
            # unit leading coefficient at P+
            lead_plus = expected_lead(1, 0, n2, Point.PLUS)
            rows.append([b[Point.PLUS].coefficient(lead_plus) for b in blocks])
            rhs.append(mpmath.mpc(1))
            mat = mpmath.matrix(rows)
            vec = mpmath.matrix(rhs)
            try:
                sol = mpmath.lu_solve(mat, vec)
            except ZeroDivisionError as exc:
                raise SingularSystemError(
                    f"singular block system for index {fmt_index(n2)}"
                ) from exc
            combo = {}
            for point in (Point.PLUS, Point.MINUS):
                acc = None
                for coeff, b in zip(sol, blocks):
                    term = b[point].scale(mpmath.mpc(coeff))
                    acc = term if acc is None else acc + term
                combo[point] = acc
            # snap constrained coefficients and check the solve residual
            resid = mpmath.mpf(0)
            for e in range(zero_order):
                resid = max(resid, abs(combo[other].coefficient(e)))
            resid = max(resid, abs(combo[Point.PLUS].coefficient(lead_plus) - 1))
            if resid > self.ctx.tolerance:
                raise PrecisionError(
                    f"block solve residual {mpmath.nstr(resid, 3)} for index "
                    f"{fmt_index(n2)} exceeds tolerance"
                )
            combo[other] = _snap_leading(combo[other], zero_order)
            combo[Point.PLUS] = _set_coefficient(combo[Point.PLUS], lead_plus, mpmath.mpc(1))
            lead_minus = expected_lead(1, 0, n2, Point.MINUS)
            lead_coeff = combo[Point.MINUS].coefficient(lead_minus)
            if abs(lead_coeff) <= self.ctx.tolerance:
                raise SingularSystemError(
                    f"vanishing leading coefficient at the minus point for "
                    f"index {fmt_index(n2)}: non-generic marked points"
                )
        return combo

    def build(self) -> BasisAtlas:
        cfg = self.config
        with mp.workdps(self.working_dps):
            # base functions (weight 0 family)
            funcs: dict[int, dict] = {}
            funcs[1] = {p: self._const_block(p) for p in (Point.PLUS, Point.MINUS)}
            zblock = self._z_block()
            for n2 in cfg.indices():
                if abs(n2) < 3:
                    continue
                order = (abs(n2) + 1) // 2
                pole_point = Point.MINUS if n2 > 0 else Point.PLUS
                blocks = [
                    {p: self._const_block(p) for p in (Point.PLUS, Point.MINUS)}
                ]
                for k in range(order - 1):
                    blocks.append(self._wp_block(pole_point, k))
                funcs[n2] = self._solve_function(n2, blocks, pole_point)

            # level-line differential: rho = (Z + c) dz with purely imaginary
            # periods; alpha-period = 2*eta1*(p- - p+) + c, beta-period with eta2.
            tf = self.tf
            delta = self.p_minus - self.p_plus
            a1 = 2 * tf.eta1 * delta
            a2 = 2 * tf.eta2 * delta
            c_re = -a1.real
            c_im = (c_re * self.tau.real + a2.real) / self.tau.imag
            c_rho = mpmath.mpc(c_re, c_im)
            rho_fun = {
                p: zblock[p] + self._const_block(p).scale(c_rho)
                for p in (Point.PLUS, Point.MINUS)
            }
            # the weight-0 middle member is pinned by duality against rho:
            # the z^-1 coefficient of A_{-1/2} * rho must vanish at P+.
            r0 = rho_fun[Point.PLUS].coefficient(0)
            zc = zblock[Point.PLUS].coefficient(0)
            c_a = -r0 - zc
            funcs[-1] = {
                p: zblock[p] + self._const_block(p).scale(c_a)
                for p in (Point.PLUS, Point.MINUS)
            }

            sections = {}
            norms = {}
            for lam in cfg.lambdas:
                for n2 in cfg.indices():
                    fun = rho_fun if (lam >= 1 and n2 == -1) else funcs[n2]
                    pair = {}
                    for point in (Point.PLUS, Point.MINUS):
                        pair[point] = fun[point].with_weight(lam)
                    sections[(lam, n2)] = pair
                    norms[(lam, n2, Point.PLUS)] = mpmath.mpc(1)
                    lead_minus = expected_lead(1, lam, n2, Point.MINUS)
                    norms[(lam, n2, Point.MINUS)] = pair[Point.MINUS].coefficient(
                        lead_minus
                    )
            atlas = BasisAtlas(cfg, self.ctx, sections, norms)
            # fail loudly if the precision cannot sustain the window
            rep = atlas.verify_duality()
            if not rep.passed:
                worst = max(
                    (r.residual for r in rep.failures() if r.residual), default="?"
                )
                raise PrecisionError(
                    f"duality residual {worst} above tolerance: precision "
                    "insufficient for the requested window"
                )
            return atlas


def _snap_leading(exp: LaurentExpansion, zero_order: int) -> LaurentExpansion:
    """Replace the constrained sub-leading coefficients by exact zeros."""
    zero = mpmath.mpc(0)
    coeffs = list(exp.coeffs)
    for e in range(exp.lead, min(zero_order, exp.trunc + 1)):
        coeffs[e - exp.lead] = zero
    out = LaurentExpansion(exp.point, exp.lam, exp.lead, tuple(coeffs), exp.trunc, exp.mode)
    return out.normalized()


def _set_coefficient(exp: LaurentExpansion, e: int, value) -> LaurentExpansion:
    coeffs = list(exp.coeffs)
    coeffs[e - exp.lead] = value
    # zero everything below the enforced lead as well
    for i in range(0, e - exp.lead):
        coeffs[i] = mpmath.mpc(0)
    out = LaurentExpansion(exp.point, exp.lam, exp.lead, tuple(coeffs), exp.trunc, exp.mode)
    return out.normalized()


def build_genus1(config: AtlasConfig) -> BasisAtlas:
    """Weierstrass-based atlas on the torus C/(Z + tau Z).

    The weight-0 family is solved from building blocks; every other weight
    reuses the same coefficient functions times (dz)^lam, except that for
    lam >= 1 the two-pole member at n = -1/2 is the level-line differential
    function (fixed by its purely imaginary periods) while for lam <= 0 it
    is the function pinned by duality against it.
    """
    if config.genus != 1:
        raise ConfigError("build_genus1 requires genus 1")
    return _Genus1Builder(config).build()


# ---------------------------------------------------------------------------
# load with validation
# ---------------------------------------------------------------------------


def load_atlas(path) -> BasisAtlas:
    """Load an atlas file, validating schema and invariants.

    Rejects files whose sections violate the expected leading exponents,
    whose A_{g/2} is not the constant 1, or whose duality residuals exceed
    the configured tolerance.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"atlas file is not valid JSON: {exc}") from exc
    for key in ("format_version", "config", "sections", "normalizations"):
        if key not in doc:
            raise ConfigError(f"atlas file missing field {key!r}")
    if doc["format_version"] != FORMAT_VERSION:
        raise ConfigError(f"unsupported atlas format version {doc['format_version']}")
    config = AtlasConfig.from_json_dict(doc["config"])
    working = None
    if config.mode is Mode.COMPLEX:
        working = 2 * (config.precision or 15) + 20
    ctx = config.scalar_context(working_dps=working)
    sections: dict = {}
    for rec in doc["sections"]:
        lam = int(rec["lambda"])
        n2 = int(rec["doubled_index"])
        point = Point(rec["point"])
        lead = int(rec["lead"])
        trunc = int(rec["trunc"])
        coeffs = tuple(ctx.parse(c) for c in rec["coeffs"])
        exp = LaurentExpansion(point, lam, lead, coeffs, trunc, config.mode)
        sections.setdefault((lam, n2), {})[point] = exp
    norms = {}
    for rec in doc["normalizations"]:
        norms[(int(rec["lambda"]), int(rec["doubled_index"]), Point(rec["point"]))] = (
            ctx.parse(rec["value"])
        )
    atlas = BasisAtlas(config, ctx, sections, norms)
    _validate_loaded(atlas)
    return atlas


def _validate_loaded(atlas: BasisAtlas) -> None:
    cfg = atlas.config
    ctx = atlas.ctx
    for lam in cfg.lambdas:
        for n2 in cfg.indices():
            if (lam, n2) not in atlas.sections:
                raise ConfigError(
                    f"atlas file missing section ({lam},{fmt_index(n2)})"
                )
            for point in (Point.PLUS, Point.MINUS):
                exp = atlas.sections[(lam, n2)][point]
                want = expected_lead(cfg.genus, lam, n2, point)
                got = exp.normalized().lead if ctx.mode is Mode.EXACT else exp.lead
                if got < want:
                    # tolerate stored zero padding below the true lead
                    lead_ok = all(
                        ctx.is_zero(exp.coefficient(e)) for e in range(got, want)
                    )
                    if not lead_ok:
                        raise ConfigError(
                            f"section ({lam},{fmt_index(n2)}) at {point.value} has "
                            f"lead {got}, expected {want}"
                        )
                elif got > want:
                    raise ConfigError(
                        f"section ({lam},{fmt_index(n2)}) at {point.value} has "
                        f"lead {got}, expected {want}"
                    )
                if ctx.is_zero(exp.coefficient(want)):
                    raise ConfigError(
                        f"section ({lam},{fmt_index(n2)}) at {point.value} has a "
                        "vanishing leading coefficient"
                    )
    # A_{g/2} must be the constant function 1
    const = atlas.sections.get((0, cfg.genus))
    if const is None:
        raise ConfigError("atlas file missing A_{g/2}")
    for point, exp in const.items():
        for e in range(exp.lead, exp.trunc + 1):
            want = ctx.one() if e == 0 else ctx.zero()
            if not ctx.is_zero(exp.coefficient(e) - want):
                raise ConfigError("A_{g/2} is not the constant function 1")
    rep = atlas.verify_duality()
    if not rep.passed:
        raise ConfigError("atlas file fails duality validation")
