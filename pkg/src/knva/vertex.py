"""Fields, the state-field correspondence, and the vertex-axiom checkers.

A :class:`FieldSpec` is a tuple of derivative orders (k_1, ..., k_M)
naming the iterated normal-ordered word

    : D^{k_1} a(P) : D^{k_2} a(P) : ... : D^{k_M} a(P) : ... :

nested from the right, where D is the global derivative and a(P) the
generating field.  The weight of the word is M; its n-th coefficient is
indexed against the weight-M basis sections.  The state-field map sends
the monomial with parts (n_1, ..., n_M) to the spec (n_1-1, ..., n_M-1).

The evaluator computes coefficient actions recursively through the
residue tables: M = 1 uses the derivative chains q, deeper words use the
normal-ordering recoupling table with annihilation-ordered operator sums.
Every truncated index sum carries a certificate: tails are cut only where
structural exponent counting proves the summands vanish, and the
evaluator raises :class:`WindowOverflowError` when the constructed window
cannot certify a request.
"""

from __future__ import annotations

from math import comb

from .atlas import expected_lead, s_lambda2
from .errors import KnvaError, WindowOverflowError
from .fock import FockVector, Monomial, apply_generator, apply_T, monomial_degree, vacuum
from .indices import fmt_index, index_range
from .reports import CheckRecord, Report
from .series import Point, lie_derivative, residue_of_product
from .tables import (
    StructureTables,
    struct_ell_m_band,
    struct_gamma_kill_bound,
    struct_zeta_offsets,
)

FieldSpec = tuple  # derivative orders (k_1, ..., k_M)


def field_weight(spec: FieldSpec) -> int:
    return len(spec)


def state_field(mon: Monomial) -> FieldSpec:
    """The state-field correspondence on basis monomials."""
    return tuple(p - 1 for p in mon)


def parse_field_literal(text: str) -> FieldSpec:
    """Parse ``:D2 a . D0 a:`` into the spec (2, 0)."""
    from .errors import ConfigError
    import re

    body = text.strip()
    if body.startswith(":") and body.endswith(":"):
        body = body[1:-1]
    orders = []
    for piece in body.split("."):
        m = re.match(r"^\s*D(\d+)\s*a\s*$", piece)
        if m is None:
            raise ConfigError(f"cannot parse field literal {text!r}")
        orders.append(int(m.group(1)))
    return tuple(orders)


def format_field(spec: FieldSpec) -> str:
    if not spec:
        return "id"
    return ":" + " . ".join(f"D{k} a" for k in spec) + ":"


class CoefficientOperator:
    """Finite word sum representing one field coefficient on bounded states.

    ``words`` maps ordered generator-index tuples (leftmost acts last) to
    scalars; ``max_degree`` is the largest state degree on which the word
    sum agrees with the true coefficient.
    """

    def __init__(self, words: dict, max_degree: int, ctx):
        self.words = {w: c for w, c in words.items() if c != 0}
        self.max_degree = max_degree
        self.ctx = ctx

    def apply(self, tables: StructureTables, v: FockVector) -> FockVector:
        if not v.is_zero() and v.degree() > self.max_degree:
            raise WindowOverflowError(
                f"coefficient operator valid through degree {self.max_degree}, "
                f"got degree {v.degree()}"
            )
        from .fock import apply_word

        out = FockVector()
        with self.ctx.workdps():
            for word, c in self.words.items():
                img = apply_word(tables, word, v)
                if not img.is_zero():
                    out = out + img.scale(c)
        return out

    def format(self, scalar_fmt) -> str:
        if not self.words:
            return "0"
        pieces = []
        for word in sorted(self.words, key=lambda w: (len(w), w)):
            c = self.words[word]
            name = "".join(f"a[{fmt_index(j)}]" for j in word) or "id"
            pieces.append(f"({scalar_fmt(c)})*{name}")
        return " + ".join(pieces)


class Evaluator:
    """Coefficient evaluation over one table set, with caching."""

    def __init__(self, tables: StructureTables):
        self.tables = tables
        self.ctx = tables.ctx
        self.genus = tables.genus
        self.extent2 = tables.extent2
        self._coeff_cache: dict = {}
        self._ann_cache: dict = {}
        self._kill_cache: dict = {}
        self._ell_off_cache: dict = {}
        self._wzeta_cache: dict = {}
        self._t_cache: dict = {}
        self._derived_cache: dict = {}
        self.vacuum_certified: dict = {}
        self._zeta_off = struct_zeta_offsets(self.genus)

    # -- structural bounds -------------------------------------------------

    def _kill_bound(self, max_part: int) -> int:
        if max_part not in self._kill_cache:
            self._kill_cache[max_part] = struct_gamma_kill_bound(self.genus, max_part)
        return self._kill_cache[max_part]

    def _ell_offsets(self, lam: int) -> tuple[int, int]:
        """Global (min, max) of m2-(n2-j2) over structurally possible entries."""
        if lam not in self._ell_off_cache:
            lo, hi = 0, 0
            span = 6 * self.genus + 12
            for j2 in index_range(self.genus, span):
                for n2 in index_range(self.genus, span):
                    blo, bhi = struct_ell_m_band(self.genus, lam, j2, n2)
                    if blo > bhi:
                        continue
                    lo = min(lo, blo - (n2 - j2))
                    hi = max(hi, bhi - (n2 - j2))
            self._ell_off_cache[lam] = (lo, hi)
        return self._ell_off_cache[lam]

    def derived_coeff_bound(self, k: int, max_degree: int) -> int:
        """Doubled bound: (D^k a)_m kills degree<=max_degree states beyond it."""
        lo2, _ = self._zeta_off
        return max(self.genus - 2, self._kill_bound(max_degree)) - k * lo2

    def _annihilator_degree_drop(self, j2: int) -> int:
        """Certified minimal degree drop of a_j (j >= g/2) on any state.

        A central correction removes a part p with the cocycle structurally
        possible, which forces p >= (j2 - 3g - 2)/2; the pure annihilation
        path dies on the vacuum.
        """
        return max(0, -(-(j2 - 3 * self.genus - 2) // 2))

    def ann_bound(self, spec: FieldSpec, max_degree: int) -> int:
        """Certified doubled bound: coeff_n(spec) v = 0 for n2 > bound when
        deg(v) <= max_degree.  Derived from structural bands only."""
        key = (spec, max_degree)
        if key in self._ann_cache:
            return self._ann_cache[key]
        if not spec:
            out = -self.genus
        elif len(spec) == 1:
            out = self.derived_coeff_bound(spec[0], max_degree)
        else:
            k, rest = spec[0], spec[1:]
            lam_inner = len(rest)
            _, ell_hi = self._ell_offsets(lam_inner)
            lo2, _ = self._zeta_off
            raise_deg = max(0, (-k * lo2) // 2)
            out = (self.genus - 2) + self.ann_bound(rest, max_degree) + ell_hi
            j_top = self.derived_coeff_bound(k, max_degree)
            for j2 in range(self.genus, j_top + 1, 2):
                deg_after = max_degree - self._annihilator_degree_drop(j2) + raise_deg
                if deg_after < 0:
                    continue
                cand = j2 + self.ann_bound(rest, deg_after) + ell_hi
                if cand > out:
                    out = cand
        self._ann_cache[key] = out
        return out

    def _inner_threshold(self, spec: FieldSpec, v: FockVector) -> int:
        """Best certified annihilation bound for coeff(spec) acting on v."""
        if v.is_zero():
            return -self.genus
        bound = self.ann_bound(spec, v.degree())
        if set(v.terms) == {()} and spec in self.vacuum_certified:
            bound = min(bound, self.vacuum_certified[spec])
        return bound

    # -- generator-level pieces ------------------------------------------------

    def derived_generator_apply(self, k: int, j2: int, v: FockVector) -> FockVector:
        """(D^k a)_j v via the chain table."""
        key = (k, j2, v)
        hit = self._derived_cache.get(key)
        if hit is not None:
            return hit
        tables = self.tables
        out = FockVector()
        for i2, qv in tables.q_row(k, j2).items():
            img = apply_generator(tables, i2, v)
            if not img.is_zero():
                out = out + img.scale(qv)
        self._derived_cache[key] = out
        return out

    def T(self, v: FockVector) -> FockVector:
        return apply_T(self.tables, v, self._t_cache)

    # -- the coefficient action --------------------------------------------------

    def coeff_apply(self, spec: FieldSpec, n2: int, v: FockVector) -> FockVector:
        """Apply the n-th coefficient of the spec's field to a state."""
        if v.is_zero():
            return v
        key = (spec, n2, v)
        hit = self._coeff_cache.get(key)
        if hit is not None:
            return hit
        with self.ctx.workdps():
            out = self._coeff_apply_inner(spec, n2, v)
        self._coeff_cache[key] = out
        return out

    def _coeff_apply_inner(self, spec: FieldSpec, n2: int, v: FockVector) -> FockVector:
        tables = self.tables
        ctx = self.ctx
        genus = self.genus
        if not spec:
            return v if n2 == -genus else FockVector()
        if len(spec) == 1:
            if n2 > self.derived_coeff_bound(spec[0], v.degree()):
                return FockVector()
            return self.derived_generator_apply(spec[0], n2, v)
        k, rest = spec[0], spec[1:]
        lam_inner = len(rest)
        out = FockVector()

        # annihilation-ordered side: sum_{j >= g/2} B_m (D^k a)_j v
        j_top = min(self.extent2, self.derived_coeff_bound(k, v.degree()))
        if self.derived_coeff_bound(k, v.degree()) > self.extent2:
            raise WindowOverflowError(
                "annihilation scan exceeds the atlas extent; enlarge the window"
            )
        for j2 in range(genus, j_top + 1, 2):
            w = self.derived_generator_apply(k, j2, v)
            if w.is_zero():
                continue
            w_bound = self._inner_threshold(rest, w)
            blo, bhi = struct_ell_m_band(genus, lam_inner, j2, n2)
            for m2 in range(blo, min(bhi, w_bound) + 1, 2):
                if abs(m2) > self.extent2:
                    raise WindowOverflowError(
                        "normal-ordering band leaves the atlas extent"
                    )
                lv = tables.ell_entry(lam_inner, j2, m2, n2)
                if ctx.is_zero(lv):
                    continue
                img = self.coeff_apply(rest, m2, w)
                if not img.is_zero():
                    out = out + img.scale(lv)

        # creation side: sum_{j < g/2} (D^k a)_j B_m v
        t_inner = self._inner_threshold(rest, v)
        _, ell_hi = self._ell_offsets(lam_inner)
        lo_slack = max(0, -self._ell_lower_slack(lam_inner))
        j_stop = n2 - genus - lo_slack - t_inner
        if j_stop < -self.extent2:
            raise WindowOverflowError(
                "creation scan exceeds the atlas extent; enlarge the window"
            )
        j2 = genus - 2
        while j2 >= j_stop:
            blo, bhi = struct_ell_m_band(genus, lam_inner, j2, n2)
            for m2 in range(blo, min(bhi, t_inner) + 1, 2):
                if abs(m2) > self.extent2:
                    raise WindowOverflowError(
                        "normal-ordering band leaves the atlas extent"
                    )
                lv = tables.ell_entry(lam_inner, j2, m2, n2)
                if ctx.is_zero(lv):
                    continue
                img = self.coeff_apply(rest, m2, v)
                if img.is_zero():
                    continue
                out = out + self.derived_generator_apply(k, j2, img).scale(lv)
            j2 -= 2
        return out

    def _ell_lower_slack(self, lam: int) -> int:
        """min over the structural band of m2-(n2-j2)+genus (<=0 means the
        generic lower edge n-j-g/2 is sharp)."""
        lo, _ = self._ell_offsets(lam)
        return lo + self.genus

    # -- materialized word sums ----------------------------------------------------

    def coefficient_operator(
        self, spec: FieldSpec, n2: int, max_degree: int
    ) -> CoefficientOperator:
        """The n-th coefficient as an explicit word sum, exact on states of
        degree <= max_degree."""
        with self.ctx.workdps():
            words = self._operator_words(spec, n2, max_degree)
        return CoefficientOperator(words, max_degree, self.ctx)

    def _operator_words(self, spec: FieldSpec, n2: int, max_degree: int) -> dict:
        ctx = self.ctx
        tables = self.tables
        genus = self.genus
        if not spec:
            return {(): ctx.one()} if n2 == -genus else {}
        if len(spec) == 1:
            if n2 > self.derived_coeff_bound(spec[0], max_degree):
                return {}
            return {(i2,): qv for i2, qv in tables.q_row(spec[0], n2).items()}
        k, rest = spec[0], spec[1:]
        lam_inner = len(rest)
        words: dict = {}
        lo2, _ = self._zeta_off
        raise_deg = max(0, (-k * lo2) // 2)

        j_top = min(self.extent2, self.derived_coeff_bound(k, max_degree))
        if self.derived_coeff_bound(k, max_degree) > self.extent2:
            raise WindowOverflowError("annihilation scan exceeds the atlas extent")
        t_ann = self.ann_bound(rest, max_degree + raise_deg)
        for j2 in range(genus, j_top + 1, 2):
            blo, bhi = struct_ell_m_band(genus, lam_inner, j2, n2)
            for m2 in range(blo, min(bhi, t_ann) + 1, 2):
                if abs(m2) > self.extent2:
                    raise WindowOverflowError(
                        "normal-ordering band leaves the atlas extent"
                    )
                lv = tables.ell_entry(lam_inner, j2, m2, n2)
                if ctx.is_zero(lv):
                    continue
                inner = self._operator_words(rest, m2, max_degree + raise_deg)
                for i2, qv in tables.q_row(k, j2).items():
                    for w, c in inner.items():
                        key = w + (i2,)
                        acc = words.get(key)
                        add = lv * qv * c
                        words[key] = add if acc is None else acc + add

        t_inner = self.ann_bound(rest, max_degree)
        lo_slack = max(0, -self._ell_lower_slack(lam_inner))
        j_stop = n2 - genus - lo_slack - t_inner
        if j_stop < -self.extent2:
            raise WindowOverflowError("creation scan exceeds the atlas extent")
        j2 = genus - 2
        while j2 >= j_stop:
            blo, bhi = struct_ell_m_band(genus, lam_inner, j2, n2)
            for m2 in range(blo, min(bhi, t_inner) + 1, 2):
                if abs(m2) > self.extent2:
                    raise WindowOverflowError(
                        "normal-ordering band leaves the atlas extent"
                    )
                lv = tables.ell_entry(lam_inner, j2, m2, n2)
                if ctx.is_zero(lv):
                    continue
                inner = self._operator_words(rest, m2, max_degree)
                for i2, qv in tables.q_row(k, j2).items():
                    for w, c in inner.items():
                        key = (i2,) + w
                        acc = words.get(key)
                        add = lv * qv * c
                        words[key] = add if acc is None else acc + add
            j2 -= 2
        return {w: c for w, c in words.items() if not ctx.is_zero(c)}

    # -- weighted derivative expansion (for the translation check) -----------------

    def weighted_zeta(self, weight: int) -> dict:
        """Coefficients of grad on weight-``weight`` sections:
        grad f^n = sum_u wz[(u2, n2)] f^u, computed from the atlas."""
        if weight in self._wzeta_cache:
            return self._wzeta_cache[weight]
        atlas = self.tables.atlas
        if not atlas.sections:
            raise WindowOverflowError("weighted derivative needs a full atlas")
        ctx = self.ctx
        out: dict = {}
        with ctx.workdps():
            e = {p: atlas.e_distinguished(p) for p in (Point.PLUS, Point.MINUS)}
            for n2 in index_range(self.genus, self.extent2):
                grads = {
                    p: lie_derivative(e[p], atlas.f_upper(weight, n2, p))
                    for p in (Point.PLUS, Point.MINUS)
                }
                for u2 in index_range(self.genus, self.extent2):
                    if not self._struct_wzeta_possible(weight, u2, n2):
                        continue
                    val = residue_of_product(
                        grads[Point.PLUS],
                        atlas.section(1 - weight, u2, Point.PLUS),
                    )
                    if not ctx.is_zero(val):
                        out[(u2, n2)] = val
        self._wzeta_cache[weight] = out
        return out

    def _struct_wzeta_possible(self, weight: int, u2: int, n2: int) -> bool:
        g = self.genus
        e2 = 3 * g - 2
        for point in (Point.PLUS, Point.MINUS):
            grad_lead = (
                expected_lead(g, -1, e2, point)
                + expected_lead(g, weight, -n2, point)
                - 1
            )
            if grad_lead + expected_lead(g, 1 - weight, u2, point) >= 0:
                return False
        return True

    def wzeta_sources(self, weight: int, u2: int) -> list[int]:
        out = []
        for n2 in index_range(self.genus, self.extent2 + 4 * self.genus + 12):
            if self._struct_wzeta_possible(weight, u2, n2):
                if abs(n2) > self.extent2:
                    raise WindowOverflowError(
                        "derivative expansion source outside the atlas extent"
                    )
                out.append(n2)
        return out


# ---------------------------------------------------------------------------
# axiom checks
# ---------------------------------------------------------------------------


def check_vacuum(ev: Evaluator, spec: FieldSpec, window2: int | None = None) -> Report:
    """Vacuum property of the field named by ``spec``.

    Verifies, suffix by suffix from the innermost field outwards, that the
    coefficients kill the vacuum for every window index n > -s_M, and that
    the edge coefficient at n = -s_M returns C times the target monomial
    plus strictly lower-degree terms with C != 0.  Passing suffixes are
    recorded as certified thresholds, which the outer evaluations use to
    cut their creation scans; this mirrors the inductive structure of the
    vacuum theorem itself.
    """
    ctx = ev.ctx
    genus = ev.genus
    report = Report()
    v0 = vacuum(ctx)
    w2 = min(window2 or ev.extent2, ev.extent2)
    tol = ctx.tolerance
    for start in range(len(spec), -1, -1):
        suffix = spec[start:]
        if suffix in ev.vacuum_certified:
            continue
        M = len(suffix)
        edge2 = -s_lambda2(genus, M)
        worst = ctx.zero_mag()
        for n2 in index_range(genus, w2):
            if n2 <= edge2:
                continue
            img = ev.coeff_apply(suffix, n2, v0)
            mag = img.max_abs(ctx)
            if mag > worst:
                worst = mag
        annihilates = bool(worst <= tol)
        target = tuple(sorted((k + 1 for k in suffix), reverse=True))
        edge = ev.coeff_apply(suffix, edge2, v0)
        C = edge.coefficient(target)
        tail = edge - FockVector({target: C})
        tail_deg_ok = True
        tail_norm = ctx.zero_mag()
        for mon, c in tail.terms.items():
            if ctx.is_zero(c):
                continue
            if monomial_degree(mon) >= monomial_degree(target) and mon != target:
                tail_deg_ok = False
            mag = ctx.abs(c)
            if mag > tail_norm:
                tail_norm = mag
        c_ok = not ctx.is_zero(C)
        passed = annihilates and c_ok and tail_deg_ok
        report.add(
            CheckRecord(
                "vacuum",
                passed,
                residual=ctx.residual_str(worst),
                tolerance=ctx.residual_str(tol),
                params={"field": format_field(suffix)},
                details={
                    "edge_index": fmt_index(edge2),
                    "C": "0" if ctx.is_zero(C) else str(ctx.format(C)),
                    "tail_norm": ctx.residual_str(tail_norm),
                    "tail_lower_degree": tail_deg_ok,
                },
            )
        )
        if passed:
            ev.vacuum_certified[suffix] = edge2
    return report


def grad_coefficient_apply(
    ev: Evaluator, spec: FieldSpec, u2: int, v: FockVector
) -> FockVector:
    """u-th coefficient of grad(Y_spec) applied to v.

    The derivative of a normal-ordered word is the Leibniz sum of words
    with one derivative order raised; this is the derivative induced by
    the kernel definition of the product, under which differentiation
    happens before any coefficient recoupling and therefore preserves the
    operator ordering of the splitting.
    """
    out = FockVector()
    for slot in range(len(spec)):
        shifted = spec[:slot] + (spec[slot] + 1,) + spec[slot + 1 :]
        img = ev.coeff_apply(shifted, u2, v)
        if not img.is_zero():
            out = out + img
    return out


def transport_gap_formula(ev: Evaluator, u2: int):
    """Closed form of the central discrepancy between the section-basis
    coefficient transport of grad(:aa:) and its Leibniz derivative.

    Recoupling the product coefficients to the weight-2 basis loses the
    information of which factor an index came from; transporting *after*
    recoupling therefore reorders the operator pairs whose derivative
    band crosses g/2, leaving the central terms

        sum_{p < g/2 <= j, m} zeta[p,j] l^{pm}_u bracket(j,m)
      - sum_{j < g/2 <= p, m} zeta[p,j] l^{pm}_u bracket(j,m).

    The second sum vanishes identically (the derivative band cannot cross
    g/2 downward, by the vanishing of the zeta row at g/2); at genus 0
    the first vanishes too, which is why the distinction is invisible
    classically.
    """
    ctx = ev.ctx
    tables = ev.tables
    genus = ev.genus
    acc = ctx.zero()
    with ctx.workdps():
        for (p2, j2), zval in tables.zeta.items():
            s_p = p2 < genus
            s_j = j2 < genus
            if s_p == s_j:
                continue
            sgn = 1 if (s_j and not s_p) else -1
            for m2 in index_range(genus, ev.extent2):
                lv = tables.ell.get(1, {}).get((p2, m2, u2))
                if lv is None:
                    continue
                acc = acc + sgn * zval * lv * tables.bracket(j2, m2)
    return acc


def check_translation(
    ev: Evaluator,
    spec: FieldSpec,
    states,
    window2: int | None = None,
) -> Report:
    """grad Y(A,P) = [T, Y(A,P)] at coefficient level on test states.

    The derivative side is the Leibniz transport of the word (for a
    single factor this is exactly the zeta-chain convolution).  Two
    auxiliary records pin the analytic content: for single factors the
    Leibniz route is compared against the independently computed
    weighted-derivative expansion of the sections, and for the generator
    pair the gap between section-basis transport and the Leibniz
    derivative is compared against its closed central-correction formula
    (zero at genus 0).
    """
    ctx = ev.ctx
    report = Report()
    M = field_weight(spec)
    w2 = min(window2 or ev.extent2, ev.extent2)
    tol = ctx.tolerance
    worst = ctx.zero_mag()
    worst_base = None
    worst_gap = None
    with ctx.workdps():
        if M == 0:
            report.add(
                CheckRecord(
                    "translation", True, residual="0",
                    params={"field": format_field(spec)},
                    details={"note": "identity field; both sides vanish"},
                )
            )
            return report
        wz = ev.weighted_zeta(M)
        check_gap = spec == (0, 0) and 1 in ev.tables.ell
        for u2 in index_range(ev.genus, w2):
            gap_pred = transport_gap_formula(ev, u2) if check_gap else None
            for v in states:
                lhs = grad_coefficient_apply(ev, spec, u2, v)
                yu_v = ev.coeff_apply(spec, u2, v)
                rhs = ev.T(yu_v) - ev.coeff_apply(spec, u2, ev.T(v))
                mag = (lhs - rhs).max_abs(ctx)
                if mag > worst:
                    worst = mag
                if M == 1 or check_gap:
                    conv = FockVector()
                    for n2 in ev.wzeta_sources(M, u2):
                        z = wz.get((u2, n2))
                        if z is None:
                            continue
                        img = ev.coeff_apply(spec, n2, v)
                        if not img.is_zero():
                            conv = conv + img.scale(z)
                    if M == 1:
                        bmag = (conv - lhs).max_abs(ctx)
                        if worst_base is None or bmag > worst_base:
                            worst_base = bmag
                    else:
                        gap = conv - lhs
                        gmag = (gap - v.scale(gap_pred)).max_abs(ctx)
                        if worst_gap is None or gmag > worst_gap:
                            worst_gap = gmag
    report.add(
        CheckRecord(
            "translation",
            bool(worst <= tol),
            residual=ctx.residual_str(worst),
            tolerance=ctx.residual_str(tol),
            params={"field": format_field(spec), "window": fmt_index(w2)},
            details={"states": len(list(states))},
        )
    )
    if worst_base is not None:
        report.add(
            CheckRecord(
                "translation-derivative-expansion-base",
                bool(worst_base <= tol),
                residual=ctx.residual_str(worst_base),
                tolerance=ctx.residual_str(tol),
                params={"field": format_field(spec)},
            )
        )
    if worst_gap is not None:
        report.add(
            CheckRecord(
                "translation-transport-gap-formula",
                bool(worst_gap <= tol),
                residual=ctx.residual_str(worst_gap),
                tolerance=ctx.residual_str(tol),
                params={"field": format_field(spec)},
                details={
                    "note": "section-basis transport minus Leibniz derivative "
                    "equals the closed central correction"
                },
            )
        )
    return report


def commutator_kernel_apply(
    ev: Evaluator, specA: FieldSpec, specB: FieldSpec, n2: int, m2: int, v: FockVector
) -> FockVector:
    """[A_n, B_m] v."""
    return ev.coeff_apply(specA, n2, ev.coeff_apply(specB, m2, v)) - ev.coeff_apply(
        specB, m2, ev.coeff_apply(specA, n2, v)
    )


def check_locality_genus0(
    ev: Evaluator,
    specA: FieldSpec,
    specB: FieldSpec,
    states,
    window2: int,
    n_max: int = 24,
) -> Report:
    """Formal-distribution locality: minimal N with (z-w)^N [A, B] = 0."""
    ctx = ev.ctx
    if ev.genus != 0:
        raise KnvaError("formal-delta annihilation is the genus-0 criterion")
    report = Report()
    tol = ctx.tolerance
    with ctx.workdps():
        kernel: dict = {}
        reach = window2 + 2 * n_max
        for n2 in range(-window2, reach + 1, 2):
            for m2 in range(-window2, reach + 1, 2):
                for si, v in enumerate(states):
                    img = commutator_kernel_apply(ev, specA, specB, n2, m2, v)
                    if not img.prune(ctx).is_zero():
                        kernel[(n2, m2, si)] = img
        band2 = 0
        for (n2, m2, _si) in kernel:
            band2 = max(band2, abs(n2 + m2))
        minimal = None
        for N in range(n_max + 1):
            ok = True
            for n2 in range(-window2, window2 + 1, 2):
                for m2 in range(-window2, window2 + 1, 2):
                    for si, v in enumerate(states):
                        acc = FockVector()
                        for s in range(N + 1):
                            term = kernel.get((n2 + 2 * (N - s), m2 + 2 * s, si))
                            if term is None:
                                continue
                            factor = ctx.from_int((-1) ** s * comb(N, s))
                            acc = acc + term.scale(factor)
                        if not acc.prune(ctx).is_zero():
                            ok = False
                            break
                    if not ok:
                        break
                if not ok:
                    break
            if ok:
                minimal = N
                break
    report.add(
        CheckRecord(
            "locality-minimal-order",
            minimal is not None,
            params={"A": format_field(specA), "B": format_field(specB)},
            details={
                "minimal_N": minimal,
                "kernel_band": fmt_index(band2),
            },
        )
    )
    return report


def check_locality_banded(
    ev: Evaluator, specA: FieldSpec, specB: FieldSpec, states, window2: int
) -> Report:
    """Banded commutator kernels plus the annihilation-part identities.

    Verifies (i) [A_n, B_m] vanishes outside a finite measured band in
    n+m (with the gamma bound g+1 for the generator pair), (ii) the
    commutator of the annihilation parts of two derived generator fields
    vanishes, and (iii) the inner contraction kernels act as scalars on
    every test state (centrality), which is what makes the double-bracket
    vanish.
    """
    ctx = ev.ctx
    tables = ev.tables
    report = Report()
    tol = ctx.tolerance
    genus = ev.genus
    band2 = 0
    worst_outer = ctx.zero_mag()
    with ctx.workdps():
        for n2 in range(-window2, window2 + 1, 2):
            for m2 in range(-window2, window2 + 1, 2):
                nonzero = False
                for v in states:
                    img = commutator_kernel_apply(ev, specA, specB, n2, m2, v)
                    if not img.prune(ctx).is_zero():
                        nonzero = True
                        break
                if nonzero:
                    band2 = max(band2, abs(n2 + m2))
        gamma_pair = specA == (0,) and specB == (0,)
        if gamma_pair:
            limit2 = 2 * genus + 2
            for (n2, m2), v in tables.gamma.items():
                if abs(n2 + m2) > limit2:
                    mag = ctx.abs(v)
                    if mag > worst_outer:
                        worst_outer = mag
        report.add(
            CheckRecord(
                "locality-kernel-band",
                bool(worst_outer <= tol)
                and (not gamma_pair or band2 <= 2 * genus + 2),
                residual=ctx.residual_str(worst_outer),
                tolerance=ctx.residual_str(tol),
                params={"A": format_field(specA), "B": format_field(specB)},
                details={"measured_band": fmt_index(band2)},
            )
        )

        # annihilation-part commutators vanish: sum q q gamma-hat over
        # annihilation generator pairs only
        kA = specA[0] if len(specA) == 1 else None
        kB = specB[0] if len(specB) == 1 else None
        if kA is not None and kB is not None:
            worst_minus = ctx.zero_mag()
            for n2 in range(genus, window2 + 1, 2):
                rowA = tables.q_row(kA, n2)
                for m2 in range(genus, window2 + 1, 2):
                    rowB = tables.q_row(kB, m2)
                    acc = ctx.zero()
                    for p2, qa in rowA.items():
                        for q2, qb in rowB.items():
                            acc = acc + qa * qb * tables.bracket(p2, q2)
                    mag = ctx.abs(acc)
                    if mag > worst_minus:
                        worst_minus = mag
            report.add(
                CheckRecord(
                    "locality-minus-parts-commute",
                    bool(worst_minus <= tol),
                    residual=ctx.residual_str(worst_minus),
                    tolerance=ctx.residual_str(tol),
                    params={"A": format_field(specA), "B": format_field(specB)},
                )
            )
            # centrality of the contraction kernel on test states
            worst_central = ctx.zero_mag()
            for n2 in range(genus, window2 + 1, 2):
                for m2 in range(-window2, window2 + 1, 2):
                    scalar = contraction_kernel(ev, kA, kB, n2, m2)
                    for v in states:
                        lhs = minus_part_commutator_apply(ev, kA, kB, n2, m2, v)
                        mag = (lhs - v.scale(scalar)).max_abs(ctx)
                        if mag > worst_central:
                            worst_central = mag
            report.add(
                CheckRecord(
                    "locality-contractions-central",
                    bool(worst_central <= tol),
                    residual=ctx.residual_str(worst_central),
                    tolerance=ctx.residual_str(tol),
                    params={"A": format_field(specA), "B": format_field(specB)},
                )
            )
    return report


def contraction_kernel(ev: Evaluator, kA: int, kB: int, n2: int, m2: int):
    """Scalar kernel of [ (D^kA a)(P)_- , (D^kB a)(Q) ] at indices (n, m)."""
    ctx = ev.ctx
    tables = ev.tables
    if n2 < ev.genus:
        return ctx.zero()
    lo, hi = ev._zeta_off
    gband = 2 * ev.genus + 2
    s_lo = n2 + m2 + (kA + kB) * lo
    s_hi = n2 + m2 + (kA + kB) * hi
    if s_lo > gband or s_hi < -gband:
        return ctx.zero()  # no structurally possible bracket pairing
    acc = ctx.zero()
    with ctx.workdps():
        for p2, qa in tables.q_row(kA, n2).items():
            for q2, qb in tables.q_row(kB, m2).items():
                acc = acc + qa * qb * tables.bracket(p2, q2)
    return acc


def minus_part_commutator_apply(
    ev: Evaluator, kA: int, kB: int, n2: int, m2: int, v: FockVector
) -> FockVector:
    """[ (D^kA a)_n , (D^kB a)_m ] v for n on the annihilation side."""
    A = lambda w: ev.derived_generator_apply(kA, n2, w)
    B = lambda w: ev.derived_generator_apply(kB, m2, w)
    return A(B(v)) - B(A(v))


# ---------------------------------------------------------------------------
# the Wick formula
# ---------------------------------------------------------------------------


def _couple_sections(ev: Evaluator, indices: tuple, n2: int):
    """Coefficient of the weight-len basis section f^n in the ordered
    product of the listed weight-1 sections, coupled left-last."""
    ctx = ev.ctx
    if len(indices) == 1:
        return ctx.one() if indices[0] == n2 else ctx.zero()
    if len(indices) == 2:
        return ev.tables.ell_entry(1, indices[0], indices[1], n2)
    raise WindowOverflowError("section coupling implemented for weight <= 2")


def _section_couplings(
    ev: Evaluator, n_slots: int, target2: int, word_cap2: int, skip_cap2: int
) -> list:
    """All (index vector, coupling scalar) pairs for this point's slots.

    The vector lists the weight-1 section index of each factor slot in
    factor order; the scalar is the coefficient of the weight-``n_slots``
    basis section at ``target2`` in their ordered product.  Pairs with a
    slot above ``skip_cap2``, or with a creation slot below the extent
    whose partner exceeds ``word_cap2``, are dropped: in every surviving
    use such terms annihilate the test state (directly, or by forcing a
    companion slot dead or a contraction kernel structurally zero).
    """
    from .tables import struct_ell_m_band

    ctx = ev.ctx
    if skip_cap2 > ev.extent2:
        raise WindowOverflowError(
            "Wick certification cap exceeds the atlas extent; enlarge the window"
        )
    if n_slots == 1:
        return [((target2,), ctx.one())]
    out = []
    x_lo = max(-ev.extent2, target2 - skip_cap2 - ev.genus - 4)
    if (x_lo - ev.genus) % 2 != 0:
        x_lo += 1
    for x2 in range(x_lo, min(ev.extent2, skip_cap2) + 1, 2):
        blo, bhi = struct_ell_m_band(ev.genus, 1, x2, target2)
        for y2 in range(blo, min(bhi, skip_cap2) + 1, 2):
            if y2 < -ev.extent2:
                if x2 > word_cap2:
                    continue
                raise WindowOverflowError(
                    "Wick recoupling leaves the atlas extent"
                )
            c = ev.tables.ell_entry(1, x2, y2, target2)
            if not ctx.is_zero(c):
                out.append(((x2, y2), c))
    return out


def wick_rhs_apply(
    ev: Evaluator,
    specA: FieldSpec,
    specB: FieldSpec,
    n2: int,
    m2: int,
    v: FockVector,
) -> FockVector:
    """Right side of the Wick formula at coefficient pair (n, m) on v.

    Sums over contraction sets; each summand multiplies the scalar
    contraction kernels [D^k a(P)_-, D^h a(Q)] by the jointly normal
    ordered remaining word, with all section products recoupled to the
    weight-M (P) and weight-N (Q) bases in factor order.  For a fixed
    index assignment the annihilation split of each remaining factor is
    determined by its index, and the joint ordering puts plus parts in
    factor order followed by minus parts reversed.
    """
    from itertools import combinations, permutations

    ctx = ev.ctx
    genus = ev.genus
    M, N = len(specA), len(specB)
    if M > 2 or N > 2:
        raise WindowOverflowError("the Wick check supports words of up to 2 factors")
    out = FockVector()
    deg = 0 if v.is_zero() else v.degree()
    d_cap = deg + sum(specA) + sum(specB)
    word_cap2 = max(
        ev.derived_coeff_bound(k, d_cap) for k in tuple(specA) + tuple(specB)
    )
    couplings_P = _section_couplings(
        ev, M, n2, word_cap2, word_cap2 + abs(m2) + genus + 2
    )
    couplings_Q = _section_couplings(
        ev, N, m2, word_cap2, word_cap2 + abs(n2) + genus + 2
    )
    for s in range(0, min(M, N) + 1):
        for i_set in combinations(range(M), s):
            for j_sel in permutations(range(N), s):
                word_slots = [("P", i) for i in range(M) if i not in i_set] + [
                    ("Q", j) for j in range(N) if j not in j_sel
                ]
                for pvec, cP in couplings_P:
                    for qvec, cQ in couplings_Q:
                        scalar = cP * cQ
                        skip = False
                        for t, i in enumerate(i_set):
                            kappa = contraction_kernel(
                                ev, specA[i], specB[j_sel[t]], pvec[i], qvec[j_sel[t]]
                            )
                            scalar = scalar * kappa
                            if ctx.is_zero(scalar):
                                skip = True
                                break
                        if skip:
                            continue
                        idx_of = lambda pt, i: pvec[i] if pt == "P" else qvec[i]
                        # annihilation word slots beyond the degree cap act
                        # as zero on every surviving intermediate state
                        if any(idx_of(*f) > word_cap2 for f in word_slots):
                            continue
                        plus = [f for f in word_slots if idx_of(*f) < genus]
                        minus = [f for f in word_slots if idx_of(*f) >= genus]
                        order = plus + list(reversed(minus))
                        img = v
                        for point, i in reversed(order):
                            k = specA[i] if point == "P" else specB[i]
                            img = ev.derived_generator_apply(k, idx_of(point, i), img)
                            if img.is_zero():
                                break
                        if not img.is_zero():
                            out = out + img.scale(scalar)
    return out


def check_wick(
    ev: Evaluator,
    specA: FieldSpec,
    specB: FieldSpec,
    states,
    window2: int,
) -> Report:
    """Both sides of the Wick product formula on test states.

    The left side is the plain operator product A_n B_m; the right side
    sums contraction kernels times jointly normal-ordered reduced words.
    """
    ctx = ev.ctx
    report = Report()
    tol = ctx.tolerance
    worst = ctx.zero_mag()
    with ctx.workdps():
        for n2 in index_range(ev.genus, window2):
            for m2 in index_range(ev.genus, window2):
                for v in states:
                    lhs = ev.coeff_apply(specA, n2, ev.coeff_apply(specB, m2, v))
                    rhs = wick_rhs_apply(ev, specA, specB, n2, m2, v)
                    mag = (lhs - rhs).max_abs(ctx)
                    if mag > worst:
                        worst = mag
    report.add(
        CheckRecord(
            "wick",
            bool(worst <= tol),
            residual=ctx.residual_str(worst),
            tolerance=ctx.residual_str(tol),
            params={
                "A": format_field(specA),
                "B": format_field(specB),
                "window": fmt_index(window2),
            },
            details={"states": len(list(states))},
        )
    )
    return report
