"""Independent classical Heisenberg vertex algebra over the rationals.

This is the genus-0 oracle: a self-contained implementation of the free
boson mode algebra [a_i, a_j] = i delta_{i+j,0}, its Fock space on
partitions, plain derivative fields d^k a(z), the normal ordered product

    :a b:_n = sum_{j<0} a_j b_{n-j} + sum_{j>=0} b_{n-j} a_j,

the translation operator [T, a_j] = -j a_{j-1}, and the classical affine
bracket.  It shares no code with the residue-table machinery; coefficient
indexing matches the weight-M convention used there (the n-th coefficient
multiplies z^(-n-M)), so results compare bit for bit at genus 0.

States are plain dicts {partition tuple: Fraction}.
"""

from __future__ import annotations

from fractions import Fraction

State = dict


def vacuum() -> State:
    return {(): Fraction(1)}


def state(parts) -> State:
    return {tuple(parts): Fraction(1)}


def add(u: State, v: State) -> State:
    out = dict(u)
    for mon, c in v.items():
        out[mon] = out.get(mon, Fraction(0)) + c
    return {m: c for m, c in out.items() if c != 0}


def scale(u: State, factor) -> State:
    if factor == 0:
        return {}
    return {m: factor * c for m, c in u.items()}


def equal(u: State, v: State) -> bool:
    return {m: c for m, c in u.items() if c != 0} == {
        m: c for m, c in v.items() if c != 0
    }


def apply_mode(j: int, u: State) -> State:
    """The oscillator mode a_j: creation for j < 0, a_0 v = 0."""
    out: State = {}
    for mon, c in u.items():
        if j < 0:
            new = tuple(sorted(mon + (-j,), reverse=True))
            out[new] = out.get(new, Fraction(0)) + c
        elif j == 0:
            continue
        else:
            for pos, p in enumerate(mon):
                if p == j:
                    new = mon[:pos] + mon[pos + 1 :]
                    out[new] = out.get(new, Fraction(0)) + c * j
    return {m: c for m, c in out.items() if c != 0}


def falling(n: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= n - i
    return out


def derived_mode_coeff(k: int, n: int) -> tuple[int, Fraction]:
    """(index, factor) with (d^k a)_n = factor * a_{n-k}."""
    return n - k, Fraction((-1) ** k * falling(n, k))


def ann_bound(orders: tuple, u: State) -> int:
    """Smallest bound with coeff_n(orders) u = 0 for all n > bound.

    The coefficient at n of the spec lowers degree by exactly n - sum(k_i).
    """
    deg = max((sum(m) for m in u), default=0)
    if not orders:
        return 0
    return deg + sum(orders)


def coeff_apply(orders: tuple, n: int, u: State) -> State:
    """Apply the n-th coefficient of :d^{k_1}a ... d^{k_M}a: to a state."""
    if not u:
        return {}
    if not orders:
        return dict(u) if n == 0 else {}
    k, rest = orders[0], orders[1:]
    if not rest:
        idx, factor = derived_mode_coeff(k, n)
        return scale(apply_mode(idx, u), factor)
    out: State = {}
    # annihilation side first: b_{n-j} (a^(k)_j u)
    deg = max(sum(m) for m in u)
    for j in range(0, deg + k + 1):
        idx, factor = derived_mode_coeff(k, j)
        if factor == 0:
            continue
        w = scale(apply_mode(idx, u), factor)
        if not w:
            continue
        out = add(out, coeff_apply(rest, n - j, w))
    # creation side: a^(k)_j (b_{n-j} u), nonzero only while n-j <= bound
    bound = ann_bound(rest, u)
    j = -1
    while n - j <= bound:
        w = coeff_apply(rest, n - j, u)
        if w:
            idx, factor = derived_mode_coeff(k, j)
            out = add(out, scale(apply_mode(idx, w), factor))
        j -= 1
    return out


def spec_of_monomial(parts) -> tuple:
    return tuple(p - 1 for p in parts)


def apply_T(u: State) -> State:
    """Classical translation: T(a_{-p} w) = p a_{-p-1} w + a_{-p} T(w)."""
    out: State = {}
    for mon, c in u.items():
        for pos, p in enumerate(mon):
            new = tuple(sorted(mon[:pos] + (p + 1,) + mon[pos + 1 :], reverse=True))
            out[new] = out.get(new, Fraction(0)) + c * p
    return {m: c for m, c in out.items() if c != 0}


def minimal_locality_order(orders_a: tuple, orders_b: tuple, states, window: int,
                           n_max: int = 24) -> int:
    """Smallest N with (z-w)^N [A(z), B(w)] = 0 on the given states."""
    from math import comb

    def commutator(n: int, m: int, u: State) -> State:
        return add(
            coeff_apply(orders_a, n, coeff_apply(orders_b, m, u)),
            scale(coeff_apply(orders_b, m, coeff_apply(orders_a, n, u)), -1),
        )

    for N in range(n_max + 1):
        ok = True
        for n in range(-window, window + 1):
            for m in range(-window, window + 1):
                for u in states:
                    acc: State = {}
                    for s in range(N + 1):
                        term = commutator(n + N - s, m + s, u)
                        acc = add(acc, scale(term, Fraction((-1) ** s * comb(N, s))))
                    if acc:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            return N
    raise ValueError(f"no locality order up to {n_max}")


# -- classical affine bracket (for the current-algebra oracle) ---------------


def affine_bracket(lie, i: str, n: int, j: str, m: int):
    """[x otimes t^n, y otimes t^m] = [x,y] t^{n+m} + n delta_{n,-m} (x|y) K.

    ``lie`` provides bracket structure constants and the invariant form in
    the same dict formats as :mod:`knva.affine`.  Returns (terms, central)
    with terms a dict {(label, index): Fraction}.
    """
    terms = {}
    for k_label, c in lie.bracket.get((i, j), {}).items():
        terms[(k_label, n + m)] = terms.get((k_label, n + m), Fraction(0)) + c
    central = Fraction(0)
    if n + m == 0:
        central = Fraction(n) * lie.form.get((i, j), Fraction(0))
    return {k: v for k, v in terms.items() if v != 0}, central
