"""Exact rational linear algebra and LP feasibility.

Everything here works over fractions.Fraction: the erosion criterion is a
yes/no question and floating-point tolerances would be fatal.  The simplex
uses Bland's rule, which guarantees termination on these tiny instances.
"""

from __future__ import annotations

from fractions import Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


def solve_unique(rows, rhs):
    """Solve A x = b exactly.  Returns the solution list only when it is
    unique; returns None when the system is inconsistent or underdetermined.
    """
    m = len(rows)
    n = len(rows[0]) if m else 0
    a = [[Fraction(v) for v in row] + [Fraction(rhs[i])] for i, row in enumerate(rows)]
    pivots = []
    row = 0
    for col in range(n):
        piv = next((r for r in range(row, m) if a[r][col] != 0), None)
        if piv is None:
            continue
        a[row], a[piv] = a[piv], a[row]
        inv = ONE / a[row][col]
        a[row] = [v * inv for v in a[row]]
        for r in range(m):
            if r != row and a[r][col] != 0:
                f = a[r][col]
                a[r] = [v - f * w for v, w in zip(a[r], a[row])]
        pivots.append(col)
        row += 1
        if row == m:
            break
    for r in range(row, m):
        if a[r][n] != 0:
            return None  # inconsistent
    if len(pivots) < n:
        return None  # free variables
    x = [ZERO] * n
    for r, col in enumerate(pivots):
        x[col] = a[r][n]
    return x


def feasible_eq_nonneg(rows, rhs):
    """Is {x >= 0 : A x = b} nonempty?  Phase-1 simplex with Bland's rule.

    Returns a feasible point (list of Fractions) or None.
    """
    m = len(rows)
    n = len(rows[0]) if m else 0
    # normalize to b >= 0
    tab = []
    for i in range(m):
        row = [Fraction(v) for v in rows[i]]
        b = Fraction(rhs[i])
        if b < 0:
            row = [-v for v in row]
            b = -b
        tab.append(row + [ZERO] * m + [b])
    for i in range(m):
        tab[i][n + i] = ONE
    ncols = n + m
    basis = [n + i for i in range(m)]
    # objective: minimize sum of artificials; reduced costs of the start basis
    cost = [ZERO] * (ncols + 1)
    for i in range(m):
        for j in range(ncols + 1):
            cost[j] -= tab[i][j]
    for j in range(n, ncols):
        cost[j] += ONE

    while True:
        enter = next((j for j in range(ncols) if cost[j] < 0), None)
        if enter is None:
            break
        # Bland: smallest ratio, ties by smallest basis index
        leave = None
        best = None
        for i in range(m):
            if tab[i][enter] > 0:
                ratio = tab[i][ncols] / tab[i][enter]
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best = ratio
                    leave = i
        if leave is None:
            # phase-1 objective is bounded below by 0; cannot happen
            raise AssertionError("phase-1 simplex unbounded")
        piv = tab[leave][enter]
        tab[leave] = [v / piv for v in tab[leave]]
        for i in range(m):
            if i != leave and tab[i][enter] != 0:
                f = tab[i][enter]
                tab[i] = [v - f * w for v, w in zip(tab[i], tab[leave])]
        f = cost[enter]
        if f != 0:
            cost = [v - f * w for v, w in zip(cost, tab[leave] + [])]
        basis[leave] = enter

    objective = -cost[ncols]
    if objective != 0:
        return None
    x = [ZERO] * n
    for i, b in enumerate(basis):
        if b < n:
            x[b] = tab[i][ncols]
    return x


def dot(u, v) -> Fraction:
    return sum((Fraction(a) * Fraction(b) for a, b in zip(u, v)), ZERO)


def parse_fraction(s) -> Fraction:
    if isinstance(s, str):
        return Fraction(s)
    if isinstance(s, int):
        return Fraction(s)
    raise ValueError(f"expected rational as 'p/q' string or int, got {s!r}")


def format_fraction(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)
