"""Exact dense linear solves over Fractions."""

from __future__ import annotations

from fractions import Fraction


class SingularSystem(ArithmeticError):
    pass


def solve_exact(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Solve ``matrix @ x = rhs`` by Gauss-Jordan elimination with exact pivots."""
    n = len(matrix)
    rows = [list(map(Fraction, r)) + [Fraction(b)] for r, b in zip(matrix, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if pivot is None:
            raise SingularSystem(f"singular at column {col}")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        prow = rows[col]
        inv = 1 / prow[col]
        if inv != 1:
            prow[:] = [v * inv for v in prow]
        for r in range(n):
            if r != col and rows[r][col] != 0:
                f = rows[r][col]
                rr = rows[r]
                for c in range(col, n + 1):
                    if prow[c]:
                        rr[c] -= f * prow[c]
    return [rows[i][n] for i in range(n)]
