"""Brute-force reference computations for checking the closed-form indices.

Everything here works from conditional expectations written out as explicit
loops over inclusion patterns, and shares no code with :mod:`sobolim.sobol`.
Only meant for small tables.
"""

from __future__ import annotations

from itertools import product

import numpy as np

ORACLE_MAX_VARIABLES = 10


def _y(table) -> list[float]:
    values = table.mean if hasattr(table, "candidates") else table
    return [float(v) for v in values]


def _width(y: list[float]) -> int:
    m = len(y).bit_length() - 1
    if len(y) != 1 << m:
        raise ValueError("table length must be a power of two")
    return m


def _mean(xs):
    return sum(xs) / len(xs)


def _var(xs):
    mu = _mean(xs)
    return sum((x - mu) ** 2 for x in xs) / len(xs)


def _conditional_means(y: list[float], group: list[int]) -> dict[tuple[int, ...], float]:
    """E[Y | variables in group fixed], keyed by the group's 0/1 setting."""
    m = _width(y)
    buckets: dict[tuple[int, ...], list[float]] = {}
    for mask in range(1 << m):
        setting = tuple(mask >> i & 1 for i in group)
        buckets.setdefault(setting, []).append(y[mask])
    return {k: _mean(v) for k, v in buckets.items()}


def closed_index(table, group: list[int]) -> float:
    """Var over the group of E[Y | group], divided by Var Y."""
    y = _y(table)
    return _var(list(_conditional_means(y, group).values())) / _var(y)


def first_order(table, i: int) -> float:
    return closed_index(table, [i])


def total_effect(table, i: int) -> float:
    """E over the other variables of Var[Y | others], divided by Var Y."""
    y = _y(table)
    m = _width(y)
    rest = [j for j in range(m) if j != i]
    groups: dict[tuple[int, ...], list[float]] = {}
    for mask in range(1 << m):
        groups.setdefault(tuple(mask >> j & 1 for j in rest), []).append(y[mask])
    return _mean([_var(v) for v in groups.values()]) / _var(y)


def anova_oracle(table) -> dict[tuple[int, ...], float]:
    """Variance share of every ANOVA component, keyed by variable tuple.

    Each component is built by inclusion-exclusion over conditional means,
    ``f_P(x) = sum over Q subset of P of (-1)^(|P|-|Q|) E[Y | x_Q]``, and its
    share is ``Var(f_P) / Var(Y)`` with inputs uniform on ``{0,1}^m``.
    """
    y = _y(table)
    m = _width(y)
    if m > ORACLE_MAX_VARIABLES:
        raise ValueError(f"oracle limited to {ORACLE_MAX_VARIABLES} variables, got {m}")
    total_var = _var(y)
    if total_var == 0.0:
        raise ArithmeticError("Var(Y) is zero")
    cond = {}
    for r in range(m + 1):
        for mask in range(1 << m):
            if bin(mask).count("1") == r:
                group = [i for i in range(m) if mask >> i & 1]
                cond[mask] = (group, _conditional_means(y, group))
    out = {}
    for mask in range(1, 1 << m):
        group = cond[mask][0]
        values = []
        for setting in product((0, 1), repeat=len(group)):
            x = dict(zip(group, setting))
            f = 0.0
            sub = mask
            while True:
                sub_group, means = cond[sub]
                sign = -1.0 if (len(group) - len(sub_group)) % 2 else 1.0
                f += sign * means[tuple(x[i] for i in sub_group)]
                if sub == 0:
                    break
                sub = (sub - 1) & mask
            values.append(f)
        # components have zero mean, so Var is the mean square
        out[tuple(group)] = _mean([v * v for v in values]) / total_var
    return out


def random_exact_table(m: int, rng: np.random.Generator, monotone: bool = False) -> np.ndarray:
    """Random table with Y(empty) = 0; ``monotone`` builds a coverage function."""
    size = 1 << m
    if monotone:
        universe = rng.integers(3, 12)
        covers = [set(rng.choice(universe, size=rng.integers(1, universe), replace=False).tolist())
                  for _ in range(m)]
        weights = rng.uniform(0.5, 2.0, size=universe)
        out = np.zeros(size)
        for mask in range(1, size):
            covered = set().union(*(covers[i] for i in range(m) if mask >> i & 1))
            out[mask] = sum(weights[u] for u in covered)
        return out
    y = rng.normal(size=size) * rng.uniform(0.1, 10.0)
    y[0] = 0.0
    return y
