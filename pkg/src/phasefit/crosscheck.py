"""Randomized equivalence suite: gate-level oracle vs the exact engine.

Every case builds a small random instance (|X| and |Y| powers of two within
caps), runs the dense circuit and checks that the z=0 probability equals the
exact expected Q and that the conditional parameter distribution equals the
per-vector mass ratios, all within a strict tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataTable, DomainGrid, ParameterSpace, TrialModel
from .measure import expected_q, q_profile
from .statevector import run_oracle

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class CaseResult:
    description: str
    p_exact: float
    p_oracle: float
    probability_dev: float
    distribution_dev: float
    ok: bool


def _random_dims(rng: np.random.Generator, max_x: int) -> tuple[int, ...]:
    total_exp = int(rng.integers(1, max_x.bit_length()))
    if total_exp >= 2 and rng.random() < 0.4:
        first = int(rng.integers(1, total_exp))
        return (2**first, 2 ** (total_exp - first))
    return (2**total_exp,)


def _random_space(rng: np.random.Generator, max_y: int) -> ParameterSpace:
    total_exp = int(rng.integers(1, max_y.bit_length()))
    if total_exp >= 2 and rng.random() < 0.5:
        first = int(rng.integers(1, total_exp))
        sizes = [first, total_exp - first]
    else:
        sizes = [total_exp]
    bits = [(f"y{j + 1}", b) for j, b in enumerate(sizes)]
    signed = [name for name, _ in bits if rng.random() < 0.3]
    return ParameterSpace.fresh(bits, signed=signed)


def _random_trial(rng: np.random.Generator, d: int, k: int) -> TrialModel:
    terms = []
    for j in range(k):
        var = int(rng.integers(1, d + 1))
        degree = int(rng.integers(0, 3))
        monomial = f"x{var}^{degree}" if degree > 1 else (f"x{var}" if degree == 1 else "")
        term = f"y{j + 1}*{monomial}" if monomial else f"y{j + 1}"
        if rng.random() < 0.2:
            term = f"(y{j + 1}/2)*{monomial}" if monomial else f"y{j + 1}/2"
        terms.append(term)
    if rng.random() < 0.5:
        terms.append(str(int(rng.integers(-8, 9))))
    source = " + ".join(terms)
    return TrialModel.from_source(source, d, k)


def random_instance(
    rng: np.random.Generator, max_x: int = 16, max_y: int = 16, max_n: int = 6
):
    dims = _random_dims(rng, max_x)
    grid = DomainGrid(dims)
    space = _random_space(rng, max_y)
    trial = _random_trial(rng, len(dims), len(space.fields))
    scale = int(rng.choice([4, 16, 64]))
    values = rng.integers(-scale, scale + 1, size=grid.total_size)
    f = DataTable(grid, values, provenance="crosscheck random")
    n_exp = int(rng.integers(1, max_n + 1))
    return f, trial, space, n_exp


def check_case(f, trial, space, n_exp, tol: float = DEFAULT_TOL) -> CaseResult:
    modulus = float(2**n_exp)
    p_exact = expected_q(f, trial, space, modulus)
    outcome = run_oracle(f, trial, space, n_exp)
    prob_dev = abs(p_exact - outcome.z_is_zero_probability)

    dist_dev = 0.0
    if outcome.conditional_y_distribution is not None:
        profile = q_profile(f, trial, space, modulus)
        total = profile.sum()
        for i, vec in enumerate(space.enumerate()):
            ratio = float(profile[i] / total)
            dist_dev = max(dist_dev, abs(ratio - outcome.conditional_y_distribution[vec]))

    description = (
        f"dims={f.grid.dims} trial={trial.source!r} "
        f"space={space.describe()} N={n_exp}"
    )
    ok = prob_dev <= tol and dist_dev <= tol
    return CaseResult(description, p_exact, outcome.z_is_zero_probability,
                      prob_dev, dist_dev, ok)


def run_crosscheck(
    cases: int = 100,
    max_x: int = 16,
    max_y: int = 16,
    max_n: int = 6,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
) -> list[CaseResult]:
    rng = np.random.default_rng(seed)
    results = []
    for _ in range(cases):
        f, trial, space, n_exp = random_instance(rng, max_x, max_y, max_n)
        results.append(check_case(f, trial, space, n_exp, tol))
    return results
