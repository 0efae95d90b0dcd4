"""Automatic selection of the phase-precision exponent N.

The z=0 probability P = E(Q(f, g_., 2^N)) is estimated and compared against a
fixed acceptance band (default [0.1, 0.6]).  Below the band the modulus is
doubled (N+1): the phases only see noise.  Above it the modulus is halved
(N-1): the modulus dwarfs both noise and parameter differences.  Two
consecutive violations in opposite directions mean the band was skipped over
entirely and narrowing the space cannot help; hitting N=1 while still above
the band means no exponent works at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DataTable, ParameterSpace
from .errors import PhasefitError, SensitivitySearchError
from .measure import expected_q, q_profile


def hoeffding_shots(epsilon: float, delta: float) -> int:
    """Shots needed so |estimate - P| <= epsilon with probability >= 1-delta."""
    return math.ceil(math.log(2.0 / delta) / (2.0 * epsilon * epsilon))


@dataclass(frozen=True)
class SensitivityConfig:
    band: tuple[float, float] = (0.1, 0.6)
    initial_n: int | str = "auto"
    mode: str = "exact"  # exact | sampled
    shots: int | None = None  # sampled mode; default meets (epsilon, delta)
    epsilon: float = 0.02
    delta: float = 0.01
    seed: int = 0
    max_adjustments: int = 64

    def __post_init__(self):
        lo, hi = self.band
        if not (0.0 < lo < hi < 1.0):
            raise PhasefitError(f"band must satisfy 0 < lo < hi < 1, got {self.band}")
        if self.mode not in ("exact", "sampled"):
            raise PhasefitError(f"unknown mode {self.mode!r}")
        if self.initial_n != "auto" and int(self.initial_n) < 1:
            raise PhasefitError("initial_n must be >= 1 or 'auto'")
        if self.mode == "sampled" and self.effective_shots < hoeffding_shots(self.epsilon, self.delta):
            raise PhasefitError(
                f"{self.effective_shots} shots cannot meet epsilon={self.epsilon}, "
                f"delta={self.delta}; need >= {hoeffding_shots(self.epsilon, self.delta)}"
            )

    @property
    def effective_shots(self) -> int:
        return self.shots if self.shots is not None else hoeffding_shots(self.epsilon, self.delta)


@dataclass(frozen=True)
class SensitivityStep:
    n_exp: int
    estimate: float
    decision: str  # accept | raise | lower | no_sensitivity | space_cannot_improve


@dataclass(frozen=True)
class SensitivityOutcome:
    verdict: str  # accepted | no_sensitivity | space_cannot_improve
    accepted_n: int | None
    trace: tuple[SensitivityStep, ...]
    # sampled mode: raw enumeration indices of z=0 shots kept from the
    # accepted step, reused by the trim step that follows
    retained_raw_draws: tuple[int, ...] = field(default=())


def initial_exponent(f: DataTable, g, space: ParameterSpace) -> int:
    """Bits needed for the largest value either function reaches: the scan
    covers f over the grid and g over grid x parameter space, clamped >= 1."""
    top = int(f.values.max()) if f.values.size else 0
    coords = [c[np.newaxis, :] for c in f.grid.coordinate_arrays()]
    decoded = space.decoded_matrix()
    ys = [decoded[:, j:j + 1] for j in range(decoded.shape[1])]
    gvals = g.evaluate_on(coords, ys)
    top = max(top, int(gvals.max()) if gvals.size else 0, 1)
    return max(1, (top - 1).bit_length())


def _sampled_estimate(p_exact: float, shots: int, rng: np.random.Generator) -> tuple[float, int]:
    successes = int(rng.binomial(shots, p_exact))
    return successes / shots, successes


def estimate_p_zero(
    f: DataTable,
    g,
    space: ParameterSpace,
    n_exp: int,
    config: SensitivityConfig,
    rng: np.random.Generator | None = None,
) -> float:
    """Exact mode: E(Q) itself (same code path as expected_q).  Sampled mode:
    the success fraction of seeded measurement draws with that probability."""
    if n_exp < 1:
        raise PhasefitError("exponent must be >= 1")
    p = expected_q(f, g, space, float(2**n_exp))
    if config.mode == "exact":
        return p
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return _sampled_estimate(p, config.effective_shots, rng)[0]


def choose_sensitivity(
    f: DataTable,
    g,
    space: ParameterSpace,
    config: SensitivityConfig,
    initial_n: int | None = None,
    rng: np.random.Generator | None = None,
) -> SensitivityOutcome:
    """Adjust N until the band accepts, or report a terminal verdict."""
    if initial_n is not None:
        n = int(initial_n)
    elif config.initial_n == "auto":
        n = initial_exponent(f, g, space)
    else:
        n = int(config.initial_n)
    n = max(1, n)
    if config.mode == "sampled" and rng is None:
        rng = np.random.default_rng(config.seed)

    lo, hi = config.band
    trace: list[SensitivityStep] = []
    previous_violation: str | None = None
    for _ in range(config.max_adjustments):
        p_exact = expected_q(f, g, space, float(2**n))
        if config.mode == "exact":
            p, successes = p_exact, 0
        else:
            p, successes = _sampled_estimate(p_exact, config.effective_shots, rng)
        if lo <= p <= hi:
            trace.append(SensitivityStep(n, p, "accept"))
            retained: tuple[int, ...] = ()
            if config.mode == "sampled" and successes:
                profile = q_profile(f, g, space, float(2**n))
                cond = profile / profile.sum()
                retained = tuple(
                    int(v) for v in rng.choice(space.size, size=successes, p=cond)
                )
            return SensitivityOutcome("accepted", n, tuple(trace), retained)
        if p < lo:
            if previous_violation == "high":
                trace.append(SensitivityStep(n, p, "space_cannot_improve"))
                return SensitivityOutcome("space_cannot_improve", None, tuple(trace))
            previous_violation = "low"
            trace.append(SensitivityStep(n, p, "raise"))
            n += 1
        else:
            if previous_violation == "low":
                trace.append(SensitivityStep(n, p, "space_cannot_improve"))
                return SensitivityOutcome("space_cannot_improve", None, tuple(trace))
            previous_violation = "high"
            if n == 1:
                trace.append(SensitivityStep(n, p, "no_sensitivity"))
                return SensitivityOutcome("no_sensitivity", None, tuple(trace))
            trace.append(SensitivityStep(n, p, "lower"))
            n -= 1
    raise SensitivitySearchError(
        f"no verdict within {config.max_adjustments} adjustments", tuple(trace)
    )
