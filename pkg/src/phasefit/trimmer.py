"""Quarter-split trimming of one parameter and the outer fitting loop.

One trim step looks at the two most significant active bits of a parameter,
forming quarters Y_i0..Y_i3, and considers the three overlapping half-spaces
Low = Y_i0+Y_i1, Mid = Y_i1+Y_i2, High = Y_i2+Y_i3.  If the heaviest
half-space carries at least the threshold of the conditional probability
mass, the parameter keeps only that half: Low/High fix the top bit, Mid
fixes a 0 bit and adds 2**(b-2) to the pre-evaluation offset so the new
value set is exactly the middle half.  A parameter down to one bit gets the
analogous two-way decision and is then finished either way.

The outer loop visits parameters in declaration order and restarts the pass
after every accepted trim, so later parameters always see the tightened
space; a parameter that failed its threshold is revisited only if some other
parameter's trim has succeeded since.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import DataTable, ParameterSpace
from .errors import DegenerateMeasureError, PhasefitError
from .measure import q_profile, ratio_from_profile
from .sensitivity import SensitivityConfig, SensitivityOutcome, choose_sensitivity


@dataclass(frozen=True)
class TrimConfig:
    threshold: float = 0.60
    sensitivity: SensitivityConfig = field(default_factory=SensitivityConfig)
    mode: str | None = None  # None: inherit from sensitivity
    draws: int | None = None  # sampled mode: conditional draws per trim step

    def __post_init__(self):
        if not (0.5 < self.threshold <= 1.0):
            raise PhasefitError(
                f"threshold must be in (0.5, 1], got {self.threshold} "
                "(two half-spaces could qualify at once below 0.5)"
            )
        if self.mode not in (None, "exact", "sampled"):
            raise PhasefitError(f"unknown mode {self.mode!r}")

    @property
    def effective_mode(self) -> str:
        return self.mode if self.mode is not None else self.sensitivity.mode

    @property
    def effective_draws(self) -> int:
        if self.draws is not None:
            return self.draws
        eps, delta = self.sensitivity.epsilon, self.sensitivity.delta
        # four quarter estimates per step, each at the (epsilon, delta) contract
        return math.ceil(4.0 * math.log(2.0 / delta) / (2.0 * eps * eps))


@dataclass(frozen=True)
class TrimStepReport:
    param_index: int
    param_name: str
    n_exp: int
    p_zero: float
    kind: str  # quarter | single_bit | degenerate
    probabilities: tuple[float, ...]
    choice: str | None  # low/mid/high, "0"/"1", or None
    resulting_active_bits: int
    space_before: tuple
    space_after: tuple


@dataclass(frozen=True)
class FitReport:
    steps: tuple[TrimStepReport, ...]
    sensitivity_traces: tuple[tuple[str, tuple, SensitivityOutcome], ...]
    initial_space: ParameterSpace
    final_space: ParameterSpace
    termination: str


def _quarter_masks(space: ParameterSpace, index: int) -> list[np.ndarray]:
    fld = space.fields[index]
    raw = space.raw_matrix()[:, index]
    top2 = raw >> (fld.active_bits - 2)
    return [top2 == j for j in range(4)]


def _half_masks(space: ParameterSpace, index: int) -> list[np.ndarray]:
    raw = space.raw_matrix()[:, index]
    return [raw == 0, raw == 1]


def _sampled_frequencies(
    masks: list[np.ndarray],
    profile: np.ndarray,
    draws: int,
    rng: np.random.Generator,
    retained: tuple[int, ...],
) -> tuple[float, ...]:
    total = profile.sum()
    if total <= 0.0:
        raise DegenerateMeasureError("total Q mass is zero; ratios undefined")
    cond = profile / total
    samples = list(retained)
    if len(samples) < draws:
        samples.extend(int(v) for v in rng.choice(profile.size, size=draws - len(samples), p=cond))
    samples = np.asarray(samples, dtype=np.int64)
    return tuple(float(np.count_nonzero(mask[samples])) / len(samples) for mask in masks)


def quarter_probabilities(
    f: DataTable,
    g,
    space: ParameterSpace,
    index: int,
    n_exp: int,
    mode: str = "exact",
    draws: int | None = None,
    rng: np.random.Generator | None = None,
    retained: tuple[int, ...] = (),
    profile: np.ndarray | None = None,
) -> tuple[float, float, float, float]:
    """Conditional probability r(Y_ij, Y) of each two-bit quarter of field i."""
    fld = space.fields[index]
    if fld.finished or fld.active_bits < 2:
        raise PhasefitError(
            f"field {fld.name!r} cannot be quartered (active_bits={fld.active_bits}, "
            f"finished={fld.finished})"
        )
    if profile is None:
        profile = q_profile(f, g, space, float(2**n_exp))
    masks = _quarter_masks(space, index)
    if mode == "sampled":
        if rng is None:
            rng = np.random.default_rng(0)
        count = draws if draws is not None else 4096
        return _sampled_frequencies(masks, profile, count, rng, retained)
    return tuple(ratio_from_profile(profile, m) for m in masks)


def select_half(quarters, threshold: float) -> str | None:
    """Heaviest of Low/Mid/High if it meets the threshold; ties go Low, Mid."""
    q0, q1, q2, q3 = quarters
    candidates = (("low", q0 + q1), ("mid", q1 + q2), ("high", q2 + q3))
    best_name, best_mass = candidates[0]
    for name, mass in candidates[1:]:
        if mass > best_mass:
            best_name, best_mass = name, mass
    if best_mass >= threshold:
        return best_name
    return None


def apply_half(space: ParameterSpace, index: int, half: str) -> ParameterSpace:
    """Keep one half of field i's range; the decoded set shrinks exactly."""
    fld = space.fields[index]
    if fld.active_bits < 2:
        raise PhasefitError(f"field {fld.name!r} has no two-bit split")
    if half == "low":
        new = replace(fld, fixed_prefix=fld.fixed_prefix + "0",
                      active_bits=fld.active_bits - 1)
    elif half == "high":
        new = replace(fld, fixed_prefix=fld.fixed_prefix + "1",
                      active_bits=fld.active_bits - 1)
    elif half == "mid":
        new = replace(fld, fixed_prefix=fld.fixed_prefix + "0",
                      active_bits=fld.active_bits - 1,
                      pre_eval_offset=fld.pre_eval_offset + 2 ** (fld.active_bits - 2))
    else:
        raise PhasefitError(f"unknown half {half!r}")
    return space.with_field(index, new)


def apply_single_bit(space: ParameterSpace, index: int, bit: str) -> ParameterSpace:
    """Fix the last active bit; the parameter is eliminated."""
    fld = space.fields[index]
    if fld.active_bits != 1:
        raise PhasefitError(f"field {fld.name!r} is not down to a single bit")
    if bit not in ("0", "1"):
        raise PhasefitError(f"bit must be '0' or '1', got {bit!r}")
    new = replace(fld, fixed_prefix=fld.fixed_prefix + bit, active_bits=0, finished=True)
    return space.with_field(index, new)


def mark_finished(space: ParameterSpace, index: int) -> ParameterSpace:
    return space.with_field(index, replace(space.fields[index], finished=True))


def _unmark_finished(space: ParameterSpace, index: int) -> ParameterSpace:
    return space.with_field(index, replace(space.fields[index], finished=False))


def trim_single_bit(
    f: DataTable,
    g,
    space: ParameterSpace,
    index: int,
    config: TrimConfig,
    n_exp: int,
    p_zero: float,
    rng: np.random.Generator | None = None,
    retained: tuple[int, ...] = (),
    profile: np.ndarray | None = None,
) -> TrimStepReport:
    """Two-way decision for a one-bit field; the field finishes either way."""
    fld = space.fields[index]
    if fld.active_bits != 1:
        raise PhasefitError(f"field {fld.name!r} is not down to a single bit")
    if profile is None:
        profile = q_profile(f, g, space, float(2**n_exp))
    masks = _half_masks(space, index)
    if config.effective_mode == "sampled":
        if rng is None:
            rng = np.random.default_rng(0)
        probs = _sampled_frequencies(masks, profile, config.effective_draws, rng, retained)
    else:
        probs = tuple(ratio_from_profile(profile, m) for m in masks)
    choice = None
    if probs[0] >= config.threshold:
        choice = "0"
    elif probs[1] >= config.threshold:
        choice = "1"
    after = apply_single_bit(space, index, choice) if choice else mark_finished(space, index)
    return TrimStepReport(
        param_index=index,
        param_name=fld.name,
        n_exp=n_exp,
        p_zero=p_zero,
        kind="single_bit",
        probabilities=probs,
        choice=choice,
        resulting_active_bits=after.fields[index].active_bits,
        space_before=space.signature(),
        space_after=after.signature(),
    )


def replay_steps(initial_space: ParameterSpace, steps) -> ParameterSpace:
    """Re-apply the recorded decisions; must land on the report's final space."""
    space = initial_space
    for step in steps:
        i = step.param_index
        if space.fields[i].finished and step.choice is not None:
            space = _unmark_finished(space, i)
        if step.choice is None:
            space = mark_finished(space, i)
        elif step.kind == "quarter":
            space = apply_half(space, i, step.choice)
        elif step.kind == "single_bit":
            space = apply_single_bit(space, i, step.choice)
    return space


def run_fit(
    f: DataTable,
    g,
    initial_space: ParameterSpace,
    config: TrimConfig,
) -> FitReport:
    """Loop sensitivity selection + one trim step per parameter until the
    space stops shrinking or the sensitivity search reports a terminal verdict."""
    space = initial_space
    steps: list[TrimStepReport] = []
    traces: list[tuple[str, tuple, SensitivityOutcome]] = []
    rng = np.random.default_rng(config.sensitivity.seed)
    accepted_trims = 0
    finished_at: dict[int, int] = {}
    current_n: int | None = None  # None: resolve from config on first use
    termination: str | None = None

    while termination is None:
        made_trim = False
        for i in range(len(space.fields)):
            fld = space.fields[i]
            if fld.active_bits < 1:
                continue
            if fld.finished:
                if finished_at.get(i) is None or accepted_trims <= finished_at[i]:
                    continue
                space = _unmark_finished(space, i)
                fld = space.fields[i]

            outcome = choose_sensitivity(f, g, space, config.sensitivity,
                                         initial_n=current_n, rng=rng)
            traces.append((fld.name, space.signature(), outcome))
            if outcome.verdict != "accepted":
                termination = outcome.verdict
                break
            current_n = outcome.accepted_n
            p_zero = outcome.trace[-1].estimate

            try:
                profile = q_profile(f, g, space, float(2**current_n))
                if fld.active_bits >= 2:
                    probs = quarter_probabilities(
                        f, g, space, i, current_n, mode=config.effective_mode,
                        draws=config.effective_draws, rng=rng,
                        retained=outcome.retained_raw_draws, profile=profile,
                    )
                    choice = select_half(probs, config.threshold)
                    after = apply_half(space, i, choice) if choice else mark_finished(space, i)
                    step = TrimStepReport(
                        param_index=i, param_name=fld.name, n_exp=current_n,
                        p_zero=p_zero, kind="quarter", probabilities=probs,
                        choice=choice,
                        resulting_active_bits=after.fields[i].active_bits,
                        space_before=space.signature(), space_after=after.signature(),
                    )
                else:
                    step = trim_single_bit(
                        f, g, space, i, config, current_n, p_zero, rng=rng,
                        retained=outcome.retained_raw_draws, profile=profile,
                    )
                    after = replay_steps(space, [step])
            except DegenerateMeasureError:
                after = mark_finished(space, i)
                step = TrimStepReport(
                    param_index=i, param_name=fld.name, n_exp=current_n,
                    p_zero=p_zero, kind="degenerate", probabilities=(),
                    choice=None, resulting_active_bits=fld.active_bits,
                    space_before=space.signature(), space_after=after.signature(),
                )

            steps.append(step)
            space = after
            if step.choice is not None:
                accepted_trims += 1
                made_trim = True
                break  # restart the pass so every parameter sees the new space
            finished_at[i] = accepted_trims

        if termination is None and not made_trim:
            termination = "converged"

    return FitReport(
        steps=tuple(steps),
        sensitivity_traces=tuple(traces),
        initial_space=initial_space,
        final_space=space,
        termination=termination,
    )
