"""Built-in nonlinear reference scenario and its reproduction harness.

The scenario fits g = y1*x1^2 + y2*x2 (3 bits for y1, 5 for y2) to data
generated as x1^2 + 16*x2 + constant + uniform(+-30) noise on a 32x32 grid,
with threshold 60%, acceptance band [0.1, 0.6] and the exponent search
explicitly initialized at N=11.  The expected outcome is y1 fixed to 1 and
y2 narrowed to a short range around 16.

REFERENCE_TRACE holds the step probabilities of the original single run of
this scenario.  Its noise seed is unknown, so exact decimals are not
reproducible; the harness therefore checks decisions (final ranges) and
reports average absolute deviations of matched steps, which should sit well
inside a +-0.05 band.  Two reference entries are known misprints (a stale
value repeated after the space changed); they are kept as printed and simply
inflate the reported deviation slightly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .core import DataTable, NoiseSpec, ParameterSpace, TrialModel
from .data_io import GeneratorSpec, RunConfig
from .sensitivity import SensitivityConfig
from .trimmer import FitReport, TrimConfig, run_fit

EXPRESSION = "x1^2 + 16*x2"
TRIAL = "y1*x1^2 + y2*x2"
DIMS = (32, 32)
BITS = (("y1", 3), ("y2", 5))
THRESHOLD = 0.60
BAND = (0.1, 0.6)
INITIAL_N = 11
NOISE_HALF_WIDTH = 30

# (space signature, exponent) -> reference z=0 probability
REFERENCE_P_ZERO = {
    (((0, 7), (0, 31)), 11): 0.265781,
    (((0, 3), (0, 31)), 11): 0.448745,
    (((0, 1), (0, 31)), 11): 0.448745,  # misprint: stale value repeated
    (((1, 1), (0, 31)), 11): 0.931922,
    (((1, 1), (0, 31)), 10): 0.764582,
    (((1, 1), (0, 31)), 9): 0.431486,
    (((1, 1), (8, 23)), 9): 0.737291,
    (((1, 1), (8, 23)), 8): 0.375476,
    (((1, 1), (12, 19)), 8): 0.635818,
    (((1, 1), (12, 19)), 7): 0.206041,
    (((1, 1), (14, 17)), 7): 0.334398,
    (((1, 1), (16, 17)), 7): 0.334398,  # misprint: stale value repeated
}

# (space signature, parameter name) -> reference split probabilities
REFERENCE_SPLITS = {
    (((0, 7), (0, 31)), "y1"): (0.643622, 0.230168, 0.0778675, 0.0483422),
    (((0, 3), (0, 31)), "y1"): (0.217404, 0.519182, 0.217218, 0.046196),
    (((0, 1), (0, 31)), "y1"): (0.295151, 0.704849),
    (((1, 1), (0, 31)), "y2"): (0.0546121, 0.40125, 0.453112, 0.0910255),
    (((1, 1), (8, 23)), "y2"): (0.0398828, 0.371314, 0.475369, 0.113435),
    (((1, 1), (12, 19)), "y2"): (0.0170483, 0.300177, 0.511306, 0.171468),
    (((1, 1), (14, 17)), "y2"): (0.115462, 0.254449, 0.336552, 0.293536),
    (((1, 1), (16, 17)), "y2"): (0.534135, 0.465865),
}

HARNESS_NOTE = (
    "reference decimals come from one run with an unrecorded noise seed; "
    "agreement is judged on decisions, with matched-step probabilities "
    "expected within +-0.05 on average"
)


def scenario_config(seed: int, threads: int = 1, constant: int = 0,
                    mode: str = "exact") -> RunConfig:
    expression = EXPRESSION if constant == 0 else f"{EXPRESSION} + {constant}"
    return RunConfig(
        data=GeneratorSpec(
            expression=expression,
            dims=DIMS,
            noise=NoiseSpec(kind="uniform", half_width=NOISE_HALF_WIDTH, seed=seed),
        ),
        trial=TRIAL,
        bits=BITS,
        trim=TrimConfig(
            threshold=THRESHOLD,
            sensitivity=SensitivityConfig(band=BAND, initial_n=INITIAL_N,
                                          mode=mode, seed=seed),
        ),
        seed=seed,
        threads=threads,
    )


def build_instance(seed: int, constant: int = 0) -> tuple[DataTable, TrialModel, ParameterSpace]:
    config = scenario_config(seed, constant=constant)
    f = config.data.build()
    g = TrialModel.from_source(config.trial, 2, 2)
    space = ParameterSpace.fresh(config.bits)
    return f, g, space


def run_scenario(seed: int, constant: int = 0, mode: str = "exact") -> FitReport:
    f, g, space = build_instance(seed, constant=constant)
    config = scenario_config(seed, constant=constant, mode=mode)
    return run_fit(f, g, space, config.trim)


@dataclass(frozen=True)
class ComparisonResult:
    final_ok: bool
    final_description: str
    deviations: tuple[float, ...]
    matched_steps: int
    unmatched_run_steps: int
    unmatched_reference_steps: int

    @property
    def mean_abs_deviation(self) -> float:
        return sum(self.deviations) / len(self.deviations) if self.deviations else 0.0


def final_outcome_ok(report: FitReport) -> bool:
    """y1 fixed to exactly 1; y2 range contains 16 with at most 4 values."""
    by_name = {f.name: f for f in report.final_space.fields}
    y1 = by_name["y1"].values()
    y2 = by_name["y2"].values()
    return list(y1) == [1] and 16 in y2 and len(y2) <= 4


def compare_to_reference(report: FitReport) -> ComparisonResult:
    deviations = []
    matched = 0
    unmatched_run = 0
    seen_keys = set()
    for _, signature, outcome in report.sensitivity_traces:
        for step in outcome.trace:
            key = (signature, step.n_exp)
            if key in REFERENCE_P_ZERO:
                deviations.append(abs(step.estimate - REFERENCE_P_ZERO[key]))
                matched += 1
                seen_keys.add(("p", key))
            else:
                unmatched_run += 1
    for step in report.steps:
        key = (step.space_before, step.param_name)
        ref = REFERENCE_SPLITS.get(key)
        if ref is not None and len(ref) == len(step.probabilities):
            deviations.extend(abs(a - b) for a, b in zip(step.probabilities, ref))
            matched += 1
            seen_keys.add(("s", key))
        else:
            unmatched_run += 1
    unmatched_reference = (
        len(REFERENCE_P_ZERO) + len(REFERENCE_SPLITS) - len(seen_keys)
    )
    return ComparisonResult(
        final_ok=final_outcome_ok(report),
        final_description=report.final_space.describe(),
        deviations=tuple(deviations),
        matched_steps=matched,
        unmatched_run_steps=unmatched_run,
        unmatched_reference_steps=unmatched_reference,
    )


@dataclass(frozen=True)
class ReproductionSummary:
    seeds: tuple[int, ...]
    final_ok_rate: float
    mean_abs_deviation: float
    per_seed: tuple[ComparisonResult, ...]
    wall_seconds: float
    note: str = HARNESS_NOTE

    def lines(self) -> list[str]:
        out = [
            f"runs = {len(self.seeds)}",
            f"final_ok_rate = {self.final_ok_rate!r}",
            f"mean_abs_step_deviation = {self.mean_abs_deviation!r}",
            f"wall_seconds = {self.wall_seconds!r}",
            f"note = {self.note}",
        ]
        for seed, result in zip(self.seeds, self.per_seed):
            out.append(
                f"seed {seed}: final={'ok' if result.final_ok else 'MISS'} "
                f"({result.final_description}) "
                f"mean_dev={result.mean_abs_deviation:.4f} "
                f"matched={result.matched_steps}"
            )
        return out


def reproduce(n_seeds: int = 50, base_seed: int = 0, constant: int = 0) -> ReproductionSummary:
    """Run the scenario across noise seeds and compare against the reference."""
    start = time.monotonic()
    seeds = tuple(range(base_seed, base_seed + n_seeds))
    results = []
    all_devs = []
    for seed in seeds:
        report = run_scenario(seed, constant=constant)
        result = compare_to_reference(report)
        results.append(result)
        all_devs.extend(result.deviations)
    ok_rate = sum(1 for r in results if r.final_ok) / len(results)
    mean_dev = sum(all_devs) / len(all_devs) if all_devs else 0.0
    return ReproductionSummary(
        seeds=seeds,
        final_ok_rate=ok_rate,
        mean_abs_deviation=mean_dev,
        per_seed=tuple(results),
        wall_seconds=time.monotonic() - start,
    )
