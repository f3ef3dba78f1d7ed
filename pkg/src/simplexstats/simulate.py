"""Seeded Monte Carlo studies of the tests' operating characteristics.

Each study draws two groups per replicate from configured generators, runs
one of the testing procedures, and tallies the outcome categories. Results
are deterministic functions of the master seed: replicate i draws from a
generator seeded by SeedSequence(entropy=master_seed, spawn_key=(i,)),
group 1 first and group 2 second from the same stream, so the tally never
depends on batching or thread count.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import dirichlet, inference, nested
from .dirichlet import DirichletParams
from .errors import InputError, NumericalError
from .nested import NddParams, NestingTree
from .numerics import Tolerance, chi_square_sf

__all__ = [
    "MaugardProcedure",
    "DirichletLRT",
    "NddLRT",
    "SimSpec",
    "SimResult",
    "run_type1_study",
    "run_power_study",
    "run_correlation_check",
    "REJECT",
    "FAIL_TO_REJECT",
    "FIT_FAILURE",
]

REJECT = "Reject"
FAIL_TO_REJECT = "FailToReject"
FIT_FAILURE = "FitFailure"

# A study aborts when more than this fraction of replicates fails to fit;
# failures below the budget stay visible as their own outcome category.
FAILURE_BUDGET = 0.01


@dataclass(frozen=True)
class MaugardProcedure:
    """Per-group uniformity screening.

    Outcomes: RejectBoth, RejectOne, FailBoth. Decisions are calibrated
    against the simulated finite-sample null distribution by default, same
    as inference.maugard_procedure.
    """

    calibrated: bool = True
    calibration_replicates: int = 10000
    calibration_seed: int | None = None

    @property
    def name(self) -> str:
        return "maugard"

    @property
    def categories(self) -> tuple[str, ...]:
        return (
            inference.REJECT_BOTH,
            inference.REJECT_ONE,
            inference.FAIL_BOTH,
            FIT_FAILURE,
        )


@dataclass(frozen=True)
class DirichletLRT:
    """Two-sample equal-mean likelihood-ratio test. Outcomes: Reject,
    FailToReject."""

    @property
    def name(self) -> str:
        return "dirichlet-lrt"

    @property
    def categories(self) -> tuple[str, ...]:
        return (REJECT, FAIL_TO_REJECT, FIT_FAILURE)


@dataclass(frozen=True)
class NddLRT:
    """Two-sample nested-model likelihood-ratio test on a fixed tree."""

    tree: NestingTree

    @property
    def name(self) -> str:
        return "ndd-lrt"

    @property
    def categories(self) -> tuple[str, ...]:
        return (REJECT, FAIL_TO_REJECT, FIT_FAILURE)


def _generator_components(gen) -> int:
    if isinstance(gen, DirichletParams):
        return gen.n_components
    if isinstance(gen, NddParams):
        return gen.n_components
    raise InputError(
        f"generator must be DirichletParams or NddParams, got {type(gen).__name__}"
    )


def same_generator(g1, g2) -> bool:
    """Whether two generators define the same distribution."""
    if isinstance(g1, DirichletParams) and isinstance(g2, DirichletParams):
        return bool(np.array_equal(g1.alpha, g2.alpha))
    if isinstance(g1, NddParams) and isinstance(g2, NddParams):
        return g1.tree.render() == g2.tree.render()
    return False


@dataclass(frozen=True)
class SimSpec:
    """Configuration of one Monte Carlo study."""

    generator_1: DirichletParams | NddParams
    generator_2: DirichletParams | NddParams
    n_per_group: int | tuple[int, int]
    procedure: MaugardProcedure | DirichletLRT | NddLRT
    replicates: int = 10000
    level: float = 0.05
    master_seed: int = 0
    tol: Tolerance = Tolerance()

    def __post_init__(self):
        if self.replicates < 1:
            raise InputError(f"replicates must be >= 1, got {self.replicates}")
        if not (0.0 < self.level < 1.0):
            raise InputError(f"level must be in (0, 1), got {self.level}")
        k1 = _generator_components(self.generator_1)
        k2 = _generator_components(self.generator_2)
        if k1 != k2:
            raise InputError(
                f"generators disagree on component count: {k1} vs {k2}"
            )
        n1, n2 = self.n_pair
        if min(n1, n2) < 2:
            raise InputError("each group needs at least 2 observations")
        if isinstance(self.procedure, NddLRT):
            if self.procedure.tree.n_components != k1:
                raise InputError(
                    "the test tree covers "
                    f"{self.procedure.tree.n_components} components, "
                    f"the generators produce {k1}"
                )

    @property
    def n_pair(self) -> tuple[int, int]:
        if isinstance(self.n_per_group, tuple):
            n1, n2 = self.n_per_group
            return int(n1), int(n2)
        return int(self.n_per_group), int(self.n_per_group)

    @property
    def n_components(self) -> int:
        return _generator_components(self.generator_1)


@dataclass(frozen=True)
class SimResult:
    """Tally of one study: counts, rates, and binomial Monte Carlo SEs per
    outcome category. Counts partition the replicates exactly."""

    procedure: str
    counts: dict[str, int]
    rates: dict[str, float]
    mc_se: dict[str, float]
    replicates: int
    n_per_group: tuple[int, int]
    level: float
    master_seed: int
    wall_time_seconds: float

    def __post_init__(self):
        total = sum(self.counts.values())
        if total != self.replicates:
            raise InputError(
                f"category counts sum to {total}, expected {self.replicates}"
            )


def _draw(gen, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(gen, DirichletParams):
        return dirichlet.sample(gen, n, rng)
    return nested.sample(gen, n, rng)


def _draw_stacks(spec: SimSpec):
    """Per-replicate draws, stacked to (R, n, K) per group.

    Returns (x1, x2, drawn) where drawn flags replicates whose draws
    succeeded; failed rows hold a uniform placeholder and are excluded
    from the tally as fit failures.
    """
    r = spec.replicates
    n1, n2 = spec.n_pair
    k = spec.n_components
    x1 = np.empty((r, n1, k))
    x2 = np.empty((r, n2, k))
    drawn = np.ones(r, dtype=bool)
    for i in range(r):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=spec.master_seed, spawn_key=(i,))
        )
        try:
            x1[i] = _draw(spec.generator_1, n1, rng)
            x2[i] = _draw(spec.generator_2, n2, rng)
        except NumericalError:
            x1[i] = 1.0 / k
            x2[i] = 1.0 / k
            drawn[i] = False
    return x1, x2, drawn


def _stack_stats(x: np.ndarray) -> inference._BatchStats:
    r, n, _ = x.shape
    return inference._BatchStats(
        mean_log=np.log(x).mean(axis=1),
        mean=x.mean(axis=1),
        mean_sq=(x * x).mean(axis=1),
        n=np.full(r, float(n)),
    )


def _maugard_outcomes(spec: SimSpec, x1, x2):
    proc = spec.procedure
    k = spec.n_components
    n1, n2 = spec.n_pair
    lam1, ok1 = inference._uniformity_lrt_batch(x1, spec.tol)
    lam2, ok2 = inference._uniformity_lrt_batch(x2, spec.tol)
    if proc.calibrated:
        p1 = inference._calibrated_p(
            lam1, n1, k, proc.calibration_replicates,
            proc.calibration_seed, spec.tol,
        )
        p2 = inference._calibrated_p(
            lam2, n2, k, proc.calibration_replicates,
            proc.calibration_seed, spec.tol,
        )
    else:
        p1 = chi_square_sf(lam1, k - 1)
        p2 = chi_square_sf(lam2, k - 1)
    r1 = p1 < spec.level
    r2 = p2 < spec.level
    outcomes = np.where(
        r1 & r2,
        inference.REJECT_BOTH,
        np.where(r1 ^ r2, inference.REJECT_ONE, inference.FAIL_BOTH),
    )
    return outcomes, ok1 & ok2


def _lrt_outcomes(spec: SimSpec, x1, x2):
    k = spec.n_components
    if isinstance(spec.procedure, DirichletLRT):
        res = inference._two_sample_lrt_batch(
            _stack_stats(x1), _stack_stats(x2), spec.tol
        )
        lam = res["statistic"]
        ok = res["usable"] & res["converged"]
        df = k - 1
    else:
        tree = spec.procedure.tree
        lam = np.zeros(spec.replicates)
        ok = np.ones(spec.replicates, dtype=bool)
        df = 0
        for _, node in tree.internal_nodes():
            blocks1 = _node_blocks(node, x1)
            blocks2 = _node_blocks(node, x2)
            res = inference._two_sample_lrt_batch(
                _stack_stats(blocks1), _stack_stats(blocks2), spec.tol
            )
            lam = lam + res["statistic"]
            ok &= res["usable"] & res["converged"]
            df += len(node.children) - 1
    p = chi_square_sf(lam, df)
    return np.where(p < spec.level, REJECT, FAIL_TO_REJECT), ok


def _node_blocks(node, x: np.ndarray) -> np.ndarray:
    """Subtree composition of one internal node for a (R, n, K) stack."""
    masses = np.stack(
        [x[:, :, list(c.leaf_indices())].sum(axis=2) for c in node.children],
        axis=2,
    )
    return masses / masses.sum(axis=2, keepdims=True)


def _run(spec: SimSpec) -> SimResult:
    t0 = time.perf_counter()
    x1, x2, drawn = _draw_stacks(spec)
    if isinstance(spec.procedure, MaugardProcedure):
        outcomes, ok = _maugard_outcomes(spec, x1, x2)
    else:
        outcomes, ok = _lrt_outcomes(spec, x1, x2)
    ok = ok & drawn

    counts = {cat: 0 for cat in spec.procedure.categories}
    for cat in np.unique(outcomes[ok]):
        counts[str(cat)] = int((outcomes[ok] == cat).sum())
    counts[FIT_FAILURE] = int((~ok).sum())

    if counts[FIT_FAILURE] > FAILURE_BUDGET * spec.replicates:
        raise NumericalError(
            f"{counts[FIT_FAILURE]} of {spec.replicates} replicates failed "
            f"to fit, above the {FAILURE_BUDGET:.0%} budget"
        )

    r = float(spec.replicates)
    rates = {cat: counts[cat] / r for cat in counts}
    mc_se = {
        cat: float(np.sqrt(rates[cat] * (1.0 - rates[cat]) / r))
        for cat in counts
    }
    return SimResult(
        procedure=spec.procedure.name,
        counts=counts,
        rates=rates,
        mc_se=mc_se,
        replicates=spec.replicates,
        n_per_group=spec.n_pair,
        level=spec.level,
        master_seed=spec.master_seed,
        wall_time_seconds=time.perf_counter() - t0,
    )


def run_type1_study(spec: SimSpec) -> SimResult:
    """Error rates under a null configuration (one shared generator)."""
    if not same_generator(spec.generator_1, spec.generator_2):
        raise InputError(
            "type I studies need both groups drawn from the same generator"
        )
    return _run(spec)


def run_power_study(spec: SimSpec) -> SimResult:
    """Rejection rates under distinct group generators."""
    if same_generator(spec.generator_1, spec.generator_2):
        raise InputError("power studies need distinct group generators")
    return _run(spec)


def run_correlation_check(
    params, n: int, master_seed: int = 0
) -> np.ndarray:
    """Sample correlation matrix of n draws from a fitted model.

    Used to check that a nested fit actually reproduces the correlation
    pattern it was selected for.
    """
    if n < 3:
        raise InputError(f"need at least 3 draws for a correlation, got {n}")
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(0,))
    )
    x = _draw(params, n, rng)
    return np.corrcoef(x, rowvar=False)
