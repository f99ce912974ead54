"""Category-based sampling protocol over the eight impedance parameters.

Each parameter is assigned one of three disjoint ranges (small, medium,
large); the full design enumerates all 3**8 = 6561 category tuples and draws
one parameter vector per tuple.
"""
from __future__ import annotations

import itertools
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .eda import GLOBAL_BOUNDS, PARAM_NAMES, ImpedanceParams
from .sim import SHAPES, PegSpec, SimConfig, SimulationDiverged, Termination, TrialOutcome, \
    diverged_outcome, run_trial

CATEGORIES = ("S", "M", "L")
GRID_SIZE = 3 ** 8

# parameter index -> range class
_CLASS_OF = (0, 0, 0, 1, 1, 1, 2, 2)


@dataclass(frozen=True)
class CategoryRanges:
    """Small/medium/large intervals for each class of parameter."""

    translational: tuple = ((50.0, 300.0), (301.0, 700.0), (701.0, 1000.0))
    rotational: tuple = ((5.0, 10.0), (11.0, 80.0), (81.0, 200.0))
    damping: tuple = ((0.1, 0.3), (0.4, 0.7), (0.8, 0.9))

    def __post_init__(self):
        for cls, name in enumerate(("translational", "rotational", "damping")):
            rows = tuple((float(lo), float(hi)) for lo, hi in getattr(self, name))
            object.__setattr__(self, name, rows)
            if len(rows) != 3:
                raise ValueError(f"{name}: expected three categories")
            lo_bound, hi_bound = GLOBAL_BOUNDS[_CLASS_OF.index(cls)]
            prev_hi = -math.inf
            for lo, hi in rows:
                if not (lo <= hi and lo > prev_hi):
                    raise ValueError(f"{name}: categories must be ordered and disjoint")
                if lo < lo_bound or hi > hi_bound:
                    raise ValueError(f"{name}: category outside global bounds")
                prev_hi = hi

    def table(self) -> np.ndarray:
        """Array of shape (8, 3, 2): per parameter, per category, [lo, hi]."""
        classes = (self.translational, self.rotational, self.damping)
        return np.array([classes[c] for c in _CLASS_OF], dtype=float)

    def interval(self, param: int, category: str) -> tuple:
        lo, hi = self.table()[param, CATEGORIES.index(category)]
        return float(lo), float(hi)

    def categorize(self, values) -> tuple:
        """Category letters of a parameter vector; ``"?"`` where no range contains it."""
        table = self.table()
        out = []
        for j, v in enumerate(np.asarray(values, dtype=float)):
            hit = [c for c, (lo, hi) in zip(CATEGORIES, table[j]) if lo <= v <= hi]
            out.append(hit[0] if hit else "?")
        return tuple(out)

    def to_dict(self) -> dict:
        return {"translational": self.translational, "rotational": self.rotational,
                "damping": self.damping}


@dataclass(frozen=True)
class TrialRecord:
    """One trial of the sweep.

    ``outcome`` is ``None`` for externally supplied data without diagnostics.
    """

    peg: str
    params: ImpedanceParams
    categories: tuple
    success: bool
    outcome: TrialOutcome | None = None
    trial_index: int = -1

    @property
    def termination(self) -> Termination | None:
        return None if self.outcome is None else self.outcome.termination

    @property
    def depth_mm(self) -> float:
        return math.nan if self.outcome is None else self.outcome.depth_reached


@dataclass
class Dataset:
    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    # (line number, raw text, reason) of rows rejected by a lenient load
    quarantined: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def X(self) -> np.ndarray:
        if not self.records:
            return np.zeros((0, 8))
        return np.array([r.params.as_array() for r in self.records])

    @property
    def y(self) -> np.ndarray:
        return np.array([r.success for r in self.records], dtype=bool)

    @property
    def pegs(self) -> list:
        return sorted({r.peg for r in self.records}, key=_peg_order)

    def for_peg(self, peg: str) -> "Dataset":
        return Dataset([r for r in self.records if r.peg == peg], dict(self.metadata))

    def successes(self) -> np.ndarray:
        return self.X[self.y]


def _peg_order(peg):
    return (SHAPES.index(peg) if peg in SHAPES else len(SHAPES), peg)


def enumerate_category_grid() -> list:
    """All 3**8 category tuples in lexicographic order (S < M < L)."""
    return list(itertools.product(CATEGORIES, repeat=8))


def grid_indices(grid_subsample: int | None = None, trials: int | None = None) -> np.ndarray:
    """Grid ranks to simulate.

    ``grid_subsample=k`` keeps every k-th tuple. ``trials=n`` keeps n ranks
    spread evenly over the grid; ``trials=81`` is the 3**4 sub-grid varying
    the four leading parameters.
    """
    if grid_subsample is not None and trials is not None:
        raise ValueError("give grid_subsample or trials, not both")
    if grid_subsample is not None:
        if grid_subsample < 1:
            raise ValueError("grid_subsample must be >= 1")
        return np.arange(0, GRID_SIZE, grid_subsample)
    if trials is not None:
        if not 1 <= trials <= GRID_SIZE:
            raise ValueError(f"trials must be in [1, {GRID_SIZE}]")
        return (np.arange(trials) * GRID_SIZE) // trials
    return np.arange(GRID_SIZE)


def sample_params(categories, rng: np.random.Generator,
                  ranges: CategoryRanges = CategoryRanges()) -> ImpedanceParams:
    """Draw each parameter uniformly inside its category interval."""
    if len(categories) != 8 or any(c not in CATEGORIES for c in categories):
        raise ValueError(f"invalid category tuple {categories!r}")
    table = ranges.table()
    idx = [CATEGORIES.index(c) for c in categories]
    lo = table[np.arange(8), idx, 0]
    hi = table[np.arange(8), idx, 1]
    return ImpedanceParams.from_array(rng.uniform(lo, hi))


def trial_seed(master_seed: int, peg: str, trial_index: int) -> np.random.SeedSequence:
    """Seed sequence of one trial; independent of execution order."""
    return np.random.SeedSequence([int(master_seed), SHAPES.index(peg), int(trial_index)])


def simulate_record(peg: PegSpec, categories, trial_index: int, ranges: CategoryRanges,
                    sim: SimConfig, master_seed: int) -> TrialRecord:
    seq = trial_seed(master_seed, peg.shape, trial_index)
    param_seq, sim_seq = seq.spawn(2)
    params = sample_params(categories, np.random.default_rng(param_seq), ranges)
    config = replace(sim, seed=int(sim_seq.generate_state(1, np.uint64)[0]))
    try:
        outcome = run_trial(peg, params, config)
    except SimulationDiverged:
        outcome = diverged_outcome(config)
    return TrialRecord(peg.shape, params, tuple(categories), outcome.success, outcome, int(trial_index))


def _run_chunk(peg, ranges, sim, master_seed, indices):
    grid = enumerate_category_grid()
    return [simulate_record(peg, grid[i], i, ranges, sim, master_seed) for i in indices]


def run_sweep(peg: PegSpec, ranges: CategoryRanges = CategoryRanges(), sim: SimConfig = SimConfig(),
              master_seed: int = 0, jobs: int = 1, indices=None, progress=None) -> Dataset:
    """Simulate one trial per selected grid tuple.

    Records are ordered by ``trial_index`` (the grid rank), so the result does
    not depend on ``jobs``. ``progress``, if given, is called with the number
    of finished trials.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    indices = grid_indices() if indices is None else np.asarray(indices, dtype=int)
    chunk = max(1, min(256, math.ceil(len(indices) / (4 * jobs))))
    chunks = [indices[i:i + chunk] for i in range(0, len(indices), chunk)]
    records = []
    if jobs == 1:
        for c in chunks:
            records.extend(_run_chunk(peg, ranges, sim, master_seed, c))
            if progress:
                progress(len(records))
    else:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            futures = [pool.submit(_run_chunk, peg, ranges, sim, master_seed, c) for c in chunks]
            for fut in futures:
                records.extend(fut.result())
                if progress:
                    progress(len(records))
    records.sort(key=lambda r: r.trial_index)
    meta = {
        "provenance": "simulated",
        "master_seed": int(master_seed),
        "peg": peg.shape,
        "clearance_mm": peg.clearance,
        "sim_config": sim.to_dict(),
        "category_ranges": ranges.to_dict(),
    }
    return Dataset(records, meta)


def success_rate(data, n_total=None) -> float:
    """Percentage of successful trials.

    Accepts a dataset, an iterable of records or booleans, or a pair of
    counts ``success_rate(n_success, n_total)``.
    """
    if n_total is not None:
        n_success = int(data)
        n_total = int(n_total)
        if n_total <= 0:
            raise ValueError("success rate of an empty dataset is undefined")
        if not 0 <= n_success <= n_total:
            raise ValueError("success count must lie in [0, n_total]")
        return 100.0 * n_success / n_total
    flags = [r.success if isinstance(r, TrialRecord) else bool(r) for r in data]
    if not flags:
        raise ValueError("success rate of an empty dataset is undefined")
    return 100.0 * sum(flags) / len(flags)


__all__ = [
    "CATEGORIES", "GRID_SIZE", "PARAM_NAMES", "CategoryRanges", "TrialRecord", "Dataset",
    "enumerate_category_grid", "grid_indices", "sample_params", "trial_seed",
    "simulate_record", "run_sweep", "success_rate",
]
