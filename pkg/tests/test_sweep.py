import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from pegspace.datastore import save_dataset
from pegspace.eda import ImpedanceParams
from pegspace.sim import PegSpec, SimConfig, Termination
from pegspace.sweep import (
    CATEGORIES, GRID_SIZE, CategoryRanges, Dataset, TrialRecord, enumerate_category_grid,
    grid_indices, run_sweep, sample_params, success_rate,
)

tuples = st.lists(st.sampled_from(CATEGORIES), min_size=8, max_size=8).map(tuple)
SHORT = SimConfig(timeout=3.0)


class TestCategoryGrid:
    grid = enumerate_category_grid()

    def test_size(self):
        assert len(self.grid) == 6561 == GRID_SIZE

    def test_first_and_last(self):
        assert self.grid[0] == ("S",) * 8
        assert self.grid[1] == ("S",) * 7 + ("M",)
        assert self.grid[-1] == ("L",) * 8

    def test_distinct_and_sorted(self):
        assert len(set(self.grid)) == len(self.grid)
        ranks = [tuple(CATEGORIES.index(c) for c in t) for t in self.grid]
        assert ranks == sorted(ranks)

    def test_trials_81_is_leading_subgrid(self):
        picked = [self.grid[i] for i in grid_indices(trials=81)]
        assert len(set(t[:4] for t in picked)) == 81
        assert all(t[4:] == ("S",) * 4 for t in picked)

    def test_subsample(self):
        assert_array_equal(grid_indices(grid_subsample=100), np.arange(0, 6561, 100))
        with pytest.raises(ValueError):
            grid_indices(grid_subsample=3, trials=5)
        with pytest.raises(ValueError):
            grid_indices(trials=0)


class TestCategoryRanges:
    def test_defaults(self):
        r = CategoryRanges()
        assert r.translational == ((50, 300), (301, 700), (701, 1000))
        assert r.rotational == ((5, 10), (11, 80), (81, 200))
        assert r.damping == ((0.1, 0.3), (0.4, 0.7), (0.8, 0.9))

    def test_table_shape(self):
        t = CategoryRanges().table()
        assert t.shape == (8, 3, 2)
        assert_array_equal(t[5, 2], [81, 200])
        assert_array_equal(t[7, 0], [0.1, 0.3])

    @pytest.mark.parametrize("bad", [((50, 300), (200, 700), (701, 1000)),
                                     ((50, 300), (301, 700), (701, 1200)),
                                     ((50, 300), (301, 700))])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            CategoryRanges(translational=bad)

    def test_categorize(self):
        r = CategoryRanges()
        assert r.categorize([60, 400, 900, 7, 50, 150, 0.2, 0.85]) == ("S", "M", "L", "S", "M", "L", "S", "L")
        assert r.categorize([300.5, 400, 900, 7, 50, 150, 0.2, 0.35])[::7] == ("?", "?")


class TestSampleParams:
    def test_all_small(self):
        p = sample_params(("S",) * 8, np.random.default_rng(0))
        assert 50 <= p.k_x <= 300
        assert 5 <= p.k_C <= 10
        assert 0.1 <= p.zeta_t <= 0.3

    def test_same_seed_same_params(self):
        a = sample_params(("M",) * 8, np.random.default_rng(42))
        b = sample_params(("M",) * 8, np.random.default_rng(42))
        assert a == b

    def test_uniform_small_translational(self):
        # oracle: U(50, 300) has mean 175 and standard error 72.2/sqrt(1e4)
        rng = np.random.default_rng(7)
        k = np.array([sample_params(("S",) * 8, rng).k_x for _ in range(10_000)])
        assert k.min() >= 50 and k.max() <= 300
        assert abs(k.mean() - 175) < 5

    def test_rejects_bad_tuple(self):
        with pytest.raises(ValueError):
            sample_params(("S",) * 7, np.random.default_rng(0))
        with pytest.raises(ValueError):
            sample_params(("S",) * 7 + ("X",), np.random.default_rng(0))

    @given(tuples, st.integers(0, 2**32))
    def test_inside_declared_ranges(self, cats, seed):
        p = sample_params(cats, np.random.default_rng(seed))
        assert CategoryRanges().categorize(p.as_array()) == cats


class TestRunSweep:
    indices = grid_indices(trials=24)

    @pytest.fixture(scope="class")
    @classmethod
    def serial(cls):
        return run_sweep(PegSpec("square"), sim=SHORT, master_seed=5, indices=cls.indices)

    def test_records_follow_grid(self, serial):
        grid = enumerate_category_grid()
        assert [r.trial_index for r in serial] == list(self.indices)
        for r in serial:
            assert r.categories == grid[r.trial_index]
            assert CategoryRanges().categorize(r.params.as_array()) == r.categories
            assert r.success == (r.termination is Termination.INSERTED)

    def test_parallel_matches_serial(self, serial, tmp_path):
        parallel = run_sweep(PegSpec("square"), sim=SHORT, master_seed=5, jobs=2, indices=self.indices)
        assert parallel.records == serial.records
        save_dataset(serial, tmp_path / "a.csv")
        save_dataset(parallel, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_subset_order_independent(self, serial):
        # a trial's draw depends only on (seed, peg, rank), not on its neighbours
        part = run_sweep(PegSpec("square"), sim=SHORT, master_seed=5, indices=self.indices[::-1][:5])
        assert part.records == serial.records[-5:]

    def test_other_seed_changes_draws(self, serial):
        other = run_sweep(PegSpec("square"), sim=SHORT, master_seed=6, indices=self.indices[:3])
        assert not np.array_equal(other.X, serial.X[:3])

    def test_metadata(self, serial):
        assert serial.metadata["master_seed"] == 5
        assert serial.metadata["sim_config"]["timeout"] == 3.0
        assert serial.metadata["provenance"] == "simulated"

    def test_diverged_trials_recorded_as_failures(self):
        data = run_sweep(PegSpec("square"), sim=SimConfig(dt=0.5, timeout=50.0), indices=[0, 1])
        assert len(data) == 2
        assert not data.y.any()
        assert {r.termination for r in data} == {Termination.DIVERGED}


class TestSuccessRate:
    def test_table_counts(self):
        assert_allclose(success_rate(646, 6561), 9.85, atol=0.005)
        assert_allclose(success_rate(101, 6561), 1.54, atol=0.005)

    def test_zero_and_full(self):
        assert success_rate([False] * 5) == 0.0
        assert success_rate([True] * 5) == 100.0

    def test_dataset_records(self):
        p = ImpedanceParams.from_array([100, 100, 100, 10, 10, 10, 0.5, 0.5])
        data = Dataset([TrialRecord("square", p, ("S",) * 8, s) for s in (True, False, False, False)])
        assert success_rate(data) == 25.0

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            success_rate([])
        with pytest.raises(ValueError):
            success_rate(0, 0)
