import numpy as np
import pytest
from scipy.stats import binomtest

from densample import (
    SamplingPlan,
    ValidationError,
    build_index,
    density_weights,
    draw_sample,
    hyper_rectangle,
    mean_knn_distances,
    sample_1point,
    sample_density,
    sample_mean,
    sample_random_baseline,
    sample_random_equal_weight,
    sample_uniform_z,
    weighted_positions_with_replacement,
)
from densample.util import round_half_up
from conftest import make_dataset


def indexed(dataset):
    return build_index(dataset.features)


class TestHyperRectangle:
    def test_componentwise_min_max(self):
        rect = hyper_rectangle([[0.0, 0.0], [1.0, 2.0], [0.5, 1.0]])
        np.testing.assert_array_equal(rect.lower, [0.0, 0.0])
        np.testing.assert_array_equal(rect.upper, [1.0, 2.0])

    def test_single_row_collapses(self):
        rect = hyper_rectangle([[3.0, -1.0]])
        np.testing.assert_array_equal(rect.lower, rect.upper)

    def test_constant_column_draws_return_constant(self):
        rect = hyper_rectangle([[1.0, 7.0], [2.0, 7.0]])
        draws = sample_uniform_z(rect, 50, np.random.default_rng(0))
        assert (draws[:, 1] == 7.0).all()

    def test_empty_input_rejected(self):
        with pytest.raises(ValidationError):
            hyper_rectangle(np.empty((0, 2)))


class TestUniformZ:
    def test_containment(self):
        rect = hyper_rectangle([[0.0, 0.0], [1.0, 1.0]])
        draws = sample_uniform_z(rect, 200, np.random.default_rng(1))
        assert rect.contains(draws).all()

    def test_law_of_large_numbers_mean(self):
        rect = hyper_rectangle([[0.0], [1.0]])
        draws = sample_uniform_z(rect, 10_000, np.random.default_rng(2))
        assert abs(draws.mean() - 0.5) < 0.02

    def test_deterministic_for_seed(self):
        rect = hyper_rectangle([[0.0, -5.0], [2.0, 5.0]])
        a = sample_uniform_z(rect, 10, np.random.default_rng(3))
        b = sample_uniform_z(rect, 10, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)


class TestRandomEqualWeight:
    def test_full_draw_is_a_permutation(self):
        data = make_dataset(np.arange(8.0)[:, None])
        positions = sample_random_equal_weight(data, 8, np.random.default_rng(4))
        np.testing.assert_array_equal(np.sort(positions), np.arange(8))

    def test_single_draw_frequencies_are_binomial(self):
        data = make_dataset(np.arange(8.0)[:, None])
        counts = np.zeros(8)
        trials = 10_000
        for seed in range(trials):
            pos = sample_random_equal_weight(data, 1, np.random.default_rng(seed))
            counts[pos[0]] += 1
        expected = trials / 8
        sigma = np.sqrt(trials * (1 / 8) * (7 / 8))
        assert np.all(np.abs(counts - expected) <= 3 * sigma)

    def test_deterministic_for_seed(self):
        data = make_dataset(np.arange(20.0)[:, None])
        a = sample_random_equal_weight(data, 5, np.random.default_rng(9))
        b = sample_random_equal_weight(data, 5, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)

    def test_overdraw_without_replacement_rejected(self):
        data = make_dataset(np.arange(3.0)[:, None])
        with pytest.raises(ValidationError, match="replacement"):
            sample_random_equal_weight(data, 4, np.random.default_rng(0))

    def test_with_replacement_allows_overdraw(self):
        data = make_dataset(np.arange(3.0)[:, None])
        positions = sample_random_equal_weight(
            data, 10, np.random.default_rng(0), with_replacement=True
        )
        assert positions.shape == (10,)


class TestDensityWeights:
    def test_hand_normalization(self):
        weights = density_weights([1.5, 1.0, 1.5])
        np.testing.assert_array_equal(weights, [0.375, 0.25, 0.375])

    def test_equal_scores_give_uniform_weights(self):
        weights = density_weights(np.full(5, 3.7))
        np.testing.assert_allclose(weights, 0.2, rtol=1e-15)

    def test_zero_score_gets_zero_probability(self):
        weights = density_weights([0.0, 1.0, 3.0])
        assert weights[0] == 0.0

    def test_all_zero_scores_rejected(self):
        with pytest.raises(ValueError, match="density contrast"):
            density_weights(np.zeros(4))

    def test_sums_to_one(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            weights = density_weights(rng.random(100) * 10)
            assert abs(weights.sum() - 1.0) < 1e-12

    def test_cumulative_inversion_never_selects_zero_weight(self):
        weights = density_weights([0.0, 1.0, 1.0])
        rng = np.random.default_rng(6)
        positions = weighted_positions_with_replacement(weights, 500, rng)
        assert not (positions == 0).any()


class TestOnePoint:
    def test_default_sizing_is_twenty_percent(self):
        rng = np.random.default_rng(7)
        data = make_dataset(rng.normal(size=(100, 3)), target=rng.normal(size=100))
        plan = SamplingPlan(strategy="1point", seed=1)
        sampled = sample_1point(data, indexed(data), plan)
        assert sampled.dataset.n == 20
        assert sampled.provenance[:10] == ("edge-1nn",) * 10
        assert sampled.provenance[10:] == ("random",) * 10

    def test_z_near_cluster_snaps_into_it(self):
        left = np.full((50, 2), 0.0) + np.random.default_rng(8).normal(0, 0.01, (50, 2))
        right = np.full((50, 2), 100.0)
        data = make_dataset(np.vstack([left, right]))
        plan = SamplingPlan(strategy="1point", seed=2)
        index = indexed(data)
        # draws landing in the left half of the rectangle must snap to left rows
        rect = hyper_rectangle(index.points)
        z = sample_uniform_z(rect, 200, np.random.default_rng(3))
        positions, _ = index.knn_positions(z, 1)
        near_left = np.linalg.norm(z, axis=1) < np.linalg.norm(z - 100.0, axis=1)
        assert (positions[near_left, 0] < 50).all()
        assert (positions[~near_left, 0] >= 50).all()

    def test_snapped_rows_equal_training_rows(self):
        rng = np.random.default_rng(9)
        data = make_dataset(rng.normal(size=(60, 2)), target=rng.normal(size=60))
        plan = SamplingPlan(strategy="1point", seed=3)
        sampled = sample_1point(data, indexed(data), plan)
        id_to_pos = {int(i): pos for pos, i in enumerate(data.row_ids)}
        for row, tag, ids in zip(
            sampled.dataset.features, sampled.provenance, sampled.sources
        ):
            source = data.features[id_to_pos[ids[0]]]
            np.testing.assert_array_equal(row, source)
            assert tag in ("edge-1nn", "random")

    def test_empty_training_rejected_by_dataset(self):
        with pytest.raises(ValidationError):
            make_dataset(np.empty((0, 1)))


class TestMeanStrategy:
    def test_target_is_mean_of_neighbour_targets(self):
        data = make_dataset(
            [[0.0], [0.1], [0.2], [0.3], [0.4]], target=[1.0, 2.0, 3.0, 4.0, 5.0]
        )
        plan = SamplingPlan(strategy="mean", seed=4)
        sampled = sample_mean(data, indexed(data), plan)
        # with n = k_mean = 5, every draw averages all five rows
        assert sampled.provenance[0] == "edge-mean"
        assert sampled.dataset.target[0] == pytest.approx(3.0)
        assert sorted(sampled.sources[0]) == [0, 1, 2, 3, 4]

    def test_identical_neighbours_reproduce_the_row(self):
        data = make_dataset(np.full((5, 2), 7.0), target=np.full(5, 2.5))
        plan = SamplingPlan(strategy="mean", seed=5)
        sampled = sample_mean(data, indexed(data), plan)
        np.testing.assert_array_equal(sampled.dataset.features[0], [7.0, 7.0])
        assert sampled.dataset.target[0] == 2.5

    def test_synthesized_rows_stay_inside_rectangle(self):
        rng = np.random.default_rng(10)
        data = make_dataset(rng.normal(size=(80, 3)), target=rng.normal(size=80))
        plan = SamplingPlan(strategy="mean", seed=6)
        sampled = sample_mean(data, indexed(data), plan)
        rect = hyper_rectangle(data.features)
        assert rect.contains(sampled.dataset.features).all()

    def test_too_few_rows_rejected(self):
        data = make_dataset([[0.0], [1.0]], target=[0.0, 1.0])
        plan = SamplingPlan(strategy="mean", seed=0)
        with pytest.raises(ValidationError, match="k_mean"):
            sample_mean(data, indexed(data), plan)


class TestDensityStrategy:
    def test_default_sizing_is_ten_percent(self):
        rng = np.random.default_rng(11)
        data = make_dataset(rng.normal(size=(1000, 2)), target=rng.normal(size=1000))
        plan = SamplingPlan(strategy="density", seed=7)
        sampled = sample_density(data, indexed(data), plan)
        assert sampled.dataset.n == 100
        assert set(sampled.provenance) == {"density"}

    def test_outliers_have_higher_expected_multiplicity(self):
        rng = np.random.default_rng(12)
        cluster = rng.normal(0, 1, size=(990, 3))
        outliers = rng.normal(0, 1, size=(10, 3)) + 60.0
        data = make_dataset(np.vstack([cluster, outliers]))
        index = indexed(data)
        scores = mean_knn_distances(index, index.points, 100, exclude_self=True)
        weights = density_weights(scores)
        assert weights[990:].min() > weights[:990].max()

    def test_two_point_bernoulli_mix(self):
        data = make_dataset([[0.0], [1.0]], target=[0.0, 1.0])
        plan = SamplingPlan(strategy="density", k_density=1, density_fraction=0.5,
                            seed=8)
        index = indexed(data)
        scores = mean_knn_distances(index, index.points, 1, exclude_self=True)
        np.testing.assert_array_equal(density_weights(scores), [0.5, 0.5])
        seen = set()
        for seed in range(40):
            sampled = sample_density(data, index, plan.with_seed(seed))
            seen.add(sampled.sources[0][0])
        assert seen == {0, 1}

    def test_k_density_must_be_below_n(self):
        data = make_dataset(np.arange(50.0)[:, None])
        plan = SamplingPlan(strategy="density", k_density=50, seed=0)
        with pytest.raises(ValidationError, match="k_density"):
            sample_density(data, indexed(data), plan)


class TestComposition:
    @pytest.mark.parametrize("n", [20, 100, 999])
    def test_sizing_rule(self, n):
        rng = np.random.default_rng(n)
        data = make_dataset(rng.normal(size=(n, 2)), target=rng.normal(size=n))
        index = indexed(data)
        expected_half = round_half_up(0.1 * n)
        for strategy, fn in (("1point", sample_1point), ("mean", sample_mean)):
            plan = SamplingPlan(strategy=strategy, seed=1)
            assert fn(data, index, plan).dataset.n == 2 * expected_half
        plan = SamplingPlan(strategy="density", k_density=10, seed=1)
        assert sample_density(data, index, plan).dataset.n == expected_half

    def test_random_baseline_size_and_tags(self):
        rng = np.random.default_rng(13)
        data = make_dataset(rng.normal(size=(100, 2)), target=rng.normal(size=100))
        sampled = sample_random_baseline(data, SamplingPlan(strategy="random", seed=2))
        assert sampled.dataset.n == 20
        assert set(sampled.provenance) == {"random"}

    def test_draw_sample_dispatch_and_determinism(self):
        rng = np.random.default_rng(14)
        data = make_dataset(rng.normal(size=(200, 3)), target=rng.normal(size=200))
        index = indexed(data)
        for strategy in ("1point", "mean", "random"):
            plan = SamplingPlan(strategy=strategy, seed=15)
            first = draw_sample(data, plan, index)
            second = draw_sample(data, plan, index)
            np.testing.assert_array_equal(first.dataset.features,
                                          second.dataset.features)
            np.testing.assert_array_equal(first.dataset.target, second.dataset.target)
            assert first.provenance == second.provenance
            assert first.sources == second.sources

    def test_draw_sample_requires_index_for_nn_strategies(self):
        data = make_dataset(np.arange(30.0)[:, None])
        with pytest.raises(ValidationError, match="index"):
            draw_sample(data, SamplingPlan(strategy="1point", seed=0))

    def test_containment_of_all_strategies(self):
        rng = np.random.default_rng(16)
        data = make_dataset(rng.normal(size=(300, 3)), target=rng.normal(size=300))
        index = indexed(data)
        rect = hyper_rectangle(data.features)
        for strategy in ("1point", "mean", "random"):
            plan = SamplingPlan(strategy=strategy, seed=17)
            sampled = draw_sample(data, plan, index)
            assert rect.contains(sampled.dataset.features).all()
        plan = SamplingPlan(strategy="density", k_density=20, seed=17)
        sampled = draw_sample(data, plan, index)
        assert rect.contains(sampled.dataset.features).all()

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ValidationError, match="strategy"):
            SamplingPlan(strategy="smogn")

    def test_bad_fraction_rejected(self):
        with pytest.raises(ValidationError, match="fraction"):
            SamplingPlan(strategy="density", density_fraction=0.0)


def _shell_cluster_dataset(seed, n_cluster=570, n_shell=30):
    rng = np.random.default_rng(seed)
    cluster = rng.normal(0, 1, size=(n_cluster, 3))
    directions = rng.normal(size=(n_shell, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    shell = directions * rng.uniform(8, 10, size=(n_shell, 1))
    features = np.vstack([cluster, shell])
    return make_dataset(features), n_cluster


class TestRebalancingProperties:
    def test_edge_snaps_overrepresent_the_sparse_shell(self):
        data, n_cluster = _shell_cluster_dataset(18)
        index = indexed(data)
        shell_share = (data.n - n_cluster) / data.n
        snapped_from_shell = 0
        snapped_total = 0
        for seed in range(100):
            plan = SamplingPlan(strategy="1point", seed=seed)
            sampled = sample_1point(data, index, plan)
            edge_sources = [
                ids[0]
                for ids, tag in zip(sampled.sources, sampled.provenance)
                if tag == "edge-1nn"
            ]
            snapped_total += len(edge_sources)
            snapped_from_shell += sum(src >= n_cluster for src in edge_sources)
        assert snapped_from_shell / snapped_total > shell_share

    def test_density_sample_flattens_density(self):
        data, _ = _shell_cluster_dataset(19)
        index = indexed(data)
        scores = mean_knn_distances(index, index.points, 30, exclude_self=True)
        wins = 0
        trials = 30
        for seed in range(trials):
            plan = SamplingPlan(strategy="density", k_density=30, seed=seed)
            sampled = sample_density(data, index, plan)
            distinct = np.unique([ids[0] for ids in sampled.sources])
            uniform = sample_random_equal_weight(
                data, sampled.dataset.n, np.random.default_rng(seed)
            )
            wins += scores[distinct].mean() > scores[uniform].mean()
        assert binomtest(wins, trials, alternative="greater").pvalue < 0.01
