import numpy as np
import pytest

from densample import (
    SynthSpec,
    ValidationError,
    build_index,
    density_weights,
    fit_ols,
    generate,
    mean_knn_distances,
)


class TestGenerate:
    def test_noiseless_linear_truth_recovered_by_ols(self):
        spec = SynthSpec(n=400, p=4, seed=0, noise_sd=0.0,
                         true_coefficients=(2.0, -1.0, 0.5, 3.0),
                         true_intercept=-1.5)
        synth = generate(spec)
        model = fit_ols(synth.dataset)
        np.testing.assert_allclose(model.coefficients, spec.true_coefficients,
                                   atol=1e-8)
        assert model.intercept == pytest.approx(-1.5, abs=1e-8)

    def test_all_cluster_boundary(self):
        spec = SynthSpec(n=300, p=3, cluster_fraction=1.0, seed=1, noise_sd=0.1)
        synth = generate(spec)
        assert synth.region_labels == ("cluster",) * 300
        index = build_index(synth.dataset.features)
        scores = mean_knn_distances(index, index.points, 20, exclude_self=True)
        weights = density_weights(scores)
        # no shell: weights stay near uniform (within a small factor)
        assert weights.max() / weights.min() < 10

    def test_shell_rows_occupy_the_extreme_density_ranks(self):
        spec = SynthSpec(n=5000, p=5, seed=11, noise_sd=0.5)
        synth = generate(spec)
        index = build_index(synth.dataset.features)
        scores = mean_knn_distances(index, index.points, 100, exclude_self=True)
        order = np.argsort(-scores)
        shell = synth.shell_mask
        n_shell = int(shell.sum())
        # the n_shell highest scores are (almost) all shell rows ...
        assert shell[order[:n_shell]].mean() >= 0.9
        # ... and every shell row sits inside the top decile of scores
        top_decile = set(order[: synth.dataset.n // 10].tolist())
        assert all(int(i) in top_decile for i in np.flatnonzero(shell))

    def test_region_geometry(self):
        spec = SynthSpec(n=2000, p=4, seed=2, noise_sd=0.1)
        synth = generate(spec)
        norms = np.linalg.norm(synth.dataset.features, axis=1)
        shell = synth.shell_mask
        r_min, r_max = spec.shell_radius_range
        assert np.all(norms[shell] >= r_min) and np.all(norms[shell] <= r_max)
        exceptions = np.mean(norms[~shell] >= r_min)
        assert exceptions <= 0.001

    def test_same_seed_identical(self):
        spec = SynthSpec(n=100, p=2, seed=3, noise_sd=0.5)
        a, b = generate(spec), generate(spec)
        np.testing.assert_array_equal(a.dataset.features, b.dataset.features)
        np.testing.assert_array_equal(a.dataset.target, b.dataset.target)
        assert a.region_labels == b.region_labels

    def test_region_counts_match_fraction(self):
        spec = SynthSpec(n=1000, p=2, cluster_fraction=0.95, seed=4, noise_sd=0.1)
        synth = generate(spec)
        assert synth.region_labels.count("cluster") == 950
        assert synth.region_labels.count("shell") == 50

    def test_curvature_enters_target(self):
        base = dict(n=200, p=2, seed=5, noise_sd=0.0,
                    true_coefficients=(1.0, 1.0), true_intercept=0.0)
        flat = generate(SynthSpec(**base))
        curved = generate(SynthSpec(**base, curvature=0.1))
        np.testing.assert_array_equal(flat.dataset.features,
                                      curved.dataset.features)
        sq_norms = (flat.dataset.features ** 2).sum(axis=1)
        np.testing.assert_allclose(curved.dataset.target,
                                   flat.dataset.target + 0.1 * sq_norms,
                                   rtol=1e-12)


class TestSpecValidation:
    def test_bad_cluster_fraction(self):
        with pytest.raises(ValidationError):
            SynthSpec(n=10, p=2, cluster_fraction=0.0)

    def test_shell_too_close_to_cluster(self):
        with pytest.raises(ValidationError, match="3 x cluster_spread"):
            SynthSpec(n=10, p=2, cluster_spread=3.0, shell_radius_range=(6.0, 9.0))

    def test_coefficient_length_mismatch(self):
        with pytest.raises(ValidationError, match="length"):
            SynthSpec(n=10, p=2, true_coefficients=(1.0, 2.0, 3.0))

    def test_inverted_radius_range(self):
        with pytest.raises(ValidationError, match="r_min"):
            SynthSpec(n=10, p=2, shell_radius_range=(9.0, 6.0))

    def test_negative_noise(self):
        with pytest.raises(ValidationError, match="noise"):
            SynthSpec(n=10, p=2, noise_sd=-1.0)
