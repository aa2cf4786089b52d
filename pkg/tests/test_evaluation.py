import numpy as np
import pytest

from encluster.autoencoder import TrainConfig
from encluster.errors import ShapeError, ValidationError
from encluster.evaluation import (FULL_SCALE_REFERENCE, EvaluationReport,
                                  compare_pipelines, eta, format_report_table,
                                  map_clusters, per_category_eta,
                                  write_report_csv, write_report_text)


class TestEta:
    def test_table_anchor_27_of_100(self):
        # 27 abnormal members out of 100 -> 0.73
        members = ["A"] * 73 + ["B"] * 27
        assert eta(members, "A", sample_size=100, seed=0) == pytest.approx(0.73)

    def test_perfect_cluster(self):
        assert eta(["A"] * 40, "A", sample_size=100) == 1.0

    def test_all_abnormal(self):
        assert eta(["B"] * 10, "A", sample_size=100) == 0.0

    def test_exact_mode_fraction(self):
        members = [0] * 9 + [1] * 3
        assert eta(members, 0, sample_size=100) == pytest.approx(1.0 - 3 / 12)

    def test_sampled_mode_engages_on_large_clusters(self):
        members = [0] * 400 + [1] * 100
        scores = {eta(members, 0, sample_size=100, seed=s) for s in range(5)}
        assert len(scores) > 1  # sampling noise, seeded
        for s in scores:
            assert 0.6 <= s <= 0.95

    def test_sampled_converges_to_exact(self):
        members = [0] * 400 + [1] * 100
        exact = 1.0 - 100 / 500
        approx = eta(members, 0, sample_size=10_000, seed=3)
        assert abs(approx - exact) < 0.02

    def test_sampled_mode_deterministic_per_seed(self):
        members = [0] * 300 + [1] * 300
        assert eta(members, 0, seed=7) == eta(members, 0, seed=7)

    def test_unlabeled_members_count_abnormal(self):
        # a None label forces sampled mode and counts against the cluster
        score = eta([0, 0, None, 0], 0, sample_size=100_000, seed=1)
        assert score == pytest.approx(0.75, abs=0.01)

    def test_errors(self):
        with pytest.raises(ValidationError):
            eta([], 0)
        with pytest.raises(ValidationError):
            eta([0], 0, sample_size=0)


class TestMapClusters:
    def test_majority(self):
        mapping = map_clusters([0, 0, 0], [0, 0, 1], k=1, n_categories=2)
        assert mapping == {0: 0}

    def test_tie_breaks_toward_lower_category(self):
        mapping = map_clusters([0, 0], [1, 0], k=1, n_categories=2)
        assert mapping == {0: 0}

    def test_empty_cluster_maps_to_zero(self):
        mapping = map_clusters([0, 0], [1, 1], k=2, n_categories=2)
        assert mapping == {0: 1, 1: 0}

    def test_matches_counting_oracle(self, rng):
        for _ in range(20):
            n = int(rng.integers(5, 200))
            k = int(rng.integers(1, 8))
            n_cat = int(rng.integers(2, 6))
            asg = rng.integers(0, k, n)
            lab = rng.integers(0, n_cat, n)
            mapping = map_clusters(asg, lab, k=k, n_categories=n_cat)
            for c in range(k):
                members = lab[asg == c]
                if members.size == 0:
                    assert mapping[c] == 0
                    continue
                counts = [int(np.sum(members == cat)) for cat in range(n_cat)]
                best = max(counts)
                assert counts[mapping[c]] == best
                assert mapping[c] == counts.index(best)  # lowest-index tie rule

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            map_clusters([0, 1], [0], k=2, n_categories=1)


class TestPerCategoryEta:
    def test_size_weighted_mean(self):
        # cluster 0: 3 of category 0, pure; cluster 1: 2/3 category 0
        asg = np.array([0, 0, 0, 1, 1, 1])
        lab = np.array([0, 0, 0, 0, 0, 1])
        mapping = {0: 0, 1: 0}
        scores = per_category_eta(asg, lab, mapping, n_categories=2)
        assert scores[0] == pytest.approx((1.0 * 3 + (2 / 3) * 3) / 6)
        assert scores[1] == 0.0  # category 1 never recovered


def small_features(rng, n_per_class, n_classes=2, dim=8):
    """Cheap, clearly separated synthetic feature matrix."""
    blocks, labels = [], []
    for c in range(n_classes):
        center = np.zeros(dim)
        center[c % dim] = 10.0 * (c + 1)
        blocks.append(center + rng.normal(0, 0.3, (n_per_class, dim)))
        labels += [c] * n_per_class
    return np.concatenate(blocks), np.asarray(labels)


class TestComparePipelines:
    DIMS = (8, 6, 4, 2, 4, 6, 8)

    def test_single_category_scores_one(self, rng):
        features, _ = small_features(rng, 12, n_classes=1)
        labels = np.zeros(12, dtype=int)
        report = compare_pipelines(
            features, labels, layer_dims=self.DIMS, activation="tanh",
            train_cfg=TrainConfig(epochs=3), k=3, seed=1)
        assert report.eta_aekmc == {0: 1.0}
        assert report.eta_kmeans == {0: 1.0}
        assert set(report.mapping_aekmc.values()) == {0}

    def test_deterministic_per_seed(self, rng):
        features, labels = small_features(rng, 10)
        kw = dict(layer_dims=self.DIMS, train_cfg=TrainConfig(epochs=5), k=4)
        r1 = compare_pipelines(features, labels, seed=9, **kw)
        r2 = compare_pipelines(features, labels, seed=9, **kw)
        assert r1.eta_aekmc == r2.eta_aekmc
        assert r1.eta_kmeans == r2.eta_kmeans
        assert r1.loss_curve == r2.loss_curve

    def test_easy_separation_recovers_categories(self, rng):
        features, labels = small_features(rng, 20)
        report = compare_pipelines(
            features, labels, layer_dims=self.DIMS,
            train_cfg=TrainConfig(epochs=30), k=4, seed=2)
        assert report.eta_kmeans[0] == pytest.approx(1.0)
        assert report.eta_kmeans[1] == pytest.approx(1.0)
        assert report.mean_eta_aekmc() > 0.9

    def test_needs_at_least_k_points(self, rng):
        features, labels = small_features(rng, 2)
        with pytest.raises(ValidationError):
            compare_pipelines(features, labels, layer_dims=self.DIMS, k=10, seed=0)


class TestReportFiles:
    def make_report(self):
        return EvaluationReport(
            n_categories=2, eta_aekmc={0: 0.73, 1: 0.838},
            eta_kmeans={0: 0.416, 1: 0.784},
            mapping_aekmc={0: 0, 1: 1}, mapping_kmeans={0: 0, 1: 1},
            sample_size=100, seed=1)

    def test_csv_layout(self, tmp_path):
        path = tmp_path / "report.csv"
        write_report_csv(self.make_report(), ["intersection", "same_road"], path)
        lines = path.read_text().splitlines()
        assert lines[0] == "category,eta_aekmc,eta_kmeans"
        assert lines[1] == "intersection,0.73,0.416"
        assert len(lines) == 3

    def test_text_table(self, tmp_path):
        table = format_report_table(self.make_report(), ["intersection", "same_road"])
        assert "AE-kMC" in table and "k-means" in table
        assert "73.0%" in table and "41.6%" in table
        path = tmp_path / "report.txt"
        write_report_text(self.make_report(), ["intersection", "same_road"], path)
        assert path.read_text() == table

    def test_reference_block_appended(self):
        table = format_report_table(self.make_report(),
                                    ["intersection", "same_road"],
                                    reference=FULL_SCALE_REFERENCE)
        assert "full-scale reference" in table
        # same_road reference row: 83.8% AE-kMC vs 78.4% raw k-means
        assert "83.8%" in table and "78.4%" in table

    def test_reference_values(self):
        assert FULL_SCALE_REFERENCE["same_road"] == (0.838, 0.784)
        assert FULL_SCALE_REFERENCE["intersection"] == (0.73, 0.416)
