"""Train/CV engine: protocol fidelity, selection tie-breaking, leakage canary."""

import numpy as np
import pytest

from toporeg import (
    Dataset,
    ExperimentConfig,
    component_counts,
    evaluate,
    flip_labels,
    inner_assignments,
    make_moons,
    run_cv,
    run_train,
    split_folds,
)
from toporeg.experiments import _fit


@pytest.fixture(scope="module")
def moons_ds():
    return make_moons(90, 0.2, seed=11)


def small_cfg(**kw):
    base = dict(
        generator={"kind": "moons", "n": 90, "noise_sd": 0.2},
        method="klr",
        lambdas=(0.0,),
        sigmas=(0.3,),
        learning_rate=0.5,
        max_iters=30,
        disc_kind="grid",
        resolution=16,
        seed=11,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestRunTrain:
    def test_reports_trace_and_components(self, moons_ds):
        model, trace, report = run_train(small_cfg(), dataset=moons_ds)
        assert len(report.objective_trace) == trace.iterations + 1
        assert report.final_components and report.final_components[0] >= 0
        assert 0.0 <= report.train_error <= 1.0
        assert report.wall_clock["topology_in_train"] == 0.0  # lambda = 0

    def test_toporeg_records_topology_time(self, moons_ds):
        cfg = small_cfg(method="toporeg", lambdas=(0.5,), max_iters=10)
        _, trace, report = run_train(cfg, dataset=moons_ds)
        assert report.wall_clock["topology_in_train"] > 0.0

    def test_grid_config_rejected(self, moons_ds):
        with pytest.raises(ValueError):
            run_train(small_cfg(lambdas=(0.0, 0.1)), dataset=moons_ds)

    def test_report_json_is_deterministic(self, moons_ds, tmp_path):
        _, _, r1 = run_train(small_cfg(), dataset=moons_ds)
        _, _, r2 = run_train(small_cfg(), dataset=moons_ds)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        r1.write(p1)
        r2.write(p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestRunCv:
    def test_grid_of_one_equals_plain_runs(self, moons_ds):
        cfg = small_cfg()
        plan = split_folds(moons_ds, cfg.seed, 6, 5)
        report = run_cv(cfg, dataset=moons_ds, plan=plan)

        manual = []
        for fold in range(6):
            train_idx, test_idx = plan.outer_split(fold)
            model, _ = _fit(moons_ds.subset(train_idx), 0.0, 0.3, cfg)
            manual.append(evaluate(model, moons_ds.subset(test_idx)))
        assert report.fold_errors == manual
        assert report.mean_error == pytest.approx(np.mean(manual), abs=0)

    def test_mean_and_sd_recomputable(self, moons_ds):
        report = run_cv(small_cfg(), dataset=moons_ds)
        errors = np.asarray(report.fold_errors)
        assert report.mean_error == pytest.approx(errors.mean())
        assert report.sd_error == pytest.approx(errors.std(ddof=1))

    def test_selection_tie_prefers_smaller_lambda_then_sigma(self, moons_ds):
        # max_iters tiny and labels pure: many cells tie at equal error
        cfg = small_cfg(method="toporeg", lambdas=(0.4, 0.2), sigmas=(0.5, 0.3),
                        max_iters=1)
        report = run_cv(cfg, dataset=moons_ds)
        for sel in report.selected:
            assert sel["lambda"] in (0.2, 0.4) and sel["sigma"] in (0.3, 0.5)
        # with one gradient step from w=0 every cell predicts identically,
        # so the tie must resolve to the smallest (lambda, sigma)
        first = report.selected[0]
        assert (first["lambda"], first["sigma"]) == (0.2, 0.3)

    def test_canary_test_fold_labels_do_not_change_selection(self, moons_ds):
        cfg = small_cfg(method="toporeg", lambdas=(0.0, 0.4), sigmas=(0.2, 0.4),
                        max_iters=15)
        plan = split_folds(moons_ds, cfg.seed, 6, 5)
        base = run_cv(cfg, dataset=moons_ds, plan=plan)

        rng = np.random.default_rng(99)
        for fold in (0, 3):
            labels = moons_ds.labels.copy()
            test_idx = np.flatnonzero(plan.assignments == fold)
            labels[test_idx] = rng.permutation(labels[test_idx])
            permuted = Dataset(moons_ds.points, labels, name="permuted")
            report = run_cv(cfg, dataset=permuted, plan=plan)
            assert report.selected[fold] == base.selected[fold]

    def test_klr_method_ignores_lambda_grid(self, moons_ds):
        cfg = small_cfg(method="klr", lambdas=(5.0, 9.0))
        report = run_cv(cfg, dataset=moons_ds)
        assert all(sel["lambda"] == 0.0 for sel in report.selected)


class TestComponentCounts:
    def test_binary_count_matches_boundary(self, moons_ds):
        model, _, report = run_train(small_cfg(max_iters=60), dataset=moons_ds)
        counts = component_counts(model, small_cfg().discretization())
        assert counts == report.final_components

    def test_multilabel_counts_per_class(self):
        from toporeg import make_blobs

        ds = make_blobs(45, np.array([[0, 0], [1, 0], [0.5, 1.0]]), 0.15, seed=3)
        cfg = small_cfg(generator=None, data=None)
        cfg.generator = {"kind": "blobs", "n": 45}
        model, _, report = run_train(cfg, dataset=ds)
        assert len(report.final_components) == 3


class TestGeneratorSpecs:
    def test_moons_spec(self):
        from toporeg.experiments import dataset_from_generator

        ds = dataset_from_generator(
            {"kind": "moons", "n": 30, "noise_sd": 0.1, "flip_fraction": 0.2}, seed=3
        )
        assert len(ds) == 30
        clean = dataset_from_generator({"kind": "moons", "n": 30, "noise_sd": 0.1}, seed=3)
        assert int(np.sum(ds.labels != clean.labels)) == 6

    def test_blobs_spec_default_centers(self):
        from toporeg.experiments import dataset_from_generator

        ds = dataset_from_generator({"kind": "blobs", "n": 20, "dim": 3, "spread": 0.1}, seed=1)
        assert ds.points.shape == (20, 3)
        assert ds.num_classes == 2

    def test_unknown_generator(self):
        from toporeg.experiments import dataset_from_generator

        with pytest.raises(ValueError):
            dataset_from_generator({"kind": "spiral"}, seed=0)

    def test_config_requires_one_source(self):
        from toporeg.experiments import load_dataset

        with pytest.raises(ValueError):
            load_dataset(ExperimentConfig(data=None, generator=None))
