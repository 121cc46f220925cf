"""Harness behavior for the subset studies (cheap configurations)."""

import pytest

from gridaste import experiments as ex
from gridaste.corpus import parse_split


@pytest.fixture(scope="module")
def subset():
    return ex.take_subset(parse_split("data/mini_rest/train.txt"), 8)


def test_take_subset(subset):
    assert len(subset.sentences) == 8
    assert set(subset.gold) == {s.id for s in subset.sentences}


def test_overfit_run_reports(subset):
    res, model = ex.overfit_run(
        subset, seed=0, dim=16, tensor_width=8, epochs=2, target_f1=None
    )
    assert res.epochs_run == 2
    assert 0.0 <= res.best_f1 <= 1.0
    assert res.reached is False
    assert model.cfg.dim == 16


def test_overfit_early_stop(subset):
    res, _ = ex.overfit_run(subset, seed=0, dim=16, tensor_width=8, epochs=50, target_f1=0.0)
    assert res.epochs_run == 1
    assert res.reached


def test_seed_sweep_length(subset):
    results = ex.seed_sweep(subset, seeds=(0, 1), dim=16, tensor_width=8, epochs=1, target_f1=None)
    assert [r.seed for r in results] == [0, 1]


def test_k_sweep_restores_k(subset):
    _, model = ex.overfit_run(subset, seed=0, dim=16, tensor_width=8, epochs=1, target_f1=None)
    before = model.cfg.k
    sweep = ex.k_sweep(model, subset, (0.1, 0.5))
    assert set(sweep) == {0.1, 0.5}
    assert model.cfg.k == before
    assert all(0.0 <= v <= 1.0 for v in sweep.values())


def test_mean_inference_ms_positive(subset):
    _, model = ex.overfit_run(subset, seed=0, dim=16, tensor_width=8, epochs=1, target_f1=None)
    assert ex.mean_inference_ms(model, subset.sentences, reps=1) > 0.0
