"""Regime batch construction, the training loop, and overfitting detectors."""

import numpy as np
import pytest

from specswap.attacks import AttackConfig
from specswap.data import synth_generate
from specswap.harness import (
    EpochRecord,
    Regime,
    TrainConfig,
    build_step_batch,
    detect_catastrophic_overfit,
    detect_robust_overfit,
    random_crop_flip,
    records_from_csv,
    records_to_csv,
    train,
)
from specswap.model import ConvClassifier, cross_entropy
from specswap.spectral import adversarial_amplitude_swap, apr_swap


def make_batch(n=8, seed=0):
    ds = synth_generate(4, max(2, n // 4 + 1), 16, seed=seed)
    return ds.images[:n], ds.labels[:n]


def make_model(seed=0):
    return ConvClassifier(1, 16, 4, seed=seed)


FGSM8 = AttackConfig("fgsm", "linf", 8.0 / 255.0)


def test_clean_regime_passes_batch_through():
    images, labels = make_batch()
    out = build_step_batch(Regime.CLEAN, images, labels, make_model(), FGSM8,
                           np.random.default_rng(0))
    assert np.array_equal(out.images, images)
    assert np.array_equal(out.labels, labels)
    assert out.source_weights == [1.0]


def test_c_aa_with_zero_eps_reduces_to_clean_pair():
    images, labels = make_batch()
    cfg = AttackConfig("fgsm", "linf", 0.0)
    out = build_step_batch(Regime.C_AA, images, labels, make_model(), cfg,
                           np.random.default_rng(0))
    assert len(out.images) == 2 * len(images)
    assert np.abs(out.images[len(images):] - images).max() < 1e-6


def test_c_adv_loss_is_half_clean_half_adv():
    images, labels = make_batch(8, seed=3)
    model = make_model(3)
    out = build_step_batch(Regime.C_ADV, images, labels, model, FGSM8,
                           np.random.default_rng(1))
    logits = model.forward(out.images)
    total, _ = cross_entropy(logits, out.labels, out.item_weights())
    clean_loss, _ = cross_entropy(model.forward(images), labels)
    adv_loss, _ = cross_entropy(model.forward(out.images[len(images):]),
                                labels)
    assert total == pytest.approx(0.5 * clean_loss + 0.5 * adv_loss, abs=1e-9)


def test_mix_weight_reaches_loss():
    images, labels = make_batch(6, seed=4)
    model = make_model(4)
    out = build_step_batch(Regime.C_ADV, images, labels, model, FGSM8,
                           np.random.default_rng(2), mix_weight=0.8)
    assert out.source_weights == [0.8, pytest.approx(0.2)]
    total, _ = cross_entropy(model.forward(out.images), out.labels,
                             out.item_weights())
    clean_loss, _ = cross_entropy(model.forward(images), labels)
    adv_loss, _ = cross_entropy(model.forward(out.images[len(images):]), labels)
    assert total == pytest.approx(0.8 * clean_loss + 0.2 * adv_loss, abs=1e-9)


@pytest.mark.parametrize("regime", list(Regime))
def test_labels_always_clean(regime):
    images, labels = make_batch(8, seed=5)
    out = build_step_batch(regime, images, labels, make_model(5), FGSM8,
                           np.random.default_rng(3))
    expected = (np.concatenate([labels, labels])
                if regime in (Regime.C_ADV, Regime.C_AA, Regime.C_AP)
                else labels)
    assert np.array_equal(out.labels, expected)
    assert sum(out.source_weights) == pytest.approx(1.0)


def test_single_source_regimes_match_their_formulas():
    images, labels = make_batch(6, seed=6)
    model = make_model(6)
    adv_cfg = FGSM8.with_seed(11)
    from specswap.attacks import attack

    adv = attack(model, images, labels, adv_cfg)
    x_aa, x_ap = adversarial_amplitude_swap(images, adv)
    for regime, expected in ((Regime.ADV, adv), (Regime.AA, x_aa),
                             (Regime.AP, x_ap)):
        out = build_step_batch(regime, images, labels, model, adv_cfg,
                               np.random.default_rng(4))
        assert np.array_equal(out.images, expected)


def test_apr_regime_uses_other_in_batch_images():
    images, labels = make_batch(8, seed=7)
    out = build_step_batch(Regime.APR, images, labels, make_model(7), FGSM8,
                           np.random.default_rng(5))
    # partner selection is reproducible with the same rng
    rng = np.random.default_rng(5)
    offsets = rng.integers(1, len(images), size=len(images))
    partners = (np.arange(len(images)) + offsets) % len(images)
    assert np.all(partners != np.arange(len(images)))
    expected = apr_swap(images, images[partners])
    assert np.array_equal(out.images, expected)


def test_adv_apr_perturbs_the_recombined_images():
    images, labels = make_batch(6, seed=8)
    model = make_model(8)
    out = build_step_batch(Regime.ADV_APR, images, labels, model,
                           FGSM8.with_seed(2), np.random.default_rng(6))
    rng = np.random.default_rng(6)
    offsets = rng.integers(1, len(images), size=len(images))
    partners = (np.arange(len(images)) + offsets) % len(images)
    recombined = apr_swap(images, images[partners])
    from specswap.attacks import fgsm

    expected = fgsm(model, recombined, labels, FGSM8.eps)
    assert np.array_equal(out.images, expected)


def test_adversarial_sources_track_the_current_model():
    images, labels = make_batch(8, seed=9)
    model = make_model(9)
    rng_args = dict(mix_weight=0.5)
    fresh = build_step_batch(Regime.C_ADV, images, labels, model,
                             FGSM8.with_seed(3), np.random.default_rng(7),
                             **rng_args)
    # nudge the model as one optimizer step would
    for _, value, _ in model.params():
        value += 0.05
    stale = build_step_batch(Regime.C_ADV, images, labels, model,
                             FGSM8.with_seed(3), np.random.default_rng(7),
                             **rng_args)
    n = len(images)
    assert np.array_equal(fresh.images[:n], stale.images[:n])
    assert not np.array_equal(fresh.images[n:], stale.images[n:])


def test_random_crop_flip_shape_and_determinism():
    images, _ = make_batch(8, seed=10)
    out_a = random_crop_flip(images, np.random.default_rng(8), pad=2)
    out_b = random_crop_flip(images, np.random.default_rng(8), pad=2)
    assert out_a.shape == images.shape
    assert np.array_equal(out_a, out_b)
    assert not np.array_equal(out_a, images)
    assert out_a.min() >= 0.0 and out_a.max() <= 1.0


def test_zero_epochs_returns_fresh_model():
    train_set = synth_generate(2, 10, 16, seed=1)
    test_set = synth_generate(2, 5, 16, seed=1, split="test")
    cfg = TrainConfig(epochs=0, seed=42)
    model, records = train(Regime.CLEAN, train_set, test_set, cfg)
    assert records == []
    fresh = ConvClassifier(1, 16, 2, seed=42)
    for (_, got, _), (_, want, _) in zip(model.params(), fresh.params()):
        assert np.array_equal(got, want)


def test_training_is_deterministic():
    train_set = synth_generate(2, 20, 16, seed=2)
    test_set = synth_generate(2, 8, 16, seed=2, split="test")
    cfg = TrainConfig(epochs=2, batch_size=16, seed=5, eval_pgd_iters=3)
    model_a, records_a = train(Regime.C_AA, train_set, test_set, cfg, FGSM8)
    model_b, records_b = train(Regime.C_AA, train_set, test_set, cfg, FGSM8)
    assert records_a == records_b
    for (_, va, _), (_, vb, _) in zip(model_a.params(), model_b.params()):
        assert np.array_equal(va, vb)


def test_clean_training_fixture_reaches_90_percent():
    # desk-scale fixture: K=2, 10 epochs, seed 7
    train_set = synth_generate(2, 60, 16, seed=7)
    test_set = synth_generate(2, 30, 16, seed=7, split="test")
    cfg = TrainConfig(epochs=10, seed=7, eval_pgd_iters=2)
    model, records = train(Regime.CLEAN, train_set, test_set, cfg)
    assert records[-1].acc_clean > 90.0
    assert all(0.0 <= r.acc_clean <= 100.0 for r in records)
    # loss decreases over the first epochs of clean training
    assert records[-1].train_loss < records[0].train_loss


def _records(pgd, fgsm=None):
    fgsm = fgsm if fgsm is not None else [100.0] * len(pgd)
    return [EpochRecord(e, 0.01, 1.0, 90.0, f, p)
            for e, (p, f) in enumerate(zip(pgd, fgsm))]


def test_catastrophic_detector_hand_fixture():
    records = _records([30, 32, 31, 8, 7], [60, 62, 63, 64, 65])
    assert detect_catastrophic_overfit(records) == [3]


def test_catastrophic_detector_quiet_cases():
    assert detect_catastrophic_overfit(_records([10, 20, 30, 40, 50])) == []
    assert detect_catastrophic_overfit(_records([50])) == []  # < 2 records
    # PGD collapse with FGSM collapsing too is not catastrophic overfitting
    records = _records([30, 32, 31, 8, 7], [60, 62, 63, 30, 20])
    assert detect_catastrophic_overfit(records) == []


def test_robust_detector_hand_fixture():
    pgd = [20, 24, 28, 32, 36, 40, 45, 50, 46, 42, 39, 37, 36, 35, 35, 35]
    # condition (running max - trailing-3 mean >= 10) first holds at epoch 11
    # and stays on; the fifth consecutive epoch is 15
    assert detect_robust_overfit(_records(pgd)) == [15]


def test_robust_detector_quiet_cases():
    assert detect_robust_overfit(_records([40.0] * 12)) == []
    assert detect_robust_overfit(_records([50, 40, 35])) == []  # shorter than window
    ramp = list(range(10, 60, 5))
    assert detect_robust_overfit(_records(ramp)) == []


def test_records_csv_round_trip(tmp_path):
    records = [EpochRecord(0, 0.01, 1.234567891234, 90.0, 55.5, 33.25),
               EpochRecord(1, 0.001, 0.9, 99.9999, 60.0, 40.0)]
    path = tmp_path / "epochs.csv"
    records_to_csv(records, path)
    assert records_from_csv(path) == records
    header = path.read_text().splitlines()[0]
    assert header == "epoch,lr,train_loss,acc_clean,acc_fgsm,acc_pgd_linf"
