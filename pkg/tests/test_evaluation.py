"""Evaluation conditions, fooling table, and report files."""

import numpy as np
import pytest

from specswap.attacks import AttackConfig, attack
from specswap.data import synth_generate
from specswap.evaluation import (
    REPORT_COLUMNS,
    EvalCondition,
    EvalReport,
    accuracy,
    emit_report,
    evaluate,
    fooling_table,
    full_report,
    predict,
    read_report,
)
from specswap.harness import Regime, TrainConfig, train
from specswap.model import ConvClassifier, Dense, Flatten


def constant_class_zero_model():
    dense = Dense(256, 2)  # zero weights: logits all zero, argmax is class 0
    return ConvClassifier(1, 16, 2, layers=[Flatten(), dense])


def memorizing_model(train_set, seed=3):
    cfg = TrainConfig(epochs=25, batch_size=10, seed=seed, augment=False,
                      eval_pgd_iters=1)
    model, _ = train(Regime.CLEAN, train_set, train_set.subset(np.arange(0)),
                     cfg)
    return model


def test_constant_model_scores_half_on_balanced_set():
    ds = synth_generate(2, 10, 16, seed=0)
    result = evaluate(constant_class_zero_model(), ds, EvalCondition.clean())
    assert result == 50.0


def test_memorized_set_scores_100():
    ds = synth_generate(2, 5, 16, seed=1)  # 10 items
    model = memorizing_model(ds)
    assert evaluate(model, ds, EvalCondition.clean()) == 100.0


def test_accuracy_is_complement_of_error_rate():
    ds = synth_generate(4, 10, 16, seed=2)
    model = ConvClassifier(1, 16, 4, seed=5)
    acc = evaluate(model, ds, EvalCondition.clean())
    preds = predict(model, ds.images)
    error = 100.0 * np.mean(preds != ds.labels)
    assert acc == pytest.approx(100.0 - error, abs=1e-12)


def test_attacked_condition_attacks_the_evaluated_model():
    ds = synth_generate(2, 10, 16, seed=3)
    model = memorizing_model(ds)
    cfg = AttackConfig("fgsm", "linf", 16.0 / 255.0)
    clean_acc = evaluate(model, ds, EvalCondition.clean())
    adv_acc = evaluate(model, ds, EvalCondition.attacked(cfg))
    assert adv_acc <= clean_acc
    adv = attack(model, ds.images, ds.labels, cfg)
    expected = accuracy(model, adv, ds.labels)
    assert adv_acc == pytest.approx(expected, abs=1e-12)


def test_corrupt_condition_matches_direct_corruption():
    from specswap.corruptions import corrupt_dataset

    ds = synth_generate(2, 8, 16, seed=4)
    model = ConvClassifier(1, 16, 2, seed=1)
    got = evaluate(model, ds, EvalCondition.corrupted("contrast", 4, seed=6))
    want = accuracy(model, corrupt_dataset(ds, "contrast", 4, 6).images,
                    ds.labels)
    assert got == want


def test_fooling_table_zero_eps_collapses_to_clean_error():
    ds = synth_generate(2, 8, 16, seed=5)
    model = ConvClassifier(1, 16, 2, seed=2)
    cfg = AttackConfig("fgsm", "linf", 0.0)
    table = fooling_table(model, ds, cfg)
    clean_error = 100.0 - evaluate(model, ds, EvalCondition.clean())
    for column in ("clean", "adv", "aa", "ap"):
        assert table[column] == pytest.approx(clean_error, abs=1e-9)


def test_fooling_table_shares_the_adversarial_batch():
    from specswap.spectral import adversarial_amplitude_swap

    ds = synth_generate(2, 6, 16, seed=6)
    model = ConvClassifier(1, 16, 2, seed=3)
    cfg = AttackConfig("pgd", "linf", 8.0 / 255.0, alpha=0.1, iters=3, seed=9)
    table = fooling_table(model, ds, cfg)
    adv = attack(model, ds.images, ds.labels, cfg)
    x_aa, x_ap = adversarial_amplitude_swap(ds.images, adv)
    assert table["adv"] == pytest.approx(
        100.0 - accuracy(model, adv, ds.labels), abs=1e-12)
    assert table["aa"] == pytest.approx(
        100.0 - accuracy(model, x_aa, ds.labels), abs=1e-12)
    assert table["ap"] == pytest.approx(
        100.0 - accuracy(model, x_ap, ds.labels), abs=1e-12)


FIXTURE_ACCS = {
    "clean": 97.3, "fgsm_4": 71.6, "fgsm_8": 65.6, "fgsm_16": 58.1,
    "fgsm_32": 44.7, "pgd_linf": 0.0, "pgd_l2": 33.25,
    "corrupted_1": 91.2, "corrupted_2": 89.0, "corrupted_3": 87.1,
    "corrupted_4": 84.5, "corrupted_5": 80.9,
}

GOLDEN_CSV = (
    "regime,clean,fgsm_4,fgsm_8,fgsm_16,fgsm_32,pgd_linf,pgd_l2,"
    "corrupted_1,corrupted_2,corrupted_3,corrupted_4,corrupted_5\n"
    "clean,97.3,71.6,65.6,58.1,44.7,0.0,33.2,91.2,89.0,87.1,84.5,80.9\n"
)


def test_golden_csv_report(tmp_path):
    path = tmp_path / "report.csv"
    emit_report([EvalReport("clean", dict(FIXTURE_ACCS))], path, "csv")
    assert path.read_text() == GOLDEN_CSV


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_report_round_trip(tmp_path, fmt):
    path = tmp_path / f"report.{fmt}"
    reports = [EvalReport("c_aa", dict(FIXTURE_ACCS), {"seed": 3}),
               EvalReport("clean", {c: 50.0 for c in REPORT_COLUMNS})]
    emit_report(reports, path, fmt)
    back = read_report(path, fmt)
    assert [r.regime for r in back] == ["c_aa", "clean"]
    for got, sent in zip(back, reports):
        for col in REPORT_COLUMNS:
            assert got.accuracies[col] == pytest.approx(
                round(sent.accuracies[col], 1), abs=1e-12)


def test_empty_report_list_writes_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_report([], path, "csv")
    lines = path.read_text().splitlines()
    assert lines == ["regime," + ",".join(REPORT_COLUMNS)]


def test_report_rejects_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path / "x.yaml", "yaml")


def test_full_report_grid_and_parallel_equivalence():
    ds = synth_generate(2, 6, 16, seed=7)
    model = ConvClassifier(1, 16, 2, seed=4)
    fast = AttackConfig("pgd", "linf", 8.0 / 255.0, alpha=0.1, iters=2, seed=1)
    fast_l2 = AttackConfig("pgd", "l2", 0.5, alpha=0.1, iters=2, seed=1)
    serial = full_report(model, ds, regime="clean", pgd_linf=fast,
                         pgd_l2=fast_l2, jobs=1)
    parallel = full_report(model, ds, regime="clean", pgd_linf=fast,
                           pgd_l2=fast_l2, jobs=4)
    assert set(serial.accuracies) == set(REPORT_COLUMNS)
    assert serial.accuracies == parallel.accuracies
    for col in REPORT_COLUMNS:
        assert 0.0 <= serial.accuracies[col] <= 100.0


def test_corrupted_mean_is_recomputable():
    from specswap.corruptions import CORRUPTION_TYPES

    ds = synth_generate(2, 5, 16, seed=8)
    model = ConvClassifier(1, 16, 2, seed=6)
    fast = AttackConfig("pgd", "linf", 8.0 / 255.0, alpha=0.1, iters=1, seed=1)
    fast_l2 = AttackConfig("pgd", "l2", 0.5, alpha=0.1, iters=1, seed=1)
    report = full_report(model, ds, pgd_linf=fast, pgd_l2=fast_l2,
                         corruption_seed=11)
    per_type = [evaluate(model, ds, EvalCondition.corrupted(kind, 3, 11))
                for kind in CORRUPTION_TYPES]
    assert report.accuracies["corrupted_3"] == pytest.approx(
        float(np.mean(per_type)), abs=1e-9)
