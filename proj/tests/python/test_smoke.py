"""Smoke tests for the python bindings: statistics cross-checked against scipy,
plus one tiny end-to-end pipeline."""

import math

import numpy as np
import pytest
from scipy import special, stats

import promptcare as pc


def test_welch_matches_scipy():
    rng = np.random.default_rng(7)
    for n in (4, 16, 64, 512):
        a = rng.binomial(1, 0.7, size=n).astype(float).tolist()
        b = rng.binomial(1, 0.4, size=n).astype(float).tolist()
        if len(set(a)) == 1 or len(set(b)) == 1:
            continue
        t, df, p = pc.welch_two_sample(a, b)
        ref = stats.ttest_ind(a, b, equal_var=False)
        assert t == pytest.approx(ref.statistic, rel=1e-12)
        assert p == pytest.approx(ref.pvalue, rel=1e-10)


def test_welch_degenerate_conventions():
    assert pc.welch_two_sample([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])[2] == 1.0
    t, df, p = pc.welch_two_sample([1.0, 1.0, 1.0], [0.0, 0.0, 0.0])
    assert p == 0.0 and math.isinf(t) and t > 0
    with pytest.raises(ValueError):
        pc.welch_two_sample([1.0, 0.0], [1.0, 0.0, 1.0])


def test_beta_and_t_match_scipy():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a, b = rng.uniform(0.2, 8.0, size=2)
        x = rng.uniform(0.0, 1.0)
        assert pc.incomplete_beta(a, b, x) == pytest.approx(
            float(special.betainc(a, b, x)), rel=1e-10, abs=1e-13
        )
    for _ in range(50):
        t = rng.normal(scale=3.0)
        df = rng.uniform(1.0, 60.0)
        assert pc.student_t_two_sided(t, df) == pytest.approx(
            float(2.0 * stats.t.sf(abs(t), df)), rel=1e-10, abs=1e-13
        )


@pytest.fixture(scope="module")
def tiny_pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    task = str(root / "task")
    model = str(root / "model.bin")
    sizes = pc.make_task(task, train_size=80, test_size=50, seed=3)
    assert sizes["train"] == 80 and sizes["test"] == 50
    pc.train_model(task, model, steps=100, seed=3)
    return root, task, model


def test_pipeline_roundtrip(tiny_pipeline):
    root, task, model = tiny_pipeline
    res = pc.tune_prompt(task, model, str(root / "clean.json"), steps=3, seed=3)
    assert 0.0 <= res["dacc_test"] <= 1.0

    metrics = pc.inject(
        task,
        model,
        str(root / "wm.json"),
        str(root / "key.json"),
        lower_steps=2,
        warmup_steps=3,
        alternations=1,
        cgs_rounds=1,
        cgs_prompt_steps=1,
        trigger_len=2,
        signal_k=3,
        signal_probe_size=30,
        seed=3,
    )
    for key in ("wsr_trigger", "wsr_dormant", "clean_loss", "dacc_test"):
        assert key in metrics

    wsr = pc.watermark_success_rate(task, model, str(root / "wm.json"), str(root / "key.json"))
    assert wsr == pytest.approx(metrics["wsr_trigger"], abs=0.35)

    report = pc.verify(
        task,
        model,
        str(root / "wm.json"),
        str(root / "key.json"),
        str(root / "wm.json"),
        report_out=str(root / "report.jsonl"),
        n_queries=12,
        tries=2,
    )
    assert report["verdict"] == "COPY"
    assert report["averaged_p"] == 1.0
    assert len(report["tries"]) == 2
    assert (root / "report.jsonl").exists()


def test_errors_surface_as_python_exceptions(tiny_pipeline):
    root, task, model = tiny_pipeline
    with pytest.raises(ValueError):
        pc.tune_prompt(task, model, str(root / "x.json"), kind="bogus")
    with pytest.raises(Exception):
        pc.train_model(str(root / "missing"), str(root / "m.bin"), steps=1)
