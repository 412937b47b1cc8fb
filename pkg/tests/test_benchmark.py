"""Evaluation harness: scoring, timing, reports, and the expectations gate."""

import csv
import io
import math

import numpy as np
import pytest

from pcsample import (
    CSV_HEADER,
    PROXY_NOTE,
    EmptyInputError,
    InvalidConfigError,
    MetricsRow,
    RandomSampler,
    SampleSpec,
    SynthConfig,
    bench,
    check_expectations,
    emit_csv,
    emit_summary,
    evaluate,
    make_method,
    object_retention,
    sample_random,
    synth_corpus,
)
from pcsample.seeding import STREAM_CORPUS, derive_seed


@pytest.fixture(scope="module")
def tiny_corpus():
    config = SynthConfig(ground_points=1200, n_objects=3, points_per_object=(60, 100))
    return synth_corpus(config, 6, seed=99)


@pytest.fixture(scope="module")
def tiny_methods():
    return {
        "random": lambda rate, seed: make_method("random", rate, seed),
        "sta_peak": lambda rate, seed: make_method("sta_peak", rate, seed),
    }


@pytest.fixture(scope="module")
def tiny_rows(tiny_corpus, tiny_methods):
    return evaluate(tiny_methods, tiny_corpus, rates=[0.3, 0.1], base_seed=5)


def _row(method="random", rate=0.3, retention=0.5, recall=0.5,
         obj_ratio=float("nan"), mean_s=0.01, p95_s=0.02, clouds=6):
    return MetricsRow(method, rate, obj_ratio, clouds, retention, recall, mean_s, p95_s)


# --------------------------------------------------------------------------- #
# evaluate / bench
# --------------------------------------------------------------------------- #

def test_evaluate_row_shape_and_order(tiny_rows, tiny_corpus):
    assert [(r.method, r.rate) for r in tiny_rows] == [
        ("random", 0.1), ("random", 0.3), ("sta_peak", 0.1), ("sta_peak", 0.3)
    ]
    for r in tiny_rows:
        assert r.clouds == len(tiny_corpus)
        assert 0.0 <= r.object_retention <= 1.0
        assert 0.0 <= r.instance_recall <= 1.0
        assert r.mean_time_s >= 0.0 and r.p95_time_s >= 0.0


def test_evaluate_obj_ratio_only_for_object_aware(tiny_rows):
    by_method = {r.method: r for r in tiny_rows}
    assert math.isnan(by_method["random"].obj_ratio)
    assert by_method["sta_peak"].obj_ratio == 0.7


def test_evaluate_matches_hand_run(tiny_corpus):
    """The harness must use one derived seed per corpus index."""
    rows = evaluate(
        {"random": lambda rate, seed: RandomSampler(rate=rate, seed=seed)},
        tiny_corpus, rates=[0.2], base_seed=7,
    )
    values = []
    for index, (cloud, labels) in enumerate(tiny_corpus):
        seed = derive_seed(7, STREAM_CORPUS, index)
        result = sample_random(cloud, SampleSpec(rate=0.2, seed=seed))
        values.append(object_retention(cloud, labels, result))
    assert rows[0].object_retention == pytest.approx(float(np.mean(values)), abs=1e-12)


def test_evaluate_pairs_seeds_across_methods(tiny_corpus):
    seen = {"a": [], "b": []}

    def factory(tag):
        def build(rate, seed):
            seen[tag].append((rate, seed))
            return RandomSampler(rate=rate, seed=seed)
        return build

    evaluate({"a": factory("a"), "b": factory("b")}, tiny_corpus, rates=[0.25])
    assert seen["a"] == seen["b"]
    assert len(set(s for _, s in seen["a"])) >= len(tiny_corpus)


def test_evaluate_threaded_matches_serial(tiny_corpus, tiny_methods):
    serial = evaluate(tiny_methods, tiny_corpus, rates=[0.3], base_seed=1, jobs=1)
    threaded = evaluate(tiny_methods, tiny_corpus, rates=[0.3], base_seed=1, jobs=4)
    for a, b in zip(serial, threaded):
        assert (a.method, a.rate) == (b.method, b.rate)
        assert a.object_retention == b.object_retention
        assert a.instance_recall == b.instance_recall


def test_evaluate_unlabelled_corpus_has_no_quality_metrics(tiny_corpus):
    unlabelled = [(cloud, None) for cloud, _ in tiny_corpus]
    rows = evaluate(
        {"random": lambda r, s: RandomSampler(rate=r, seed=s)}, unlabelled, rates=[0.3]
    )
    assert rows[0].object_retention is None
    assert rows[0].instance_recall is None


def test_evaluate_input_validation(tiny_methods, tiny_corpus):
    with pytest.raises(EmptyInputError):
        evaluate(tiny_methods, [], rates=[0.3])
    with pytest.raises(InvalidConfigError):
        evaluate(tiny_methods, tiny_corpus, rates=[0.3], jobs=0)


def test_bench_validation_and_timing_fields(tiny_corpus):
    methods = {"random": lambda r, s: RandomSampler(rate=r, seed=s)}
    with pytest.raises(InvalidConfigError):
        bench(methods, tiny_corpus, rates=[0.3], repetitions=2)
    with pytest.raises(EmptyInputError):
        bench(methods, [], rates=[0.3])
    rows = bench(methods, tiny_corpus[:3], rates=[0.5], repetitions=3)
    assert len(rows) == 1
    assert rows[0].clouds == 3
    assert rows[0].mean_time_s > 0.0
    assert rows[0].p95_time_s > 0.0


def test_metrics_row_validation():
    with pytest.raises(ValueError):
        _row(retention=1.5)
    with pytest.raises(ValueError):
        _row(recall=-0.1)
    with pytest.raises(ValueError):
        _row(mean_s=-1.0)
    assert _row(retention=None).object_retention is None


# --------------------------------------------------------------------------- #
# reports
# --------------------------------------------------------------------------- #

def test_csv_header_and_parse_back(tiny_rows):
    text = emit_csv(tiny_rows)
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[0] == (
        "method,rate,obj_ratio,clouds,object_retention,instance_recall,"
        "mean_time_s,p95_time_s"
    )
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert len(parsed) == len(tiny_rows)
    for rec, row in zip(parsed, tiny_rows):
        assert rec["method"] == row.method
        assert float(rec["rate"]) == pytest.approx(row.rate, rel=1e-5)
        assert int(rec["clouds"]) == row.clouds
        assert float(rec["object_retention"]) == pytest.approx(
            row.object_retention, rel=1e-5
        )
        assert float(rec["mean_time_s"]) == pytest.approx(row.mean_time_s, rel=1e-5)
        if row.method == "random":
            assert rec["obj_ratio"] == ""          # not a parameter of the baseline
        else:
            assert float(rec["obj_ratio"]) == pytest.approx(row.obj_ratio, rel=1e-5)


def test_csv_blank_for_absent_metrics():
    text = emit_csv([_row(retention=None, recall=None)])
    record = text.splitlines()[1].split(",")
    assert record[4] == "" and record[5] == ""


def test_emit_csv_rejects_empty():
    with pytest.raises(EmptyInputError):
        emit_csv([])
    with pytest.raises(EmptyInputError):
        emit_summary([])


def test_summary_names_per_rate_winners():
    rows = [
        _row("random", 0.1, 0.10, 0.2), _row("sta_peak", 0.1, 0.80, 0.9, 0.7),
        _row("random", 0.2, 0.21, 0.3), _row("sta_peak", 0.2, 0.75, 0.8, 0.7),
        _row("random", 0.3, 0.95, 0.9), _row("sta_peak", 0.3, 0.85, 0.9, 0.7),
    ]
    text = emit_summary(rows)
    assert PROXY_NOTE in text
    assert "rate 0.1: best object retention 0.8 by sta_peak" in text
    assert "rate 0.2: best object retention 0.75 by sta_peak" in text
    assert "rate 0.3: best object retention 0.95 by random" in text


def test_summary_without_labels_reports_fastest():
    rows = [
        _row("random", 0.3, None, None, mean_s=0.004),
        _row("fps", 0.3, None, None, mean_s=0.5),
    ]
    text = emit_summary(rows)
    assert PROXY_NOTE in text
    assert "no labelled scenes; fastest method random" in text


# --------------------------------------------------------------------------- #
# expectations gate
# --------------------------------------------------------------------------- #

def test_expectations_pass_and_violations():
    rows = [_row("sta_peak", 0.5, 0.9, 0.95, 0.7, mean_s=0.01, p95_s=0.02)]
    ok = [
        {"metric": "object_retention", "method": "sta_peak", "min": 0.8},
        {"metric": "mean_time_s", "max": 0.1},
    ]
    assert check_expectations(rows, ok) == []
    # dict wrapper form
    assert check_expectations(rows, {"expectations": ok}) == []

    below = check_expectations(
        rows, [{"metric": "object_retention", "min": 0.95}]
    )
    assert len(below) == 1 and "below min" in below[0]

    above = check_expectations(rows, [{"metric": "p95_time_s", "max": 0.001}])
    assert len(above) == 1 and "above max" in above[0]


def test_expectations_structural_violations():
    rows = [_row("random", 0.3, 0.5, 0.5)]
    no_match = check_expectations(
        rows, [{"metric": "object_retention", "method": "fps", "min": 0.1}]
    )
    assert len(no_match) == 1 and "no report row matches" in no_match[0]

    unknown = check_expectations(rows, [{"metric": "speed", "min": 0}])
    assert len(unknown) == 1 and "unknown metric" in unknown[0]

    absent = check_expectations(
        [_row(retention=None)], [{"metric": "object_retention", "min": 0.1}]
    )
    assert len(absent) == 1 and "absent" in absent[0]


def test_expectations_rate_selector():
    rows = [_row("random", 0.1, 0.1, 0.1), _row("random", 0.5, 0.9, 0.9)]
    violations = check_expectations(
        rows, [{"metric": "object_retention", "rate": 0.5, "min": 0.8}]
    )
    assert violations == []
