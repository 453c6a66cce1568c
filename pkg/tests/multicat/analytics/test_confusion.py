from collections import Counter

import numpy as np
from pydantic import ValidationError
from pytest import raises

from multicat.analytics.confusion import (
    CONFUSION_FILENAME,
    AnalyticsError,
    ErrorRate,
    build_confusion,
    category_errors,
    leakage,
    merge_to_superclasses,
    per_class_errors,
    per_class_errors_by_id,
    read_confusion_csv,
    write_confusion_csv,
)


def _random_instance(rng: np.random.Generator):
    num_categories = int(rng.integers(1, 5))
    # Every category gets a class and every class a test item
    extra = rng.integers(0, num_categories, size=int(rng.integers(0, 10))).tolist()
    category_of = tuple(sorted(list(range(num_categories)) + extra))
    num_classes = len(category_of)
    size = int(rng.integers(0, 50))
    truth = np.concatenate([np.arange(num_classes), rng.integers(0, num_classes, size=size)])
    predictions = rng.integers(0, num_classes, size=len(truth))
    return truth, predictions, num_classes, category_of


def test_confusion_matches_counter():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        truth, predictions, num_classes, category_of = _random_instance(rng)
        cm = build_confusion(truth, predictions, num_classes, category_of)
        counter = Counter(zip(truth.tolist(), predictions.tolist()))
        for true_class in range(num_classes):
            for predicted in range(num_classes):
                assert cm.counts[true_class, predicted] == counter[(true_class, predicted)]
        assert cm.total == len(truth)


def test_merge_and_leakage_match_item_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        truth, predictions, num_classes, category_of = _random_instance(rng)
        cm = build_confusion(truth, predictions, num_classes, category_of)
        merged = merge_to_superclasses(cm)

        pairs = Counter((category_of[t], category_of[p]) for t, p in zip(truth.tolist(), predictions.tolist()))
        for true_category in range(cm.num_categories):
            for predicted_category in range(cm.num_categories):
                assert merged.counts[true_category, predicted_category] == pairs[(true_category, predicted_category)]

        report = leakage(cm)
        across = sum(1 for t, p in zip(truth.tolist(), predictions.tolist()) if category_of[t] != category_of[p])
        within = sum(
            1 for t, p in zip(truth.tolist(), predictions.tolist()) if t != p and category_of[t] == category_of[p]
        )
        assert report.inter_category_error.numerator == across
        assert report.within_category_error.numerator == within
        assert report.total_error.numerator == across + within
        assert report.total_error.denominator == len(truth)


def test_leakage_identity_on_published_rates():
    total = ErrorRate(numerator=1828, denominator=10_000)
    inter = ErrorRate(numerator=236, denominator=10_000)
    within = total.minus(inter)
    assert within.numerator == 1592
    assert abs(within.percent - 15.92) < 1e-12
    with raises(AnalyticsError):
        total.minus(ErrorRate(numerator=1, denominator=100))


def test_error_rate_validation():
    with raises(ValidationError):
        ErrorRate(numerator=3, denominator=2)
    with raises(ValidationError):
        ErrorRate(numerator=0, denominator=0)
    rate = ErrorRate(numerator=1, denominator=4)
    assert rate.value == 0.25
    assert rate.accuracy == 0.75


def test_category_average_equals_overall_error():
    rng = np.random.default_rng(2)
    category_of = tuple(class_index // 5 for class_index in range(20))
    # Equal item counts per category
    truth = np.repeat(np.arange(20), 7)
    predictions = rng.integers(0, 20, size=len(truth))
    cm = build_confusion(truth, predictions, 20, category_of)
    errors = category_errors(cm)
    assert len(errors) == 4
    assert all(error.denominator == 35 for error in errors)
    assert np.isclose(np.mean([error.value for error in errors]), cm.error().value, rtol=0.0, atol=1e-12)


def test_per_class_errors():
    cm = build_confusion([0, 0, 1, 1, 1, 2], [0, 1, 1, 1, 0, 2], 3, class_ids=["a", "b", "c"])
    assert [(error.numerator, error.denominator) for error in per_class_errors(cm)] == [(1, 2), (1, 3), (0, 1)]
    assert per_class_errors_by_id(cm)["b"] == ErrorRate(numerator=1, denominator=3)

    with raises(AnalyticsError, match="no test items"):
        per_class_errors(build_confusion([0], [0], 2))


def test_invalid_inputs():
    with raises(AnalyticsError):
        build_confusion([0, 1], [0], 2)
    with raises(AnalyticsError):
        build_confusion([0, 2], [0, 1], 2)
    with raises(AnalyticsError):
        build_confusion([0, 1], [0, 1], 2, category_of=(0, 2))
    with raises(AnalyticsError):
        build_confusion([], [], 2).error()
    with raises(AnalyticsError):
        leakage(build_confusion([0], [0], 1))


def test_confusion_csv_round_trip(path_work):
    cm = build_confusion(
        [0, 1, 2, 3, 3],
        [1, 1, 2, 0, 3],
        4,
        category_of=(0, 0, 1, 1),
        class_ids=["cat", "dog", "car", "bus"],
        category_names=["animals", "vehicles"],
    )
    write_confusion_csv(cm, path_work / CONFUSION_FILENAME)
    restored = read_confusion_csv(path_work / CONFUSION_FILENAME)
    assert np.array_equal(restored.counts, cm.counts)
    assert restored.category_of == cm.category_of
    assert restored.class_ids == cm.class_ids
    assert restored.category_names == cm.category_names
    assert leakage(restored) == leakage(cm)
