import numpy as np
import pytest
from hypothesis import given, strategies as st

from fsru.metrics import compute_metrics, confusion


def test_perfect_predictions():
    m = compute_metrics([0, 1, 1, 0], [0, 1, 1, 0])
    for name in ("accuracy", "precision_rumor", "recall_rumor", "f1_rumor",
                 "precision_nonrumor", "recall_nonrumor", "f1_nonrumor"):
        assert getattr(m, name) == 1.0


def test_all_nonrumor_on_balanced_set():
    m = compute_metrics([1, 1, 0, 0], [0, 0, 0, 0])
    assert m.accuracy == 0.5 and m.recall_rumor == 0.0 and m.precision_rumor == 0.0
    assert m.recall_nonrumor == 1.0


def test_hand_counted_confusion():
    labels = [1, 0, 1, 1, 0, 0, 1, 0, 1, 0]
    preds = [1, 1, 0, 1, 0, 1, 1, 0, 0, 0]
    # rumor positive: tp at 0,3,6; fp at 1,5; fn at 2,8; tn at 4,7,9
    assert confusion(labels, preds) == (3, 2, 2, 3)
    m = compute_metrics(labels, preds)
    assert m.accuracy == 0.6
    assert m.precision_rumor == pytest.approx(3 / 5) and m.recall_rumor == pytest.approx(3 / 5)
    assert m.precision_nonrumor == pytest.approx(3 / 5)
    assert m.confusion == (3, 2, 2, 3)


def test_length_mismatch():
    with pytest.raises(ValueError):
        compute_metrics([0, 1], [0])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50))
def test_ranges_and_harmonic_mean(pairs):
    labels, preds = zip(*pairs)
    m = compute_metrics(np.array(labels), np.array(preds))
    for p, r, f in ((m.precision_rumor, m.recall_rumor, m.f1_rumor),
                    (m.precision_nonrumor, m.recall_nonrumor, m.f1_nonrumor)):
        assert 0 <= p <= 1 and 0 <= r <= 1 and 0 <= f <= 1
        expected = 2 * p * r / (p + r) if p + r else 0.0
        assert f == pytest.approx(expected)
    assert sum(m.confusion) == len(pairs)
