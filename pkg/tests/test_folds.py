import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from petrec.folds import make_folds


def _subjects(n):
    return [f"s{i:03d}" for i in range(n)]


def test_45_subjects_10_folds_sizes():
    folds = make_folds(_subjects(45), k=10, seed=0)
    sizes = sorted(
        len(folds.subjects_in_fold(f)) for f in range(10)
    )
    assert sizes == [4] * 5 + [5] * 5


def test_three_subjects_three_folds():
    folds = make_folds(_subjects(3), k=3, seed=1)
    assert sorted(len(folds.subjects_in_fold(f)) for f in range(3)) == [1, 1, 1]


def test_deterministic():
    a = make_folds(_subjects(20), k=5, seed=9)
    b = make_folds(_subjects(20), k=5, seed=9)
    assert a.subject_to_fold == b.subject_to_fold


def test_k_larger_than_subjects_rejected():
    with pytest.raises(ValueError):
        make_folds(_subjects(4), k=5, seed=0)


def test_k_below_three_rejected():
    with pytest.raises(ValueError):
        make_folds(_subjects(10), k=2, seed=0)


def test_role_partition_8_1_1():
    folds = make_folds(_subjects(45), k=10, seed=3)
    for t in range(10):
        roles = folds.role_of_fold(t)
        assert len(roles["train"]) == 8
        assert roles["val"] == [(t + 1) % 10]
        assert roles["test"] == [t]


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(min_value=3, max_value=60),
    k=st.integers(min_value=3, max_value=12),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_partition_exhaustive_and_disjoint(n, k, seed):
    if n < k:
        return
    subjects = _subjects(n)
    folds = make_folds(subjects, k=k, seed=seed)
    sizes = [len(folds.subjects_in_fold(f)) for f in range(k)]
    assert max(sizes) - min(sizes) <= 1
    for t in range(k):
        split = folds.split_subjects(t)
        pooled = split["train"] + split["val"] + split["test"]
        assert sorted(pooled) == sorted(subjects)
        assert len(set(pooled)) == len(pooled)
