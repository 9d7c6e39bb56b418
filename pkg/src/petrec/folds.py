"""Subject-level cross-validation fold assignment.

For any test fold t, validation is fold (t+1) mod k and the remaining k-2
folds train, so k=10 gives the 8/1/1 train/val/test split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class FoldAssignment:
    k: int
    subject_to_fold: dict[str, int]

    def subjects_in_fold(self, fold: int) -> list[str]:
        return sorted(s for s, f in self.subject_to_fold.items() if f == fold)

    def role_of_fold(self, test_fold: int) -> dict[str, list[int]]:
        """Partition fold indices into train/val/test roles for one test fold."""
        if not 0 <= test_fold < self.k:
            raise ValueError(f"test_fold={test_fold} outside [0, {self.k})")
        val_fold = (test_fold + 1) % self.k
        train = [f for f in range(self.k) if f not in (test_fold, val_fold)]
        return {"train": train, "val": [val_fold], "test": [test_fold]}

    def split_subjects(self, test_fold: int) -> dict[str, list[str]]:
        roles = self.role_of_fold(test_fold)
        return {
            role: sorted(s for f in folds for s in self.subjects_in_fold(f))
            for role, folds in roles.items()
        }


def make_folds(subject_ids: list[str], k: int, seed: int) -> FoldAssignment:
    """Deterministic shuffled assignment with fold sizes differing by <= 1."""
    if k < 3:
        raise ValueError(f"k must be >= 3, got {k}")
    if len(subject_ids) < k:
        raise ValueError(f"need at least k={k} subjects, got {len(subject_ids)}")
    if len(set(subject_ids)) != len(subject_ids):
        raise ValueError("subject_ids must be unique")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(subject_ids))
    mapping = {subject_ids[int(idx)]: pos % k for pos, idx in enumerate(order)}
    return FoldAssignment(k=k, subject_to_fold=mapping)
