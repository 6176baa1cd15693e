"""Ranking and answer metrics."""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass, field


@dataclass
class RankingResult:
    question_id: str
    ranked: list[str]
    gold: set[str] = field(default_factory=set)

    def __post_init__(self):
        if len(set(self.ranked)) != len(self.ranked):
            raise ValueError(f"ranked list for {self.question_id} has duplicates")
        self.gold = set(self.gold)

    def first_gold_rank(self) -> int | None:
        for i, item in enumerate(self.ranked, 1):
            if item in self.gold:
                return i
        return None


@dataclass
class AnswerResult:
    question_id: str
    prediction: str
    gold_answers: list[str]


def _nonempty(results):
    results = list(results)
    if not results:
        raise ValueError("no results to score")
    return results


def mrr(results) -> float:
    results = _nonempty(results)
    total = 0.0
    for r in results:
        rank = r.first_gold_rank()
        if rank is not None:
            total += 1.0 / rank
    return total / len(results)


def hits_at_k(results, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    results = _nonempty(results)
    return sum(1 for r in results if (rank := r.first_gold_rank()) is not None and rank <= k) / len(results)


_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation and articles, collapse whitespace."""
    text = text.lower().translate(_PUNCT)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match_score(prediction: str, gold: str) -> float:
    return float(normalize_answer(prediction) == normalize_answer(gold))


def f1_score(prediction: str, gold: str) -> float:
    pred = normalize_answer(prediction).split()
    ref = normalize_answer(gold).split()
    if not pred or not ref:
        return float(pred == ref)
    common = Counter(pred) & Counter(ref)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(ref)
    return 2 * precision * recall / (precision + recall)


def em(results) -> float:
    results = _nonempty(results)
    return sum(max((exact_match_score(r.prediction, g) for g in r.gold_answers), default=0.0) for r in results) / len(results)


def f1(results) -> float:
    results = _nonempty(results)
    return sum(max((f1_score(r.prediction, g) for g in r.gold_answers), default=0.0) for r in results) / len(results)
