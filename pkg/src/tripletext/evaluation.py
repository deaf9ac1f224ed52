"""Answer-string metrics and per-predicate evaluation.

Exact match and token-overlap F1 over SQuAD-convention normalisation
(lowercase, punctuation stripped, articles removed, whitespace
collapsed). Evaluation feeds each example's stored text to the extractor
as the sole candidate document, isolating extraction quality from
retrieval.
"""

from __future__ import annotations

import logging
import random
import re
import statistics
import string
from collections import Counter
from dataclasses import dataclass

from .corpus import Lexicon
from .datagen import SETTING_SP, PredicateDataset, TrainingExample
from .extractors import ExtractionContext, ExtractionRequest, Extractor
from .kg import Term, TriplePattern

logger = logging.getLogger(__name__)

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


class EvalConfigError(Exception):
    """Evaluation prerequisites (e.g. split metadata) are missing."""


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, drop whole-token articles, collapse spaces."""
    lowered = text.lower()
    no_punct = lowered.translate(_PUNCT_TABLE)
    no_articles = _ARTICLES.sub(" ", no_punct)
    return " ".join(no_articles.split())


def _tokens(text: str) -> list[str]:
    return normalize_answer(text).split()


def token_f1(prediction: str, gold: str) -> float:
    """Token-multiset overlap F1; both empty -> 1.0, exactly one empty -> 0.0."""
    pred = _tokens(prediction)
    ref = _tokens(gold)
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    common = Counter(pred) & Counter(ref)
    same = sum(common.values())
    if same == 0:
        return 0.0
    precision = same / len(pred)
    recall = same / len(ref)
    return 2 * precision * recall / (precision + recall)


def exact_match(prediction: str, gold: str) -> int:
    """1 iff the normalised strings are equal."""
    return int(normalize_answer(prediction) == normalize_answer(gold))


@dataclass(frozen=True)
class ExampleScore:
    prediction: str
    gold: str
    f1: float
    exact: int


@dataclass(frozen=True)
class EvalRecord:
    """Per-(predicate, setting, extractor) scores with aggregates."""

    predicate: str
    setting: str
    extractor_id: str
    examples: tuple[ExampleScore, ...]

    @property
    def count(self) -> int:
        return len(self.examples)

    @property
    def mean_f1(self) -> float:
        return sum(e.f1 for e in self.examples) / self.count if self.examples else 0.0

    @property
    def mean_exact(self) -> float:
        return sum(e.exact for e in self.examples) / self.count if self.examples else 0.0


@dataclass(frozen=True)
class EvalConfig:
    split: str = "test"  # test | train | all
    max_answers: int = 10

    def __post_init__(self) -> None:
        if self.split not in ("test", "train", "all"):
            raise ValueError(f"unknown split {self.split!r}")


def split_examples(
    examples: tuple[TrainingExample, ...], seed: int, train_fraction: float = 2 / 3
) -> tuple[tuple[TrainingExample, ...], tuple[TrainingExample, ...]]:
    """Seeded shuffle into train/test; the seed makes the split reproducible."""
    order = list(range(len(examples)))
    random.Random(seed).shuffle(order)
    cut = int(len(examples) * train_fraction)
    train = tuple(examples[i] for i in order[:cut])
    test = tuple(examples[i] for i in order[cut:])
    return train, test


def _pattern_for(example: TrainingExample) -> TriplePattern:
    t = example.triple
    if example.setting == SETTING_SP:
        return TriplePattern(t.s, t.p, Term.var("answer"))
    return TriplePattern(Term.var("answer"), t.p, t.o)


def evaluate(
    dataset: PredicateDataset,
    extractor: Extractor,
    lexicon: Lexicon,
    cfg: EvalConfig = EvalConfig(),
) -> EvalRecord:
    """Score the extractor's top-1 answer per example against the gold label."""
    if cfg.split != "all" and dataset.split_seed is None:
        raise EvalConfigError(
            f"dataset for {dataset.predicate} carries no split seed; cannot select a split"
        )
    if cfg.split == "all":
        selected = dataset.examples
    else:
        train, test = split_examples(dataset.examples, dataset.split_seed)
        selected = train if cfg.split == "train" else test
    predicate_label = lexicon.label_of(dataset.predicate)
    scores = []
    for example in selected:
        request = ExtractionRequest(
            question=example.question,
            documents=((example.doc_iri, example.text),),
            max_answers=cfg.max_answers,
        )
        context = ExtractionContext(
            predicate=dataset.predicate,
            predicate_label=predicate_label,
            pattern=_pattern_for(example),
            setting=example.setting,
        )
        spans = extractor.extract(request, context)
        prediction = spans[0].text if spans else ""
        scores.append(
            ExampleScore(
                prediction=prediction,
                gold=example.answer,
                f1=token_f1(prediction, example.answer),
                exact=exact_match(prediction, example.answer),
            )
        )
    return EvalRecord(
        predicate=dataset.predicate,
        setting=dataset.setting,
        extractor_id=getattr(extractor, "id", "unknown"),
        examples=tuple(scores),
    )


def summarize(values: list[float]) -> dict[str, float | int]:
    """count/mean/std/min/quartiles/max in the shape of the result tables."""
    if not values:
        return {"count": 0, "mean": 0.0, "std": 0.0, "min": 0.0, "25%": 0.0, "50%": 0.0, "75%": 0.0, "max": 0.0}
    ordered = sorted(values)
    if len(ordered) == 1:
        q1 = q2 = q3 = ordered[0]
    else:
        q1, q2, q3 = statistics.quantiles(ordered, n=4, method="inclusive")
    return {
        "count": len(ordered),
        "mean": statistics.fmean(ordered),
        "std": statistics.stdev(ordered) if len(ordered) > 1 else 0.0,
        "min": ordered[0],
        "25%": q1,
        "50%": q2,
        "75%": q3,
        "max": ordered[-1],
    }


def build_report(records: list[EvalRecord]) -> dict:
    """Per-model rows plus distribution summaries over model means."""
    rows = []
    for record in sorted(records, key=lambda r: (r.extractor_id, r.setting, r.predicate)):
        rows.append(
            {
                "predicate": record.predicate,
                "setting": record.setting,
                "extractor": record.extractor_id,
                "count": record.count,
                "mean_f1": record.mean_f1,
                "mean_exact": record.mean_exact,
            }
        )
    summaries = {}
    groups: dict[tuple[str, str], list[EvalRecord]] = {}
    for record in records:
        groups.setdefault((record.extractor_id, record.setting), []).append(record)
    for (extractor_id, setting), group in sorted(groups.items()):
        summaries[f"{extractor_id}-{setting}"] = {
            "f1": summarize([r.mean_f1 for r in group]),
            "exact": summarize([r.mean_exact for r in group]),
        }
    return {"models": rows, "summary": summaries}
