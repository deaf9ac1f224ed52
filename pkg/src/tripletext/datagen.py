"""Slot-filling training-data construction from a store plus corpus.

Per predicate: rank (subject type, object type) pairs by how many of the
predicate's triples they cover, walk the top pairs, and collect up to a
per-pair cap of triples as question/answer/text/anchor rows. Cleaning
then drops rows without a document and rows whose answer cannot be
anchored in it. Every iteration order is fixed lexicographically so a
run is byte-reproducible.

Type equality against a pair is set membership: entities can carry
several types, so one triple may serve several pairs (at most once per
pair).
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import Anchor, Corpus, Lexicon, window
from .corpus import find_anchor as _find_anchor
from .kg import Triple, TripleStore

logger = logging.getLogger(__name__)

SETTING_SP = "sp"
SETTING_PO = "po"
SETTING_BOTH = "both"

STAGE_RAW = "raw"
STAGE_NO_DOCUMENT = "no_document"
STAGE_NO_LABEL = "no_label"
STAGE_ANSWER_ABSENT = "answer_absent"
STAGE_KEPT = "kept"


@dataclass(frozen=True)
class ExtractionConfig:
    """Caps and knobs for dataset construction.

    The defaults bound per-predicate yield at
    max_type_pairings * max_examples = 6000 rows per setting.
    """

    max_type_pairings: int = 20
    max_examples: int = 300
    min_examples_after_cleaning: int = 30
    window_chars: int | None = None
    setting: str = SETTING_SP
    split_seed: int = 1

    def __post_init__(self) -> None:
        for name in ("max_type_pairings", "max_examples", "min_examples_after_cleaning"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.window_chars is not None and self.window_chars < 1:
            raise ValueError("window_chars must be >= 1 when set")
        if self.setting not in (SETTING_SP, SETTING_PO, SETTING_BOTH):
            raise ValueError(f"unknown setting {self.setting!r}")

    def to_dict(self) -> dict:
        return {
            "max_type_pairings": self.max_type_pairings,
            "max_examples": self.max_examples,
            "min_examples_after_cleaning": self.min_examples_after_cleaning,
            "window_chars": self.window_chars,
            "setting": self.setting,
            "split_seed": self.split_seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExtractionConfig":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        return cls(**known)


@dataclass(frozen=True)
class TrainingExample:
    """One generated row: triple, question, answer, evidence text, anchor."""

    triple: Triple
    setting: str
    question: str
    answer: str
    doc_iri: str
    text: str
    anchor: Anchor
    type_pair: tuple[str, str]

    def to_dict(self) -> dict:
        return {
            "triple": self.triple.to_dict(),
            "setting": self.setting,
            "question": self.question,
            "answer": self.answer,
            "doc_iri": self.doc_iri,
            "text": self.text,
            "anchor": self.anchor.to_dict(),
            "type_pair": list(self.type_pair),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainingExample":
        return cls(
            triple=Triple.from_dict(d["triple"]),
            setting=d["setting"],
            question=d["question"],
            answer=d["answer"],
            doc_iri=d["doc_iri"],
            text=d["text"],
            anchor=Anchor.from_dict(d["anchor"]),
            type_pair=tuple(d["type_pair"]),
        )


@dataclass(frozen=True)
class PredicateDataset:
    """All kept examples for one (predicate, setting), plus stage counts."""

    predicate: str
    setting: str
    examples: tuple[TrainingExample, ...]
    stats: dict[str, int]
    split_seed: int | None = None

    @property
    def kept(self) -> int:
        return len(self.examples)

    def included(self, cfg: ExtractionConfig) -> bool:
        return self.kept >= cfg.min_examples_after_cleaning


def type_pair_frequencies(store: TripleStore, predicate: str) -> list[tuple[tuple[str, str], int]]:
    """Pairs (subject type, object type) with the number of triples they cover.

    Sorted by count descending, ties by the pair lexicographically;
    zero-count pairs never appear. Single pass over the triples, but
    semantically identical to the nested count loops over
    subject-types x object-types (checked against that oracle in tests).
    """
    counts: dict[tuple[str, str], int] = {}
    for t in store.triples_for_predicate(predicate):
        subject_types = store.entity_types(t.s.value)
        object_types = store.entity_types(t.o.value) if t.o.is_iri else frozenset()
        for st in subject_types:
            for ot in object_types:
                counts[(st, ot)] = counts.get((st, ot), 0) + 1
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))


def _labels_for(lexicon: Lexicon, triple: Triple, setting: str) -> tuple[str, str] | None:
    """(question, answer) for one triple, or None when a label is missing."""
    p_label = lexicon.label_of(triple.p.value)
    s_label = lexicon.label_of(triple.s.value)
    o_label = triple.o.value if triple.o.is_literal else lexicon.label_of(triple.o.value)
    if not p_label:
        return None
    if setting == SETTING_SP:
        if not s_label or not o_label:
            return None
        return f"{s_label} {p_label}", o_label
    if not o_label or not s_label:
        return None
    return f"{o_label} {p_label}", s_label


def extract_predicate(
    store: TripleStore,
    corpus: Corpus,
    lexicon: Lexicon,
    predicate: str,
    cfg: ExtractionConfig,
    setting: str | None = None,
) -> PredicateDataset:
    """Generate and clean the dataset for a single (predicate, setting).

    The text is always the subject's document, in both settings: the
    subject's page is where both the object and (trivially) the subject
    are expected to be mentioned. An unknown predicate yields an empty
    dataset with stats, not an error.
    """
    setting = setting or cfg.setting
    if setting not in (SETTING_SP, SETTING_PO):
        raise ValueError("extract_predicate needs a single setting (sp or po)")
    stats = {
        STAGE_RAW: 0,
        STAGE_NO_DOCUMENT: 0,
        STAGE_NO_LABEL: 0,
        STAGE_ANSWER_ABSENT: 0,
        STAGE_KEPT: 0,
    }
    triples = store.triples_for_predicate(predicate)
    pairs = type_pair_frequencies(store, predicate)[: cfg.max_type_pairings]
    examples: list[TrainingExample] = []
    for (st, ot), _count in pairs:
        taken = 0
        for t in triples:
            if taken >= cfg.max_examples:
                break
            if st not in store.entity_types(t.s.value):
                continue
            if not t.o.is_iri or ot not in store.entity_types(t.o.value):
                continue
            taken += 1
            stats[STAGE_RAW] += 1
            qa = _labels_for(lexicon, t, setting)
            if qa is None:
                stats[STAGE_NO_LABEL] += 1
                continue
            question, answer = qa
            doc = corpus.get(t.s.value)
            if doc is None:
                stats[STAGE_NO_DOCUMENT] += 1
                continue
            text = doc.text
            anchor = _find_anchor(text, answer)
            if anchor is None:
                stats[STAGE_ANSWER_ABSENT] += 1
                continue
            if cfg.window_chars is not None:
                try:
                    text, anchor = window(text, anchor, cfg.window_chars)
                except ValueError:
                    # Answer longer than the window budget: keep the full text.
                    logger.debug("window too small for answer %r, keeping full text", answer)
            examples.append(
                TrainingExample(
                    triple=t,
                    setting=setting,
                    question=question,
                    answer=answer,
                    doc_iri=doc.iri,
                    text=text,
                    anchor=anchor,
                    type_pair=(st, ot),
                )
            )
    stats[STAGE_KEPT] = len(examples)
    return PredicateDataset(
        predicate=predicate,
        setting=setting,
        examples=tuple(examples),
        stats=stats,
        split_seed=cfg.split_seed,
    )


def extract_all(
    store: TripleStore,
    corpus: Corpus,
    lexicon: Lexicon,
    cfg: ExtractionConfig,
) -> list[PredicateDataset]:
    """One dataset per (predicate, setting) over every predicate in the store.

    Datasets below the cleaning threshold stay in the returned list (for
    the stats report); writers exclude them from model-training output.
    """
    settings = [SETTING_SP, SETTING_PO] if cfg.setting == SETTING_BOTH else [cfg.setting]
    datasets = []
    for predicate in store.predicates():
        for setting in settings:
            datasets.append(extract_predicate(store, corpus, lexicon, predicate, cfg, setting))
    datasets.sort(key=lambda ds: (ds.predicate, ds.setting))
    return datasets


def _slug(predicate: str) -> str:
    tail = re.sub(r"[^A-Za-z0-9]+", "-", predicate).strip("-")[-40:]
    digest = hashlib.sha1(predicate.encode("utf-8")).hexdigest()[:8]
    return f"{tail}-{digest}"


def write_datasets(datasets: Iterable[PredicateDataset], out_dir: str | Path, cfg: ExtractionConfig) -> Path:
    """Write per-(predicate, setting) JSONL files plus a manifest.

    Returns the manifest path. Only datasets meeting the cleaning
    threshold get a data file; all of them appear in the manifest stats.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"config": cfg.to_dict(), "split_seed": cfg.split_seed, "datasets": []}
    for ds in sorted(datasets, key=lambda d: (d.predicate, d.setting)):
        entry = {
            "predicate": ds.predicate,
            "setting": ds.setting,
            "stats": dict(ds.stats),
            "included": ds.included(cfg),
            "path": None,
        }
        if ds.included(cfg):
            name = f"{_slug(ds.predicate)}.{ds.setting}.jsonl"
            lines = [
                json.dumps(ex.to_dict(), sort_keys=True, ensure_ascii=False)
                for ex in ds.examples
            ]
            (out / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
            entry["path"] = name
        manifest["datasets"].append(entry)
    manifest_path = out / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return manifest_path


def read_dataset(out_dir: str | Path, predicate: str, setting: str) -> PredicateDataset:
    """Load one written dataset back, stats and split seed included."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    for entry in manifest["datasets"]:
        if entry["predicate"] == predicate and entry["setting"] == setting:
            examples: list[TrainingExample] = []
            if entry["path"]:
                for line in (out / entry["path"]).read_text(encoding="utf-8").splitlines():
                    if line.strip():
                        examples.append(TrainingExample.from_dict(json.loads(line)))
            return PredicateDataset(
                predicate=predicate,
                setting=setting,
                examples=tuple(examples),
                stats=entry["stats"],
                split_seed=manifest.get("split_seed"),
            )
    raise KeyError(f"no dataset for ({predicate}, {setting}) in {out}")


def read_all_datasets(out_dir: str | Path, included_only: bool = True) -> list[PredicateDataset]:
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    datasets = []
    for entry in manifest["datasets"]:
        if included_only and not entry["included"]:
            continue
        datasets.append(read_dataset(out_dir, entry["predicate"], entry["setting"]))
    return datasets
