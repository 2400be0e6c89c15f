"""Corpus statistics over entities and mentions.

Three tables: entity counts and length distribution, mention counts and
length distribution (mention length = number of nonempty nodes, so zeros
have length 0), and mention detail flags (with empty node, with gap,
non-treelet) plus the head UPOS distribution.  Per-1000-words rates use
surface words only.
"""

from __future__ import annotations

from .heads import mention_head, treelet_roots
from .model import CorefLayer

HEAD_UPOS_COLUMNS = ("NOUN", "PRON", "PROPN", "DET", "ADJ", "VERB", "ADV", "NUM")

ENTITY_COLUMNS = ("count", "per_1k", "max_len", "avg_len",
                  "len_1", "len_2", "len_3", "len_4", "len_5plus")
MENTION_COLUMNS = ("count", "per_1k", "max_len", "avg_len",
                   "len_0", "len_1", "len_2", "len_3", "len_4", "len_5plus")
DETAIL_COLUMNS = ("w_empty", "w_gap", "non_tree") + tuple(
    t.lower() for t in HEAD_UPOS_COLUMNS) + ("other",)


def _surface_words(layers: list[CorefLayer]) -> int:
    return sum(1 for layer in layers for n in layer.nodes if not n.is_empty)


def _bucket_percent(counter: dict[int, int], total: int, bucket: int, top: int) -> float:
    if not total:
        return 0.0
    if bucket < top:
        n = counter.get(bucket, 0)
    else:
        n = sum(v for k, v in counter.items() if k >= top)
    return 100.0 * n / total


def entity_stats(layers: list[CorefLayer]) -> dict[str, float]:
    """Entity totals, rate per 1000 words and length distribution
    (length = number of mentions; singletons have length 1)."""
    lengths: dict[int, int] = {}
    total = 0
    mention_total = 0
    max_len = 0
    for layer in layers:
        for entity in layer.entities:
            n = len(entity.mentions)
            total += 1
            mention_total += n
            max_len = max(max_len, n)
            lengths[n] = lengths.get(n, 0) + 1
    words = _surface_words(layers)
    row = {
        "count": total,
        "per_1k": 1000.0 * total / words if words else 0.0,
        "max_len": max_len,
        "avg_len": mention_total / total if total else 0.0,
    }
    for bucket in (1, 2, 3, 4):
        row[f"len_{bucket}"] = _bucket_percent(lengths, total, bucket, 5)
    row["len_5plus"] = _bucket_percent(lengths, total, 5, 5)
    return row


def mention_stats(layers: list[CorefLayer], include_singletons: bool = True) -> dict[str, float]:
    """Mention totals, rate per 1000 words and length distribution
    (length counts surface words only; zeros have length 0)."""
    lengths: dict[int, int] = {}
    total = 0
    length_sum = 0
    max_len = 0
    for layer in layers:
        for entity in layer.entities:
            if not include_singletons and entity.is_singleton:
                continue
            for mention in entity.mentions:
                n = mention.surface_length
                total += 1
                length_sum += n
                max_len = max(max_len, n)
                lengths[n] = lengths.get(n, 0) + 1
    words = _surface_words(layers)
    row = {
        "count": total,
        "per_1k": 1000.0 * total / words if words else 0.0,
        "max_len": max_len,
        "avg_len": length_sum / total if total else 0.0,
    }
    for bucket in (0, 1, 2, 3, 4):
        row[f"len_{bucket}"] = _bucket_percent(lengths, total, bucket, 5)
    row["len_5plus"] = _bucket_percent(lengths, total, 5, 5)
    return row


def mention_detail_stats(layers: list[CorefLayer]) -> dict[str, float]:
    """Percentages of mentions with an empty node, with a gap and not
    forming a connected subtree, plus the head UPOS distribution.  The
    three flags are independent; a mention may carry several."""
    total = 0
    w_empty = w_gap = non_tree = 0
    upos: dict[str, int] = {}
    for layer in layers:
        for entity in layer.entities:
            for mention in entity.mentions:
                total += 1
                if mention.contains_empty:
                    w_empty += 1
                if mention.is_discontinuous:
                    w_gap += 1
                if len(treelet_roots(mention)) > 1:
                    non_tree += 1
                tag = mention_head(mention).upos
                upos[tag if tag in HEAD_UPOS_COLUMNS else "other"] = (
                    upos.get(tag if tag in HEAD_UPOS_COLUMNS else "other", 0) + 1)
    def pct(n: int) -> float:
        return 100.0 * n / total if total else 0.0

    row = {"w_empty": pct(w_empty), "w_gap": pct(w_gap), "non_tree": pct(non_tree)}
    for tag in HEAD_UPOS_COLUMNS:
        row[tag.lower()] = pct(upos.get(tag, 0))
    row["other"] = pct(upos.get("other", 0))
    return row
