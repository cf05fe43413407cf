"""Text-overlap metrics and report aggregation.

ROUGE-L is sentence-level with a single reference: F1 over the token-level
longest common subsequence. BLEU-4 uses modified n-gram precisions with
add-one smoothing on zero numerators for n >= 2 and the standard brevity
penalty. Both operate on a shared tokenizer and return values in [0, 1];
the CLI multiplies by 100 for display.
"""

from __future__ import annotations

import csv
import io
import json
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

from .errors import EmptyInput

_METRIC_NAMES = ("rouge_l", "bleu_4", "geval")


def tokenize(s: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation, drop empties.

    Punctuation means Unicode general category P*. Interior punctuation is
    kept, so contractions and hyphenated words survive intact.
    """
    tokens = []
    for raw in s.lower().split():
        i, j = 0, len(raw)
        while i < j and unicodedata.category(raw[i]).startswith("P"):
            i += 1
        while j > i and unicodedata.category(raw[j - 1]).startswith("P"):
            j -= 1
        if j > i:
            tokens.append(raw[i:j])
    return tokens


def _lcs_length(a: list[str], b: list[str]) -> int:
    # Two-row DP table.
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(reference: str, hypothesis: str) -> float:
    """LCS-based F1 between one reference and one hypothesis."""
    ref = tokenize(reference)
    hyp = tokenize(hypothesis)
    if not ref or not hyp:
        return 0.0
    lcs = _lcs_length(ref, hyp)
    if lcs == 0:
        return 0.0
    recall = lcs / len(ref)
    precision = lcs / len(hyp)
    return 2.0 * precision * recall / (precision + recall)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i: i + n]) for i in range(len(tokens) - n + 1))


def bleu_4(reference: str, hypothesis: str) -> float:
    """BLEU up to 4-grams against a single reference.

    Zero numerators for n >= 2 are smoothed to 1/(denominator+1); a zero
    unigram numerator short-circuits to 0. Brevity penalty is
    min(1, e^(1 - |ref|/|hyp|)).
    """
    ref = tokenize(reference)
    hyp = tokenize(hypothesis)
    if not hyp:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        hyp_grams = _ngrams(hyp, n)
        ref_grams = _ngrams(ref, n)
        numerator = sum(min(count, ref_grams[g]) for g, count in hyp_grams.items())
        denominator = sum(hyp_grams.values())
        if numerator == 0:
            if n == 1:
                return 0.0
            log_sum += math.log(1.0 / (denominator + 1))
        else:
            log_sum += math.log(numerator / denominator)
    brevity = min(1.0, math.exp(1.0 - len(ref) / len(hyp)))
    return brevity * math.exp(log_sum / 4.0)


# --- report aggregation ---------------------------------------------------------

@dataclass
class MetricReport:
    per_example: list[dict]
    aggregates: dict
    group_by: dict | None = None


def _mean_block(rows: list[dict]) -> dict:
    agg = {}
    for name in _METRIC_NAMES:
        vals = [float(r[name]) for r in rows if r.get(name) is not None]
        if vals:
            agg[name] = math.fsum(vals) / len(vals)
    return agg


def aggregate_report(rows: list[dict], categories: dict | None = None) -> MetricReport:
    """Build a MetricReport from per-example rows.

    Each row needs query_id, rouge_l, and bleu_4; geval is optional and is
    averaged over the rows that carry it. ``categories`` maps query_id to a
    category label; when given, per-category aggregates are included.

    Raises:
        EmptyInput: on an empty row list.
    """
    if not rows:
        raise EmptyInput("aggregate_report needs at least one row")
    per_example = []
    for r in rows:
        entry = {"query_id": r["query_id"],
                 "rouge_l": float(r["rouge_l"]),
                 "bleu_4": float(r["bleu_4"])}
        if r.get("geval") is not None:
            entry["geval"] = int(r["geval"])
        if categories and r["query_id"] in categories:
            entry["category"] = categories[r["query_id"]]
        elif r.get("category") is not None:
            entry["category"] = r["category"]
        per_example.append(entry)
    aggregates = _mean_block(per_example)
    group_by = None
    cats = sorted({e["category"] for e in per_example if "category" in e})
    if cats:
        group_by = {c: _mean_block([e for e in per_example if e.get("category") == c])
                    for c in cats}
    return MetricReport(per_example=per_example, aggregates=aggregates, group_by=group_by)


def report_to_json(report: MetricReport) -> str:
    obj = {"per_example": report.per_example, "aggregates": report.aggregates}
    if report.group_by is not None:
        obj["group_by"] = report.group_by
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def report_to_csv(report: MetricReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["query_id", "rouge_l", "bleu_4", "geval", "category"])
    for e in report.per_example:
        writer.writerow([
            e["query_id"],
            repr(e["rouge_l"]),
            repr(e["bleu_4"]),
            e.get("geval", ""),
            e.get("category", ""),
        ])
    return buf.getvalue()
