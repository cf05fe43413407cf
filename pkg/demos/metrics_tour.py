#!/usr/bin/env python3
# A tour of the answer-quality metrics and the report they aggregate into.

from vrag.metrics import aggregate_report, bleu_4, report_to_csv, rouge_l, tokenize

print("tokenizer:", tokenize("Whisk the eggs -- THEN fold in flour!"))
print()

pairs = [
    ("identical", "press the tab firmly into the slot",
     "press the tab firmly into the slot"),
    ("paraphrase", "press the tab firmly into the slot",
     "firmly press the tab into the slot"),
    ("partial", "press the tab firmly into the slot",
     "press the tab"),
    ("unrelated", "press the tab firmly into the slot",
     "feed the sourdough starter daily"),
]
print(f"{'case':<12} {'ROUGE-L':>8} {'BLEU-4':>8}")
for name, ref, hyp in pairs:
    print(f"{name:<12} {rouge_l(ref, hyp):>8.4f} {bleu_4(ref, hyp):>8.4f}")

# BLEU is the stricter of the two: word order matters through the n-grams,
# so the paraphrase keeps most of its ROUGE but loses half its BLEU.

rows = [
    {"query_id": "q0", "rouge_l": 1.0, "bleu_4": 1.0, "geval": 5, "category": "repair"},
    {"query_id": "q1", "rouge_l": 0.72, "bleu_4": 0.41, "geval": 4, "category": "repair"},
    {"query_id": "q2", "rouge_l": 0.55, "bleu_4": 0.2, "category": "cooking"},
]
report = aggregate_report(rows)
print()
print("aggregates:", {k: round(v, 4) for k, v in report.aggregates.items()})
for cat, block in report.group_by.items():
    print(f"  {cat}: {({k: round(v, 4) for k, v in block.items()})}")
print()
print(report_to_csv(report))
