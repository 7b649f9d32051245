#!/usr/bin/env python3
"""Writes a labeled 20 Newsgroups subset as JSONL for the fstc tools.

    python3 tools/make_newsgroups_subset.py --categories rec.autos rec.sport.baseball \
        --out autos_baseball.jsonl

Each line is {"id": ..., "text": ..., "label": ...}. Labels are the last
component of the newsgroup name ("autos", "baseball"). Needs scikit-learn and
network access on first use (the corpus is cached under ~/scikit_learn_data).
"""

import argparse
import json
import random
import sys

from sklearn.datasets import fetch_20newsgroups


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--categories", nargs="+", required=True, help="newsgroup names, e.g. rec.autos")
    ap.add_argument("--subset", choices=["train", "test", "all"], default="train")
    ap.add_argument("--remove", nargs="*", default=["headers", "footers", "quotes"],
                    help="parts stripped from each message")
    ap.add_argument("--size", type=int, default=0, help="sample this many documents (0: keep all)")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    data = fetch_20newsgroups(subset=args.subset, categories=args.categories,
                              remove=tuple(args.remove), shuffle=True, random_state=args.seed)
    records = []
    for i, (text, target) in enumerate(zip(data.data, data.target)):
        if not text.strip():
            continue
        label = data.target_names[target].split(".")[-1]
        records.append({"id": f"{args.subset}-{i:05d}", "text": text, "label": label})
    if args.size and args.size < len(records):
        records = random.Random(args.seed).sample(records, args.size)
        records.sort(key=lambda r: r["id"])

    with open(args.out, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")
    print(f"wrote {len(records)} documents to {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
