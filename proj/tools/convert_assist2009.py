#!/usr/bin/env python3
"""Convert the public ASSISTments 2009-2010 skill-builder CSV into the
logs.csv / qmatrix.csv pair read by `relicd train`.

Rows without a skill id are dropped. Exercises are problem ids; every
(problem, skill) pair seen becomes a Q-matrix entry. Student filtering by
log count happens inside relicd (min_logs), not here.
"""
import argparse
import csv
import os
import sys


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("raw", help="skill_builder_data.csv (or the corrected variant)")
    ap.add_argument("out_dir")
    ap.add_argument("--encoding", default="latin-1")
    args = ap.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    q_pairs = {}
    logs = []
    seen_orders = set()
    with open(args.raw, newline="", encoding=args.encoding) as f:
        for row in csv.DictReader(f):
            skill = (row.get("skill_id") or "").strip()
            if not skill:
                continue
            correct = (row.get("correct") or "").strip()
            if correct not in ("0", "1"):
                continue
            problem = row["problem_id"].strip()
            q_pairs.setdefault(problem, [])
            if skill not in q_pairs[problem]:
                q_pairs[problem].append(skill)
            # multi-skill problems repeat one response per skill; keep it once
            order = row.get("order_id", "").strip()
            if order and order in seen_orders:
                continue
            if order:
                seen_orders.add(order)
            logs.append((row["user_id"].strip(), problem, correct))

    with open(os.path.join(args.out_dir, "logs.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["student_id", "exercise_id", "score"])
        w.writerows(logs)
    with open(os.path.join(args.out_dir, "qmatrix.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["exercise_id", "concept_id"])
        for problem, skills in q_pairs.items():
            for s in skills:
                w.writerow([problem, s])
    print(f"{len(logs)} logs, {len(q_pairs)} exercises, "
          f"{len({s for v in q_pairs.values() for s in v})} concepts", file=sys.stderr)


if __name__ == "__main__":
    main()
