#!/usr/bin/env python3
"""Standalone reference for the evaluation report, used to produce golden files.

Usage: eval_reference.py PRED.jsonl GT.jsonl [--theta-iou X] [--theta-txt Y] [--dedup] [--macro]
Prints the report as JSON.
"""

import argparse
import json


def load(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def elements(state):
    return state["elements"] if isinstance(state, dict) else state


def iou(a, b):
    ix = max(0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    if union == 0:
        return 1.0 if a == b else 0.0
    return inter / union


def levenshtein(s, t):
    # full matrix, python str indexes code points
    d = [[0] * (len(t) + 1) for _ in range(len(s) + 1)]
    for i in range(len(s) + 1):
        d[i][0] = i
    for j in range(len(t) + 1):
        d[0][j] = j
    for i in range(1, len(s) + 1):
        for j in range(1, len(t) + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (s[i - 1] != t[j - 1]))
    return d[len(s)][len(t)]


def ned(s, t):
    m = max(len(s), len(t))
    return 0.0 if m == 0 else levenshtein(s, t) / m


def match(pred, gt, theta_iou, theta_txt, dedup):
    keep = []
    seen = set()
    for i, e in enumerate(pred):
        if dedup and e["text"] in seen:
            continue
        seen.add(e["text"])
        keep.append(i)
    cands = []
    for p in keep:
        for g in range(len(gt)):
            o = iou(pred[p]["bbox"], gt[g]["bbox"])
            n = ned(pred[p]["text"], gt[g]["text"])
            if o > theta_iou or n < theta_txt:
                cands.append((-o, n, p, g))
    cands.sort()
    used_p, used_g, pairs = set(), set(), []
    for neg_o, n, p, g in cands:
        if p in used_p or g in used_g:
            continue
        used_p.add(p)
        used_g.add(g)
        pairs.append((-neg_o, 1.0 - n))
    tp = len(pairs)
    return tp, len(keep) - tp, len(gt) - tp, pairs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("pred")
    ap.add_argument("gt")
    ap.add_argument("--theta-iou", type=float, default=0.7)
    ap.add_argument("--theta-txt", type=float, default=0.3)
    ap.add_argument("--dedup", action="store_true")
    ap.add_argument("--macro", action="store_true")
    args = ap.parse_args()

    preds = {(r["traj_id"], r["step"]): r for r in load(args.pred)}
    tp = fp = fn = 0
    ious, sims, ps, rs = [], [], [], []
    gts = load(args.gt)
    for g in gts:
        p = preds[(g["traj_id"], g["step"])]
        a, b, c, pairs = match(elements(p["pred"]), elements(g["post"]), args.theta_iou, args.theta_txt, args.dedup)
        tp, fp, fn = tp + a, fp + b, fn + c
        ious += [x for x, _ in pairs]
        sims += [y for _, y in pairs]
        ps.append(a / (a + b) if a + b else 0.0)
        rs.append(a / (a + c) if a + c else 0.0)

    if args.macro:
        precision, recall = sum(ps) / len(ps), sum(rs) / len(rs)
    else:
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    report = {
        "miou": sum(ious) / len(ious) if ious else 0.0,
        "text_similarity": sum(sims) / len(sims) if sims else 0.0,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "sample_count": len(gts),
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "matched_pairs": len(ious),
        "averaging": "macro" if args.macro else "micro",
    }
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
