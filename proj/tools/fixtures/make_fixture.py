#!/usr/bin/env python3
"""Builds the 32-participant regression dataset under data/fixtures/study32.

Per-label correct counts, per-participant accuracy spread and rating
moments are fixed targets; everything else is drawn from a seeded RNG.
Re-running produces byte-identical output.
"""
import argparse
import json
import math
import pathlib
import random

from scipy import stats

N = 32
SEED = 20240611

EMOTIONS = ["anger", "fear", "disgust", "happiness", "surprise",
            "sadness", "confusion", "comfort", "calming", "attention"]
GESTURES = ["hold", "pat", "tickle", "rub", "tap", "poke"]

EMOTION_CORRECT = {"happiness": 7, "surprise": 8, "fear": 10, "disgust": 7, "anger": 22,
                   "comfort": 8, "attention": 10, "calming": 12, "confusion": 4, "sadness": 9}
GESTURE_CORRECT = {"hold": 17, "pat": 11, "poke": 10, "rub": 17, "tap": 10, "tickle": 21}

# (arousal mean, arousal sd, valence mean, valence sd), 1-decimal targets.
RATINGS = {
    "happiness": (5.3, 2.0, 5.3, 2.3), "surprise": (5.3, 2.2, 4.4, 1.9),
    "fear": (7.1, 1.9, 4.6, 2.8), "disgust": (7.4, 1.7, 4.7, 2.5),
    "anger": (8.0, 1.5, 2.1, 1.4), "comfort": (2.6, 1.9, 5.8, 1.5),
    "attention": (5.3, 1.9, 4.3, 1.8), "calming": (2.3, 1.9, 5.3, 2.0),
    "confusion": (4.4, 2.1, 4.7, 2.3), "sadness": (3.4, 2.1, 4.8, 2.2),
}

# Sum of squared per-participant correct counts. Sum parity is forced by the
# totals (97 and 86); these are the feasible values closest to the overall
# t statistics 7.89 and 7.67.
EMOTION_ROW_SQ = 359
GESTURE_ROW_SQ = 280


def round1(x):
    return round(x + 0.0, 1)


def sample_sd(v):
    m = sum(v) / len(v)
    return math.sqrt(sum((x - m) ** 2 for x in v) / (len(v) - 1))


def row_counts(total, sq_target, width, rng):
    """n integers in [0, width] with the given sum and sum of squares."""
    rows = [total // N] * N
    for i in range(total - sum(rows)):
        rows[i] += 1
    while sum(r * r for r in rows) < sq_target:
        i, j = rng.randrange(N), rng.randrange(N)
        if i == j or rows[i] < rows[j] or rows[i] >= width or rows[j] <= 0:
            continue
        gain = 2 * (rows[i] - rows[j]) + 2
        if sum(r * r for r in rows) + gain > sq_target:
            # the smallest available step; keep looking for an exact fit
            if gain != 2:
                continue
        rows[i] += 1
        rows[j] -= 1
    if sum(r * r for r in rows) != sq_target:
        raise SystemExit("row construction overshot")
    rng.shuffle(rows)
    return rows


def realize(rows, cols, labels):
    """Binary participants x labels matrix with given margins (Ryser greedy)."""
    remaining = dict(cols)
    order = sorted(range(N), key=lambda p: -rows[p])
    correct = [set() for _ in range(N)]
    for p in order:
        pick = sorted(labels, key=lambda l: (-remaining[l], labels.index(l)))[: rows[p]]
        for l in pick:
            if remaining[l] <= 0:
                raise SystemExit("margins are not realizable")
            remaining[l] -= 1
            correct[p].add(l)
    if any(remaining.values()):
        raise SystemExit("margins are not realizable")
    return correct


def ratings(mean, sd, rng):
    """32 integers in 1..10 whose mean and sample sd round to the targets."""
    total = round(mean * N)
    for _ in range(20000):
        v = [max(1, min(10, round(rng.gauss(mean, sd)))) for _ in range(N)]
        # fix the sum
        while sum(v) != total:
            i = rng.randrange(N)
            if sum(v) < total and v[i] < 10:
                v[i] += 1
            elif sum(v) > total and v[i] > 1:
                v[i] -= 1
        # walk the spread towards the target keeping the sum
        for _ in range(4000):
            cur = sample_sd(v)
            if round1(cur) == sd and abs(cur - sd) < 0.04:
                break
            i, j = rng.randrange(N), rng.randrange(N)
            if i == j:
                continue
            if cur < sd and v[i] >= v[j] and v[i] < 10 and v[j] > 1:
                v[i] += 1
                v[j] -= 1
            elif cur > sd and v[i] > v[j] + 1:
                v[i] -= 1
                v[j] += 1
        m = sum(v) / N
        s = sample_sd(v)
        if round1(m) == mean and round1(s) == sd and abs(m - mean) < 0.04 and abs(s - sd) < 0.04:
            return v
    raise SystemExit(f"no rating vector for {mean}+-{sd}")


def build():
    rng = random.Random(SEED)
    participants = [f"P{i:02d}" for i in range(1, N + 1)]
    emo_rows = row_counts(sum(EMOTION_CORRECT.values()), EMOTION_ROW_SQ, len(EMOTIONS), rng)
    ges_rows = row_counts(sum(GESTURE_CORRECT.values()), GESTURE_ROW_SQ, len(GESTURES), rng)
    emo_correct = realize(emo_rows, EMOTION_CORRECT, EMOTIONS)
    ges_correct = realize(ges_rows, GESTURE_CORRECT, GESTURES)
    rating_vectors = {}
    for label in EMOTIONS:
        am, asd, vm, vsd = RATINGS[label]
        rating_vectors[label] = (ratings(am, asd, rng), ratings(vm, vsd, rng))

    records = []
    for p, pid in enumerate(participants):
        session = f"fixture-{pid.lower()}"
        clock = 0
        for label in rng.sample(EMOTIONS, len(EMOTIONS)):
            chosen = label if label in emo_correct[p] else rng.choice([l for l in EMOTIONS if l != label])
            clock += rng.randint(15, 40)
            records.append({
                "session_id": session, "participant_id": pid, "phase": "emotion",
                "stimulus_label": label, "presented_at": f"2024-05-{1 + p % 28:02d}T10:{clock // 60:02d}:{clock % 60:02d}.000Z",
                "chosen_label": chosen, "arousal": rating_vectors[label][0][p],
                "valence": rating_vectors[label][1][p], "replay_count": 0,
                "response_ms": rng.randint(2500, 14000),
            })
        for label in rng.sample(GESTURES, len(GESTURES)):
            chosen = label if label in ges_correct[p] else rng.choice([l for l in GESTURES if l != label])
            clock += rng.randint(15, 40)
            records.append({
                "session_id": session, "participant_id": pid, "phase": "gesture",
                "stimulus_label": label, "presented_at": f"2024-05-{1 + p % 28:02d}T10:{clock // 60:02d}:{clock % 60:02d}.000Z",
                "chosen_label": chosen, "arousal": None, "valence": None,
                "replay_count": rng.choice([0, 0, 0, 1, 1, 2]),
                "response_ms": rng.randint(1500, 9000),
            })
    return records, emo_rows, ges_rows


def targets(records):
    """Independent statistics computed with scipy for the test oracles."""
    out = {"participants": N, "emotion": {}, "gesture": {}}
    for kind, labels, chance in (("emotion", EMOTIONS, 0.1), ("gesture", GESTURES, 1 / 6)):
        per_label = {}
        for label in labels:
            vec = [1.0 if r["chosen_label"] == label else 0.0
                   for r in records if r["phase"] == kind and r["stimulus_label"] == label]
            res = stats.ttest_1samp(vec, chance, alternative="greater")
            per_label[label] = {"correct": int(sum(vec)), "t": float(res.statistic), "p": float(res.pvalue)}
        by_pid = {}
        for r in records:
            if r["phase"] == kind:
                by_pid.setdefault(r["participant_id"], []).append(r["chosen_label"] == r["stimulus_label"])
        acc = [sum(v) / len(v) for v in by_pid.values()]
        res = stats.ttest_1samp(acc, chance, alternative="greater")
        out[kind] = {"labels": per_label, "overall_t": float(res.statistic), "overall_p": float(res.pvalue),
                     "mean_accuracy_exact": 100 * sum(d["correct"] for d in per_label.values()) / (N * len(labels))}
        if kind == "emotion":
            res = stats.ttest_1samp(acc, 0.375, alternative="greater")
            out["baseline"] = {"mu0": 0.375, "t": float(res.statistic), "p": float(res.pvalue)}
    summary = {}
    for label in EMOTIONS:
        a = [r["arousal"] for r in records if r["phase"] == "emotion" and r["stimulus_label"] == label]
        v = [r["valence"] for r in records if r["phase"] == "emotion" and r["stimulus_label"] == label]
        summary[label] = {"arousal_mean": sum(a) / N, "arousal_sd": sample_sd(a),
                          "valence_mean": sum(v) / N, "valence_sd": sample_sd(v)}
    out["ratings"] = summary
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parents[2] / "data/fixtures/study32"))
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records, _, _ = build()
    with open(out / "records.jsonl", "w", newline="\n") as f:
        for r in records:
            f.write(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n")
    with open(out / "targets.json", "w", newline="\n") as f:
        json.dump(targets(records), f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
