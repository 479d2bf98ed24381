"""Writes the reference instance used by the headline sweep.

Every state shares the same per-action means; only the transition rows are random
(normalised Exp(1) draws from a seeded Python RNG). Action 0 pays the most reward
and the most constraint-1 cost, so the reward-greedy policy violates constraint 1.

    python3 tools/make_reference_instance.py > data/reference.instance
"""
import argparse
import json
import random
import sys


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--reward", default="[1.0, 0.4, 0.0]")
    ap.add_argument("--cost1", default="[1.0, 0.0, 0.5]")
    ap.add_argument("--cost2", default="[0.3, 0.1, 0.5]")
    ap.add_argument("--thresholds", type=float, nargs=2, default=[2.0, 2.4])
    ap.add_argument("--layers", type=int, nargs="+", default=[1, 2, 3, 2, 1])
    args = ap.parse_args()

    reward, cost1, cost2 = (json.loads(s) for s in (args.reward, args.cost1, args.cost2))
    actions = len(reward)
    rng = random.Random(args.seed)
    lines = [
        "layers " + " ".join(map(str, args.layers)),
        f"actions {actions}",
        f"thresholds {args.thresholds[0]} {args.thresholds[1]}",
        "noise bernoulli",
    ]
    for k in range(len(args.layers) - 1):
        for x in range(args.layers[k]):
            for a in range(actions):
                w = [rng.gammavariate(1.0, 1) for _ in range(args.layers[k + 1])]
                total = sum(w)
                for y in range(args.layers[k + 1]):
                    lines.append(f"transition {k} {x} {a} {y} {w[y] / total!r}")
                lines.append(f"reward_mean {k} {x} {a} {reward[a]}")
                lines.append(f"cost_means 0 {k} {x} {a} {cost1[a]}")
                lines.append(f"cost_means 1 {k} {x} {a} {cost2[a]}")
    sys.stdout.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
