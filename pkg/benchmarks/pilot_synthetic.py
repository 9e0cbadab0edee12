"""Pilot run that set the training budgets in tests/test_acceptance.py.

Trains FMLP-Rec and the five filter-study variants on the default synthetic
periodic dataset and prints sampled-99 test metrics next to the popularity
baseline. Usage: python benchmarks/pilot_synthetic.py [--epochs 10] [--seeds 0 1 2]
"""
import argparse
import time

from fmlprec import cli, data, synthetic
from fmlprec.evaluation import evaluate_sampled, popularity_baseline


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = parser.parse_args()
    log = data.apply_core_filter(data.from_sequences(synthetic.periodic_sequences(seed=0)))
    splits = data.split_leave_one_out(log, max_len=50)
    pop = evaluate_sampled(popularity_baseline(splits), splits, seed=0).metrics
    print(f"popularity\tNDCG@10 {pop['NDCG@10']:.4f}\tHR@10 {pop['HR@10']:.4f}")
    for seed in args.seeds:
        start = time.perf_counter()
        rows = cli.run_filter_study(cli.RunConfig(max_epochs=args.epochs, seed=seed), splits)
        for r in rows:
            print(f"seed {seed}\t{r['variant']}\tNDCG@10 {r['NDCG@10']:.4f}\tHR@10 {r['HR@10']:.4f}")
        print(f"seed {seed}\t{time.perf_counter() - start:.0f}s")


if __name__ == "__main__":
    main()
