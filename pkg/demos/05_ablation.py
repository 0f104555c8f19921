"""Mini ablation: attention on/off, shared seeds, both eval splits.

A scaled-down version of the comparison tables the eval kit produces;
crank the sizes and seed count for meaningful numbers.
"""

from avlab import RunConfig, ablation_run
from avlab.trainloop import DataSpec, EvalSpec


def main():
    cfg = RunConfig(epochs=6, seed=0)
    cfg.train_data = DataSpec(n=160)
    cfg.eval_data = EvalSpec(n=120)

    table = ablation_run(cfg, "attention", seeds=(0, 1))
    print(table.to_text())
    print("\nrows also carry per-seed AUCs:")
    for row in table.rows:
        print(f"  {row['value']}: {[f'{a:.3f}' for a in row['per_seed_fine_grained']]} (fine-grained)")


if __name__ == "__main__":
    main()
