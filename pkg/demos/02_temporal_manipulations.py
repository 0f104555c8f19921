"""The four temporally-local manipulations as index transforms.

Each one rewrites only the chunk [i, i+l-1]; everything outside is
untouched.  Run on a labeled toy sequence so the effect is readable.
"""

import numpy as np

from avlab import ChunkParams, ManipulationSpec, apply_manipulation, index_map, sample_manipulation, substream


def show(name, spec, T=10):
    g = index_map(spec, T)
    labels = [f"A{k+1}" for k in range(T)]  # 1-based labels for readability
    out = [labels[j] for j in g]
    mark = ["^" if spec.i <= t < spec.i + spec.l else " " for t in range(T)]
    print(f"{name:16s} {' '.join(out)}")
    print(f"{'':16s} {'  '.join(mark)}")


def main():
    print("chunk: i=2 (0-based), l=4, param=2\n")
    show("repeat", ManipulationSpec("repeat", 2, 4, 2))
    show("flip", ManipulationSpec("flip", 2, 4, 2))
    show("translate left", ManipulationSpec("translate", 2, 4, 2, direction="left"))
    show("translate right", ManipulationSpec("translate", 2, 4, 2, direction="right"))

    print("\napplying to a waveform-like array, replace kind needs a donor:")
    seq = np.arange(10, dtype=np.float32)
    donor = seq + 100
    out = apply_manipulation(seq, ManipulationSpec("replace", 3, 4), donor)
    print("input :", seq.astype(int).tolist())
    print("output:", out.astype(int).tolist(), "(chunk 3..6 from donor)")

    print("\nrandomly sampled specs under the default chunk law:")
    rng = substream(3, "demo")
    for _ in range(4):
        spec = sample_manipulation(
            {"replace": 0.25, "repeat": 0.25, "flip": 0.25, "translate": 0.25},
            T=30, cp=ChunkParams(), rng=rng,
        )
        print(" ", spec)


if __name__ == "__main__":
    main()
