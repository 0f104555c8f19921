"""Generate synthetic audio-visual pairs and inspect their cross-modal coupling.

A real pair shares one latent envelope between the video brightness and
the audio amplitude; fakes break that coupling globally or only inside
one temporal chunk.
"""

import numpy as np

from avlab import SynthConfig, save_pair, substream, synth_fake_pair, synth_real_pair


def brightness(pair):
    return pair.visual.data.mean(axis=(1, 2, 3))


def rms(pair):
    spf = pair.audio.t // pair.visual.t
    return np.sqrt((pair.audio.data.reshape(-1, spf).astype(np.float64) ** 2).mean(axis=1))


def describe(name, pair):
    r = np.corrcoef(brightness(pair), rms(pair))[0, 1]
    specs = pair.meta.visual_manipulations + pair.meta.audio_manipulations
    print(f"{name:14s} label={pair.label:5s} origin={pair.meta.origin:13s} "
          f"brightness/RMS correlation r={r:+.3f}")
    for spec in specs:
        print(f"{'':14s} manipulated chunk: start={spec.i}, length={spec.l} "
              f"(in the modality's own time base)")


def main():
    cfg = SynthConfig(t_v=32, t_a=3200, noise_std=0.0, envelope_bandwidth=5.0)
    print(f"config: {cfg.t_v} frames of {cfg.h}x{cfg.w}, {cfg.t_a} audio samples\n")

    real = synth_real_pair(cfg, substream(7, "sample", 0))
    global_fake = synth_fake_pair(cfg, "global_desync", substream(7, "sample", 1))
    local_fake = synth_fake_pair(cfg, "local_desync", substream(7, "sample", 2))

    describe("real", real)
    describe("global fake", global_fake)
    describe("local fake", local_fake)

    save_pair("/tmp/avlab_demo_real.avtc", real)
    print("\nwrote /tmp/avlab_demo_real.avtc (binary tensor container)")

    twin = synth_real_pair(cfg, substream(7, "sample", 0))
    print("same seed reproduces the pair bit-exactly:",
          np.array_equal(twin.visual.data, real.visual.data))


if __name__ == "__main__":
    main()
