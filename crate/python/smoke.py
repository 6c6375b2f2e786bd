"""Smoke test for the Python bindings.

Build the extension first (from the repository root):

    cargo build --release -p episodic-explore-py --features extension-module
    cp target/release/libepisodic_explore_py.so python/episodic_explore_py.so
    python3 python/smoke.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import episodic_explore_py as ee


def main():
    world = ee.World(seed=3)
    frames = []
    for _ in range(10):
        frames.append(world.render())
        world.step(0.3, 0.5)
    assert len(frames[0]) == ee.FRAME_SIZE ** 2
    assert all(0.0 <= v <= 1.0 for v in frames[0])
    assert len(world.lidar()) == 36
    print("pose after 10 ticks:", tuple(round(v, 3) for v in world.pose()))

    assert abs(ee.ssim_frame(frames[0], frames[0]) - 1.0) < 1e-12
    assert abs(ee.ssim_sequence(frames, frames) - 1.0) < 1e-12

    model = ee.Autoencoder(seed=7)
    print("autoencoder parameters:", model.param_count())
    before = model.checksum()
    score = model.score(frames)
    loss = model.train_step(frames)
    assert model.checksum() != before
    print(f"untrained window SSIM {score:.4f}, loss {loss:.5f}")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.veme")
        model.save(path)
        again = ee.Autoencoder.load(path)
        assert again.checksum() == model.checksum()

        z, p = ee.two_proportion_z(27, 28, 14, 28)
        assert abs(z - 3.92) < 0.01 and p < 0.05
        print(f"z = {z:.3f}, p = {p:.5f}")

        rec = ee.run_trial(0, {"condition": "frontier", "tick_budget": 120})
        assert rec["ticks"] == 120 and rec["ledger_records"] == 0
        rec = ee.run_trial(0, {"condition": "lstm_inference", "tick_budget": 60, "baseline_weights": path})
        assert all(not math.isnan(s) for _, s in rec["scores"])
        print("trial scored windows:", len(rec["scores"]))
    print("smoke test passed")


if __name__ == "__main__":
    main()
