"""Smoke test for the stcnet_py extension module.

Build the module with
    cargo build --release -p stcnet-python --features extension-module
and copy target/release/libstcnet_py.so to stcnet_py.so somewhere on
PYTHONPATH, then run this script.
"""

import math
import os
import tempfile

import stcnet_py

TINY = """
size = 16
train_videos = 2
train_length = 24
test_videos = 2
test_length = 40
anomaly_length = 10
layers = 1
hidden_channels = 4
kernel_size = 3
patch_factor = 2
context_len = 3
prediction_len = 3
disc_channels = 4,4
batch_size = 2
iterations = 2
"""


def main():
    assert stcnet_py.frame_level_auc([0.9, 0.1], [1, 0]) == 1.0
    assert stcnet_py.delta_p([30.0, 32.0, 28.0], [0, 0, 1]) == 3.0
    assert stcnet_py.normalize_scores([1.0, 3.0, 2.0]) == [0.0, 1.0, 0.5]
    assert math.isfinite(stcnet_py.psnr([0.5] * 4, [0.4] * 4))

    train, test = stcnet_py.synthetic_benchmark(TINY, seed=1)
    assert len(train) == 2 and len(test) == 2
    assert test[0].shape == (1, 16, 16)
    assert len(test[0]) == 40 and len(test[0].labels) == 40

    model = stcnet_py.Model(TINY, seed=1)
    trace = model.train(train)
    assert len(trace) == 2 and model.iteration == 2
    assert all(math.isfinite(step["L_G"]) for step in trace)

    scores = model.score(test[0], accumulation_offset=2)
    assert len(scores["anomaly"]) == 40
    assert min(scores["regular"]) == 0.0 and max(scores["regular"]) == 1.0

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.bin")
        model.save(path)
        again = stcnet_py.Model.load(path)
        assert again.score(test[0], accumulation_offset=2) == scores

    try:
        stcnet_py.frame_level_auc([0.1, 0.2], [1, 1])
    except ValueError:
        pass
    else:
        raise AssertionError("single-class labels must raise")
    print("stcnet_py smoke test passed")


if __name__ == "__main__":
    main()
