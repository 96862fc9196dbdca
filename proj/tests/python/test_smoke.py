import json
import math

import numpy as np
import pytest

import lstm_cctc


def random_log_probs(rng, steps):
    p = rng.uniform(0.05, 0.95, size=steps)
    return np.log(np.stack([1.0 - p, p], axis=1))


def test_serialize_round_trip():
    rng = np.random.default_rng(0)
    grid = rng.normal(size=(5, 5, 3))
    for order in lstm_cctc.SCAN_ORDERS:
        frames = lstm_cctc.serialize(grid, order, 2)
        assert frames.shape == (25, 3)
        np.testing.assert_array_equal(lstm_cctc.deserialize(frames, 5, order), grid)


def test_row_major_raster():
    grid = np.arange(8, dtype=float).reshape(2, 2, 2)
    frames = lstm_cctc.serialize(grid, "row_major_forward")
    np.testing.assert_array_equal(frames[:, 0], [0, 2, 4, 6])
    assert lstm_cctc.index_to_coord("col_major_forward", 1, 2) == (1, 0)
    assert lstm_cctc.coord_to_index("row_major_reverse", 0, 0, 2) == 3


def test_loss_matches_brute_force():
    rng = np.random.default_rng(1)
    for steps in range(1, 7):
        for count in range(0, 3):
            lp = random_log_probs(rng, steps)
            if steps < 2 * count - 1:
                continue
            loss, grad = lstm_cctc.cctc_loss(lp, count)
            assert grad.shape == (steps, 2)
            assert math.isclose(loss, -lstm_cctc.brute_force_log_likelihood(lp, count), abs_tol=1e-9)


def test_infeasible_count_raises():
    lp = random_log_probs(np.random.default_rng(2), 2)
    with pytest.raises(lstm_cctc.Error):
        lstm_cctc.cctc_loss(lp, 2)


def test_decoders():
    p = np.array([0.1, 0.9, 0.9, 0.2, 0.8, 0.5])
    lp = np.log(np.stack([1.0 - p, p], axis=1))
    count, runs = lstm_cctc.decode_best_path(lp)
    assert count == 2
    assert runs == [(1, 2), (4, 4)]
    assert len(lstm_cctc.decode_constrained(lp, 1)) == 1


def test_proposals_and_iou():
    boxes = lstm_cctc.generate_proposals(4, 4, 10)
    assert boxes
    assert all(0 <= x0 <= x1 < 10 and 0 <= y0 <= y1 < 10 for x0, y0, x1, y1 in boxes)
    assert math.isclose(lstm_cctc.iou((0, 0, 1, 1), (1, 1, 2, 2)), 1.0 / 7.0)
    curve = lstm_cctc.recall_curve([[(0, 0, 1, 1)]], [[(0, 0, 1, 1)]])
    assert [r for _, r in curve] == [1.0] * 5
    assert lstm_cctc.recall_curve([[]], [[]]) is None


def test_scene_train_propose(tmp_path):
    spec = {"n": 5, "k": 2, "objectSideRange": [1, 2], "signalChannels": [0]}
    scenes = [lstm_cctc.generate_scene(spec, i) for i in range(4)]
    assert scenes[0] == lstm_cctc.generate_scene(spec, 0)
    assert all(s["count"] == len(s["boxes"]) for s in scenes)
    data = tmp_path / "train.jsonl"
    data.write_text("".join(json.dumps(s) + "\n" for s in scenes))
    ckpt = tmp_path / "ckpt.json"
    log = lstm_cctc.train(data, ckpt, epochs=2, hidden_size=4, seed=3)
    assert log.splitlines()[0].startswith("epoch,loss,lr,gradNorm")
    assert len(log.splitlines()) == 3
    rec = lstm_cctc.propose(ckpt, scenes[0])
    assert rec["image"] == scenes[0]["id"]
    assert isinstance(rec["boxes"], list)


def test_validation_error_names_field():
    with pytest.raises(lstm_cctc.ValidationError, match="objectCountRange"):
        lstm_cctc.generate_scene({"objectCountRange": [5, 3]})
