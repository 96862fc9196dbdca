"""Count-based region proposals from four-direction LSTMs trained with a CCTC loss."""

import json

from . import _core
from ._core import (
    Error,
    ValidationError,
    brute_force_log_likelihood,
    cctc_loss,
    coord_to_index,
    decode_best_path,
    decode_constrained,
    deserialize,
    generate_proposals,
    index_to_coord,
    iou,
    recall_curve,
    serialize,
)

SCAN_ORDERS = ("row_major_forward", "row_major_reverse", "col_major_forward", "col_major_reverse")


def generate_scene(spec=None, index=0):
    """Synthetic scene as a dict with keys id, grid, boxes and count."""
    return json.loads(_core.generate_scene(json.dumps(spec or {}), index))


def train(dataset, checkpoint, **config):
    """Train on a JSON-lines dataset; keyword arguments are TrainConfig fields. Returns the CSV log."""
    return _core.train(str(dataset), json.dumps(config), str(checkpoint))


def propose(checkpoint, scene, decode="best_path"):
    """Proposal record {"image", "scale", "boxes"} for one scene dict."""
    return json.loads(_core.propose(str(checkpoint), json.dumps(scene), decode))


__all__ = [
    "Error",
    "SCAN_ORDERS",
    "ValidationError",
    "brute_force_log_likelihood",
    "cctc_loss",
    "coord_to_index",
    "decode_best_path",
    "decode_constrained",
    "deserialize",
    "generate_proposals",
    "generate_scene",
    "index_to_coord",
    "iou",
    "propose",
    "recall_curve",
    "serialize",
    "train",
]
