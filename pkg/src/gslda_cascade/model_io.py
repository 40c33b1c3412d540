"""File formats: model JSON, ground-truth and detection CSVs, ROC CSV.

Model files are schema-checked on load and written deterministically (sorted
keys, fixed separators); floats round-trip exactly through Python's
shortest-repr decimal serialization.
"""

from __future__ import annotations

import csv
import json
import os

from .cascade import CascadeModel, NodeClassifier
from .detect import DetectionWindow, GroundTruthBox, ROCPoint
from .features import HaarFeature, KINDS, PoolParams, build_pool
from .stumps import DecisionStump

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """The model file violates the schema."""


def model_to_dict(model: CascadeModel) -> dict:
    if model.pool_params is not None:
        pool = {
            "type": "enumerated",
            "base_window": model.pool_params.base_window,
            "stride": model.pool_params.stride,
            "min_size": model.pool_params.min_size,
            "subsample": model.pool_params.subsample,
        }
    elif model.feature_pool is not None:
        pool = {
            "type": "explicit",
            "features": [[f.kind, f.x, f.y, f.w, f.h] for f in model.feature_pool],
        }
    else:
        pool = {"type": "none"}
    return {
        "format_version": FORMAT_VERSION,
        "base_window": model.base_window,
        "f_target": model.f_target,
        "feature_pool": pool,
        "nodes": [
            {
                "stumps": [[s.feature_id, s.threshold, s.polarity] for s in n.stumps],
                "coefficients": [float(c) for c in n.coefficients],
                "node_threshold": n.node_threshold,
                "trained_by": n.trained_by,
                "goal_met": n.goal_met,
                "detection_rate": n.detection_rate,
                "false_positive_rate": n.false_positive_rate,
            }
            for n in model.nodes
        ],
        "stage_rates": [[d, f] for d, f in model.stage_rates],
        "cumulative": [[d, f] for d, f in model.cumulative],
        "metadata": model.metadata,
    }


def save_model(model: CascadeModel, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True, indent=1)
        fh.write("\n")


def _expect(cond: bool, message: str) -> None:
    if not cond:
        raise ModelFormatError(message)


def _field(payload: dict, name: str, kind, where: str):
    _expect(name in payload, f"{where}: missing field {name!r}")
    value = payload[name]
    _expect(isinstance(value, kind), f"{where}: field {name!r} must be {kind}")
    return value


def model_from_dict(payload: dict) -> CascadeModel:
    _expect(isinstance(payload, dict), "model file: top level must be an object")
    version = _field(payload, "format_version", int, "model file")
    _expect(version == FORMAT_VERSION, f"model file: unknown format_version {version}")
    base_window = _field(payload, "base_window", int, "model file")
    f_target = _field(payload, "f_target", (int, float), "model file")

    pool_payload = _field(payload, "feature_pool", dict, "model file")
    pool_type = _field(pool_payload, "type", str, "feature_pool")
    pool_params = None
    if pool_type == "enumerated":
        pool_params = PoolParams(
            base_window=_field(pool_payload, "base_window", int, "feature_pool"),
            stride=_field(pool_payload, "stride", int, "feature_pool"),
            min_size=_field(pool_payload, "min_size", int, "feature_pool"),
            subsample=_field(pool_payload, "subsample", int, "feature_pool"),
        )
        feature_pool = build_pool(pool_params)
    elif pool_type == "explicit":
        entries = _field(pool_payload, "features", list, "feature_pool")
        feature_pool = []
        for i, entry in enumerate(entries):
            _expect(
                isinstance(entry, list) and len(entry) == 5,
                f"feature_pool.features[{i}]: expected [kind, x, y, w, h]",
            )
            kind = entry[0]
            _expect(kind in KINDS, f"feature_pool.features[{i}]: unknown kind {kind!r}")
            feature_pool.append(HaarFeature(kind, *entry[1:], base_window=base_window))
    elif pool_type == "none":
        feature_pool = None
    else:
        raise ModelFormatError(f"feature_pool: unknown type {pool_type!r}")

    nodes_payload = _field(payload, "nodes", list, "model file")
    nodes = []
    for i, np_ in enumerate(nodes_payload):
        where = f"nodes[{i}]"
        _expect(isinstance(np_, dict), f"{where}: must be an object")
        stump_rows = _field(np_, "stumps", list, where)
        stumps = []
        for j, row in enumerate(stump_rows):
            _expect(
                isinstance(row, list) and len(row) == 3,
                f"{where}.stumps[{j}]: expected [feature_id, threshold, polarity]",
            )
            fid, thr, pol = row
            _expect(isinstance(fid, int), f"{where}.stumps[{j}]: feature_id must be an integer")
            _expect(pol in (-1, 1), f"{where}.stumps[{j}]: polarity must be -1 or +1")
            if feature_pool is not None:
                _expect(0 <= fid < len(feature_pool), f"{where}.stumps[{j}]: feature_id out of range")
            stumps.append(DecisionStump(fid, float(thr), int(pol)))
        coefficients = _field(np_, "coefficients", list, where)
        _expect(len(coefficients) == len(stumps), f"{where}: coefficients length mismatch")
        nodes.append(
            NodeClassifier(
                stumps=stumps,
                coefficients=[float(c) for c in coefficients],
                node_threshold=float(_field(np_, "node_threshold", (int, float), where)),
                trained_by=_field(np_, "trained_by", str, where),
                goal_met=_field(np_, "goal_met", bool, where),
                detection_rate=float(_field(np_, "detection_rate", (int, float), where)),
                false_positive_rate=float(_field(np_, "false_positive_rate", (int, float), where)),
            )
        )
    stage_rates = [tuple(r) for r in _field(payload, "stage_rates", list, "model file")]
    cumulative = [tuple(r) for r in _field(payload, "cumulative", list, "model file")]
    metadata = _field(payload, "metadata", dict, "model file")
    return CascadeModel(
        nodes=nodes,
        stage_rates=stage_rates,
        cumulative=cumulative,
        feature_pool=feature_pool,
        f_target=float(f_target),
        pool_params=pool_params,
        base_window=base_window,
        metadata=metadata,
    )


def load_model(path: str) -> CascadeModel:
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model file {path}: invalid JSON ({exc})") from exc
    return model_from_dict(payload)


def write_stage_log(entries: list[dict], path: str) -> None:
    with open(path, "w") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True))
            fh.write("\n")


def read_ground_truth(path: str) -> list[GroundTruthBox]:
    boxes = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"image_id", "x", "y", "w", "h"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: ground truth needs columns image_id,x,y,w,h")
        for row in reader:
            boxes.append(
                GroundTruthBox(row["image_id"], int(row["x"]), int(row["y"]), int(row["w"]), int(row["h"]))
            )
    return boxes


def write_detections_csv(rows: list[tuple[str, DetectionWindow]], path) -> None:
    close = False
    if isinstance(path, (str, os.PathLike)):
        fh = open(path, "w", newline="")
        close = True
    else:
        fh = path
    try:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "x", "y", "side", "score"])
        for image_id, win in rows:
            writer.writerow([image_id, win.x, win.y, win.side, repr(win.score)])
    finally:
        if close:
            fh.close()


def read_detections_csv(path) -> list[tuple[str, DetectionWindow]]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(
                (
                    row["image_id"],
                    DetectionWindow(int(row["x"]), int(row["y"]), int(row["side"]), float(row["score"]), 0),
                )
            )
    return out


def write_roc_csv(points: list[ROCPoint], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["operating_point", "false_positives", "detection_rate"])
        for p in points:
            writer.writerow([p.operating_point, p.false_positives, repr(p.detection_rate)])
