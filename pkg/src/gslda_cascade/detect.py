"""Sliding-window detection and evaluation.

Scanning enumerates square windows over a geometric scale pyramid, runs the
cascade with early rejection (vectorized over window positions, bit-identical
to per-window evaluation), merges overlapping acceptances, and scores the
result against ground-truth boxes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .cascade import CascadeModel, node_margin
from .features import build_integral, eval_haar, scaled_rects


@dataclass
class DetectionWindow:
    x: int
    y: int
    side: int
    score: float
    stages_passed: int


@dataclass
class GroundTruthBox:
    image_id: str
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError("ground-truth box needs positive extent")


@dataclass
class ROCPoint:
    operating_point: str
    false_positives: int
    detection_rate: float


@dataclass
class ScanProfile:
    """Aggregable counters: total windows scanned and Haar evaluations."""

    windows_scanned: int = 0
    feature_evals: int = 0

    def merge(self, other: "ScanProfile") -> None:
        self.windows_scanned += other.windows_scanned
        self.feature_evals += other.feature_evals


def avg_features_per_window(profile: ScanProfile) -> float:
    if profile.windows_scanned == 0:
        raise ValueError("profile covers no scanned windows")
    return profile.feature_evals / profile.windows_scanned


def _round_half_up(v) -> int:
    return int(np.floor(v + 0.5))


def scan_image(model: CascadeModel, image, scale_factor: float = 1.2, step: float = 1.0,
               profile: ScanProfile | None = None, early_exit: bool = True) -> list[DetectionWindow]:
    """All windows the cascade accepts, over a scale pyramid.

    Window sides are base * scale_factor**s while they fit; the shift grows
    with the scale so scan density is scale-uniform.  Haar evaluation counts
    accumulate into `profile` when given.
    """
    return [w for w, _ in _scan_with_scales(model, image, scale_factor, step, profile, early_exit)]


def _scan_scale(model, table, px, py, side, scale, profile, early_exit):
    n = len(px)
    if profile is not None:
        profile.windows_scanned += n
    alive = np.ones(n, dtype=bool)
    scores = np.zeros(n)
    stages = np.zeros(n, dtype=int)
    rect_cache = {}
    evals = 0
    for node in model.nodes:
        idx = np.flatnonzero(alive) if early_exit else np.arange(n)
        if idx.size == 0:
            break
        gx = px[idx]
        gy = py[idx]
        margins = np.zeros(idx.size)
        for t, stump in enumerate(node.stumps):
            fid = stump.feature_id
            if fid not in rect_cache:
                rect_cache[fid] = scaled_rects(model.feature_pool[fid], scale)[:2]
            rects, area = rect_cache[fid]
            acc = np.zeros(idx.size, dtype=np.int64)
            for wgt, x0, y0, x1, y1 in rects:
                acc += wgt * (
                    table[gy + y1, gx + x1]
                    - table[gy + y0, gx + x1]
                    - table[gy + y1, gx + x0]
                    + table[gy + y0, gx + x0]
                )
            values = acc / area
            resp = np.where(values >= stump.threshold, 1.0, -1.0) * stump.polarity
            margins = margins + node.coefficients[t] * resp
        margins = margins + node.node_threshold
        evals += idx.size * len(node.stumps)
        ok = margins >= 0
        scores[idx] = margins
        stages[idx[ok & alive[idx]]] += 1
        alive[idx[~ok]] = False
    if profile is not None:
        profile.feature_evals += evals
    return [
        DetectionWindow(int(px[i]), int(py[i]), side, float(scores[i]), int(stages[i]))
        for i in np.flatnonzero(alive)
    ]


def overlap_ratio(ax, ay, aw, ah, bx, by, bw, bh) -> float:
    """Intersection over union of two axis-aligned boxes."""
    ix = max(0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def merge_detections(windows: list[DetectionWindow], min_neighbors: int = 2) -> list[DetectionWindow]:
    """Group windows by transitive >= 0.5 overlap; each group of at least
    min_neighbors members emits one corner-averaged window (max score)."""
    n = len(windows)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        wi = windows[i]
        for j in range(i + 1, n):
            wj = windows[j]
            if overlap_ratio(wi.x, wi.y, wi.side, wi.side, wj.x, wj.y, wj.side, wj.side) >= 0.5:
                parent[find(i)] = find(j)
    groups: dict[int, list[DetectionWindow]] = {}
    order: list[int] = []
    for i in range(n):
        root = find(i)
        if root not in groups:
            groups[root] = []
            order.append(root)
        groups[root].append(windows[i])
    out = []
    for root in order:
        members = groups[root]
        if len(members) < min_neighbors:
            continue
        out.append(
            DetectionWindow(
                x=_round_half_up(np.mean([m.x for m in members])),
                y=_round_half_up(np.mean([m.y for m in members])),
                side=_round_half_up(np.mean([m.side for m in members])),
                score=max(m.score for m in members),
                stages_passed=max(m.stages_passed for m in members),
            )
        )
    return out


@dataclass
class MatchResult:
    true_positives: int
    false_positives: int
    missed: int


def match_detections(detections, truths: list[GroundTruthBox]) -> MatchResult:
    """Greedy matching in descending score order.

    `detections` holds (image_id, DetectionWindow) pairs.  A detection claims
    the unmatched same-image truth of highest overlap when that overlap
    exceeds 0.5; every further detection of an already-claimed truth is a
    false positive.
    """
    order = sorted(range(len(detections)), key=lambda i: -detections[i][1].score)
    matched = [False] * len(truths)
    tp = fp = 0
    for i in order:
        image_id, win = detections[i]
        best_j, best_ov = -1, 0.5
        for j, truth in enumerate(truths):
            if matched[j] or truth.image_id != image_id:
                continue
            ov = overlap_ratio(win.x, win.y, win.side, win.side, truth.x, truth.y, truth.w, truth.h)
            if ov > best_ov:
                best_j, best_ov = j, ov
        if best_j >= 0:
            matched[best_j] = True
            tp += 1
        else:
            fp += 1
    return MatchResult(tp, fp, len(truths) - tp)


def _prefix(model: CascadeModel, depth: int) -> CascadeModel:
    return replace(model, nodes=model.nodes[:depth])


def _detect_all(model, images, scale_factor, step, min_neighbors, profile=None):
    detections = []
    for image_id, image in images:
        wins = scan_image(model, image, scale_factor, step, profile=profile)
        for win in merge_detections(wins, min_neighbors):
            detections.append((image_id, win))
    return detections


def roc_curve(model: CascadeModel, images, truths: list[GroundTruthBox], mode: str = "depth",
              scale_factor: float = 1.2, step: float = 1.0, min_neighbors: int = 2,
              n_thresholds: int = 10) -> list[ROCPoint]:
    """Operating-curve points, sorted by false positives ascending.

    `images` is a list of (image_id, pixel array); detection counts are
    post-merge.  Depth mode adds one cascade level at a time; threshold mode
    sweeps the final node's margin over its quantiles.
    """
    images = list(images)
    if not images or not truths:
        raise ValueError("empty test set")
    if not model.nodes:
        raise ValueError("model has no nodes")
    points = []
    if mode == "depth":
        for depth in range(1, len(model.nodes) + 1):
            sub = _prefix(model, depth)
            res = match_detections(
                _detect_all(sub, images, scale_factor, step, min_neighbors), truths
            )
            points.append(
                ROCPoint(f"depth={depth}", res.false_positives, res.true_positives / len(truths))
            )
    elif mode == "threshold":
        last = model.nodes[-1]
        prefix = _prefix(model, len(model.nodes) - 1)
        candidates = []  # (image_id, window, last-node margin)
        for image_id, image in images:
            ii = build_integral(image)
            for win, scale in _scan_with_scales(prefix, image, scale_factor, step):
                responses = np.array(
                    [
                        s.response(eval_haar(model.feature_pool[s.feature_id], ii, win.x, win.y, scale))
                        for s in last.stumps
                    ],
                    dtype=np.float64,
                )
                candidates.append((image_id, win, node_margin(last, responses)))
        margins = np.array([c[2] for c in candidates]) if candidates else np.zeros(0)
        taus = []
        if margins.size:
            taus = sorted(set(np.quantile(margins, np.linspace(0.0, 1.0, n_thresholds)).tolist()))
        taus.append(np.inf)
        for tau in taus:
            kept = [
                (cid, replace(win, score=m, stages_passed=win.stages_passed + 1))
                for cid, win, m in candidates
                if m >= tau
            ]
            merged = []
            for image_id, _ in images:
                wins = [w for cid, w in kept if cid == image_id]
                merged.extend((image_id, w) for w in merge_detections(wins, min_neighbors))
            res = match_detections(merged, truths)
            points.append(
                ROCPoint(f"threshold={tau:.6g}", res.false_positives, res.true_positives / len(truths))
            )
    else:
        raise ValueError("mode must be 'depth' or 'threshold'")
    points.sort(key=lambda p: (p.false_positives, -p.detection_rate))
    return points


def _scan_with_scales(model, image, scale_factor, step, profile=None, early_exit=True):
    """Scan pyramid yielding (accepted window, exact pyramid scale) pairs."""
    if scale_factor <= 1.0:
        raise ValueError("scale_factor must exceed 1")
    image = np.asarray(image)
    h, w = image.shape
    base = model.base_window
    if h < base or w < base:
        return
    table = build_integral(image).table
    s = 0
    while True:
        scale = scale_factor**s
        side = _round_half_up(base * scale)
        if side > min(h, w):
            break
        shift = max(1, _round_half_up(step * scale))
        xs = np.arange(0, w - side + 1, shift)
        ys = np.arange(0, h - side + 1, shift)
        px = np.repeat(xs[None, :], len(ys), axis=0).ravel()
        py = np.repeat(ys[:, None], len(xs), axis=1).ravel()
        for win in _scan_scale(model, table, px, py, side, scale, profile, early_exit):
            yield win, scale
        s += 1
