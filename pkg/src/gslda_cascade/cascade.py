"""Node and cascade training.

A node is a weighted sum of decision stumps plus a threshold; a window is a
target only if every node accepts it.  Five training methods share the node
surface: AdaBoost and AsymBoost select stumps by minimum weighted error,
GSLDA selects by maximum class separation on a once-built stump table, and
BGSLDA re-trains the table under boosting weights each round, prunes weak
candidates, selects by class separation and reweights.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from . import boosting, scatter, stumps
from .features import FeatureExtractor, HaarFeature, IntegralImage, PoolParams, build_integral, eval_haar

METHODS = ("adaboost", "asymboost", "gslda", "bgslda1", "bgslda2")

#: Amortization span for the asymmetric multiplier when a node has no
#: predefined round count.
DEFAULT_ASYM_ROUNDS = 32


class BootstrapExhaustedError(RuntimeError):
    """The reservoir no longer yields enough false positives to continue."""


@dataclass
class NodeGoal:
    """Per-stage rate goals: detection at least d_min, false positives at
    most f_max, with an optional stump cap."""

    d_min: float = 0.995
    f_max: float = 0.5
    max_stumps: int | None = None

    def __post_init__(self):
        if not 0 < self.d_min <= 1:
            raise ValueError("d_min must be in (0, 1]")
        if not 0 < self.f_max < 1:
            raise ValueError("f_max must be in (0, 1)")
        if self.max_stumps is not None and self.max_stumps < 1:
            raise ValueError("max_stumps must be at least 1")


@dataclass
class NodeClassifier:
    """Linear stump combination: accept iff sum_t w_t h_t(x) + threshold >= 0."""

    stumps: list[stumps.DecisionStump]
    coefficients: np.ndarray
    node_threshold: float
    trained_by: str
    goal_met: bool = True
    detection_rate: float = 1.0
    false_positive_rate: float = 1.0

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if len(self.stumps) != len(self.coefficients) or len(self.stumps) < 1:
            raise ValueError("need one coefficient per stump, at least one stump")


def node_margin(node: NodeClassifier, responses) -> np.ndarray | float:
    """sum_t w_t h_t + threshold, accumulated in fixed stump order.

    responses is the per-stump +/-1 output, either a vector (one sample) or a
    (T, n) matrix.  The fixed left-to-right accumulation makes scalar and
    batched evaluation bit-identical.
    """
    responses = np.asarray(responses, dtype=np.float64)
    if responses.shape[0] != len(node.stumps):
        raise ValueError("responses are not aligned with the node's stumps")
    acc = np.zeros(responses.shape[1:])
    for t in range(responses.shape[0]):
        acc = acc + node.coefficients[t] * responses[t]
    acc = acc + node.node_threshold
    return float(acc) if acc.ndim == 0 else acc


def node_decide(node: NodeClassifier, feature_responses) -> int:
    """+1 iff the margin is >= 0 (boundary counts as accept)."""
    return 1 if node_margin(node, feature_responses) >= 0 else -1


def _threshold_for_scores(scores: np.ndarray, d_min: float) -> float:
    """Smallest additive threshold keeping at least d_min of the scores
    nonnegative: minus the d_min quantile of the score distribution."""
    n = len(scores)
    if n == 0:
        raise ValueError("need at least one validation positive")
    m = int(np.ceil(d_min * n - 1e-9))
    m = min(max(m, 1), n)
    ordered = np.sort(scores)[::-1]
    return -float(ordered[m - 1])


def tune_node_threshold(node: NodeClassifier, validation_positives, d_min: float) -> float:
    """Threshold passing at least a d_min fraction of validation positives.

    validation_positives holds the per-stump +/-1 responses of the positives,
    shaped (T, P) aligned with node.stumps.
    """
    responses = np.asarray(validation_positives, dtype=np.float64)
    scores = np.zeros(responses.shape[1])
    for t in range(responses.shape[0]):
        scores = scores + node.coefficients[t] * responses[t]
    return _threshold_for_scores(scores, d_min)


class _NodeFit:
    """Shared bookkeeping while a node grows stump by stump."""

    def __init__(self, values, labels, validation_mask, goal, method):
        self.values = values
        self.labels = labels
        self.goal = goal
        self.method = method
        if validation_mask is None:
            # Tiny-pool fallback: train on everything, validate thresholds on
            # the training positives.
            self.train_idx = np.arange(values.shape[1])
            self.val_idx = np.flatnonzero(labels > 0)
        else:
            validation_mask = np.asarray(validation_mask, dtype=bool)
            if np.any(validation_mask & (labels < 0)):
                raise ValueError("validation mask may only select positives")
            self.train_idx = np.flatnonzero(~validation_mask)
            self.val_idx = np.flatnonzero(validation_mask)
            if self.val_idx.size == 0:
                self.val_idx = np.flatnonzero(labels > 0)
        self.train_labels = labels[self.train_idx]
        if not (self.train_labels > 0).any() or not (self.train_labels < 0).any():
            raise ValueError("training split needs both classes")
        self.neg_cols = np.flatnonzero(self.train_labels < 0)
        self.chosen: list[stumps.DecisionStump] = []
        self.train_rows: list[np.ndarray] = []  # stump outputs on the train split
        self.val_rows: list[np.ndarray] = []  # stump outputs on validation positives
        self.coefficients = np.zeros(0)
        self.threshold = 0.0
        self.d = 1.0
        self.f = 1.0

    def add(self, stump: stumps.DecisionStump, train_row: np.ndarray) -> None:
        self.chosen.append(stump)
        self.train_rows.append(train_row)
        self.val_rows.append(stump.responses(self.values[stump.feature_id, self.val_idx]))

    def retune(self, coefficients) -> None:
        """Recompute threshold (validation d_min quantile) and the rates."""
        self.coefficients = np.asarray(coefficients, dtype=np.float64)
        val_scores = np.zeros(len(self.val_idx))
        neg_scores = np.zeros(len(self.neg_cols))
        for t, c in enumerate(self.coefficients):
            val_scores = val_scores + c * self.val_rows[t]
            neg_scores = neg_scores + c * self.train_rows[t][self.neg_cols]
        self.threshold = _threshold_for_scores(val_scores, self.goal.d_min)
        self.d = float(np.mean(val_scores + self.threshold >= 0))
        self.f = float(np.mean(neg_scores + self.threshold >= 0))

    def snapshot(self):
        return (list(self.chosen), list(self.train_rows), list(self.val_rows),
                self.coefficients.copy(), self.threshold, self.d, self.f)

    def restore(self, snap):
        self.chosen, self.train_rows, self.val_rows, self.coefficients, self.threshold, self.d, self.f = (
            list(snap[0]), list(snap[1]), list(snap[2]), snap[3].copy(), snap[4], snap[5], snap[6]
        )

    def build(self, goal_met: bool) -> NodeClassifier:
        return NodeClassifier(
            stumps=list(self.chosen),
            coefficients=self.coefficients.copy(),
            node_threshold=self.threshold,
            trained_by=self.method,
            goal_met=goal_met,
            detection_rate=self.d,
            false_positive_rate=self.f,
        )


def train_node(
    values: np.ndarray,
    labels: np.ndarray,
    goal: NodeGoal,
    method: str = "gslda",
    scatter_cfg: scatter.ScatterConfig | None = None,
    boost_cfg: boosting.BoostingConfig | None = None,
    validation_mask=None,
    fixed_rounds: int | None = None,
    asym_rounds: int | None = None,
) -> NodeClassifier:
    """Grow one node until its false-positive goal is met.

    values is the (M, N) feature-value matrix of the node's pool, labels the
    +/-1 sample classes.  validation_mask marks held-out positives used only
    for threshold tuning; when None the training positives double as
    validation.  fixed_rounds trains exactly that many stumps regardless of
    the rate goals (predefined-size mode).
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels)
    fit = _NodeFit(values, labels, validation_mask, goal, method)
    boost_cfg = boost_cfg or boosting.BoostingConfig()
    cap = fixed_rounds or goal.max_stumps or values.shape[0]
    if scatter_cfg is None:
        scfg = scatter.ScatterConfig(max_features=cap)
    else:
        scfg = dataclasses.replace(scatter_cfg, max_features=cap)

    trainer = stumps.StumpTrainer(values[:, fit.train_idx], fit.train_labels)
    weights = boosting.init_weights(fit.train_labels)
    amort = asym_rounds or fixed_rounds or goal.max_stumps or DEFAULT_ASYM_ROUNDS

    if method == "gslda":
        node = _grow_gslda(fit, trainer, weights, scfg, cap, fixed_rounds)
    elif method in ("bgslda1", "bgslda2"):
        node = _grow_bgslda(fit, trainer, weights, scfg, boost_cfg, cap, fixed_rounds,
                            method, amort)
    else:
        node = _grow_boosted(fit, trainer, weights, boost_cfg, cap, fixed_rounds,
                             method, amort)
    return node


def _goal_reached(fit, fixed_rounds):
    if fixed_rounds is not None:
        return len(fit.chosen) >= fixed_rounds
    return fit.f <= fit.goal.f_max


def _grow_boosted(fit, trainer, weights, boost_cfg, cap, fixed_rounds, method, amort):
    coeffs: list[float] = []
    while True:
        table = trainer.train_all(weights)
        order = np.argsort(table.errors, kind="stable")
        j = int(order[0])
        a = boosting.alpha(float(table.errors[j]), boost_cfg.error_floor)
        fit.add(table.stumps[j], table.responses[j])
        coeffs.append(a)
        if method == "asymboost":
            weights = boosting.reweight_asymboost(
                weights, table.responses[j], fit.train_labels, a, boost_cfg.asym_k, rounds=amort
            )
        else:
            weights = boosting.reweight_adaboost(weights, table.responses[j], fit.train_labels, a)
        fit.retune(np.array(coeffs))
        if _goal_reached(fit, fixed_rounds):
            return fit.build(goal_met=True)
        if len(fit.chosen) >= cap:
            return fit.build(goal_met=fit.f <= fit.goal.f_max)


def _grow_gslda(fit, trainer, weights, scfg, cap, fixed_rounds):
    # Stumps are trained once (class-balanced weights); selection then walks
    # the fixed response table by maximum class separation.
    table = trainer.train_all(weights)
    rm = scatter.ResponseMatrix(table.responses.T, fit.train_labels, strict=False)
    sel = scatter.GreedySelector(rm, scfg)
    pre_elimination = None
    while True:
        picked = sel.step()
        if picked is None:
            return fit.build(goal_met=fit.f <= fit.goal.f_max)
        fit.add(table.stumps[picked], table.responses[picked])
        fit.retune(scatter.lda_weights(sel.state()))
        if _goal_reached(fit, fixed_rounds):
            if scfg.dual_pass and len(sel.selected) >= 2:
                snap = fit.snapshot()
                removed = set(sel.eliminate())
                if removed:
                    keep = [t for t, s in enumerate(fit.chosen) if s.feature_id not in removed]
                    fit.chosen = [fit.chosen[t] for t in keep]
                    fit.train_rows = [fit.train_rows[t] for t in keep]
                    fit.val_rows = [fit.val_rows[t] for t in keep]
                    fit.retune(scatter.lda_weights(sel.state()))
                    if fixed_rounds is None and fit.f > fit.goal.f_max:
                        fit.restore(snap)  # elimination broke the goal; keep the met node
            return fit.build(goal_met=True)
        if len(fit.chosen) >= cap:
            return fit.build(goal_met=fit.f <= fit.goal.f_max)


def _grow_bgslda(fit, trainer, weights, scfg, boost_cfg, cap, fixed_rounds, method, amort):
    while True:
        table = trainer.train_all(weights)
        survivors, _ = boosting.prune_stumps(table, weights, boost_cfg)
        chosen_ids = {s.feature_id for s in fit.chosen}
        allowed = [int(j) for j in survivors if int(j) not in chosen_ids]
        if not allowed:
            widened = boosting.BoostingConfig(
                scheme=boost_cfg.scheme,
                asym_k=boost_cfg.asym_k,
                prune_epsilon=2.0 * boost_cfg.prune_epsilon,
                error_floor=boost_cfg.error_floor,
            )
            survivors, _ = boosting.prune_stumps(table, weights, widened)
            allowed = [int(j) for j in survivors if int(j) not in chosen_ids]
        if not allowed:
            allowed = [
                int(j) for j in np.argsort(table.errors, kind="stable") if int(j) not in chosen_ids
            ][:1]
        if not allowed:
            return fit.build(goal_met=fit.f <= fit.goal.f_max)

        k = len(fit.chosen)
        stacked = np.vstack(fit.train_rows + [table.responses]) if k else table.responses
        rm = scatter.ResponseMatrix(stacked.T, fit.train_labels, strict=False)
        round_cfg = scatter.ScatterConfig(
            max_features=k + 1, gamma=scfg.gamma, ridge=scfg.ridge,
            dual_pass=False, elim_fraction=scfg.elim_fraction,
        )
        sel = scatter.GreedySelector(rm, round_cfg, weights=weights)
        if k:
            sel.selected = list(range(k))
            sel._rows = sel.acc.cross(sel.selected)
            sel._refresh()
            sel._recompute_eig()
        picked = sel.step(allowed=[k + j for j in allowed])
        if picked is None:
            # every surviving candidate is redundant with the chosen stumps
            return fit.build(goal_met=fit.f <= fit.goal.f_max)
        j = picked - k
        a = boosting.alpha(float(table.errors[j]), boost_cfg.error_floor)
        fit.add(table.stumps[j], table.responses[j])
        fit.retune(scatter.lda_weights(sel.state()))
        if method == "bgslda2":
            weights = boosting.reweight_asymboost(
                weights, table.responses[j], fit.train_labels, a, boost_cfg.asym_k, rounds=amort
            )
        else:
            weights = boosting.reweight_adaboost(weights, table.responses[j], fit.train_labels, a)
        if _goal_reached(fit, fixed_rounds):
            return fit.build(goal_met=True)
        if len(fit.chosen) >= cap:
            return fit.build(goal_met=fit.f <= fit.goal.f_max)


@dataclass
class TrainingPool:
    """Patch-level training material for one cascade run."""

    positives: np.ndarray  # (P, H, W) base-window patches
    negatives: np.ndarray  # (Q, H, W) current negative patches
    negative_reservoir: list[np.ndarray] = field(default_factory=list)
    validation_split: float = 0.2

    def __post_init__(self):
        if len(self.positives) == 0:
            raise ValueError("positive set is empty")
        if not 0 <= self.validation_split < 1:
            raise ValueError("validation_split must be in [0, 1)")


@dataclass
class CascadeModel:
    """Ordered node list with per-stage rate bookkeeping."""

    nodes: list[NodeClassifier]
    stage_rates: list[tuple[float, float]]
    cumulative: list[tuple[float, float]]
    feature_pool: list[HaarFeature] | None
    f_target: float
    pool_params: PoolParams | None = None
    base_window: int = 24
    metadata: dict = field(default_factory=dict)
    stage_log: list = field(default_factory=list)

    def decide_window(self, ii: IntegralImage, offset_x: int = 0, offset_y: int = 0,
                      scale: float = 1.0, early_exit: bool = True):
        """Run the cascade on one window.

        Returns (accepted, stages_passed, score, feature_evals); score is the
        margin of the last node evaluated.
        """
        accepted = True
        stages = 0
        score = 0.0
        evals = 0
        for node in self.nodes:
            if not accepted and early_exit:
                break
            responses = np.array([
                s.response(eval_haar(self.feature_pool[s.feature_id], ii, offset_x, offset_y, scale))
                for s in node.stumps
            ], dtype=np.float64)
            evals += len(node.stumps)
            score = node_margin(node, responses)
            if score >= 0 and accepted:
                stages += 1
            else:
                accepted = False
        return accepted, stages, score, evals

    def decide_patch(self, patch) -> bool:
        ii = build_integral(patch)
        accepted, _, _, _ = self.decide_window(ii)
        return accepted


def bootstrap_negatives(model: CascadeModel, reservoir, count: int, seed: int = 0,
                        stride: int = 4, min_required: int | None = None) -> np.ndarray:
    """Collect windows from the reservoir that the current cascade accepts.

    Candidate windows (base-window size, scanned at `stride`) are visited in a
    seeded random order; raises BootstrapExhaustedError when fewer than the
    configured minimum are found (default: 5% of the request, at least one).
    """
    if len(reservoir) == 0:
        raise ValueError("empty negative reservoir")
    if min_required is None:
        min_required = max(1, count // 20)
    bw = model.base_window
    slots = []
    for idx, image in enumerate(reservoir):
        h, w = np.asarray(image).shape
        for y in range(0, h - bw + 1, stride):
            for x in range(0, w - bw + 1, stride):
                slots.append((idx, x, y))
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(slots))
    tables = {}
    found = []
    for slot in order:
        idx, x, y = slots[slot]
        if idx not in tables:
            tables[idx] = build_integral(reservoir[idx])
        accepted, _, _, _ = model.decide_window(tables[idx], x, y)
        if accepted:
            found.append(np.asarray(reservoir[idx])[y : y + bw, x : x + bw])
            if len(found) >= count:
                break
    if len(found) < min(min_required, count):
        raise BootstrapExhaustedError("bootstrap exhausted")
    return np.stack(found)


def train_cascade(
    pool: TrainingPool,
    goal: NodeGoal,
    f_target: float,
    method: str,
    feature_pool: list[HaarFeature],
    scatter_cfg: scatter.ScatterConfig | None = None,
    boost_cfg: boosting.BoostingConfig | None = None,
    seed: int = 0,
    bootstrap_stride: int = 4,
    pool_params: PoolParams | None = None,
    max_stages: int = 64,
) -> CascadeModel:
    """Stack nodes until the cumulative false-positive rate reaches f_target.

    After each stage the correctly rejected negatives leave the pool and the
    reservoir is scanned for fresh false positives; training also stops when a
    node misses its goal or the reservoir runs dry.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if not 0 <= f_target <= 1:
        raise ValueError("f_target must be in [0, 1]")
    base_window = pool.positives.shape[1]
    extractor = FeatureExtractor(feature_pool)
    rng = np.random.default_rng(seed)

    # Fixed validation split of the positives for threshold tuning.
    n_pos = len(pool.positives)
    n_val = int(pool.validation_split * n_pos)
    perm = rng.permutation(n_pos)
    val_set = set(perm[:n_val].tolist()) if n_val >= 1 else set()

    pos_values = extractor.extract(pool.positives)
    negatives = np.asarray(pool.negatives)
    neg_values = extractor.extract(negatives) if len(negatives) else np.zeros((len(feature_pool), 0))
    target_negatives = len(negatives)

    model = CascadeModel(
        nodes=[], stage_rates=[], cumulative=[], feature_pool=feature_pool,
        f_target=f_target, pool_params=pool_params, base_window=base_window,
        metadata={"method": method, "seed": seed, "d_min": goal.d_min, "f_max": goal.f_max},
    )
    d_cum, f_cum = 1.0, 1.0
    stage = 0
    while f_target < f_cum and stage < max_stages:
        if neg_values.shape[1] == 0:
            break
        stage += 1
        started = time.perf_counter()
        values = np.hstack([pos_values, neg_values])
        labels = np.concatenate([np.ones(n_pos, dtype=int), -np.ones(neg_values.shape[1], dtype=int)])
        validation_mask = np.zeros(values.shape[1], dtype=bool)
        for i in val_set:
            validation_mask[i] = True
        node = train_node(
            values, labels, goal, method,
            scatter_cfg=scatter_cfg, boost_cfg=boost_cfg,
            validation_mask=validation_mask if val_set else None,
        )
        model.nodes.append(node)
        d_cum *= node.detection_rate
        f_cum *= node.false_positive_rate
        model.stage_rates.append((node.detection_rate, node.false_positive_rate))
        model.cumulative.append((d_cum, f_cum))
        model.stage_log.append({
            "stage": stage,
            "n_stumps": len(node.stumps),
            "d": node.detection_rate,
            "f": node.false_positive_rate,
            "D": d_cum,
            "F": f_cum,
            "goal_met": node.goal_met,
            "wall_time_s": time.perf_counter() - started,
        })
        if not node.goal_met:
            break
        if f_cum <= f_target:
            break
        # Keep only the negatives the new node still accepts (false positives).
        neg_resp = np.vstack([s.responses(neg_values[s.feature_id]) for s in node.stumps])
        margins = node_margin(node, neg_resp)
        keep = margins >= 0
        negatives = negatives[keep]
        neg_values = neg_values[:, keep]
        needed = target_negatives - len(negatives)
        if needed > 0:
            try:
                fresh = bootstrap_negatives(
                    model, pool.negative_reservoir, needed,
                    seed=int(rng.integers(2**31)), stride=bootstrap_stride,
                )
            except (BootstrapExhaustedError, ValueError):
                break
            negatives = np.concatenate([negatives, fresh]) if len(negatives) else fresh
            neg_values = np.hstack([neg_values, extractor.extract(fresh)])
    return model
