"""Sample-weight machinery for boosting rounds.

Weights form a normalized distribution over training samples.  They are plain
numpy arrays; every operation here returns a fresh normalized array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stumps import StumpTable

SCHEMES = ("adaboost", "asymboost")


@dataclass
class BoostingConfig:
    scheme: str = "adaboost"
    asym_k: float = 2.0
    prune_epsilon: float = 0.1
    error_floor: float = 1e-8

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.asym_k <= 0:
            raise ValueError("asym_k must be positive")
        if self.prune_epsilon < 0:
            raise ValueError("prune_epsilon must be nonnegative")
        if not 0 < self.error_floor < 0.5:
            raise ValueError("error_floor must be in (0, 0.5)")


@dataclass
class EdgeStats:
    """Best edge over a stump pool and the error bound it implies.

    beta_k = max_t sum_i u_i y_i h_t(x_i); e_k = (1 - beta_k) / 2.
    """

    beta_k: float
    e_k: float


def init_weights(labels) -> np.ndarray:
    """Class-balanced start: each positive gets 0.5/N_p, each negative 0.5/N_n."""
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels > 0))
    n_neg = int(np.sum(labels < 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes need at least one sample")
    u = np.where(labels > 0, 0.5 / n_pos, 0.5 / n_neg)
    return u


def alpha(e_t: float, error_floor: float = 1e-8) -> float:
    """Vote coefficient log((1 - e) / e), with e clamped away from 0 and 1."""
    e = min(max(e_t, error_floor), 1.0 - error_floor)
    return float(np.log((1.0 - e) / e))


def _renormalize(u: np.ndarray) -> np.ndarray:
    z = float(u.sum())
    if z <= 0:
        raise ValueError("zero normalizer in reweighting")
    return u / z


def reweight_adaboost(w, responses, labels, a: float) -> np.ndarray:
    """One AdaBoost round: u <- u * exp(-(a/2) y h) / Z.

    `a` is the vote coefficient log((1-e)/e); the half exponent makes this the
    classic multiply-by-sqrt(e/(1-e)) update, after which the stump just
    selected has weighted error exactly 1/2.
    """
    w = np.asarray(w, dtype=np.float64)
    yh = np.asarray(labels, dtype=np.float64) * np.asarray(responses, dtype=np.float64)
    return _renormalize(w * np.exp(-0.5 * a * yh))


def reweight_asymboost(w, responses, labels, a: float, k: float, rounds: int = 1) -> np.ndarray:
    """AdaBoost update with an extra class-asymmetry factor exp(y log sqrt(k)).

    rounds=1 applies the full multiplier at once (positive/negative ratio k);
    rounds=n amortizes it as exp((1/n) y log sqrt(k)) per round, for use when
    a node is trained over n boosting rounds.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    w = np.asarray(w, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    yh = y * np.asarray(responses, dtype=np.float64)
    asym = np.exp(y * (np.log(np.sqrt(k)) / rounds))
    return _renormalize(w * np.exp(-0.5 * a * yh) * asym)


def prune_stumps(table: StumpTable, w, cfg: BoostingConfig):
    """Keep stumps whose weighted error is within epsilon of the best bound.

    Computes beta_k as the best edge over the pool, e_k = (1 - beta_k)/2, and
    returns (indices with error <= e_k + epsilon, EdgeStats).  The stump
    attaining beta_k always survives.
    """
    if len(table) == 0:
        raise ValueError("empty stump table")
    w = np.asarray(w, dtype=np.float64)
    edges = table.responses.astype(np.float64) @ (w * table.labels)
    best = int(np.argmax(edges))
    beta_k = float(edges[best])
    e_k = 0.5 - 0.5 * beta_k
    # error <= e_k + eps is edge >= beta_k - 2 eps; comparing within the one
    # edges vector keeps exact ties (eps = 0) stable against rounding.
    keep = edges >= beta_k - 2.0 * cfg.prune_epsilon
    keep[best] = True
    return np.flatnonzero(keep), EdgeStats(beta_k, e_k)
