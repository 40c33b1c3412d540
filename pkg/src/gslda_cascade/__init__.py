"""Training and evaluation toolkit for cascaded visual object detectors.

Node classifiers are built by greedy sparse linear discriminant analysis
(GSLDA) or its boosting-reweighted variant (BGSLDA), with AdaBoost and
AsymBoost as baselines.
"""

__version__ = "0.1.0"
