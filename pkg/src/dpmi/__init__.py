"""Differentially private training under membership inference.

Trains small dense networks with local (randomized response, image
pixelation, edge randomization) or central (clipped noisy gradients with
Renyi-DP accounting) differential privacy, attacks them with black-box
shadow-model and white-box feature-based membership inference, and reports
test accuracy, attack ROC/AUC and the bounded trade-off ratio across
privacy-parameter sweeps.
"""

__version__ = "0.1.0"
