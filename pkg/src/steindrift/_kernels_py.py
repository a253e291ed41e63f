"""Numpy implementations of the Monte Carlo kernels."""
import numpy as np


def inverse_quadratic_prefix(eta, w, d, n_min):
    acc = np.cumsum((w * (eta + d)) ** 2, axis=1)[:, n_min - 1 :]
    with np.errstate(divide="ignore"):
        return 1.0 / acc


def l2_losses(resid, V, ET, wq):
    c = V @ ET.T
    return np.stack([(resid * resid) @ wq, ((resid + c) ** 2) @ wq, (c * c) @ wq], axis=1)
