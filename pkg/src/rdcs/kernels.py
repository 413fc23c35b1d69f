"""Kernel functions on [-1, 1].

All three kernels are nonnegative, symmetric, unimodal densities supported
on [-1, 1].  Window membership follows the kernel's own zero set: the
triangular and Epanechnikov kernels vanish at |t| = 1, so a point at
distance exactly h from the cutoff gets zero weight; the uniform kernel is
positive on the closed interval, so |x| <= h is in-window.
"""

import numpy as np

KERNELS = ("triangular", "epanechnikov", "uniform")


def kernel_value(name: str, t):
    t = np.asarray(t, dtype=float)
    if name == "triangular":
        return np.maximum(0.0, 1.0 - np.abs(t))
    if name == "epanechnikov":
        return np.maximum(0.0, 0.75 * (1.0 - t * t))
    if name == "uniform":
        return np.where(np.abs(t) <= 1.0, 0.5, 0.0)
    raise ValueError(f"unknown kernel {name!r}; expected one of {KERNELS}")
