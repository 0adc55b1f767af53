"""Truncated Taylor arithmetic.

A jet of depth D is an array of shape (D+1, ...) holding f^(k)(x)/k! for
k = 0..D at a batch of points.  Products are Cauchy convolutions; the
recurrences below are the standard ones for reciprocal, sqrt and log.
"""

import numpy as np


def const(c, like: np.ndarray) -> np.ndarray:
    out = np.zeros_like(like, dtype=float)
    out[0] = c
    return out


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    D = min(len(a), len(b))
    out = np.zeros((D,) + a.shape[1:])
    for k in range(D):
        for i in range(k + 1):
            out[k] += a[i] * b[k - i]
    return out


def recip(a: np.ndarray) -> np.ndarray:
    r = np.zeros_like(a, dtype=float)
    r[0] = 1.0 / a[0]
    for k in range(1, len(a)):
        s = np.zeros_like(a[0], dtype=float)
        for i in range(1, k + 1):
            s += a[i] * r[k - i]
        r[k] = -s / a[0]
    return r


def div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    D = min(len(a), len(b))
    return mul(a[:D], recip(b[:D]))


def sqrt(a: np.ndarray) -> np.ndarray:
    s = np.zeros_like(a, dtype=float)
    s[0] = np.sqrt(a[0])
    for k in range(1, len(a)):
        acc = a[k].astype(float).copy()
        for i in range(1, k):
            acc -= s[i] * s[k - i]
        s[k] = acc / (2.0 * s[0])
    return s


def log(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a, dtype=float)
    out[0] = np.log(a[0])
    for k in range(1, len(a)):
        acc = a[k].astype(float).copy()
        for i in range(1, k):
            acc -= (i / k) * out[i] * a[k - i]
        out[k] = acc / a[0]
    return out


def deriv(a: np.ndarray) -> np.ndarray:
    """Jet of f' from the jet of f (depth drops by one)."""
    k = np.arange(1, len(a)).reshape((-1,) + (1,) * (a.ndim - 1))
    return a[1:] * k


def value(a: np.ndarray, n: int = 0) -> np.ndarray:
    """n-th derivative f^(n) read back from the jet."""
    return a[n] * float(np.prod(np.arange(1, n + 1)))
