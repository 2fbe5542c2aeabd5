"""Gaussian message containers and the precision-domain arithmetic on them."""
from dataclasses import dataclass

import numpy as np

VAR_MIN = 1e-12
VAR_MAX = 1e12


def clamp_var(v):
    return np.clip(v, VAR_MIN, VAR_MAX)


@dataclass
class GaussMsg:
    """Mean and variance of a Gaussian message.

    ``var`` is a scalar, a per-row column ``(Q, 1)`` or a full per-element array;
    all of them broadcast against ``mean``.
    """

    mean: np.ndarray
    var: np.ndarray | float
    direction: str = "forward"

    def copy(self):
        return GaussMsg(np.array(self.mean, copy=True), np.array(self.var, copy=True), self.direction)

    @property
    def precision(self):
        return 1.0 / self.var

    @classmethod
    def flat(cls, shape, direction="forward"):
        """Uninformative message: zero mean, maximal variance."""
        return cls(np.zeros(shape, dtype=np.complex128), VAR_MAX, direction)

    @classmethod
    def zero(cls, shape, var_shape=(), direction="backward"):
        """Zero mean with the smallest admissible variance."""
        return cls(np.zeros(shape, dtype=np.complex128), np.full(var_shape, VAR_MIN), direction)


def combine(m1, v1, m2, v2):
    """Product of two Gaussian densities (precision sum)."""
    prec = 1.0 / v1 + 1.0 / v2
    v = clamp_var(1.0 / prec)
    return v * (m1 / v1 + m2 / v2), v


def extrinsic_elementwise(m_post, v_post, m_in, v_in):
    """Per-element Gaussian division; entries without a valid result keep the posterior."""
    prec = 1.0 / v_post - 1.0 / v_in
    ok = prec > 1.0 / VAR_MAX
    safe = np.where(ok, prec, 1.0)
    v = np.where(ok, 1.0 / safe, v_post)
    m = np.where(ok, (m_post / v_post - m_in / v_in) / safe, m_post)
    return m, clamp_var(v)


def extrinsic(m_post, v_post, m_in, v_in):
    """Divide a posterior by an incoming message using averaged variances.

    The posterior variance is averaged over the vector first, so the result
    carries one shared variance. If the averaged precision does not exceed
    the incoming one, no valid division exists and the posterior is returned.
    """
    m_post = np.asarray(m_post)
    v_avg = float(np.mean(v_post))
    prec = 1.0 / v_avg - 1.0 / np.mean(v_in)
    if prec <= 1.0 / VAR_MAX:
        return m_post, np.full(m_post.shape, clamp_var(v_avg))
    v = 1.0 / prec
    return v * (m_post / v_avg - m_in / v_in), np.full(m_post.shape, clamp_var(v))


def exclusive_sum(a, axis=0):
    """For every index q along ``axis``, the sum of all other entries.

    Built from prefix and suffix sums so a dominant entry does not swamp the
    others through cancellation.
    """
    a = np.moveaxis(np.asarray(a), axis, 0)
    zero = np.zeros_like(a[:1])
    left = np.concatenate([zero, np.cumsum(a[:-1], axis=0)], axis=0)
    right = np.concatenate([np.cumsum(a[:0:-1], axis=0)[::-1], zero], axis=0)
    return np.moveaxis(left + right, 0, axis)
