"""Family-wise error control across eigenfunction orders."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class MultiTestResult:
    p_values: np.ndarray
    method: str
    alpha: float
    reject_flags: np.ndarray
    orders: tuple[int, ...] = field(default=())

    @property
    def global_reject(self) -> bool:
        return bool(np.any(self.reject_flags))

    def to_dict(self) -> dict:
        return {
            "orders": list(self.orders),
            "p_values": [float(p) for p in self.p_values],
            "method": self.method,
            "alpha": self.alpha,
            "reject_flags": [bool(f) for f in self.reject_flags],
            "global_reject": self.global_reject,
        }


def _validate(p_values, alpha) -> np.ndarray:
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("need at least one p-value")
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("p-values must lie in [0, 1]")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return p


def _orders(orders, k):
    return tuple(orders) if orders is not None else tuple(range(1, k + 1))


def bonferroni(p_values: Sequence[float], alpha: float = 0.05, orders=None) -> MultiTestResult:
    """Reject order k when p_k < alpha / p."""
    p = _validate(p_values, alpha)
    return MultiTestResult(p, "bonferroni", alpha, p < alpha / p.size, _orders(orders, p.size))


def holm(p_values: Sequence[float], alpha: float = 0.05, orders=None) -> MultiTestResult:
    """Holm step-down: walk the sorted p-values, rejecting while p_(k) < alpha / (p - k + 1).

    Ties are ordered by original position.
    """
    p = _validate(p_values, alpha)
    k = p.size
    flags = np.zeros(k, dtype=bool)
    for rank, idx in enumerate(np.argsort(p, kind="stable")):
        if p[idx] < alpha / (k - rank):
            flags[idx] = True
        else:
            break
    return MultiTestResult(p, "holm", alpha, flags, _orders(orders, k))


def correct(p_values: Sequence[float], alpha: float, method: str, orders=None) -> MultiTestResult:
    if method == "bonferroni":
        return bonferroni(p_values, alpha, orders)
    if method == "holm":
        return holm(p_values, alpha, orders)
    raise ValueError(f"unknown correction {method!r}")
