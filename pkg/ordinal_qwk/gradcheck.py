"""
Сверка аналитических градиентов (backward + головы) с центральными
конечными разностями на случайных сетях, батчах и метках.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ordinal_qwk.config import FD_EPS
from ordinal_qwk.heads import head_loss
from ordinal_qwk.models import LossKind, NetworkParams, Tensor
from ordinal_qwk.netcore import backward, finite_difference_gradient, forward, init_params
from ordinal_qwk.qwk import weight_matrix

log = logging.getLogger(__name__)

HIDDEN_CHOICES: List[Tuple[int, ...]] = [(), (5,), (4, 3)]
# расстояние предактивации ReLU до нуля, ближе которого экземпляр пересэмплируется
KINK_MARGIN = 1e-3


@dataclass
class GradcheckReport:
    kind: LossKind
    instances: int
    max_rel_error: float

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error < tol


def relative_error(a: Tensor, b: Tensor) -> float:
    """||a − b||∞ / max(||a||∞, ||b||∞, 1e-8)."""
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-8)
    return float(np.max(np.abs(a - b))) / scale


def _near_kink(params: NetworkParams, x: Tensor) -> bool:
    h = x
    for layer in params.layers[:-1]:
        z = h @ layer.weight + layer.bias
        if np.min(np.abs(z)) < KINK_MARGIN:
            return True
        h = np.maximum(z, 0.0)
    return False


def random_instance(kind: LossKind, rng: np.random.Generator):
    while True:
        k = int(rng.integers(3, 7))
        d = int(rng.integers(2, 5))
        n = int(rng.integers(3, 8))
        hidden = HIDDEN_CHOICES[int(rng.integers(len(HIDDEN_CHOICES)))]
        anchor = np.arange(k, dtype=np.float64) + rng.normal(0.0, 0.3, size=k) if kind.learns_anchor else None
        params = init_params(d, hidden, kind.output_width(k), kind.output_activation, rng, anchor=anchor, head=kind.value)
        # крупные веса, чтобы выходы softmax/sigmoid были заметно неравномерны
        params = params.with_arrays([a * 2.0 if a.ndim == 2 else a + rng.normal(0, 0.1, a.shape) for a in params.arrays()])
        if kind.learns_anchor:
            params.anchor = anchor
        x = rng.normal(size=(n, d))
        labels = rng.integers(0, k, size=n)
        labels[:2] = rng.choice(k, size=2, replace=False)
        if not _near_kink(params, x):
            return params, x, labels, k


def analytic_gradient(kind: LossKind, params: NetworkParams, x: Tensor, labels, k: int, weights) -> NetworkParams:
    trace = forward(params, x)
    hl = head_loss(kind, trace[-1], labels, k, anchor=params.anchor, weights=weights)
    grads, _ = backward(params, trace, hl.grad_output)
    if hl.grad_anchor is not None:
        grads = grads.with_arrays(grads.arrays()[:-1] + [hl.grad_anchor])
    return grads


def check_loss_kind(kind: LossKind, instances: int = 50, seed: int = 0, eps: float = FD_EPS) -> GradcheckReport:
    rng = np.random.default_rng([seed, list(LossKind).index(kind)])
    worst = 0.0
    for _ in range(instances):
        params, x, labels, k = random_instance(kind, rng)
        weights = weight_matrix(k)

        def loss_fn(p: NetworkParams) -> float:
            return head_loss(kind, forward(p, x)[-1], labels, k, anchor=p.anchor, weights=weights).value

        g_analytic = analytic_gradient(kind, params, x, labels, k, weights).flatten()
        g_numeric = finite_difference_gradient(loss_fn, params, eps).flatten()
        worst = max(worst, relative_error(g_analytic, g_numeric))

    log.info("gradcheck %s: %d экземпляров, макс. относительная ошибка %.3e", kind.value, instances, worst)
    return GradcheckReport(kind=kind, instances=instances, max_rel_error=worst)


def check_all(instances: int = 50, seed: int = 0, kinds: Optional[List[LossKind]] = None) -> List[GradcheckReport]:
    return [check_loss_kind(kind, instances, seed) for kind in (kinds or list(LossKind))]
