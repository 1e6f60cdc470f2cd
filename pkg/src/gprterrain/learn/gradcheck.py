"""Central finite-difference checks for analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .layers import Layer, ReLU

DEFAULT_H = 1e-5
DENOM_FLOOR = 1e-6


class GradientCheckError(AssertionError):
    pass


@dataclass
class Probe:
    array: int
    index: tuple[int, ...]
    analytic: float
    numeric: float

    @property
    def rel_error(self) -> float:
        return relative_error(self.analytic, self.numeric)


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), DENOM_FLOOR)


def check_gradients(fn: Callable[[], float], arrays: Sequence[np.ndarray], grads: Sequence[np.ndarray],
                    probes: int = 20, seed: int = 0, h: float = DEFAULT_H,
                    skip: Callable[[int, tuple], bool] | None = None) -> list[Probe]:
    """Compare ``grads`` with central differences of ``fn`` at random coordinates.

    ``arrays`` are perturbed in place and restored. ``skip(array, index)``
    may reject coordinates where ``fn`` is known to be non-differentiable.
    """
    rng = np.random.default_rng(seed)
    sizes = np.array([a.size for a in arrays])
    if sizes.sum() == 0:
        return []
    out = []
    attempts = 0
    while len(out) < probes and attempts < 50 * probes:
        attempts += 1
        ai = int(rng.choice(len(arrays), p=sizes / sizes.sum()))
        idx = tuple(int(i) for i in np.unravel_index(int(rng.integers(arrays[ai].size)), arrays[ai].shape))
        if skip is not None and skip(ai, idx):
            continue
        arr = arrays[ai]
        orig = arr[idx]
        arr[idx] = orig + h
        fp = fn()
        arr[idx] = orig - h
        fm = fn()
        arr[idx] = orig
        out.append(Probe(ai, idx, float(grads[ai][idx]), (fp - fm) / (2 * h)))
    return out


def _report(probes: list[Probe], tolerance: float | None, what: str) -> float:
    worst = max(probes, key=lambda p: p.rel_error, default=None)
    err = worst.rel_error if worst is not None else 0.0
    if tolerance is not None and err >= tolerance:
        raise GradientCheckError(
            f"{what}: max relative error {err:.3e} >= {tolerance:.1e} at array {worst.array} "
            f"index {worst.index} (analytic {worst.analytic:.6e}, numeric {worst.numeric:.6e})"
        )
    return err


def grad_check(layer: Layer, x: np.ndarray, tolerance: float | None = 1e-4, probes: int = 20,
               seed: int = 0, h: float = DEFAULT_H) -> float:
    """Max relative error of ``layer``'s input and parameter gradients.

    The output is scalarized as ``sum(forward(x) * r)`` with a fixed random
    ``r``. For a bare ReLU, inputs within ``h`` of zero are not probed.
    Raises GradientCheckError when the error reaches ``tolerance``.
    """
    rng = np.random.default_rng(seed + 1)
    x = np.array(x, dtype=np.float64)
    out = layer.forward(x)
    r = rng.standard_normal(out.shape)
    for p in layer.params:
        p.zero_grad()
    dx = layer.backward(r)
    arrays = [p.value for p in layer.params]
    grads = [p.grad.copy() for p in layer.params]
    if dx is not None:  # layers built with input_grad=False return None
        arrays.insert(0, x)
        grads.insert(0, dx)

    def fn():
        return float(np.sum(layer.forward(x) * r))

    skip = None
    if isinstance(layer, ReLU):
        def skip(ai, idx):
            return ai == 0 and dx is not None and abs(x[idx]) <= h

    probes_ = check_gradients(fn, arrays, grads, probes, seed, h, skip)
    return _report(probes_, tolerance, type(layer).__name__)


def grad_check_loss(loss_and_grad: Callable[[], float], loss_only: Callable[[], float], params,
                    tolerance: float | None = 1e-3, probes: int = 20, seed: int = 0,
                    h: float = DEFAULT_H, what: str = "model") -> float:
    """Check a full model loss against its parameter gradients.

    ``loss_and_grad`` must zero, then fill every ``param.grad``;
    ``loss_only`` must be a deterministic forward evaluation.
    """
    loss_and_grad()
    arrays = [p.value for p in params]
    grads = [p.grad.copy() for p in params]
    probes_ = check_gradients(loss_only, arrays, grads, probes, seed, h)
    return _report(probes_, tolerance, what)
