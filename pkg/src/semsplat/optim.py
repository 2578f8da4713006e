"""Adam optimizer over named parameter arrays.

Keeps first/second-moment state per parameter name and supports the row
surgery densification needs: when Gaussians are cloned, split or pruned the
moment arrays are filtered alongside, with fresh rows starting at zero.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError


class Adam:
    def __init__(self, lrs: dict[str, float], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-15):
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise InvalidParameterError("betas must lie in [0, 1)")
        self.lrs = dict(lrs)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state: dict[str, dict] = {}

    def set_lr(self, name: str, lr: float) -> None:
        self.lrs[name] = lr

    def _state_for(self, name: str, param: np.ndarray) -> dict:
        st = self.state.get(name)
        if st is None or st["m"].shape != param.shape:
            st = {"m": np.zeros_like(param), "v": np.zeros_like(param), "step": 0}
            self.state[name] = st
        return st

    def step(self, name: str, param: np.ndarray, grad: np.ndarray) -> None:
        """One in-place update of ``param``."""
        if name not in self.lrs:
            raise InvalidParameterError(f"no learning rate configured for {name!r}")
        if grad.shape != param.shape:
            raise InvalidParameterError(
                f"{name}: grad shape {grad.shape} != param shape {param.shape}")
        st = self._state_for(name, param)
        st["step"] += 1
        t = st["step"]
        st["m"] = self.beta1 * st["m"] + (1.0 - self.beta1) * grad
        st["v"] = self.beta2 * st["v"] + (1.0 - self.beta2) * grad * grad
        m_hat = st["m"] / (1.0 - self.beta1 ** t)
        v_hat = st["v"] / (1.0 - self.beta2 ** t)
        param -= (self.lrs[name] * m_hat / (np.sqrt(v_hat) + self.eps)).astype(param.dtype)

    def select_rows(self, name: str, index: np.ndarray) -> None:
        """Filter/reorder moment rows to follow a Gaussian subset."""
        st = self.state.get(name)
        if st is not None:
            st["m"] = st["m"][index]
            st["v"] = st["v"][index]

    def append_zero_rows(self, name: str, count: int) -> None:
        """Extend state with ``count`` fresh rows (new Gaussians)."""
        st = self.state.get(name)
        if st is not None and count:
            pad = [(0, count)] + [(0, 0)] * (st["m"].ndim - 1)
            st["m"] = np.pad(st["m"], pad)
            st["v"] = np.pad(st["v"], pad)

    def reset_rows(self, name: str, index: np.ndarray) -> None:
        """Zero the moments of selected rows (used after opacity resets)."""
        st = self.state.get(name)
        if st is not None:
            st["m"][index] = 0.0
            st["v"][index] = 0.0


def exponential_lr(step: int, total_steps: int, lr_initial: float,
                   lr_final: float) -> float:
    """Log-linear interpolation from lr_initial at step 0 to lr_final at the end."""
    if total_steps <= 1:
        return lr_final
    frac = min(max(step / (total_steps - 1), 0.0), 1.0)
    return float(lr_initial * (lr_final / lr_initial) ** frac)
