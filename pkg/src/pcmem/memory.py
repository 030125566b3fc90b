"""Memory procedures on a trained model: reconstruction, replay, and
auto-associative recall of partially occluded inputs.

Replay regenerates an input from its frozen top-level representation with
the input-error pathway gated off. Recall clamps the known pixels and runs
joint gradient descent on the hidden pixels and both latent levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import (
    LatentState,
    ModelParams,
    activation_eval,
    compute_errors,
    free_energy,
    inference_gradients,
    inference_step,
    init_latents,
    learning_gradients,
)

DEFAULT_BUDGET = 5000
REPLAY_REL_TOL = 1e-8
REPLAY_XI2_TOL = 1e-6
RECALL_PHI1_TOL = 1e-6


class DivergenceError(RuntimeError):
    """Inference produced a non-finite free energy."""


@dataclass(frozen=True)
class OcclusionMask:
    """Boolean visibility over the 784 pixels; True = clamped/known."""

    visible: np.ndarray
    tag: str = ""

    def __post_init__(self):
        if self.visible.dtype != np.bool_ or self.visible.ndim != 1:
            raise ValueError("mask must be a 1-D boolean vector")
        if not self.visible.any() or self.visible.all():
            raise ValueError("mask needs at least one visible and one hidden pixel")

    @property
    def hidden(self) -> np.ndarray:
        return ~self.visible

    @classmethod
    def top_half(cls, side: int = 28) -> "OcclusionMask":
        visible = np.zeros((side, side), dtype=bool)
        visible[: side // 2] = True
        return cls(visible=visible.ravel(), tag="top-half")


@dataclass
class MemoryTaskResult:
    images: np.ndarray
    iterations: int
    final_free_energy: float
    masked_mse: Optional[np.ndarray] = None


def masked_mse(a: np.ndarray, b: np.ndarray, mask: OcclusionMask) -> float:
    """Mean squared difference over the hidden pixels only."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a[..., mask.hidden] - b[..., mask.hidden]
    return float(np.mean(d * d))


def infer_latents(
    params: ModelParams,
    x: np.ndarray,
    iters: int = 50,
    alpha: float = 0.01,
    init_seed: int = 0,
) -> LatentState:
    """Seeded random latent init followed by `iters` inference steps."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    rng = np.random.default_rng(init_seed)
    state = init_latents(params.dims, x.shape[0], rng)
    for i in range(iters):
        errors = compute_errors(params, state, x)
        if not np.all(np.isfinite(errors.layer_energies)):
            raise DivergenceError(f"non-finite free energy at inference iteration {i}")
        grads = inference_gradients(params, state, errors)
        state = replace(
            state,
            phi2=state.phi2 - alpha * grads.d_phi2,
            phi3=state.phi3 - alpha * grads.d_phi3,
        )
    if not np.all(np.isfinite(state.phi2)) or not np.all(np.isfinite(state.phi3)):
        raise DivergenceError(f"non-finite latents after {iters} inference iterations")
    return state


def reconstruct(
    params: ModelParams,
    x: np.ndarray,
    iters: int = 50,
    alpha: float = 0.01,
    init_seed: int = 0,
) -> np.ndarray:
    """Layer-1 prediction theta1 @ phi2 after inferring latents for x."""
    state = infer_latents(params, x, iters=iters, alpha=alpha, init_seed=init_seed)
    return state.phi2 @ params.theta1.T


def _settle(params, state, x, alpha, budget, rel_tol):
    """Run gated-on inference until the free energy stops moving."""
    prev = None
    for i in range(budget):
        errors = compute_errors(params, state, x)
        _, mean_f = free_energy(errors)
        if not np.isfinite(mean_f):
            raise DivergenceError(f"non-finite free energy at iteration {i}")
        if prev is not None and abs(prev - mean_f) <= rel_tol * max(abs(prev), 1e-300):
            break
        grads = inference_gradients(params, state, errors)
        state = replace(
            state,
            phi2=state.phi2 - alpha * grads.d_phi2,
            phi3=state.phi3 - alpha * grads.d_phi3,
        )
        prev = mean_f
    return state


def regenerate(
    params: ModelParams,
    phi3: np.ndarray,
    phi2_init: np.ndarray,
    alpha: float = 0.01,
    budget: int = DEFAULT_BUDGET,
) -> tuple[np.ndarray, np.ndarray]:
    """Top-down regeneration from a frozen phi3 with input errors gated off.

    The gated phi2 update is phi2 -= alpha*xi2, a contraction toward
    f(theta2 phi3); it stops on the xi2 inf-norm rather than the
    free-energy change, which can flatten out first. Takes no input at
    all, so the result is trivially invariant to input perturbations.
    Returns (images, phi2).
    """
    phi2 = phi2_init
    target, _ = activation_eval(params.activation, phi3 @ params.theta2.T)
    for _ in range(budget):
        xi2 = phi2 - target
        if np.max(np.abs(xi2)) < REPLAY_XI2_TOL:
            break
        phi2 = phi2 - alpha * xi2
    return phi2 @ params.theta1.T, phi2


def replay(
    params: ModelParams,
    x: np.ndarray,
    consolidate: bool = False,
    alpha: float = 0.01,
    budget: int = DEFAULT_BUDGET,
    init_seed: int = 0,
    consolidate_rate: float = 1e-4,
) -> np.ndarray:
    """Replay inputs through the gated top-down pathway.

    1. full inference to convergence; 2. freeze phi3 and gate the input
    errors off; 3. re-infer phi2 alone (fixpoint phi2 = f(theta2 phi3));
    4. optionally one theta2 consolidation update (in place). Returns the
    replayed images theta1 @ phi2.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    rng = np.random.default_rng(init_seed)
    state = init_latents(params.dims, x.shape[0], rng)
    state = _settle(params, state, x, alpha, budget, REPLAY_REL_TOL)

    images, phi2 = regenerate(params, state.phi3, state.phi2, alpha=alpha, budget=budget)

    if consolidate:
        final = replace(state, phi2=phi2)
        errors = compute_errors(params, final, x, input_gate=False)
        grads = learning_gradients(params, final, errors)
        params.theta2[...] = params.theta2 - consolidate_rate * grads.d_theta2

    return images


def recall(
    params: ModelParams,
    target: np.ndarray,
    mask: OcclusionMask,
    iters: int = DEFAULT_BUDGET,
    alpha: float = 0.01,
    init_seed: int = 0,
    tol: float = RECALL_PHI1_TOL,
) -> MemoryTaskResult:
    """Pattern-complete the hidden pixels of a partially presented image.

    phi1 starts at the corrupted input (hidden pixels zeroed); each
    iteration jointly descends phi1 (hidden coordinates only), phi2 and
    phi3. Stops after `iters` iterations or when the inf-norm change of
    phi1 drops below tol. Visible pixels are clamped bit-exactly.
    """
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    n, d1 = target.shape
    if d1 != mask.visible.shape[0]:
        raise ValueError("mask length does not match image size")

    phi1 = np.where(mask.visible, target, 0.0)
    rng = np.random.default_rng(init_seed)
    state = init_latents(params.dims, n, rng)
    state = replace(state, phi1=phi1)
    free = np.broadcast_to(mask.hidden, (n, d1))

    used = 0
    for i in range(iters):
        new_state = inference_step(params, state, None, alpha, phi1_free=free)
        delta = np.max(np.abs(new_state.phi1 - state.phi1))
        state = new_state
        used = i + 1
        _, mean_f = free_energy(compute_errors(params, state, state.phi1))
        if not np.isfinite(mean_f):
            raise DivergenceError(f"non-finite free energy at recall iteration {used}")
        if delta < tol:
            break

    _, final_f = free_energy(compute_errors(params, state, state.phi1))
    mses = np.array(
        [masked_mse(state.phi1[k], target[k], mask) for k in range(n)]
    )
    return MemoryTaskResult(
        images=state.phi1,
        iterations=used,
        final_free_energy=final_f,
        masked_mse=mses,
    )
