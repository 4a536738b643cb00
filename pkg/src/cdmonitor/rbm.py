"""Binary restricted Boltzmann machine: parameters, exact per-configuration
quantities, and block Gibbs sampling.

The model assigns a configuration (x, h) of binary visible units x and binary
hidden units h the energy

    E(x, h) = -b.x - c.h - h.W.x

with weights W of shape (hidden, visible) and biases b (visible), c (hidden).
Because the layers are conditionally independent given each other, both
P(h|x) and P(x|h) factorize into per-unit sigmoids, and the hidden layer can
be summed out in closed form.

All operations accept arbitrary leading batch dimensions: a (V,) vector and
an (N, V) matrix of row vectors are both valid inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


class DimensionMismatchError(ValueError):
    """An input vector does not match the model's layer sizes."""


class NonFiniteParameterError(FloatingPointError):
    """Model parameters contain NaN or Inf."""


def softplus(z: np.ndarray) -> np.ndarray:
    """log(1 + e^z), computed stably for |z| up to ~700 and beyond."""
    return np.logaddexp(0.0, z)


@dataclass
class RbmParams:
    """Weights and biases of a binary RBM.

    W: (hidden, visible) weight matrix; row j holds the weights of hidden
    unit j.  b: visible bias, length visible.  c: hidden bias, length hidden.
    All entries must be finite at all times, including mid-training.
    """

    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.c = np.asarray(self.c, dtype=np.float64)
        if self.W.ndim != 2 or self.b.ndim != 1 or self.c.ndim != 1:
            raise DimensionMismatchError(
                f"expected W 2-d, b 1-d, c 1-d; got shapes "
                f"{self.W.shape}, {self.b.shape}, {self.c.shape}"
            )
        if self.W.shape != (self.c.size, self.b.size):
            raise DimensionMismatchError(
                f"W shape {self.W.shape} inconsistent with "
                f"b (len {self.b.size}) and c (len {self.c.size})"
            )
        if not (
            np.isfinite(self.W).all()
            and np.isfinite(self.b).all()
            and np.isfinite(self.c).all()
        ):
            raise NonFiniteParameterError("parameters contain NaN or Inf")

    @property
    def num_visible(self) -> int:
        return self.b.size

    @property
    def num_hidden(self) -> int:
        return self.c.size

    def copy(self) -> "RbmParams":
        return RbmParams(self.W.copy(), self.b.copy(), self.c.copy())


def zero_params(num_visible: int, num_hidden: int) -> RbmParams:
    """All-zero parameters (the uniform model)."""
    return RbmParams(
        np.zeros((num_hidden, num_visible)),
        np.zeros(num_visible),
        np.zeros(num_hidden),
    )


@dataclass
class GibbsChain:
    """Samples from a block Gibbs chain h_1, x_2, ..., h_n, x_{n+1}.

    ``hiddens[k]`` and ``visibles[k]`` are the binary samples of round k+1;
    leading batch dimensions of ``x1`` are preserved, so ``hiddens`` has
    shape (n, ..., H) and ``visibles`` shape (n, ..., V).
    """

    x1: np.ndarray
    hiddens: np.ndarray
    visibles: np.ndarray

    @property
    def n(self) -> int:
        return self.hiddens.shape[0]

    @property
    def h1(self) -> np.ndarray:
        """First hidden sample, kept for the complement probe."""
        return self.hiddens[0]

    @property
    def x_last(self) -> np.ndarray:
        """Last visible sample x_{n+1}."""
        return self.visibles[-1]


def _check_last_dim(v: np.ndarray, size: int, what: str) -> None:
    if v.ndim < 1 or v.shape[-1] != size:
        raise DimensionMismatchError(
            f"{what} has shape {v.shape}, expected last dimension {size}"
        )


def energy(params: RbmParams, x: np.ndarray, h: np.ndarray):
    """E(x, h) = -b.x - c.h - h.W.x.

    Returns a float for single vectors, an array for batched inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    _check_last_dim(x, params.num_visible, "x")
    _check_last_dim(h, params.num_hidden, "h")
    interaction = np.einsum("...j,ji,...i->...", h, params.W, x)
    val = -(x @ params.b) - (h @ params.c) - interaction
    return float(val) if np.ndim(val) == 0 else val


def log_unnormalized_marginal(params: RbmParams, x: np.ndarray):
    """log sum_h e^{-E(x, h)} = b.x + sum_j softplus(c_j + (Wx)_j).

    The hidden sum collapses into a product of per-unit factors
    (1 + e^{c_j + (Wx)_j}); accumulating their logs keeps the value finite
    for pre-activations of magnitude up to ~700.  ``x`` may be real-valued
    in [0, 1]: probe reconstructions are conditional means, and the formula
    is evaluated verbatim on them.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_last_dim(x, params.num_visible, "x")
    pre = x @ params.W.T + params.c
    val = x @ params.b + softplus(pre).sum(axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def unnormalized_marginal(params: RbmParams, x: np.ndarray):
    """sum_h e^{-E(x, h)}; exponentiation of the canonical log form."""
    return np.exp(log_unnormalized_marginal(params, x))


def hidden_conditional_mean(params: RbmParams, x: np.ndarray) -> np.ndarray:
    """E[h|x]: component j is sigmoid(c_j + (Wx)_j)."""
    x = np.asarray(x, dtype=np.float64)
    _check_last_dim(x, params.num_visible, "x")
    return expit(x @ params.W.T + params.c)


def visible_conditional_mean(params: RbmParams, h: np.ndarray) -> np.ndarray:
    """E[x|h]: component i is sigmoid(b_i + (W^T h)_i)."""
    h = np.asarray(h, dtype=np.float64)
    _check_last_dim(h, params.num_hidden, "h")
    return expit(h @ params.W + params.b)


def sample_bernoulli(mean: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draws, component i with success probability mean_i.

    Consumes exactly ``mean.size`` uniforms from ``rng`` in C order, so the
    draw sequence is reproducible for both single vectors and batches.
    """
    mean = np.asarray(mean, dtype=np.float64)
    return (rng.random(mean.shape) < mean).astype(np.float64)


def run_gibbs_chain(
    params: RbmParams, x1: np.ndarray, n: int, rng: np.random.Generator
) -> GibbsChain:
    """Run n rounds of block Gibbs sampling from x1.

    Each round draws a binary h from P(h|x) and then a binary x from P(x|h);
    conditional means are never substituted for samples inside the chain.
    With a batched ``x1`` of shape (N, V) every round consumes the N*H hidden
    uniforms first, then the N*V visible uniforms.
    """
    if n < 1:
        raise ValueError(f"chain length n must be >= 1, got {n}")
    x = np.asarray(x1, dtype=np.float64)
    _check_last_dim(x, params.num_visible, "x1")
    batch = x.shape[:-1]
    hiddens = np.empty((n, *batch, params.num_hidden))
    visibles = np.empty((n, *batch, params.num_visible))
    for k in range(n):
        h = sample_bernoulli(hidden_conditional_mean(params, x), rng)
        x = sample_bernoulli(visible_conditional_mean(params, h), rng)
        hiddens[k] = h
        visibles[k] = x
    return GibbsChain(x1=np.asarray(x1, dtype=np.float64), hiddens=hiddens, visibles=visibles)
