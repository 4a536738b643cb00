"""Independent brute-force oracles used to validate the library.

Everything here recomputes quantities from first principles: scalar loops
for the energy, exhaustive enumeration of layer configurations for all
probabilities.  None of it shares code paths with the package beyond plain
arithmetic, so agreement is meaningful.
"""

import itertools
import math

import numpy as np


def energy_loops(W, b, c, x, h):
    """E(x, h) evaluated term by term with scalar loops."""
    H, V = len(c), len(b)
    e = 0.0
    for i in range(V):
        e -= b[i] * x[i]
    for j in range(H):
        e -= c[j] * h[j]
    for j in range(H):
        for i in range(V):
            e -= h[j] * W[j][i] * x[i]
    return e


def all_bits(n):
    """All binary vectors of length n as float lists, lexicographic."""
    return [list(map(float, bits)) for bits in itertools.product((0, 1), repeat=n)]


def marginal_weight(W, b, c, x):
    """sum_h e^{-E(x, h)} by explicit enumeration of the hidden layer."""
    return sum(math.exp(-energy_loops(W, b, c, x, h)) for h in all_bits(len(c)))


def partition(W, b, c):
    """Z by enumeration of the full joint space."""
    return sum(marginal_weight(W, b, c, x) for x in all_bits(len(b)))


def prob_h_given_x(W, b, c, x):
    """P(h_j = 1 | x) for each j, from the joint distribution."""
    H = len(c)
    den = marginal_weight(W, b, c, x)
    out = []
    for j in range(H):
        num = sum(
            math.exp(-energy_loops(W, b, c, x, h)) for h in all_bits(H) if h[j] == 1.0
        )
        out.append(num / den)
    return np.array(out)


def prob_x_given_h(W, b, c, h):
    """P(x_i = 1 | h) for each i, from the joint distribution."""
    V = len(b)
    den = sum(math.exp(-energy_loops(W, b, c, x, h)) for x in all_bits(V))
    out = []
    for i in range(V):
        num = sum(
            math.exp(-energy_loops(W, b, c, x, h)) for x in all_bits(V) if x[i] == 1.0
        )
        out.append(num / den)
    return np.array(out)


def log_likelihood(W, b, c, X):
    """Total log-likelihood of the rows of X from full enumeration."""
    z = partition(W, b, c)
    return float(sum(math.log(marginal_weight(W, b, c, list(x)) / z) for x in X))


def joint_prob_of_h_given_x(W, b, c, x, h):
    """P(h | x) for a full hidden configuration."""
    return math.exp(-energy_loops(W, b, c, x, h)) / marginal_weight(W, b, c, x)


def random_params(rng, num_visible, num_hidden, scale=0.8):
    """Random dense parameters with moderate magnitudes."""
    return (
        scale * rng.standard_normal((num_hidden, num_visible)),
        scale * rng.standard_normal(num_visible),
        scale * rng.standard_normal(num_hidden),
    )


# The 2x2 model used across the hand-checked examples.
TINY_W = [[1.0, -1.0], [0.5, 0.0]]
TINY_B = [0.1, -0.2]
TINY_C = [0.0, 0.3]


# ---------------------------------------------------------------------------
# vectorized variants: the same brute-force enumerations, fast enough for
# larger layers.  Still algorithmically independent of the library (explicit
# energy matrices and plain exp/sum, no closed-form products or log-domain
# accumulation).
# ---------------------------------------------------------------------------


def all_bits_np(n):
    return np.array(all_bits(n), dtype=np.float64)


def energy_matrix_np(W, b, c, X, Hm):
    """E(x, h) for every row pairing of X (rows x) and Hm (rows h)."""
    W, b, c = np.asarray(W), np.asarray(b), np.asarray(c)
    return -(X @ b)[:, None] - (Hm @ c)[None, :] - X @ W.T @ Hm.T


def marginal_weights_np(W, b, c, X):
    """Per-row sum_h e^{-E(x, h)} over the exhaustive hidden enumeration."""
    Hm = all_bits_np(len(c))
    return np.exp(-energy_matrix_np(W, b, c, np.asarray(X, dtype=np.float64), Hm)).sum(axis=1)


def partition_np(W, b, c):
    return float(marginal_weights_np(W, b, c, all_bits_np(len(b))).sum())


def log_likelihood_np(W, b, c, X):
    z = partition_np(W, b, c)
    return float(np.log(marginal_weights_np(W, b, c, X) / z).sum())
