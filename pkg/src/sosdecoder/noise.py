"""Bit-flip noise: priors, log-likelihood weights, sampling and syndromes."""

import numpy as np

from . import gf2


def weights_from_priors(p):
    """Log-odds weights ``ln((1 - p) / p)``; positive exactly when ``p < 1/2``."""
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if np.any(~np.isfinite(p)) or np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("error probabilities must lie strictly between 0 and 1")
    return np.log1p(-p) - np.log(p)


def uniform_weights(n, p):
    return weights_from_priors(np.full(n, p))


def trial_stream(master_seed, trial_index):
    """Independent random stream for one trial, keyed by ``(master_seed, trial_index)``.

    Streams do not depend on the order in which trials are executed.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(master_seed), int(trial_index)])))


def sample_error(n, p, stream):
    """i.i.d. bit flips with probability ``p`` (``p`` may be 0 or 1)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return (stream.random(n) < p).astype(np.uint8)


def syndrome(h, e):
    return gf2.matvec(h, e)


def classical_to_syndrome(h, received, weights):
    """Rewrite classical ML decoding of ``received`` as syndrome decoding.

    With ``e = received ^ x`` the codeword cost ``sum(lam * x) + offset``
    equals the error cost ``sum(weights * e)``, where ``lam = (-1)^received *
    weights`` and ``offset`` sums the weights on the support of ``received``.
    Returns ``(lam, offset, s)`` with ``s = h @ received``.
    """
    h = np.asarray(h, dtype=np.uint8)
    y = np.asarray(received, dtype=np.uint8)
    w = np.asarray(weights, dtype=np.float64)
    if y.shape[0] != h.shape[1] or w.shape[0] != h.shape[1]:
        raise ValueError("received word and weights must match the number of columns of h")
    lam = np.where(y == 1, -w, w)
    offset = float(w[y == 1].sum())
    return lam, offset, gf2.matvec(h, y)
