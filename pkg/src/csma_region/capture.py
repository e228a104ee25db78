"""Grant probabilities under SINR capture with Rayleigh fading.

The product closed form (:func:`grant_probabilities`) is cross-checked by
enumeration over requester subsets (:func:`grant_oracle_enum`). The
fading-level simulator gives an independent Monte Carlo check.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, TooManyNodes
from .model import SystemParams, as_request_vector

MAX_ENUM_NODES = 20
_LOG_SPACE_ABOVE = 64


def conditional_capture(s, b: float, noise_ratio: float = 0.0):
    """Probability that a tagged requester among ``s`` is captured.

    ``(1/(1+b))**(s-1) * exp(-b * noise_ratio)``; accepts scalar or array ``s``.
    """
    s_arr = np.asarray(s)
    if np.any(s_arr < 1):
        raise DomainError("conditional_capture needs s >= 1 requesters")
    if not b > 1:
        raise DomainError(f"capture ratio must exceed 1, got {b!r}")
    out = (1.0 / (1.0 + b)) ** (s_arr - 1) * np.exp(-b * noise_ratio)
    return float(out) if out.ndim == 0 else out


def grant_probabilities(p, params: SystemParams) -> np.ndarray:
    """Per-node grant probability for one handshake phase.

    ``G_i = exp(-b N0/PT) * p_i * prod_{j != i} (1 - alpha p_j)`` with
    ``alpha = b/(1+b)``.
    """
    p = as_request_vector(p, params.n)
    q = 1.0 - params.alpha * p  # >= 1/(1+b) > 0, so logs and division are safe
    if params.n > _LOG_SPACE_ABOVE:
        others = np.exp(np.log(q).sum() - np.log(q))
    else:
        others = np.prod(q) / q
    return params.capture_factor * p * others


def _subset_masks(n: int, start: int, stop: int) -> np.ndarray:
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)


def grant_oracle_enum(p, params: SystemParams) -> np.ndarray:
    """Grant probabilities by summing over every requester subset.

    Does not use the product form: each subset ``S`` contributes
    ``P(S requests) * conditional_capture(|S|)`` to every member.
    """
    n = params.n
    if n > MAX_ENUM_NODES:
        raise TooManyNodes(f"enumeration supports n <= {MAX_ENUM_NODES}, got {n}")
    p = as_request_vector(p, n)
    g = np.zeros(n)
    total = 1 << n
    chunk = 1 << 14
    for start in range(1, total, chunk):
        masks = _subset_masks(n, start, min(start + chunk, total))
        prob = np.where(masks, p, 1.0 - p).prod(axis=1)
        weight = prob * conditional_capture(masks.sum(axis=1), params.b, params.noise_ratio)
        g += masks.T.astype(float) @ weight
    return g
