"""Random curvature vectors and symmetric 3-tensors for the verifiers.

Curvature vectors come from the unit slice of a cone by rejection from a
mixture proposal: a Dirichlet point on the simplex, optionally with a few
entries pushed towards zero (this fills the pinching region where the
estimates are tight), plus Gaussian noise of random width. Rows are sorted
ascending.
"""

import numpy as np

__all__ = ["sample_unit_slice", "random_sym_tensors", "distinct_mask", "SamplerExhausted"]

NOISE_LEVELS = np.array([0.0, 0.02, 0.1, 0.3, 1.0])


class SamplerExhausted(RuntimeError):
    """Rejection sampling produced too few accepted points."""


def _proposal(n, size, rng, m):
    base = rng.dirichlet(np.ones(n), size=size)
    pinch = rng.random(size) < 0.5
    if np.any(pinch):
        k = rng.integers(1, max(2, min(n, m + 2)), size=size)
        order = np.argsort(rng.random((size, n)), axis=1)
        ranks = np.argsort(order, axis=1)
        shrink = (ranks < k[:, None]) & pinch[:, None]
        base = np.where(shrink, base * rng.random((size, n)) ** 2, base)
    sigma = NOISE_LEVELS[rng.integers(0, NOISE_LEVELS.size, size=size)]
    z = base + sigma[:, None] * rng.standard_normal((size, n)) / np.sqrt(n)
    norm = np.linalg.norm(z, axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    return z / norm


def distinct_mask(Z, rel_gap):
    """Rows whose sorted entries are separated by at least rel_gap * |z|."""
    Zs = np.sort(Z, axis=1)
    gaps = np.diff(Zs, axis=1).min(axis=1) if Z.shape[1] > 1 else np.full(len(Z), np.inf)
    return gaps >= rel_gap * np.linalg.norm(Z, axis=1)


def sample_unit_slice(cone, f, n, count, rng, predicate=None, distinct=None,
                      max_rounds=400):
    """Draw ``count`` unit vectors from ``cone`` (sorted ascending).

    ``predicate`` filters a batch (returns a boolean mask); ``distinct``
    rejects rows with a relative eigenvalue gap below the given value.
    """
    out = []
    have = 0
    m = getattr(cone, "m", 0)
    batch = max(256, 2 * count)
    for _ in range(max_rounds):
        if have >= count:
            break
        Z = np.sort(_proposal(n, batch, rng, m), axis=1)
        ok = cone.contains(f, Z)
        if distinct is not None:
            ok &= distinct_mask(Z, distinct)
        Z = Z[ok]
        if predicate is not None and len(Z):
            Z = Z[predicate(Z)]
        out.append(Z)
        have += len(Z)
    if have < count:
        raise SamplerExhausted(f"accepted {have} of {count} samples")
    return np.concatenate(out)[:count]


def random_sym_tensors(n, count, rng):
    """I.i.d. normal 3-tensors, symmetrized over all index permutations and
    normalized to unit Frobenius norm. Shape (count, n, n, n)."""
    T = rng.standard_normal((count, n, n, n))
    S = (T + T.transpose(0, 1, 3, 2) + T.transpose(0, 2, 1, 3)
         + T.transpose(0, 2, 3, 1) + T.transpose(0, 3, 1, 2) + T.transpose(0, 3, 2, 1)) / 6.0
    norm = np.sqrt(np.einsum("aijk,aijk->a", S, S))
    return S / norm[:, None, None, None]
