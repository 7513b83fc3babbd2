"""Independent verification of oversampled rows, used by unit and acceptance tests.

Everything here recomputes from first principles: neighbor lists come
from explicitly sorted pairwise distances, and each synthetic row must
sit on a segment between some class member and one of that member's k
nearest same-class neighbors, with the interpolation factor recovered
coordinate-wise.
"""

import numpy as np


def brute_force_neighbors(points, k):
    """Row i: indices of i's k nearest others, sorted by (distance, index)."""
    points = np.asarray(points, dtype=np.float64)
    m = points.shape[0]
    table = []
    for i in range(m):
        d2 = np.sum((points - points[i]) ** 2, axis=1)
        ranked = sorted((j for j in range(m) if j != i), key=lambda j: (d2[j], j))
        table.append(ranked[:k])
    return table


def _candidate_segments(members, neighbor_table):
    """All (member, neighbor) pairs as base points ``a`` and directions ``w``."""
    members = np.asarray(members, dtype=np.float64)
    src = np.repeat(np.arange(len(members)), [len(n) for n in neighbor_table])
    nbr = np.concatenate([np.asarray(n, dtype=int) for n in neighbor_table])
    a = members[src]
    w = members[nbr] - a
    pivot = np.argmax(np.abs(w), axis=1)
    w_pivot = w[np.arange(len(src)), pivot]
    return a, w, pivot, w_pivot


def segment_match(s, members, neighbor_table, tol=1e-9, _segments=None):
    """True if s = x + lam (x_nn - x) for some member x and neighbor x_nn,
    with lam in [0, 1] recovered coordinate-wise to within tol."""
    if _segments is None:
        _segments = _candidate_segments(members, neighbor_table)
    a, w, pivot, w_pivot = _segments
    s = np.asarray(s, dtype=np.float64)
    v = s[None, :] - a
    degenerate = w_pivot == 0.0  # coincident member/neighbor pair
    lam = np.zeros(len(a))
    np.divide(v[np.arange(len(a)), pivot], w_pivot, out=lam, where=~degenerate)
    resid = np.max(np.abs(v - lam[:, None] * w), axis=1)
    ok = (resid <= tol) & (lam >= -tol) & (lam <= 1.0 + tol)
    ok |= degenerate & (np.max(np.abs(v), axis=1) <= tol)
    return bool(ok.any())


def verify_oversampled(before, after, tol=1e-9):
    """Check every appended row in ``after`` against ``before``'s originals.

    Returns the number of synthetic rows verified; raises AssertionError
    on the first row with no valid (member, neighbor, lambda) witness.
    """
    n = before.features.shape[0]
    assert np.array_equal(after.features[:n], before.features), "originals not preserved"
    assert np.array_equal(after.labels[:n], before.labels), "original labels not preserved"
    tables = {}  # built on first use; untouched classes cost nothing
    for row, cls in zip(after.features[n:], after.labels[n:]):
        key = cls.item() if hasattr(cls, "item") else cls
        if key not in tables:
            members = before.features[before.labels == cls]
            k = min(before.k, len(members) - 1)
            assert k >= 1, f"class {key!r} has too few members to interpolate"
            table = brute_force_neighbors(members, k)
            tables[key] = (members, table, _candidate_segments(members, table))
        members, table, segments = tables[key]
        assert segment_match(row, members, table, tol=tol, _segments=segments), (
            f"synthetic row of class {key!r} lies on no member-neighbor segment")
    return after.features.shape[0] - n
