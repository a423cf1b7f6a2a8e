"""Independent brute-force reference implementations used to pin expected values.

Deliberately written in plain Python (no numpy) with a different code
structure from the library so they can serve as oracles.
"""

import math


def brute_knn_densities(points, k):
    """points: list of (x, y) tuples -> mean distance to k nearest others."""
    out = []
    for p in points:
        ds = sorted(
            math.sqrt((p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]))
            for q in points
            if q != p
        )
        out.append(math.fsum(ds[:k]) / k)
    return out


def brute_density_split(points, n_unseen, k, batch=1):
    """Greedy densest-first selection; returns (seen, unseen) as tuple lists."""
    remaining = list(points)
    unseen = []
    while len(unseen) < n_unseen:
        take = min(batch, n_unseen - len(unseen))
        dens = brute_knn_densities(remaining, k)
        ranked = sorted(
            range(len(remaining)), key=lambda i: (dens[i], remaining[i][0], remaining[i][1])
        )
        chosen = [remaining[i] for i in ranked[:take]]
        unseen.extend(chosen)
        chosen_set = set(chosen)
        remaining = [p for p in remaining if p not in chosen_set]
    return remaining, unseen
