"""Independent brute-force reference implementations used as test oracles.

Everything here is pure-python loop code, deliberately written without
reusing any vectorized library internals, so oracle agreement is a real
cross-check and not a tautology.
"""

import math


def cosine_oracle(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    return dot / (na * nb)


def select_impostors_oracle(targets, impostors, n_local, kappa):
    """Frequency-count selection with tie-break by ascending index."""
    M = len(impostors)
    f = [0] * M
    for t in targets:
        scores = [cosine_oracle(t, impostors[m]) for m in range(M)]
        ranked = sorted(range(M), key=lambda m: (-scores[m], m))
        for m in ranked[:n_local]:
            f[m] += 1
    final = sorted(range(M), key=lambda m: (-f[m], m))
    return final[:kappa], f


def sweep_oracle(scores, keys):
    """(threshold, p_miss, p_fa) at midpoints plus -inf/+inf sentinels."""
    tar = [s for s, k in zip(scores, keys) if k == "target"]
    non = [s for s, k in zip(scores, keys) if k == "nontarget"]
    uniq = sorted(set(list(tar) + list(non)))
    thresholds = (
        [float("-inf")]
        + [(a + b) / 2.0 for a, b in zip(uniq, uniq[1:])]
        + [float("inf")]
    )
    points = []
    for t in thresholds:
        p_miss = sum(1 for s in tar if s < t) / len(tar)
        p_fa = sum(1 for s in non if s >= t) / len(non)
        points.append((t, p_miss, p_fa))
    return points


def eer_oracle(scores, keys):
    """Linear interpolation at the sign flip of (p_miss - p_fa)."""
    points = sweep_oracle(scores, keys)
    prev = None
    for t, p_miss, p_fa in points:
        d = p_miss - p_fa
        if d == 0.0:
            return p_miss, t
        if d > 0.0:
            t0, m0, f0 = prev
            d0 = m0 - f0
            a = d0 / (d0 - d)
            return m0 + a * (p_miss - m0), t0 + a * (t - t0)
        prev = (t, p_miss, p_fa)
    raise AssertionError("no crossing found")


def min_dcf_oracle(scores, keys, c_miss=10.0, c_fa=1.0, p_target=0.01):
    points = sweep_oracle(scores, keys)
    best = None
    for t, p_miss, p_fa in points:
        dcf = c_miss * p_target * p_miss + c_fa * (1.0 - p_target) * p_fa
        if best is None or dcf < best[0]:
            best = (dcf, t)
    return best


def forward_oracle(weights, biases, x):
    """Plain-loop sigmoid/softmax forward pass; returns (activations, probs)."""
    acts = []
    a = list(x)
    for W, b in zip(weights[:-1], biases[:-1]):
        n_in, n_out = len(W), len(W[0])
        z = [b[j] + sum(a[i] * W[i][j] for i in range(n_in)) for j in range(n_out)]
        a = [1.0 / (1.0 + math.exp(-v)) for v in z]
        acts.append(a)
    W, b = weights[-1], biases[-1]
    z = [b[j] + sum(a[i] * W[i][j] for i in range(len(W))) for j in range(len(b))]
    zmax = max(z)
    e = [math.exp(v - zmax) for v in z]
    s = sum(e)
    return acts, [v / s for v in e]
