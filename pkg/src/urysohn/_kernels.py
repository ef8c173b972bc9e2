"""Compiled inner loops.

Operators are passed around in a flat layout so the record loops can run
under numba without Python objects:

    lo, hi    float64[m]        domain of each function
    counts    int64[m]          node count of each function
    offsets   int64[m]          start of each function's nodes in a values row
    quant     bool[m]           quantized flag (inputs are integers 1..n)
    vals      float64[K, total] one row per operator sharing that layout

A single operator is the K=1 case (``values.reshape(1, -1)``). A tree shares
the input layout across its K branches and keeps a separate domain per root
function (``rlo``, ``rhi``, ``rvals`` of shape (K, n_root)).

Records are addressed as ``X[i, j]`` rather than through row views; slicing
inside the loops costs a refcount round trip per record.

Node indices are 0-based here.
"""

import math

import numpy as np
from numba import njit

_SNAP = 1e-12
_EPS = 2.220446049250313e-16


@njit(cache=True, inline="always")
def locate(lo, hi, n, quant, x):
    """Floor node index and fraction of ``x`` clamped into [lo, hi]."""
    tol = _SNAP
    if quant:
        b = math.floor(x + 0.5) - 1.0
    else:
        if x <= lo:
            return 0, 0.0
        if x >= hi:
            return n - 1, 0.0
        b = (n - 1) * (x - lo) / (hi - lo)
        # x - lo loses up to an ulp of the larger endpoint, magnified by the grid step
        tol = max(_SNAP, 8.0 * _EPS * (n - 1) * max(abs(lo), abs(hi)) / (hi - lo))
    q = math.floor(b)
    psi = b - q
    # values within roundoff of a node snap onto it
    if psi > 1.0 - tol:
        q += 1.0
        psi = 0.0
    elif psi < tol:
        psi = 0.0
    iq = int(q)
    if iq < 0:
        return 0, 0.0
    if iq >= n - 1:
        return n - 1, 0.0
    return iq, psi


@njit(cache=True, inline="always")
def locate_record(lo, hi, counts, quant, X, i, qs, psis):
    """Fill ``qs``/``psis`` for record ``i`` and return the chi norm."""
    chi = 0.0
    for j in range(lo.shape[0]):
        q, psi = locate(lo[j], hi[j], counts[j], quant[j], X[i, j])
        qs[j] = q
        psis[j] = psi
        chi += (1.0 - psi) * (1.0 - psi) + psi * psi
    return chi


@njit(cache=True, inline="always")
def located_value(offsets, vals, k, qs, psis):
    total = 0.0
    for j in range(qs.shape[0]):
        p = offsets[j] + qs[j]
        psi = psis[j]
        if psi > 0.0:
            total += (1.0 - psi) * vals[k, p] + psi * vals[k, p + 1]
        else:
            total += vals[k, p]
    return total


@njit(cache=True, inline="always")
def spread(offsets, vals, k, qs, psis, step):
    """Add ``step*(1-psi)`` to each floor node and ``step*psi`` to each ceiling node."""
    for j in range(qs.shape[0]):
        p = offsets[j] + qs[j]
        psi = psis[j]
        vals[k, p] += step * (1.0 - psi)
        if psi > 0.0:
            vals[k, p + 1] += step * psi


@njit(cache=True, nogil=True)
def evaluate_many(lo, hi, counts, offsets, quant, vals, X):
    """Outputs of every operator row for every record, shape (N, K)."""
    m = lo.shape[0]
    K = vals.shape[0]
    qs = np.empty(m, dtype=np.int64)
    psis = np.empty(m)
    out = np.empty((X.shape[0], K))
    for i in range(X.shape[0]):
        locate_record(lo, hi, counts, quant, X, i, qs, psis)
        for k in range(K):
            out[i, k] = located_value(offsets, vals, k, qs, psis)
    return out


@njit(cache=True, inline="always")
def kaczmarz(lo, hi, counts, offsets, quant, vals, k, X, i, z, alpha, qs, psis):
    """One projection step of operator row ``k`` toward ``z``; returns the pre-step residual."""
    chi = locate_record(lo, hi, counts, quant, X, i, qs, psis)
    d = z - located_value(offsets, vals, k, qs, psis)
    spread(offsets, vals, k, qs, psis, alpha * d / chi)
    return d


@njit(cache=True, nogil=True)
def kaczmarz_epoch(lo, hi, counts, offsets, quant, vals, k, X, Z, alpha, order):
    """One pass over ``order``; returns the mean absolute pre-step residual."""
    m = lo.shape[0]
    qs = np.empty(m, dtype=np.int64)
    psis = np.empty(m)
    acc = 0.0
    for i in order:
        acc += abs(kaczmarz(lo, hi, counts, offsets, quant, vals, k, X, i, Z[i], alpha, qs, psis))
    return acc / max(order.shape[0], 1)


# -- tree ------------------------------------------------------------------


@njit(cache=True, inline="always")
def root_eval(rlo, rhi, rvals, k, phi):
    """Value and slope of root function ``k`` at ``phi``, extrapolating past the domain."""
    n = rvals.shape[1]
    width = rhi[k] - rlo[k]
    t = (n - 1) * (phi - rlo[k]) / width
    s = int(math.floor(t))
    if s < 0:
        s = 0
    elif s > n - 2:
        s = n - 2
    w = t - s
    v0 = rvals[k, s]
    v1 = rvals[k, s + 1]
    return (1.0 - w) * v0 + w * v1, (v1 - v0) * (n - 1) / width


@njit(cache=True, inline="always")
def threshold(zeta, delta):
    if abs(zeta) >= delta:
        return zeta
    if zeta >= 0.0:
        return delta
    return -delta


@njit(cache=True, inline="always")
def root_delta(rvals, k, delta):
    """``delta`` if positive, else 1e-3 of the root function's output range (floor 1e-6)."""
    if delta > 0.0:
        return delta
    lo = rvals[k, 0]
    hi = rvals[k, 0]
    for p in range(1, rvals.shape[1]):
        v = rvals[k, p]
        if v < lo:
            lo = v
        elif v > hi:
            hi = v
    return max(1e-3 * (hi - lo), 1e-6)


@njit(cache=True, inline="always")
def regrid(rlo, rhi, rvals, k, new_lo, new_hi, scratch):
    """Move root function ``k`` onto a uniform grid over [new_lo, new_hi]."""
    n = rvals.shape[1]
    for p in range(n):
        at = new_lo + (new_hi - new_lo) * p / (n - 1)
        scratch[p], _ = root_eval(rlo, rhi, rvals, k, at)
    for p in range(n):
        rvals[k, p] = scratch[p]
    rlo[k] = new_lo
    rhi[k] = new_hi


@njit(cache=True, inline="always")
def reposition(rlo, rhi, rvals, k, value, scratch):
    if value < rlo[k]:
        regrid(rlo, rhi, rvals, k, value, rhi[k], scratch)
        return True
    if value > rhi[k]:
        regrid(rlo, rhi, rvals, k, rlo[k], value, scratch)
        return True
    return False


@njit(cache=True, nogil=True)
def tree_predict(lo, hi, counts, offsets, quant, bvals, rlo, rhi, rvals, X, clamp):
    """Tree outputs and auxiliary variables for every record."""
    m = lo.shape[0]
    K = bvals.shape[0]
    qs = np.empty(m, dtype=np.int64)
    psis = np.empty(m)
    out = np.empty(X.shape[0])
    phi = np.empty((X.shape[0], K))
    for i in range(X.shape[0]):
        locate_record(lo, hi, counts, quant, X, i, qs, psis)
        total = 0.0
        for k in range(K):
            p = located_value(offsets, bvals, k, qs, psis)
            phi[i, k] = p
            if clamp:
                p = min(max(p, rlo[k]), rhi[k])
            v, _ = root_eval(rlo, rhi, rvals, k, p)
            total += v
        out[i] = total
    return out, phi


@njit(cache=True, inline="always")
def tree_step(lo, hi, counts, offsets, quant, bvals, rlo, rhi, rvals, X, i, z,
              mu, delta, alpha_b, alpha_r, qs, psis, rqs, rpsis, phi, dphi, slope, scratch):
    """Record-by-record descent step in place.

    Returns (accepted, residual before the step).
    """
    K = bvals.shape[0]
    nr = rvals.shape[1]
    chi = locate_record(lo, hi, counts, quant, X, i, qs, psis)
    zhat = 0.0
    for k in range(K):
        phi[k] = located_value(offsets, bvals, k, qs, psis)
        v, slope[k] = root_eval(rlo, rhi, rvals, k, phi[k])
        zhat += v
    r = z - zhat
    err = abs(r)
    shifted = 0.0
    for k in range(K):
        dphi[k] = mu * r / (K * threshold(slope[k], root_delta(rvals, k, delta)))
        v, _ = root_eval(rlo, rhi, rvals, k, phi[k] + dphi[k])
        shifted += v
    # strict decrease required; NaN also lands here
    if not abs(z - shifted) < err:
        return False, r

    for k in range(K):
        spread(offsets, bvals, k, qs, psis, alpha_b * dphi[k] / chi)
        phi[k] += dphi[k]
        reposition(rlo, rhi, rvals, k, phi[k], scratch)

    rchi = 0.0
    rz = 0.0
    for k in range(K):
        q, psi = locate(rlo[k], rhi[k], nr, False, phi[k])
        rqs[k] = q
        rpsis[k] = psi
        rchi += (1.0 - psi) * (1.0 - psi) + psi * psi
        if psi > 0.0:
            rz += (1.0 - psi) * rvals[k, q] + psi * rvals[k, q + 1]
        else:
            rz += rvals[k, q]
    step = alpha_r * (z - rz) / rchi
    for k in range(K):
        psi = rpsis[k]
        rvals[k, rqs[k]] += step * (1.0 - psi)
        if psi > 0.0:
            rvals[k, rqs[k] + 1] += step * psi
    return True, r


@njit(cache=True, nogil=True)
def tree_epoch(lo, hi, counts, offsets, quant, bvals, rlo, rhi, rvals, X, Z,
               mu, delta, alpha_b, alpha_r, order):
    """One pass of tree_step over ``order``; returns (mean |R|, skipped count)."""
    m = lo.shape[0]
    K = bvals.shape[0]
    qs = np.empty(m, dtype=np.int64)
    psis = np.empty(m)
    rqs = np.empty(K, dtype=np.int64)
    rpsis = np.empty(K)
    phi = np.empty(K)
    dphi = np.empty(K)
    slope = np.empty(K)
    scratch = np.empty(rvals.shape[1])
    acc = 0.0
    skipped = 0
    for i in order:
        ok, r = tree_step(lo, hi, counts, offsets, quant, bvals, rlo, rhi, rvals, X, i, Z[i],
                          mu, delta, alpha_b, alpha_r, qs, psis, rqs, rpsis, phi, dphi, slope,
                          scratch)
        acc += abs(r)
        if not ok:
            skipped += 1
    return acc / max(order.shape[0], 1), skipped


# -- plain linear regression -----------------------------------------------


@njit(cache=True, nogil=True)
def linear_epoch(w, X, Z, alpha, order):
    """Projection steps for z = w.x (no intercept); returns mean |D|."""
    m = w.shape[0]
    acc = 0.0
    for i in order:
        dot = 0.0
        norm = 0.0
        for j in range(m):
            dot += w[j] * X[i, j]
            norm += X[i, j] * X[i, j]
        d = Z[i] - dot
        acc += abs(d)
        if norm > 0.0:
            step = alpha * d / norm
            for j in range(m):
                w[j] += step * X[i, j]
    return acc / max(order.shape[0], 1)
