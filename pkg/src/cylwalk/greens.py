"""Green functions that need no finite window.

``lattice_green`` evaluates the Green function of simple random walk on Z^D
(D >= 3) from the occupation-time representation

    G(x) = D * int_0^inf prod_i exp(-s) I_{|x_i|}(s) ds,

integrated by composite Gauss-Legendre on geometric panels plus an
asymptotic tail.  ``slab_green`` gives the Green function of the walk on the
cylinder killed outside a slab T x [zlo, zhi]; it diagonalizes the torus
directions by Fourier modes and solves one tridiagonal system per mode.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import linalg, special

_GL_NODES = 40
_N_TAIL = 10


def _asymptotic_coeffs(nu: int, n_terms: int) -> np.ndarray:
    # ive(nu, s) ~ (2 pi s)^(-1/2) sum_k (-1)^k a_k(nu) s^(-k)
    mu = 4.0 * nu * nu
    out = np.empty(n_terms)
    a = 1.0
    for k in range(n_terms):
        out[k] = (-1) ** k * a
        a *= (mu - (2 * k + 1) ** 2) / ((k + 1) * 8.0)
    return out


@lru_cache(maxsize=8)
def _quadrature(s_max: float) -> tuple:
    x, w = np.polynomial.legendre.leggauss(_GL_NODES)
    edges = [0.0, 0.125]
    while edges[-1] < s_max:
        edges.append(min(2.0 * edges[-1], s_max))
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _green_keys(keys: np.ndarray, D: int) -> np.ndarray:
    """G for rows of non-negative integer displacements (shape (m, D))."""
    nu_max = int(keys.max()) if keys.size else 0
    s_max = float(max(512.0, 32.0 * nu_max**2))
    s, w = _quadrature(s_max)
    table = special.ive(np.arange(nu_max + 1)[:, None], s[None, :])
    prod = np.ones((len(keys), len(s)))
    for i in range(D):
        prod *= table[keys[:, i]]
    body = prod @ w
    # tail: product of asymptotic series, integrated term by term
    coeffs = np.stack([_asymptotic_coeffs(n, _N_TAIL) for n in range(nu_max + 1)])
    tail = np.empty(len(keys))
    for j, row in enumerate(keys):
        c = np.array([1.0])
        for nu in row:
            c = np.convolve(c, coeffs[nu])[:_N_TAIL]
        k = np.arange(len(c))
        expo = D / 2.0 + k - 1.0
        tail[j] = (2 * math.pi) ** (-D / 2.0) * np.sum(c * s_max ** (-expo) / expo)
    return D * (body + tail)


_cache: dict = {}


def lattice_green(disp, D: int | None = None) -> np.ndarray:
    """Green function G(x) of SRW on Z^D at displacement(s) ``disp``.

    ``disp`` is a single displacement or an (m, D) array.  Values are cached
    by the symmetry class (sorted absolute coordinates).
    """
    arr = np.atleast_2d(np.asarray(disp, dtype=np.int64))
    D = arr.shape[1] if D is None else D
    if D < 3:
        raise ValueError("the walk is recurrent for D < 3")
    keys = np.sort(np.abs(arr), axis=1)
    # scalar codes make np.unique fast on millions of rows
    base = int(keys.max()) + 1 if keys.size else 1
    code = np.zeros(len(keys), dtype=np.int64)
    for i in range(D):
        code = code * base + keys[:, i]
    ucode, first, inv = np.unique(code, return_index=True, return_inverse=True)
    uniq = keys[first]
    inv = inv.reshape(-1)
    vals = np.empty(len(uniq))
    missing = []
    for i, k in enumerate(map(tuple, uniq)):
        v = _cache.get((D, k))
        if v is None:
            missing.append(i)
        else:
            vals[i] = v
    if missing:
        new = _green_keys(uniq[missing], D)
        for i, v in zip(missing, new):
            vals[i] = v
            _cache[(D, tuple(uniq[i]))] = float(v)
    out = vals[inv]
    return out if np.ndim(disp) > 1 else out[0]


def green_matrix(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Matrix G(p - q) for rows p of P and q of Q (lattice points)."""
    P = np.asarray(P, dtype=np.int64)
    Q = np.asarray(Q, dtype=np.int64)
    diff = (P[:, None, :] - Q[None, :, :]).reshape(-1, P.shape[1])
    return lattice_green(diff, P.shape[1]).reshape(len(P), len(Q))


def green_error_bound() -> float:
    """Conservative absolute accuracy of ``lattice_green`` values."""
    return 1e-11


def slab_green(N: int, d: int, zlo: int, zhi: int, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Green function g_U(p, q) of the cylinder walk killed outside U = T x [zlo, zhi].

    P, Q are (m, d+1) arrays of cylinder points inside U.
    """
    P = np.asarray(P, dtype=np.int64)
    Q = np.asarray(Q, dtype=np.int64)
    L = zhi - zlo + 1
    if L < 1:
        raise ValueError("empty slab")
    for X in (P, Q):
        if len(X) and (X[:, -1].min() < zlo or X[:, -1].max() > zhi):
            raise ValueError("points outside the slab")
    ks = np.indices((N,) * d).reshape(d, -1).T
    csum = np.cos(2 * np.pi * ks / N).sum(axis=1)
    csum_r = np.round(csum, 12)
    cvals, cinv = np.unique(csum_r, return_inverse=True)
    zq = np.unique(Q[:, -1])
    zp = np.unique(P[:, -1])
    # G_c(z, z') for each distinct mode value c, z in zp, z' in zq
    a = 1.0 / (2 * (d + 1))
    rhs = np.zeros((L, len(zq)))
    rhs[zq - zlo, np.arange(len(zq))] = 1.0
    Gc = np.empty((len(cvals), len(zp), len(zq)))
    ab = np.empty((3, L))
    for i, c in enumerate(cvals):
        ab[0, :] = -a
        ab[1, :] = 1.0 - 2 * a * c
        ab[2, :] = -a
        sol = linalg.solve_banded((1, 1), ab, rhs)
        Gc[i] = sol[zp - zlo]
    # inverse FFT over torus modes for every height pair
    shape = (N,) * d
    out = np.empty((len(P), len(Q)))
    pi_idx = {z: i for i, z in enumerate(zp)}
    qi_idx = {z: i for i, z in enumerate(zq)}
    cache = {}
    for a_i, p in enumerate(P):
        for b_i, q in enumerate(Q):
            key = (pi_idx[p[-1]], qi_idx[q[-1]])
            field = cache.get(key)
            if field is None:
                F = Gc[cinv, key[0], key[1]].reshape(shape)
                field = np.fft.ifftn(F).real
                cache[key] = field
            dy = tuple((p[:d] - q[:d]) % N)
            out[a_i, b_i] = field[dy]
    return out
