"""Compiled inner loops.

Every kernel takes an explicit 32-bit seed and reseeds numba's generator, so
results depend only on the arguments.
"""
import numpy as np
from numba import njit

NOT_VISITED = np.iinfo(np.int64).max


@njit(cache=True)
def _pm1():
    return 1 if np.random.random() < 0.5 else -1


@njit(cache=True)
def _torus_rep(t, N):
    return t - N if t > N // 2 else t


# ---------------------------------------------------------------- cylinder walk


@njit(cache=True)
def cyl_step(y, z, N, d):
    """One uniform nearest-neighbour step; updates y in place, returns new z."""
    k = np.random.randint(0, 2 * (d + 1))
    i = k >> 1
    s = 1 if (k & 1) == 0 else -1
    if i < d:
        y[i] = (y[i] + s + N) % N
        return z
    return z + s


@njit(cache=True)
def cyl_walk_until(y, z, N, d, lo, hi, mode, seed, cap):
    """Walk from (y, z) until mode 0: z <= lo or z >= hi; mode 1: lo <= z <= hi.

    ``y`` is updated in place; returns (z, steps).  steps = -1 on cap.
    """
    if seed >= 0:
        np.random.seed(seed)
    n = 0
    while True:
        if mode == 0:
            if z <= lo or z >= hi:
                return z, n
        else:
            if lo <= z and z <= hi:
                return z, n
        if n >= cap:
            return z, -1
        z = cyl_step(y, z, N, d)
        n += 1


@njit(cache=True)
def _box_index(y, z, N, d, a):
    """Index of (y, z) in the centred box of radius a (torus reps), or -1."""
    if z < -a or z > a:
        return -1
    idx = 0
    w = 2 * a + 1
    for i in range(d):
        t = _torus_rep(y[i], N)
        if t < -a or t > a:
            return -1
        idx = idx * w + (t + a)
    return idx * w + (z + a)


@njit(cache=True)
def walk_trace_to_departure(N, d, r, h, K, a, seed, cap):
    """Trace in B(0, a) of the walk from uniform T x {0} up to D^0_K.

    Returns (visited mask over the box, D^0_K).  D^0_K = -1 on cap.
    """
    np.random.seed(seed)
    w = 2 * a + 1
    mask = np.zeros(w ** (d + 1), dtype=np.uint8)
    y = np.empty(d, dtype=np.int64)
    for i in range(d):
        y[i] = np.random.randint(0, N)
    z = 0
    n = 0
    k = _box_index(y, z, N, d, a)
    if k >= 0:
        mask[k] = 1
    if K == 0:
        return mask, 0
    done = 0
    inside = True  # R_1 = 0 since the start is in B(0)
    while True:
        if n >= cap:
            return mask, -1
        z = cyl_step(y, z, N, d)
        n += 1
        k = _box_index(y, z, N, d, a)
        if k >= 0:
            mask[k] = 1
        if inside:
            if z <= -h or z >= h:
                done += 1
                inside = False
                if done == K:
                    return mask, n
        else:
            if -r <= z and z <= r:
                inside = True


@njit(cache=True)
def special_excursion_in_box(y, z, N, d, h, a, c, seed, cap, path):
    """Walk from (y, z) until exiting T x (-h, h), watching the boxes B(0,a) and B(0,c).

    Returns (hit, entry index in B(0,a), mask of B(0,a) visited from H_A on,
    length of the path from H_A to the exit of B(0,c) written into ``path``
    as rows (y..., z), steps).  steps = -1 on cap.
    """
    np.random.seed(seed)
    w = 2 * a + 1
    mask = np.zeros(w ** (d + 1), dtype=np.uint8)
    hit = False
    entry = -1
    plen = 0
    recording = False
    n = 0
    while True:
        k = _box_index(y, z, N, d, a)
        if k >= 0:
            mask[k] = 1
            if not hit:
                hit = True
                entry = k
                recording = True
        if recording:
            if plen < path.shape[0]:
                for i in range(d):
                    path[plen, i] = y[i]
                path[plen, d] = z
            plen += 1
            if _box_index(y, z, N, d, c) < 0:
                recording = False
        if z <= -h or z >= h:
            return hit, entry, mask, plen, n
        if n >= cap:
            return hit, entry, mask, plen, -1
        z = cyl_step(y, z, N, d)
        n += 1


# ---------------------------------------------------------------- height process


@njit(cache=True)
def exit_signs(z0, r, h, n, seed):
    """Signs of Z at the first n departures from (-h, h); re-entry happens at +-r."""
    np.random.seed(seed)
    out = np.empty(n, dtype=np.int64)
    z = z0
    for k in range(n):
        while -h < z and z < h:
            z += _pm1()
        s = 1 if z > 0 else -1
        out[k] = s
        z = s * r
    return out


@njit(cache=True)
def hit_before_exit(z_start, z0, h, reps, seed):
    """For each rep: did the +-1 walk from z_start visit z0 before leaving (-h, h), and exit sign."""
    np.random.seed(seed)
    hits = np.zeros(reps, dtype=np.uint8)
    signs = np.empty(reps, dtype=np.int64)
    for i in range(reps):
        z = z_start
        hit = z == z0
        while -h < z and z < h:
            z += _pm1()
            if z == z0:
                hit = True
        hits[i] = hit
        signs[i] = 1 if z > 0 else -1
    return hits, signs


@njit(cache=True)
def visits_before_exit(h, reps, seed):
    """Visits to 0 (start included) of the +-1 walk before leaving (-h, h)."""
    np.random.seed(seed)
    out = np.empty(reps, dtype=np.int64)
    for i in range(reps):
        y = 0
        v = 1
        while True:
            y += _pm1()
            if y == 0:
                v += 1
            elif y == h or y == -h:
                break
        out[i] = v
    return out


@njit(cache=True)
def lazy_height_path(n, p_move, seed):
    """Heights of the cylinder walk for n steps (moves w.p. p_move)."""
    np.random.seed(seed)
    out = np.empty(n + 1, dtype=np.int64)
    z = 0
    out[0] = 0
    for k in range(1, n + 1):
        if np.random.random() < p_move:
            z += _pm1()
        out[k] = z
    return out


@njit(cache=True)
def departure_infimum(r, h, K, p_move, zmax, seed, cap):
    """First time some |z| <= zmax completes K excursions from B(z) to outside B~(z).

    Tracks every height by a two-state machine updated in O(1) per vertical
    move; time is counted in walk steps (geometric gaps between vertical
    moves).  Returns (D, argmin z, vertical moves); D = -1 on cap.
    """
    np.random.seed(seed)
    W = h + 1024
    state = np.zeros(2 * W + 1, dtype=np.uint8)
    cnt = np.zeros(2 * W + 1, dtype=np.int64)
    for z in range(-r, r + 1):
        if abs(z) <= zmax:
            state[z + W] = 1
    t = 0
    y = 0
    m = 0
    while True:
        if t >= cap:
            return -1, 0, m
        t += np.random.geometric(p_move)
        s = _pm1()
        y += s
        m += 1
        if abs(y) + h + 2 > W:
            W2 = 2 * W
            st2 = np.zeros(2 * W2 + 1, dtype=np.uint8)
            c2 = np.zeros(2 * W2 + 1, dtype=np.int64)
            st2[W2 - W: W2 + W + 1] = state
            c2[W2 - W: W2 + W + 1] = cnt
            state = st2
            cnt = c2
            W = W2
        ze = y + s * r
        if abs(ze) <= zmax and state[ze + W] == 0:
            state[ze + W] = 1
        zx = y - s * h
        if abs(zx) <= zmax and state[zx + W] == 1:
            state[zx + W] = 0
            cnt[zx + W] += 1
            if cnt[zx + W] == K:
                return t, zx, m


@njit(cache=True)
def zeta_hits(thr, reps, seed, cap):
    """k* = first k with max_z #{m < k: S_m = z} >= thr, for reps +-1 walks."""
    np.random.seed(seed)
    out = np.empty(reps, dtype=np.int64)
    W = 1024
    L = np.zeros(2 * W + 1, dtype=np.int64)
    for i in range(reps):
        L[:] = 0
        y = 0
        k = 0
        lo = 0
        hi = 0
        while True:
            L[y + W] += 1
            k += 1
            if L[y + W] >= thr:
                break
            if k >= cap:
                k = -1
                break
            y += _pm1()
            if y < lo:
                lo = y
            if y > hi:
                hi = y
            if abs(y) >= W:
                W2 = 2 * W
                L2 = np.zeros(2 * W2 + 1, dtype=np.int64)
                L2[W2 - W: W2 + W + 1] = L
                L = L2
                W = W2
        out[i] = k
    return out


# ---------------------------------------------------------------- disconnection


@njit(cache=True)
def _torus_index(y, N, d):
    idx = 0
    for i in range(d):
        idx = idx * N + y[i]
    return idx


@njit(cache=True)
def vacant_crossing(fv, t, N, d, off, zlo, zhi):
    """True if vacant sites {fv > t} connect level zlo to level zhi (heights relative to off)."""
    S = N ** d
    L = zhi - zlo + 1
    seen = np.zeros(S * L, dtype=np.uint8)
    queue = np.empty(S * L, dtype=np.int64)
    head = 0
    tail = 0
    base = (zlo + off) * S
    for j in range(S):
        if fv[base + j] > t:
            seen[j] = 1
            queue[tail] = j
            tail += 1
    coord = np.empty(d, dtype=np.int64)
    while head < tail:
        q = queue[head]
        head += 1
        lvl = q // S
        tor = q - lvl * S
        if lvl == L - 1:
            return True
        rem = tor
        for i in range(d - 1, -1, -1):
            coord[i] = rem % N
            rem //= N
        for i in range(d):
            stride = N ** (d - 1 - i)
            for s in (-1, 1):
                c2 = (coord[i] + s + N) % N
                nt = tor + (c2 - coord[i]) * stride
                nq = lvl * S + nt
                if seen[nq] == 0 and fv[(lvl + zlo + off) * S + nt] > t:
                    seen[nq] = 1
                    queue[tail] = nq
                    tail += 1
        for s in (-1, 1):
            l2 = lvl + s
            if 0 <= l2 and l2 < L:
                nq = l2 * S + tor
                if seen[nq] == 0 and fv[(l2 + zlo + off) * S + tor] > t:
                    seen[nq] = 1
                    queue[tail] = nq
                    tail += 1
    return False


@njit(cache=True)
def disconnection_run(N, d, check_every, seed, cap):
    """Run the walk from uniform T x {0} until its trace disconnects the cylinder.

    Returns (T_N, first-visit times fv, offset, zmin, zmax, checks).  Heights
    z are stored at level z + offset; T_N = -1 on cap.
    """
    np.random.seed(seed)
    S = N ** d
    off = 256
    nlev = 2 * off + 1
    fv = np.full(S * nlev, NOT_VISITED, dtype=np.int64)
    y = np.empty(d, dtype=np.int64)
    for i in range(d):
        y[i] = np.random.randint(0, N)
    z = 0
    fv[(z + off) * S + _torus_index(y, N, d)] = 0
    zmin = 0
    zmax = 0
    n = 0
    visited = 1
    last_neg = 0
    checks = 0
    while True:
        if n >= cap:
            return -1, fv, off, zmin, zmax, checks
        z = cyl_step(y, z, N, d)
        n += 1
        if z + off < 1 or z + off > nlev - 2:
            off2 = 2 * off
            nlev2 = 2 * off2 + 1
            fv2 = np.full(S * nlev2, NOT_VISITED, dtype=np.int64)
            fv2[(off2 - off) * S: (off2 - off) * S + S * nlev] = fv
            fv = fv2
            off = off2
            nlev = nlev2
        site = (z + off) * S + _torus_index(y, N, d)
        if fv[site] == NOT_VISITED:
            fv[site] = n
            visited += 1
        if z < zmin:
            zmin = z
        if z > zmax:
            zmax = z
        if n % check_every == 0 and visited >= S:
            checks += 1
            if not vacant_crossing(fv, n, N, d, off, zmin - 1, zmax + 1):
                lo = last_neg
                hi = n
                while hi - lo > 1:
                    mid = (lo + hi) // 2
                    checks += 1
                    if vacant_crossing(fv, mid, N, d, off, zmin - 1, zmax + 1):
                        lo = mid
                    else:
                        hi = mid
                return hi, fv, off, zmin, zmax, checks
            last_neg = n


# ---------------------------------------------------------------- interlacements


@njit(cache=True)
def _sample_cum(cum, total, u):
    # index of the first cum > u (cum increasing, last entry = total)
    lo = 0
    hi = cum.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def ri_trajectory(start, nbr, qcum, entry, buf, cap):
    """One forward trajectory observed inside a finite set F.

    ``nbr[k, j]`` is the index in F of the j-th neighbour of point k, or
    -(o+1) for the o-th outer-boundary point.  ``qcum[o]`` holds cumulative
    re-entry probabilities onto ``entry`` (points of F); the remaining mass
    is escape to infinity.  Visited indices go to ``buf``; jumps are flagged
    by storing -(k+1).  Returns the number of entries (or -1 on cap).
    """
    cur = start
    n = 0
    buf[n] = cur
    n += 1
    D2 = nbr.shape[1]
    while True:
        c = nbr[cur, np.random.randint(0, D2)]
        if c >= 0:
            cur = c
            if n >= cap:
                return -1
            buf[n] = cur
            n += 1
        else:
            o = -c - 1
            u = np.random.random()
            row = qcum[o]
            if u >= row[row.shape[0] - 1]:
                return n
            cur = entry[_sample_cum(row, row[row.shape[0] - 1], u)]
            if n >= cap:
                return -1
            buf[n] = -(cur + 1)
            n += 1


@njit(cache=True)
def _ri_sample(lam, scum, starts, nbr, qcum, entry, buf, stamp, tag, cap):
    """Mark (stamp[k] = tag) every point visited by one interlacement sample.

    ``scum`` is the cumulative start law over the points ``starts``.
    """
    J = np.random.poisson(lam)
    stot = scum[scum.shape[0] - 1]
    for j in range(J):
        s = starts[_sample_cum(scum, stot, np.random.random() * stot)]
        n = ri_trajectory(s, nbr, qcum, entry, buf, cap)
        if n < 0:
            return -1
        for i in range(n):
            k = buf[i]
            if k < 0:
                k = -k - 1
            stamp[k] = tag
    return J


@njit(cache=True)
def ri_void(lam, scum, starts, nbr, qcum, entry, target, reps, seed, cap):
    """Count samples whose trace misses the marked target points."""
    np.random.seed(seed)
    n = nbr.shape[0]
    stamp = np.full(n, -1, dtype=np.int64)
    buf = np.empty(cap + 1, dtype=np.int64)
    void = 0
    empty = 0
    for r in range(reps):
        J = _ri_sample(lam, scum, starts, nbr, qcum, entry, buf, stamp, r, cap)
        if J < 0:
            return -1, -1
        if J == 0:
            empty += 1
        hit = False
        for k in range(n):
            if target[k] and stamp[k] == r:
                hit = True
                break
        if not hit:
            void += 1
    return void, empty


@njit(cache=True)
def ri_coverage(lam, scum, starts, nbr, qcum, entry, window, reps, seed, cap):
    """Per-point hit counts and per-sample |trace on window| over reps samples."""
    np.random.seed(seed)
    n = nbr.shape[0]
    stamp = np.full(n, -1, dtype=np.int64)
    buf = np.empty(cap + 1, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    sizes = np.zeros(reps, dtype=np.int64)
    for r in range(reps):
        if _ri_sample(lam, scum, starts, nbr, qcum, entry, buf, stamp, r, cap) < 0:
            sizes[r] = -1
            continue
        s = 0
        for k in range(n):
            if stamp[k] == r:
                counts[k] += 1
                if window[k]:
                    s += 1
        sizes[r] = s
    return counts, sizes


@njit(cache=True)
def planar_star_reach(occ, L):
    """Is there a *-path of occupied sites of the (2L+1)^2 square from its centre to its border?"""
    w = 2 * L + 1
    c = L * w + L
    if not occ[c]:
        return False
    seen = np.zeros(w * w, dtype=np.uint8)
    queue = np.empty(w * w, dtype=np.int64)
    queue[0] = c
    seen[c] = 1
    head = 0
    tail = 1
    while head < tail:
        q = queue[head]
        head += 1
        i = q // w
        j = q - i * w
        if i == 0 or j == 0 or i == w - 1 or j == w - 1:
            return True
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                nq = (i + di) * w + (j + dj)
                if occ[nq] and seen[nq] == 0:
                    seen[nq] = 1
                    queue[tail] = nq
                    tail += 1
    return False


@njit(cache=True)
def ri_star(lam, scum, starts, nbr, qcum, entry, plane_idx, Ls, reps, seed, cap):
    """For each sample and each L in Ls: *-path from 0 to S(0, L) in the planar trace.

    ``plane_idx`` maps the (2Lmax+1)^2 planar square (row-major) to indices of F.
    """
    np.random.seed(seed)
    n = nbr.shape[0]
    stamp = np.full(n, -1, dtype=np.int64)
    buf = np.empty(cap + 1, dtype=np.int64)
    Lmax = 0
    for L in Ls:
        if L > Lmax:
            Lmax = L
    W = 2 * Lmax + 1
    out = np.zeros((reps, Ls.shape[0]), dtype=np.uint8)
    for r in range(reps):
        if _ri_sample(lam, scum, starts, nbr, qcum, entry, buf, stamp, r, cap) < 0:
            return out, -1
        for li in range(Ls.shape[0]):
            L = Ls[li]
            w = 2 * L + 1
            occ = np.zeros(w * w, dtype=np.uint8)
            for i in range(w):
                for j in range(w):
                    k = plane_idx[(i + Lmax - L) * W + (j + Lmax - L)]
                    occ[i * w + j] = stamp[k] == r
            out[r, li] = planar_star_reach(occ, L)
    return out, 0


@njit(cache=True)
def descend_to_band(y, z, N, d, r, m_mix, v_mix, seed, cap):
    """Walk from (y, z), |z| > r, until |z| <= r; ``y`` is updated in place.

    After ``m_mix`` horizontal moves followed by ``v_mix`` further vertical
    moves, the torus coordinate is uniform given the height path up to
    rho^m_mix (rho the second torus eigenvalue, parity mode excluded) plus
    (2d+1)^-v_mix (parity mode: each horizontal run between vertical moves
    has even length with probability (d+1)/(2d+1)).  It is then drawn
    uniformly and the torus part of the descent is not simulated.
    Returns (z at entrance, status): 0 simulated, 1 mixed, -1 cap.
    """
    if seed >= 0:
        np.random.seed(seed)
    mh = 0
    mv = 0
    n = 0
    while z > r or z < -r:
        if mv >= v_mix:
            for i in range(d):
                y[i] = np.random.randint(0, N)
            return (r if z > 0 else -r), 1
        if n >= cap:
            return z, -1
        z2 = cyl_step(y, z, N, d)
        if z2 == z:
            mh += 1
        elif mh >= m_mix:
            mv += 1
        z = z2
        n += 1
    return z, 0


@njit(cache=True)
def first_success_trial(r, z0, h, target, max_trials, seed):
    """Index of the first iid trial (start +-r w.p. 1/2) that visits z0 before
    leaving (-h, h) and leaves through the side ``target`` (+1 or -1).

    Returns -1 if none within max_trials.
    """
    np.random.seed(seed)
    for i in range(1, max_trials + 1):
        z = r if np.random.random() < 0.5 else -r
        hit = z == z0
        while -h < z and z < h:
            z += _pm1()
            if z == z0:
                hit = True
        s = 1 if z > 0 else -1
        if hit and s == target:
            return i
    return -1


@njit(cache=True)
def ri_window_masks(lam, scum, starts, nbr, qcum, entry, window_idx, reps, seed, cap):
    """Per-sample indicator of I^u on the listed points of F, shape (reps, len(window_idx))."""
    np.random.seed(seed)
    n = nbr.shape[0]
    stamp = np.full(n, -1, dtype=np.int64)
    buf = np.empty(cap + 1, dtype=np.int64)
    out = np.zeros((reps, window_idx.shape[0]), dtype=np.uint8)
    for r in range(reps):
        if _ri_sample(lam, scum, starts, nbr, qcum, entry, buf, stamp, r, cap) < 0:
            return out, -1
        for i in range(window_idx.shape[0]):
            if stamp[window_idx[i]] == r:
                out[r, i] = 1
    return out, 0


@njit(cache=True)
def visits_before_departure(r, h, K, reps, seed, limit):
    """Visits of the +-1 walk from 0 to 0 before its K-th departure from (-h, h) after a return to [-r, r].

    Counts are capped at ``limit`` (a run stops there).  The way back from
    +-h to [-r, r] has no visits to 0 and ends at +-r on the same side, so it
    is skipped; its heavy-tailed duration would otherwise dominate the cost.
    """
    np.random.seed(seed)
    out = np.zeros(reps, dtype=np.int64)
    for i in range(reps):
        y = 0
        v = 0
        done = 0
        while True:
            if y == 0:
                v += 1
                if v >= limit:
                    break
            y += _pm1()
            if y <= -h or y >= h:
                done += 1
                if done == K:
                    break
                y = r if y > 0 else -r
        out[i] = v
    return out
