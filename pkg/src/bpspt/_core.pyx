# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled event loop for the built-in targets and kernels.

Mirrors ``bpspt.engine`` step for step, including the order of random
draws, using numpy's C distribution functions on the caller's generator.
"""

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, log, log1p, sqrt, INFINITY, isfinite
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (random_standard_exponential, random_standard_normal,
                                           random_standard_uniform)

from .errors import DivergenceError, DominanceError

cnp.import_array()

cdef enum:
    MAX_BLOCK = 6
    MAX_NBRS = 64

cdef enum:
    K_GAUSSIAN = 0
    K_MIXTURE = 1
    K_NEAL = 2
    K_BIMODAL = 3

cdef enum:
    KER_NONE = 0
    KER_MH = 1
    KER_ST = 2

cdef double SLACK = 1e-9
cdef double LOG_FLOOR = -700.0


cdef struct Model:
    int kind
    int dim
    long n_states
    int nbits
    double horizon
    double s0
    double s1
    double* vec
    double* vec2


cdef struct Ctx:
    Model mod
    int kernel
    bint jumps
    bint debug
    double alpha_b
    double alpha_j
    double lam
    double* X
    long* Y
    double* V
    long* counts
    # scratch
    double* grads      # MAX_BLOCK * dim
    double* wtab       # MAX_BLOCK * MAX_NBRS * MAX_BLOCK  (member, k, nbr)
    double* jw         # MAX_BLOCK * MAX_NBRS
    long* nbrs         # MAX_BLOCK * MAX_NBRS
    int* nn            # MAX_BLOCK
    double* potall     # n_states
    double* logw       # 720
    double* marg       # MAX_BLOCK * MAX_BLOCK


# ---------------------------------------------------------------- models

cdef inline double softplus(double z) nogil:
    if z > 0:
        return z + log1p(exp(-z))
    return log1p(exp(z))


cdef inline double sigmoid(double z) nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef inline int popcount(long y) nogil:
    cdef int c = 0
    while y:
        y &= y - 1
        c += 1
    return c


cdef double m_potential(Model* M, double* x, long y):
    cdef int i
    cdef double s = 0.0, d, x1, x2, q
    if M.kind == K_GAUSSIAN:
        for i in range(M.dim):
            d = x[i] - M.vec[i]
            s += d * d
        return 0.5 * M.s0 * s
    elif M.kind == K_MIXTURE:
        for i in range(M.dim):
            d = x[i] - M.vec[y * M.dim + i]
            s += d * d
        return M.vec2[y] + s * M.s0 / 2.0
    elif M.kind == K_NEAL:
        x1 = x[0]
        x2 = x[1]
        return (0.5 * x1 * x1 + 0.5 * (x2 - x1) * (x2 - x1) * M.s0
                + M.nbits * softplus(x1) - (M.nbits - popcount(y)) * x1)
    else:
        q = x[0] * x[0] - M.s0
        return q * q / (4.0 * M.s1)


cdef void m_grad(Model* M, double* x, long y, double* g):
    cdef int i
    cdef double r
    if M.kind == K_GAUSSIAN:
        for i in range(M.dim):
            g[i] = M.s0 * (x[i] - M.vec[i])
    elif M.kind == K_MIXTURE:
        for i in range(M.dim):
            g[i] = (x[i] - M.vec[y * M.dim + i]) * M.s0
    elif M.kind == K_NEAL:
        r = (x[1] - x[0]) * M.s0
        g[0] = x[0] - r + M.nbits * sigmoid(x[0]) - (M.nbits - popcount(y))
        g[1] = r
    else:
        g[0] = x[0] * (x[0] * x[0] - M.s0) / M.s1


cdef inline double bimodal_dir(Model* M, double z, double w, double t):
    cdef double q = z + w * t
    return w * q * (q * q - M.s0) / M.s1


cdef void m_envelope(Model* M, double* x, long y, double* v, double h, double* a, double* b):
    cdef int i
    cdef double sa = 0.0, sb = 0.0, x1, x2, v1, v2, dv, n0, c, t, best, val
    if M.kind == K_GAUSSIAN:
        for i in range(M.dim):
            sa += v[i] * (x[i] - M.vec[i])
            sb += v[i] * v[i]
        a[0] = M.s0 * sa
        b[0] = M.s0 * sb
    elif M.kind == K_MIXTURE:
        for i in range(M.dim):
            sa += v[i] * (x[i] - M.vec[y * M.dim + i])
            sb += v[i] * v[i]
        a[0] = sa * M.s0
        b[0] = sb * M.s0
    elif M.kind == K_NEAL:
        x1 = x[0]
        x2 = x[1]
        v1 = v[0]
        v2 = v[1]
        n0 = M.nbits - popcount(y)
        dv = v2 - v1
        a[0] = x1 * v1 + (x2 - x1) * dv * M.s0 - v1 * n0 + (v1 if v1 > 0.0 else 0.0) * M.nbits
        b[0] = dv * dv * M.s0 + v1 * v1
    else:
        best = bimodal_dir(M, x[0], v[0], 0.0)
        val = bimodal_dir(M, x[0], v[0], h)
        if val > best:
            best = val
        if v[0] != 0.0:
            c = M.vec[0] / sqrt(3.0)
            t = (c - x[0]) / v[0]
            if 0.0 < t < h:
                val = bimodal_dir(M, x[0], v[0], t)
                if val > best:
                    best = val
            t = (-c - x[0]) / v[0]
            if 0.0 < t < h:
                val = bimodal_dir(M, x[0], v[0], t)
                if val > best:
                    best = val
        a[0] = best if best > 0.0 else 0.0
        b[0] = 0.0


cdef int m_neighbors(Model* M, long y, long* out):
    cdef long s
    cdef int n = 0, k
    if M.kind == K_NEAL:
        for k in range(M.nbits):
            out[k] = y ^ (1L << k)
        return M.nbits
    for s in range(M.n_states):
        if s != y:
            out[n] = s
            n += 1
    return n


# ---------------------------------------------------------------- kernels

cdef void st_row(double* logp, int K, long y, double* row, double* ws, int* order):
    # Suwa-Todo row, see kernels.suwa_todo_row_from_logp
    cdef int i, j, tmp, pos = 0
    cdef double mx = logp[0], z, wp, w1, tail = 0.0, acc = 0.0, inner = 0.0, v
    for i in range(1, K):
        if logp[i] > mx:
            mx = logp[i]
    for i in range(K):
        z = logp[i] - mx
        if z < LOG_FLOOR:
            z = LOG_FLOOR
        row[i] = exp(z)
        order[i] = i
    # insertion sort by (-w, index)
    for i in range(1, K):
        tmp = order[i]
        j = i - 1
        while j >= 0 and (row[order[j]] < row[tmp] or (row[order[j]] == row[tmp] and order[j] > tmp)):
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = tmp
    for i in range(K):
        ws[i] = row[order[i]]
        if order[i] == y:
            pos = i
    # contiguous-run expansion of D and w_i + w_j - D, as in the Python version;
    # (D, E) pairs go to ws[K + 2j], ws[K + 2j + 1]
    wp = ws[pos]
    w1 = ws[0]
    for j in range(pos + 1, K):
        tail += ws[j]
    ws[K] = w1 - tail
    ws[K + 1] = wp + tail
    j = pos
    while j > 0:
        if j == pos:
            ws[K + 2 * j] = w1 + wp
            ws[K + 2 * j + 1] = wp - w1
        else:
            ws[K + 2 * j] = w1 + (ws[j] + acc + wp)
            ws[K + 2 * j + 1] = -(w1 + acc)
            acc += ws[j]
        j -= 1
    for j in range(pos + 1, K):
        ws[K + 2 * j] = w1 - inner
        ws[K + 2 * j + 1] = (wp + inner + ws[j]) - w1
        inner += ws[j]
    for j in range(K):
        v = ws[K + 2 * j]
        if ws[K + 2 * j + 1] < v:
            v = ws[K + 2 * j + 1]
        if wp < v:
            v = wp
        if ws[j] < v:
            v = ws[j]
        row[order[j]] = (v if v > 0.0 else 0.0) / wp


cdef void kernel_table(Ctx* c, int j, double* x, long y, double* bet, int m):
    """Weights of member j's moves at each block temperature into c.wtab."""
    cdef Model* M = &c.mod
    cdef long* nb = c.nbrs + j * MAX_NBRS
    cdef double* W = c.wtab + j * MAX_BLOCK * MAX_NBRS
    cdef int n = m_neighbors(M, y, nb), k, q
    cdef double u0, du, e
    cdef double dus[MAX_NBRS]
    cdef double logp[MAX_NBRS]
    cdef double row[MAX_NBRS]
    cdef double ws[3 * MAX_NBRS]
    cdef int order[MAX_NBRS]
    c.nn[j] = n
    if c.kernel == KER_MH:
        if M.kind == K_NEAL:
            for q in range(n):
                dus[q] = x[0] if ((y >> q) & 1) == 0 else -x[0]
        else:
            u0 = m_potential(M, x, y)
            for q in range(n):
                dus[q] = m_potential(M, x, nb[q]) - u0
        for k in range(m):
            for q in range(n):
                e = exp(-bet[k] * dus[q])
                W[k * MAX_NBRS + q] = (e if e < 1.0 else 1.0) / n
    else:
        for q in range(M.n_states):
            c.potall[q] = m_potential(M, x, q)
        for k in range(m):
            for q in range(M.n_states):
                logp[q] = -bet[k] * c.potall[q]
            st_row(logp, <int>M.n_states, y, row, ws, order)
            for q in range(n):
                W[k * MAX_NBRS + q] = row[nb[q]]


# ---------------------------------------------------------------- envelopes

cdef double invert_clipped(double* a, double* b, int m, double c, double h, double target, double* cuts):
    """Same algorithm as events.invert_clipped_sum; returns -1 for no arrival."""
    cdef int n = 0, i, j
    cdef double r, tmp, s0, s1, mid, alpha, slope, length, mass, remaining = target, disc
    for j in range(m):
        if b[j] != 0.0:
            r = -a[j] / b[j]
            if 0.0 < r < h:
                cuts[n] = r
                n += 1
    for i in range(1, n):
        tmp = cuts[i]
        j = i - 1
        while j >= 0 and cuts[j] > tmp:
            cuts[j + 1] = cuts[j]
            j -= 1
        cuts[j + 1] = tmp
    s0 = 0.0
    for i in range(n + 1):
        s1 = cuts[i] if i < n else h
        if s1 <= s0:
            continue
        mid = 0.5 * (s0 + s1)
        alpha = c
        slope = 0.0
        for j in range(m):
            if a[j] + b[j] * mid > 0.0:
                alpha += a[j] + b[j] * s0
                slope += b[j]
        if alpha < 0.0:
            alpha = 0.0
        if alpha == 0.0 and slope == 0.0:
            s0 = s1
            continue
        length = s1 - s0
        mass = alpha * length + 0.5 * slope * length * length
        if mass >= remaining:
            disc = alpha * alpha + 2.0 * slope * remaining
            if disc < 0.0:
                disc = 0.0
            return s0 + 2.0 * remaining / (alpha + sqrt(disc))
        remaining -= mass
        s0 = s1
    return -1.0


cdef inline double clipped_rate(double* a, double* b, int m, double c, double t):
    cdef double s = 0.0, z
    cdef int j
    for j in range(m):
        z = a[j] + b[j] * t
        if z > 0.0:
            s += z
    return c + s


# ---------------------------------------------------------------- tempering algebra

cdef void perm_marginals(double* u, double* bet, int m, int* perms, int P, double* logw, double* marg):
    cdef int p, j
    cdef double s, mx, tot = 0.0
    for p in range(P):
        s = 0.0
        for j in range(m):
            s += bet[perms[p * m + j]] * u[j]
        logw[p] = -s
    mx = logw[0]
    for p in range(1, P):
        if logw[p] > mx:
            mx = logw[p]
    for p in range(P):
        logw[p] = exp(logw[p] - mx)
        tot += logw[p]
    for p in range(P):
        logw[p] /= tot
    for j in range(m * m):
        marg[j] = 0.0
    for p in range(P):
        for j in range(m):
            marg[j * m + perms[p * m + j]] += logw[p]


cdef int categorical(double* w, int n, double u):
    cdef double tot = 0.0, cum = 0.0
    cdef int k
    for k in range(n):
        tot += w[k]
    u = u * tot
    for k in range(n):
        cum += w[k]
        if u < cum:
            return k
    return n - 1


# ---------------------------------------------------------------- event loop

cdef double event_rates(Ctx* c, long* members, int m, double* bet, int* perms, int P, double* parts) except? -2:
    cdef Model* M = &c.mod
    cdef int dim = M.dim, j, k, q
    cdef long i
    cdef double u[MAX_BLOCK]
    cdef double bbar[MAX_BLOCK]
    cdef double d, s, total = 0.0
    cdef double* g
    cdef double* W
    if m == 1:
        c.marg[0] = 1.0
        bbar[0] = bet[0]
    else:
        for j in range(m):
            i = members[j]
            u[j] = m_potential(M, c.X + i * dim, c.Y[i])
        perm_marginals(u, bet, m, perms, P, c.logw, c.marg)
        for j in range(m):
            s = 0.0
            for k in range(m):
                s += c.marg[j * m + k] * bet[k]
            bbar[j] = s
    for j in range(m):
        i = members[j]
        g = c.grads + j * dim
        m_grad(M, c.X + i * dim, c.Y[i], g)
        d = 0.0
        for k in range(dim):
            d += c.V[i * dim + k] * g[k]
        parts[2 * j] = c.alpha_b * bbar[j] * d if d > 0.0 else 0.0
        parts[2 * j + 1] = 0.0
        if c.jumps:
            kernel_table(c, j, c.X + i * dim, c.Y[i], bet, m)
            W = c.wtab + j * MAX_BLOCK * MAX_NBRS
            s = 0.0
            for q in range(c.nn[j]):
                d = 0.0
                for k in range(m):
                    d += c.marg[j * m + k] * W[k * MAX_NBRS + q]
                c.jw[j * MAX_NBRS + q] = d
                s += d
            parts[2 * j + 1] = c.alpha_j * s
    for j in range(2 * m):
        total += parts[j]
    return total


cdef int simulate_block(Ctx* c, long* members, int m, double* bet, double t0, double t1,
                        bitgen_t* bg, int* perms, int P) except -1:
    cdef Model* M = &c.mod
    cdef int dim = M.dim, j, k, r, kind
    cdef long i
    cdef double a[MAX_BLOCK]
    cdef double b[MAX_BLOCK]
    cdef double cuts[MAX_BLOCK]
    cdef double parts[2 * MAX_BLOCK]
    cdef double bmax = bet[0], scale, cj, t = t0, remaining, tau, tk, deadline, elapsed, h, dt
    cdef double bound, uu, total, gg, vg
    cdef bint fired
    cdef double* g
    for j in range(1, m):
        if bet[j] > bmax:
            bmax = bet[j]
    scale = bmax * c.alpha_b
    cj = m * c.alpha_j if c.jumps else 0.0
    while True:
        remaining = t1 - t
        if remaining <= 0.0:
            return 0
        r = 0
        tau = INFINITY
        for j in range(m):
            tk = random_standard_exponential(bg) / c.lam
            if tk < tau:
                tau = tk
                r = j
        deadline = tau if tau < remaining else remaining
        elapsed = 0.0
        fired = False
        while elapsed < deadline:
            h = deadline - elapsed
            if M.horizon < h:
                h = M.horizon
            for j in range(m):
                i = members[j]
                m_envelope(M, c.X + i * dim, c.Y[i], c.V + i * dim, h, a + j, b + j)
                a[j] = scale * a[j]
                b[j] = scale * b[j]
            dt = invert_clipped(a, b, m, cj, h, random_standard_exponential(bg), cuts)
            if dt < 0.0:
                for j in range(m):
                    i = members[j]
                    for k in range(dim):
                        c.X[i * dim + k] += c.V[i * dim + k] * h
                if h == deadline - elapsed:
                    elapsed = deadline
                else:
                    elapsed += h
                continue
            for j in range(m):
                i = members[j]
                for k in range(dim):
                    c.X[i * dim + k] += c.V[i * dim + k] * dt
            elapsed += dt
            c.counts[0] += 1
            bound = clipped_rate(a, b, m, cj, dt)
            uu = random_standard_uniform(bg)
            total = event_rates(c, members, m, bet, perms, P, parts)
            if not isfinite(total):
                raise DivergenceError(f"non-finite event rate at t={t + elapsed}")
            if c.debug and total > bound + SLACK * (1.0 + bound):
                raise DominanceError(f"event rate {total} exceeds envelope {bound} at t={t + elapsed}")
            if uu * bound < total:
                k = categorical(parts, 2 * m, random_standard_uniform(bg))
                j = k // 2
                kind = k % 2
                i = members[j]
                if kind == 0:
                    g = c.grads + j * dim
                    gg = 0.0
                    vg = 0.0
                    for k in range(dim):
                        gg += g[k] * g[k]
                        vg += c.V[i * dim + k] * g[k]
                    if gg == 0.0:
                        c.counts[1] += 1
                    else:
                        vg = 2.0 * vg / gg
                        for k in range(dim):
                            c.V[i * dim + k] = c.V[i * dim + k] - vg * g[k]
                        c.counts[2] += 1
                else:
                    k = categorical(c.jw + j * MAX_NBRS, c.nn[j], random_standard_uniform(bg))
                    c.Y[i] = c.nbrs[j * MAX_NBRS + k]
                    c.counts[3] += 1
                fired = True
                break
            c.counts[1] += 1
        t += elapsed
        if fired:
            continue
        if tau < remaining:
            i = members[r]
            for k in range(dim):
                c.V[i * dim + k] = random_standard_normal(bg)
            c.counts[4] += 1
        else:
            return 0


cdef void resample_block(Ctx* c, long* members, int m, double* bet, int* perms, int P, bitgen_t* bg,
                         double* xtmp, long* ytmp):
    cdef Model* M = &c.mod
    cdef int dim = M.dim, j, k, p
    cdef long i
    cdef double u[MAX_BLOCK]
    cdef bint moved = False
    for j in range(m):
        i = members[j]
        u[j] = m_potential(M, c.X + i * dim, c.Y[i])
    perm_marginals(u, bet, m, perms, P, c.logw, c.marg)
    p = categorical(c.logw, P, random_standard_uniform(bg))
    c.counts[5] += 1
    for j in range(m):
        if perms[p * m + j] != j:
            moved = True
    if not moved:
        return
    c.counts[6] += 1
    for j in range(m):
        i = members[j]
        ytmp[j] = c.Y[i]
        for k in range(dim):
            xtmp[j * dim + k] = c.X[i * dim + k]
    for j in range(m):
        i = members[perms[p * m + j]]
        c.Y[i] = ytmp[j]
        for k in range(dim):
            c.X[i * dim + k] = xtmp[j * dim + k]


# ---------------------------------------------------------------- python entry points

cdef class _Work:
    cdef object arrays
    cdef Ctx ctx

    def __init__(self, dict spec, int kernel_kind, X, Y, V, counts, double alpha_b, double alpha_j,
                 double lam, bint debug):
        cdef Model* M = &self.ctx.mod
        cdef cnp.ndarray vec = np.ascontiguousarray(spec["vec"], dtype=np.float64)
        cdef cnp.ndarray vec2 = np.ascontiguousarray(spec["vec2"], dtype=np.float64)
        dim = int(spec["dim"])
        n_states = int(spec["n_states"])
        grads = np.zeros(MAX_BLOCK * dim)
        wtab = np.zeros(MAX_BLOCK * MAX_BLOCK * MAX_NBRS)
        jw = np.zeros(MAX_BLOCK * MAX_NBRS)
        nbrs = np.zeros(MAX_BLOCK * MAX_NBRS, dtype=np.int64)
        nn = np.zeros(MAX_BLOCK, dtype=np.int32)
        potall = np.zeros(max(n_states, 1))
        logw = np.zeros(720)
        marg = np.zeros(MAX_BLOCK * MAX_BLOCK)
        self.arrays = [vec, vec2, X, Y, V, counts, grads, wtab, jw, nbrs, nn, potall, logw, marg]
        M.kind = int(spec["kind"])
        M.dim = dim
        M.n_states = n_states
        M.nbits = int(spec["nbits"])
        M.horizon = float(spec["horizon"])
        M.s0 = float(spec["s0"])
        M.s1 = float(spec["s1"])
        M.vec = <double*> cnp.PyArray_DATA(vec)
        M.vec2 = <double*> cnp.PyArray_DATA(vec2)
        self.ctx.kernel = kernel_kind
        self.ctx.jumps = kernel_kind != KER_NONE and alpha_j > 0.0 and (n_states > 1 or M.kind == K_NEAL)
        self.ctx.debug = debug
        self.ctx.alpha_b = alpha_b
        self.ctx.alpha_j = alpha_j
        self.ctx.lam = lam
        self.ctx.X = <double*> cnp.PyArray_DATA(X)
        self.ctx.Y = <long*> cnp.PyArray_DATA(Y)
        self.ctx.V = <double*> cnp.PyArray_DATA(V)
        self.ctx.counts = <long*> cnp.PyArray_DATA(counts)
        self.ctx.grads = <double*> cnp.PyArray_DATA(grads)
        self.ctx.wtab = <double*> cnp.PyArray_DATA(wtab)
        self.ctx.jw = <double*> cnp.PyArray_DATA(jw)
        self.ctx.nbrs = <long*> cnp.PyArray_DATA(nbrs)
        self.ctx.nn = <int*> cnp.PyArray_DATA(nn)
        self.ctx.potall = <double*> cnp.PyArray_DATA(potall)
        self.ctx.logw = <double*> cnp.PyArray_DATA(logw)
        self.ctx.marg = <double*> cnp.PyArray_DATA(marg)


cdef bitgen_t* _bitgen(object rng):
    return <bitgen_t*> PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")


def _perm_table(int m):
    import itertools
    return np.ascontiguousarray(np.array(list(itertools.permutations(range(m))), dtype=np.int32).reshape(-1, m))


def swap_chain(dict spec, int kernel_kind, X, Y, V, betas, list partitions, double t_beta, long n_s,
               long n_samples, double alpha_b, double alpha_j, double lam, object rng, bint debug):
    """Compiled counterpart of ``engine.run_swap_chain``."""
    X = np.array(X, dtype=np.float64, order="C")
    Y = np.array(Y, dtype=np.int64, order="C")
    V = np.array(V, dtype=np.float64, order="C")
    cdef cnp.ndarray bet_all = np.ascontiguousarray(betas, dtype=np.float64)
    cdef long L = X.shape[0], dim = X.shape[1]
    if L == 1:
        partitions = [[[0]]]
        t_beta = n_s * t_beta
        n_s = 1
    counts = np.zeros(7, dtype=np.int64)
    cdef _Work work = _Work(spec, kernel_kind, X, Y, V, counts, alpha_b, alpha_j, lam, debug)
    cdef Ctx* c = &work.ctx
    # flatten blocks: per partition, members, betas and permutation tables
    cdef list flat = []
    for part in partitions:
        blocks = []
        for block in part:
            mem = np.ascontiguousarray(block, dtype=np.int64)
            blocks.append((mem, np.ascontiguousarray(bet_all[mem]), _perm_table(len(block))))
        flat.append(blocks)
    xs = np.empty((n_samples, L, dim))
    ys = np.empty((n_samples, L), dtype=np.int64)
    vs = np.empty((n_samples, L, dim))
    cdef double[:, :, ::1] xs_v = xs
    cdef long[:, ::1] ys_v = ys
    cdef double[:, :, ::1] vs_v = vs
    cdef cnp.ndarray xtmp = np.zeros(MAX_BLOCK * dim)
    cdef cnp.ndarray ytmp = np.zeros(MAX_BLOCK, dtype=np.int64)
    cdef bitgen_t* bg = _bitgen(rng)
    cdef long k, epoch = 0, q, i, npart = len(flat)
    cdef int s, m
    cdef cnp.ndarray mem_a, bet_a, perm_a
    cdef double t0, t1
    with rng.bit_generator.lock:
        for k in range(n_samples):
            for s in range(n_s):
                t0 = epoch * t_beta
                t1 = (epoch + 1) * t_beta
                for blk in flat[epoch % npart]:
                    mem_a, bet_a, perm_a = blk
                    m = mem_a.shape[0]
                    simulate_block(c, <long*> cnp.PyArray_DATA(mem_a), m, <double*> cnp.PyArray_DATA(bet_a),
                                   t0, t1, bg, <int*> cnp.PyArray_DATA(perm_a), perm_a.shape[0])
                    if m > 1:
                        resample_block(c, <long*> cnp.PyArray_DATA(mem_a), m, <double*> cnp.PyArray_DATA(bet_a),
                                       <int*> cnp.PyArray_DATA(perm_a), perm_a.shape[0], bg,
                                       <double*> cnp.PyArray_DATA(xtmp), <long*> cnp.PyArray_DATA(ytmp))
                epoch += 1
            for i in range(L * dim):
                if not (isfinite(c.X[i]) and isfinite(c.V[i])):
                    raise DivergenceError(f"state became non-finite before t={epoch * t_beta}")
            for i in range(L):
                ys_v[k, i] = c.Y[i]
                for q in range(dim):
                    xs_v[k, i, q] = c.X[i * dim + q]
                    vs_v[k, i, q] = c.V[i * dim + q]
    return xs, ys, vs, counts


def finite_chain(dict spec, int kernel_kind, X, Y, V, betas, double alpha_s, double dt, long n_samples,
                 double alpha_b, double alpha_j, double lam, list rngs, object swap_rng, bint debug):
    """Compiled counterpart of ``engine.run_finite_chain``."""
    X = np.array(X, dtype=np.float64, order="C")
    Y = np.array(Y, dtype=np.int64, order="C")
    V = np.array(V, dtype=np.float64, order="C")
    cdef cnp.ndarray bet_all = np.ascontiguousarray(betas, dtype=np.float64)
    cdef double* bet = <double*> cnp.PyArray_DATA(bet_all)
    cdef long L = X.shape[0], dim = X.shape[1]
    counts = np.zeros(7, dtype=np.int64)
    cdef _Work work = _Work(spec, kernel_kind, X, Y, V, counts, alpha_b, alpha_j, lam, debug)
    cdef Ctx* c = &work.ctx
    xs = np.empty((n_samples, L, dim))
    ys = np.empty((n_samples, L), dtype=np.int64)
    vs = np.empty((n_samples, L, dim))
    assign = np.empty((n_samples, L), dtype=np.int64)
    cdef double[:, :, ::1] xs_v = xs
    cdef long[:, ::1] ys_v = ys
    cdef double[:, :, ::1] vs_v = vs
    cdef long[:, ::1] as_v = assign
    cdef cnp.ndarray slot_of = np.arange(L, dtype=np.int64)
    cdef cnp.ndarray rep_at = np.arange(L, dtype=np.int64)
    cdef long[::1] so = slot_of
    cdef long[::1] ra = rep_at
    cdef cnp.ndarray perm1 = _perm_table(1)
    cdef int* p1 = <int*> cnp.PyArray_DATA(perm1)
    cdef list bgs = [<object> rng.bit_generator for rng in rngs]
    cdef long mem[1]
    cdef double b1[1]
    cdef double swap_rate = (L - 1) * alpha_s, next_swap, t = 0.0, ts, log_g, ua, ub
    cdef long k, r, pair, rpa, rpb, i, q
    cdef bitgen_t* sbg = _bitgen(swap_rng)
    cdef bitgen_t* rbg
    for bgo in bgs:
        bgo.lock.acquire()
    swap_rng.bit_generator.lock.acquire()
    try:
        next_swap = random_standard_exponential(sbg) / swap_rate if swap_rate > 0 else INFINITY
        for k in range(n_samples):
            ts = (k + 1) * dt
            while True:
                t1 = next_swap if next_swap < ts else ts
                for r in range(L):
                    mem[0] = r
                    b1[0] = bet[so[r]]
                    rbg = _bitgen(rngs[r])
                    simulate_block(c, mem, 1, b1, t, t1, rbg, p1, 1)
                t = t1
                if not next_swap < ts:
                    break
                pair = <long>(random_standard_uniform(sbg) * (L - 1))
                if pair > L - 2:
                    pair = L - 2
                rpa = ra[pair]
                rpb = ra[pair + 1]
                ua = m_potential(&c.mod, c.X + rpa * dim, c.Y[rpa])
                ub = m_potential(&c.mod, c.X + rpb * dim, c.Y[rpb])
                log_g = (bet[pair] - bet[pair + 1]) * (ua - ub)
                c.counts[5] += 1
                if random_standard_uniform(sbg) < exp(log_g if log_g < 0.0 else 0.0):
                    ra[pair] = rpb
                    ra[pair + 1] = rpa
                    so[rpa] = pair + 1
                    so[rpb] = pair
                    c.counts[6] += 1
                next_swap = t + random_standard_exponential(sbg) / swap_rate
            for i in range(L * dim):
                if not (isfinite(c.X[i]) and isfinite(c.V[i])):
                    raise DivergenceError(f"state became non-finite before t={ts}")
            for i in range(L):
                ys_v[k, i] = c.Y[i]
                as_v[k, i] = ra[i]
                for q in range(dim):
                    xs_v[k, i, q] = c.X[i * dim + q]
                    vs_v[k, i, q] = c.V[i * dim + q]
    finally:
        swap_rng.bit_generator.lock.release()
        for bgo in bgs:
            bgo.lock.release()
    return xs, ys, vs, assign, counts
