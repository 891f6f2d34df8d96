"""Compiled inner loops shared by the public modules.

Everything here works on plain floats / arrays so the numba signatures stay
simple. Distribution kinds are encoded as small ints (see ``KIND_CODES``).
"""
import numba
import numpy as np

KIND_CODES = {"discrete": 0, "uniform": 1, "quadratic": 2}

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO53 = 1.0 / 9007199254740992.0

MAX_NEWTON = 200


@numba.njit(cache=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def uniform_at(key, i):
    # SplitMix64 output number i of the stream keyed by ``key``
    z = key + (np.uint64(i) + np.uint64(1)) * _GOLDEN
    return float(mix64(z) >> np.uint64(11)) * _TWO53


@numba.njit(cache=True)
def ppf(kind, a0, a1, p1, u):
    if kind == 0:
        return a0 if u < p1 else a1
    if kind == 1:
        return a0 + (a1 - a0) * u
    return a0 + (a1 - a0) * np.sqrt(u)


@numba.njit(cache=True)
def param_at(kind, a0, a1, p1, key, i):
    return ppf(kind, a0, a1, p1, uniform_at(key, i))


@numba.njit(cache=True)
def params_block(kind, a0, a1, p1, key, start, n):
    out = np.empty(n)
    for j in range(n):
        out[j] = param_at(kind, a0, a1, p1, key, start + j)
    return out


# ---------------------------------------------------------------- the map


@numba.njit(cache=True)
def lsv(a, x):
    if x <= 0.5:
        return x * (1.0 + (2.0 * x) ** a)
    return 2.0 * x - 1.0


@numba.njit(cache=True)
def lsv_left(a, x):
    return x * (1.0 + (2.0 * x) ** a)


@numba.njit(cache=True)
def dlsv(a, x):
    if x <= 0.5:
        return 1.0 + (a + 1.0) * (2.0 * x) ** a
    return 2.0


@numba.njit(cache=True)
def invert_left(a, y):
    """Left-branch inverse by Newton's method safeguarded with bisection.

    Stops on a relative step below 2 ulp; the bracket [lo, hi] always holds
    the root because h(x) = x + (2x)^a x - y is increasing on [0, 1/2].
    """
    if y <= 0.0:
        return 0.0
    if y >= 1.0:
        return 0.5
    lo = 0.0
    hi = 0.5
    x = y / (1.0 + (2.0 * y) ** a)
    for _ in range(MAX_NEWTON):
        t = (2.0 * x) ** a
        h = x * (1.0 + t) - y
        if h > 0.0:
            hi = x
        elif h < 0.0:
            lo = x
        else:
            return x
        xn = x - h / (1.0 + (a + 1.0) * t)
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 4.5e-16 * xn:
            return xn
        x = xn
    return x


@numba.njit(cache=True)
def invert_left_array(a, ys):
    out = np.empty(ys.shape[0])
    for i in range(ys.shape[0]):
        out[i] = invert_left(a, ys[i])
    return out


@numba.njit(cache=True)
def invert_left_pairs(alphas, ys):
    out = np.empty(ys.shape[0])
    for i in range(ys.shape[0]):
        out[i] = invert_left(alphas[i], ys[i])
    return out


# ------------------------------------------------------- pre-image chains


@numba.njit(cache=True)
def backward_table(alphas):
    """x[k] for k = 1..len(alphas)+1 given parameters at base..base+l-2.

    ``alphas[j]`` is the parameter at index base + j; row k of the result is
    x_k of the path shifted to base + l - k.
    """
    ell = alphas.shape[0] + 1
    x = np.empty(ell + 1)
    x[0] = np.nan
    x[1] = 0.5
    for k in range(2, ell + 1):
        x[k] = invert_left(alphas[ell - k], x[k - 1])
    return x


@numba.njit(cache=True)
def backward_last(alphas):
    x = 0.5
    for j in range(alphas.shape[0] - 1, -1, -1):
        x = invert_left(alphas[j], x)
    return x


@numba.njit(cache=True)
def constant_sequence(a, kmax):
    x = np.empty(kmax + 1)
    x[0] = np.nan
    x[1] = 0.5
    for k in range(2, kmax + 1):
        x[k] = invert_left(a, x[k - 1])
    return x


@numba.njit(cache=True)
def shifted_preimages(alphas, height):
    """x_n(sigma w) for n = 1..height, alphas[j] = parameter at anchor + j.

    Each n needs its own backward pass, so this is quadratic in height.
    """
    out = np.empty(height + 1)
    out[0] = np.nan
    for n in range(1, height + 1):
        x = 0.5
        # parameters at anchor+1 .. anchor+n-1, applied from the top down
        for j in range(n - 1, 0, -1):
            x = invert_left(alphas[j], x)
        out[n] = x
    return out


@numba.njit(cache=True)
def annealed_pass(kind, a0, a1, p1, key, ell):
    """One backward pass; returns x[k] (k=1..ell) and the anchor parameter per row."""
    x = np.empty(ell + 1)
    anc = np.empty(ell + 1)
    x[0] = np.nan
    anc[0] = np.nan
    x[1] = 0.5
    anc[1] = param_at(kind, a0, a1, p1, key, ell - 1)
    for k in range(2, ell + 1):
        a = param_at(kind, a0, a1, p1, key, ell - k)
        anc[k] = a
        x[k] = invert_left(a, x[k - 1])
    return x, anc


# ----------------------------------------------------------- orbits


@numba.njit(cache=True)
def first_return(kind, a0, a1, p1, key, start, x, cap):
    """Steps until the orbit of x (started at fiber ``start``) re-enters (1/2, 1]."""
    y = x
    for n in range(1, cap + 1):
        y = lsv(param_at(kind, a0, a1, p1, key, start + n - 1), y)
        if y > 0.5:
            return n, y
    return -1, y


@numba.njit(cache=True)
def base_visits(kind, a0, a1, p1, key, start, x, nsteps):
    y = x
    visits = 0
    for n in range(nsteps):
        y = lsv(param_at(kind, a0, a1, p1, key, start + n), y)
        if y > 0.5:
            visits += 1
    return visits


@numba.njit(cache=True)
def coupling_run(kind, a0, a1, p1, key, start, x, xp, ell0, horizon, taus):
    """Alternating stopping times for the pair (x, x') driven by one path.

    Fills ``taus`` and returns (T, number of taus); T = -1 when censored.
    """
    y = x
    yp = xp
    ntau = 0
    last = 0
    for n in range(1, horizon + 1):
        a = param_at(kind, a0, a1, p1, key, start + n - 1)
        y = lsv(a, y)
        yp = lsv(a, yp)
        if ntau == 0:
            need = ell0
        else:
            need = last + ell0
        if n < need:
            continue
        # odd tau_i watch x, even tau_i watch x'
        if ntau % 2 == 0:
            hit = y > 0.5
        else:
            hit = yp > 0.5
        if hit:
            if ntau < taus.shape[0]:
                taus[ntau] = n
            ntau += 1
            last = n
            if ntau >= 2 and y > 0.5 and yp > 0.5:
                return n, ntau
    return -1, ntau


@numba.njit(cache=True)
def coupling_batch(kind, a0, a1, p1, keys, xs, xps, ell0, horizon):
    n = keys.shape[0]
    T = np.empty(n, dtype=np.int64)
    gap = np.empty(n, dtype=np.int64)
    taus = np.empty(4, dtype=np.int64)
    for r in range(n):
        t, ntau = coupling_run(kind, a0, a1, p1, keys[r], 0, xs[r], xps[r], ell0, horizon, taus)
        T[r] = t
        gap[r] = taus[1] - taus[0] - ell0 if ntau >= 2 else -1
    return T, gap


@numba.njit(cache=True)
def orbit_histogram(kind, a0, a1, p1, key, start, x0s, burn, nsteps, edges):
    """Histogram (cell masses) of orbit points on ``edges`` after a burn-in."""
    nc = edges.shape[0] - 1
    counts = np.zeros(nc)
    for r in range(x0s.shape[0]):
        y = x0s[r]
        for n in range(burn):
            y = lsv(param_at(kind, a0, a1, p1, key, start + n), y)
        for n in range(nsteps):
            y = lsv(param_at(kind, a0, a1, p1, key, start + burn + n), y)
            j = np.searchsorted(edges, y, side="right") - 1
            if j < 0:
                j = 0
            if j >= nc:
                j = nc - 1
            counts[j] += 1.0
    return counts / counts.sum()


@numba.njit(cache=True)
def orbit_endpoints(kind, a0, a1, p1, key, start, x0s, nsteps):
    out = x0s.copy()
    for r in range(out.shape[0]):
        y = out[r]
        for n in range(nsteps):
            y = lsv(param_at(kind, a0, a1, p1, key, start + n), y)
        out[r] = y
    return out


@numba.njit(cache=True)
def ak_sums(kind, a0, a1, p1, keys, b0, b1, ell):
    """sum_{k=2}^{ell} A_k for each path key; A_k uses the parameter at index ell - k."""
    r0 = a0 * 2.0**a0
    half = 0.5 * (1.0 + a0)
    out = np.empty(keys.shape[0])
    for s in range(keys.shape[0]):
        tot = 0.0
        for k in range(2, ell + 1):
            a = param_at(kind, a0, a1, p1, keys[s], ell - k)
            tot += r0 * b0[k] ** (a - a0) - half * r0 * b1[k] ** (2.0 * a - a0)
        out[s] = tot
    return out


@numba.njit(cache=True)
def pair_points(keys):
    """Two base points in (1/2, 1] per key from a stream disjoint from the path."""
    n = keys.shape[0]
    xs = np.empty(n)
    xps = np.empty(n)
    for r in range(n):
        k2 = mix64(keys[r] ^ np.uint64(0xD1B54A32D192ED03))
        xs[r] = 1.0 - 0.5 * uniform_at(k2, 0)
        xps[r] = 1.0 - 0.5 * uniform_at(k2, 1)
    return xs, xps
