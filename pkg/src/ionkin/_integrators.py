"""Compiled kernels for the population rate equations.

The rate matrix is lower triangular (population only moves to higher charge),
columns sum to zero, and every entry depends on time only through the photon
flux.  Two steppers share one flux interpolant:

* Dormand-Prince 5(4) with PI step control and Hairer's stiffness test, and
* 3-stage Radau IIA with step-doubling error control, solved species by
  species (a 3x3 system each) thanks to the triangular structure.
"""

import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_STIFF = 1
STATUS_UNDERFLOW = 2
STATUS_MAXSTEPS = 3

# ---------------------------------------------------------------- interpolation


@njit(cache=True, nogil=True)
def _edge_slope(h0, h1, d0, d1):
    d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
    if np.sign(d) != np.sign(d0):
        return 0.0
    if np.sign(d0) != np.sign(d1) and abs(d) > abs(3.0 * d0):
        return 3.0 * d0
    return d


@njit(cache=True, nogil=True)
def pchip_coefficients(y, dt):
    """Cubic coefficients per interval of the Fritsch-Carlson/Butland interpolant.

    Row i holds (c0, c1, c2, c3) with p(s) = c0 + s(c1 + s(c2 + s c3)),
    s = (t - t_i) / dt in [0, 1].
    """
    n = y.size
    delta = np.empty(n - 1)
    for i in range(n - 1):
        delta[i] = (y[i + 1] - y[i]) / dt
    m = np.empty(n)
    for i in range(1, n - 1):
        a, b = delta[i - 1], delta[i]
        if a * b <= 0.0:
            m[i] = 0.0
        else:
            m[i] = 2.0 / (1.0 / a + 1.0 / b)
    if n == 2:
        m[0] = delta[0]
        m[1] = delta[0]
    else:
        m[0] = _edge_slope(dt, dt, delta[0], delta[1])
        m[n - 1] = _edge_slope(dt, dt, delta[n - 2], delta[n - 3])
    coef = np.empty((n - 1, 4))
    for i in range(n - 1):
        h0 = dt * m[i]
        h1 = dt * m[i + 1]
        dy = y[i + 1] - y[i]
        coef[i, 0] = y[i]
        coef[i, 1] = h0
        coef[i, 2] = 3.0 * dy - 2.0 * h0 - h1
        coef[i, 3] = -2.0 * dy + h0 + h1
    return coef


@njit(cache=True, nogil=True)
def flux_at(t, t0, dt, coef):
    x = (t - t0) / dt
    nint = coef.shape[0]
    i = int(math.floor(x))
    if i < 0:
        i = 0
    elif i >= nint:
        i = nint - 1
    s = x - i
    if s < 0.0:
        s = 0.0
    elif s > 1.0:
        s = 1.0
    v = coef[i, 0] + s * (coef[i, 1] + s * (coef[i, 2] + s * coef[i, 3]))
    return v if v > 0.0 else 0.0


# ---------------------------------------------------------------- rates


@njit(cache=True, nogil=True)
def channel_rates(flux, scaled_sigma, order, out):
    """Rates sigma * F**n with F in units of the record peak.

    ``scaled_sigma`` is sigma * F_peak**n (see :func:`scaled_cross_sections`), so
    the normalized flux stays O(1) and its powers are formed by multiplication;
    neither F**11 nor sigma**(11) is ever held in a double.
    """
    if flux <= 0.0:
        for c in range(scaled_sigma.size):
            out[c] = 0.0
        return
    p = 1.0
    k = 0
    for c in range(scaled_sigma.size):
        n = int(order[c])
        if n < k:
            p = 1.0
            k = 0
        while k < n:
            p *= flux
            k += 1
        out[c] = scaled_sigma[c] * p


@njit(cache=True, nogil=True)
def apply_rates(y, rates, src, dst, out):
    for k in range(out.size):
        out[k] = 0.0
    for c in range(rates.size):
        r = rates[c] * y[src[c]]
        out[src[c]] -= r
        out[dst[c]] += r


@njit(cache=True, nogil=True)
def rhs(t, y, t0, dt, coef, sigma, order, src, dst, rates, out):
    channel_rates(flux_at(t, t0, dt, coef), sigma, order, rates)
    apply_rates(y, rates, src, dst, out)


# ---------------------------------------------------------------- DOPRI5

C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
                           -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0,
                          22.0 / 525.0, -1.0 / 40.0)


@njit(cache=True, nogil=True)
def dopri5(y0, t_start, t_end, t0, dt, coef, sigma, order, src, dst,
           rtol, atol, h_max, max_steps, keep, traj_t, traj_y):
    """Integrate from t_start to t_end.

    Returns (status, y, t_reached, n_accepted, n_rejected, max_drift, min_pop, n_traj).
    """
    n = y0.size
    y = y0.copy()
    total0 = 0.0
    for i in range(n):
        total0 += y0[i]
    k1 = np.empty(n); k2 = np.empty(n); k3 = np.empty(n); k4 = np.empty(n)
    k5 = np.empty(n); k6 = np.empty(n); k7 = np.empty(n)
    ytmp = np.empty(n); ysti = np.empty(n); y1 = np.empty(n)
    rates = np.empty(sigma.size)
    loss = np.empty(n)

    t = t_start
    h = min(h_max, dt, t_end - t_start)
    h_min = 1e-12 * dt
    facold = 1e-4
    beta = 0.04
    expo1 = 0.2 - beta * 0.75
    safe = 0.9
    n_acc = 0
    n_rej = 0
    stiff_count = 0
    nonstiff_count = 0
    reject_last = False
    max_drift = 0.0
    min_pop = np.inf
    for i in range(n):
        if y[i] < min_pop:
            min_pop = y[i]
    n_traj = 0
    if keep:
        traj_t[0] = t
        traj_y[0, :] = y
        n_traj = 1

    rhs(t, y, t0, dt, coef, sigma, order, src, dst, rates, k1)
    while t < t_end:
        if n_acc + n_rej >= max_steps:
            return STATUS_MAXSTEPS, y, t, n_acc, n_rej, max_drift, min_pop, n_traj
        if h < h_min:
            return STATUS_UNDERFLOW, y, t, n_acc, n_rej, max_drift, min_pop, n_traj
        last = False
        if t + 1.01 * h >= t_end:
            h = t_end - t
            last = True

        for i in range(n):
            ytmp[i] = y[i] + h * A21 * k1[i]
        rhs(t + C2 * h, ytmp, t0, dt, coef, sigma, order, src, dst, rates, k2)
        for i in range(n):
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        rhs(t + C3 * h, ytmp, t0, dt, coef, sigma, order, src, dst, rates, k3)
        for i in range(n):
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs(t + C4 * h, ytmp, t0, dt, coef, sigma, order, src, dst, rates, k4)
        for i in range(n):
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        rhs(t + C5 * h, ytmp, t0, dt, coef, sigma, order, src, dst, rates, k5)
        for i in range(n):
            ysti[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                                  + A65 * k5[i])
        tph = t + h
        rhs(tph, ysti, t0, dt, coef, sigma, order, src, dst, rates, k6)
        for i in range(n):
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i]
                                + A76 * k6[i])
        rhs(tph, y1, t0, dt, coef, sigma, order, src, dst, rates, k7)

        err = 0.0
        for i in range(n):
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            sk = atol + rtol * max(abs(y[i]), abs(y1[i]))
            err += (e / sk) ** 2
        err = math.sqrt(err / n)

        fac11 = err ** expo1
        fac = fac11 / facold ** beta
        fac = max(0.2, min(10.0, fac / safe))
        hnew = h / fac
        if err <= 1.0:
            facold = max(err, 1e-4)
            n_acc += 1
            # stiffness test: eigenvalues of the triangular rate matrix are -loss[k]
            # (rates still hold the last evaluation, at t + h)
            for k in range(n):
                loss[k] = 0.0
            for c in range(src.size):
                loss[src[c]] += rates[c]
            lam = 0.0
            for k in range(n):
                if loss[k] > lam:
                    lam = loss[k]
            if h * lam > 3.25:
                nonstiff_count = 0
                stiff_count += 1
                if stiff_count == 15:
                    return STATUS_STIFF, y, t, n_acc, n_rej, max_drift, min_pop, n_traj
            else:
                nonstiff_count += 1
                if nonstiff_count == 6:
                    stiff_count = 0
            for i in range(n):
                k1[i] = k7[i]
                y[i] = y1[i]
            t = t_end if last else tph
            total = 0.0
            for i in range(n):
                total += y[i]
                if y[i] < min_pop:
                    min_pop = y[i]
            drift = abs(total - total0)
            if drift > max_drift:
                max_drift = drift
            if keep and n_traj < traj_t.size:
                traj_t[n_traj] = t
                traj_y[n_traj, :] = y
                n_traj += 1
            if abs(hnew) > h_max:
                hnew = h_max
            if reject_last:
                hnew = min(hnew, h)
            reject_last = False
            h = hnew
        else:
            hnew = h / min(10.0, fac11 / safe)
            reject_last = True
            if n_acc >= 1:
                n_rej += 1
            h = hnew
    return STATUS_OK, y, t, n_acc, n_rej, max_drift, min_pop, n_traj


# ---------------------------------------------------------------- Radau IIA

S6 = math.sqrt(6.0)
RC1 = (4.0 - S6) / 10.0
RC2 = (4.0 + S6) / 10.0
RA = np.array([
    [(88.0 - 7.0 * S6) / 360.0, (296.0 - 169.0 * S6) / 1800.0, (-2.0 + 3.0 * S6) / 225.0],
    [(296.0 + 169.0 * S6) / 1800.0, (88.0 + 7.0 * S6) / 360.0, (-2.0 - 3.0 * S6) / 225.0],
    [(16.0 - S6) / 36.0, (16.0 + S6) / 36.0, 1.0 / 9.0],
])


@njit(cache=True, nogil=True)
def _solve3(m, b, x):
    """Gaussian elimination with partial pivoting on a 3x3 system (m, b overwritten)."""
    for col in range(3):
        piv = col
        for r in range(col + 1, 3):
            if abs(m[r, col]) > abs(m[piv, col]):
                piv = r
        if piv != col:
            for c in range(3):
                tmp = m[col, c]
                m[col, c] = m[piv, c]
                m[piv, c] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        for r in range(col + 1, 3):
            f = m[r, col] / m[col, col]
            for c in range(col, 3):
                m[r, c] -= f * m[col, c]
            b[r] -= f * b[col]
    for r in range(2, -1, -1):
        acc = b[r]
        for c in range(r + 1, 3):
            acc -= m[r, c] * x[c]
        x[r] = acc / m[r, r]


@njit(cache=True, nogil=True)
def radau_step(y, t, h, t0, dt, coef, sigma, order, src, dst, ra, out):
    """One Radau IIA (order 5) step of the linear triangular system."""
    n = y.size
    nc = sigma.size
    rates = np.empty((3, nc))
    tmp = np.empty(nc)
    times = (t + RC1 * h, t + RC2 * h, t + h)
    for j in range(3):
        channel_rates(flux_at(times[j], t0, dt, coef), sigma, order, tmp)
        rates[j, :] = tmp
    stages = np.zeros((3, n))
    loss = np.empty(3)
    feed = np.empty(3)
    m = np.empty((3, 3))
    b = np.empty(3)
    x = np.empty(3)
    for k in range(n):
        for j in range(3):
            loss[j] = 0.0
            feed[j] = 0.0
        for c in range(nc):
            if src[c] == k:
                for j in range(3):
                    loss[j] += rates[j, c]
            elif dst[c] == k:
                for j in range(3):
                    feed[j] += rates[j, c] * stages[j, src[c]]
        for i in range(3):
            acc = y[k]
            for j in range(3):
                m[i, j] = h * ra[i, j] * loss[j]
                acc += h * ra[i, j] * feed[j]
            m[i, i] += 1.0
            b[i] = acc
        _solve3(m, b, x)
        for i in range(3):
            stages[i, k] = x[i]
    for k in range(n):
        out[k] = stages[2, k]


@njit(cache=True, nogil=True)
def radau(y0, t_start, t_end, t0, dt, coef, sigma, order, src, dst,
          rtol, atol, h_max, max_steps, keep, traj_t, traj_y, ra):
    n = y0.size
    y = y0.copy()
    total0 = 0.0
    for i in range(n):
        total0 += y0[i]
    full = np.empty(n)
    half = np.empty(n)
    two = np.empty(n)
    t = t_start
    h = min(h_max, dt, t_end - t_start)
    h_min = 1e-14 * dt
    n_acc = 0
    n_rej = 0
    max_drift = 0.0
    min_pop = np.inf
    for i in range(n):
        if y[i] < min_pop:
            min_pop = y[i]
    n_traj = 0
    if keep:
        traj_t[0] = t
        traj_y[0, :] = y
        n_traj = 1
    while t < t_end:
        if n_acc + n_rej >= max_steps:
            return STATUS_MAXSTEPS, y, t, n_acc, n_rej, max_drift, min_pop, n_traj
        if h < h_min:
            return STATUS_UNDERFLOW, y, t, n_acc, n_rej, max_drift, min_pop, n_traj
        last = False
        if t + 1.01 * h >= t_end:
            h = t_end - t
            last = True
        radau_step(y, t, h, t0, dt, coef, sigma, order, src, dst, ra, full)
        radau_step(y, t, 0.5 * h, t0, dt, coef, sigma, order, src, dst, ra, half)
        radau_step(half, t + 0.5 * h, 0.5 * h, t0, dt, coef, sigma, order, src, dst, ra, two)
        err = 0.0
        for i in range(n):
            sk = atol + rtol * max(abs(y[i]), abs(two[i]))
            err += ((two[i] - full[i]) / 31.0 / sk) ** 2
        err = math.sqrt(err / n)
        if err <= 1.0:
            n_acc += 1
            for i in range(n):
                y[i] = two[i]
            t = t_end if last else t + h
            total = 0.0
            for i in range(n):
                total += y[i]
                if y[i] < min_pop:
                    min_pop = y[i]
            drift = abs(total - total0)
            if drift > max_drift:
                max_drift = drift
            if keep and n_traj < traj_t.size:
                traj_t[n_traj] = t
                traj_y[n_traj, :] = y
                n_traj += 1
            fac = 0.9 * max(err, 1e-10) ** (-1.0 / 6.0)
            h = min(h * min(4.0, max(0.2, fac)), h_max)
        else:
            n_rej += 1
            fac = 0.9 * err ** (-1.0 / 6.0)
            h = h * max(0.1, fac)
    return STATUS_OK, y, t, n_acc, n_rej, max_drift, min_pop, n_traj
