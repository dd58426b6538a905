"""Compiled inner loop of the full-field propagator."""

import numpy as np
from numba import njit

TWO_PI = 2 * np.pi

RECT, SIN2, GAUSS = 0, 1, 2


@njit(cache=True)
def _envelope(shape, ramp, sigma, x):
    if x < 0.0 or x > 1.0:
        return 0.0
    if shape == RECT:
        return 1.0
    if shape == SIN2:
        if x < ramp:
            s = np.sin(0.5 * np.pi * x / ramp)
            return s * s
        if x > 1.0 - ramp:
            s = np.sin(0.5 * np.pi * (1.0 - x) / ramp)
            return s * s
        return 1.0
    d = (x - 0.5) / sigma
    return np.exp(-0.5 * d * d)


@njit(cache=True)
def _chebyshev(H, psi, coef, center, half, phase):
    n, k = psi.shape
    Hn = H / half
    for i in range(n):
        Hn[i, i] -= center / half
    prev = psi.copy()
    cur = Hn @ psi
    out = coef[0] * prev + coef[1] * cur
    for m in range(2, coef.shape[0]):
        nxt = 2.0 * (Hn @ cur) - prev
        out += coef[m] * nxt
        prev = cur
        cur = nxt
    return phase * out


@njit(cache=True)
def cf4_interval(
    psi, h0, m_re, m_im, freq, phase, E0, t_start, duration, shape, ramp, sigma,
    t_a, h, nsteps, g1, g2, w1, w2, coef, center, half, cphase,
):
    """Advance ``psi`` by ``nsteps`` commutator-free Magnus steps of size ``h``."""
    n = h0.shape[0]
    P = freq.shape[0]
    cre = np.empty((2, P))
    cim = np.empty((2, P))
    H = np.empty((n, n), dtype=np.complex128)
    for s in range(nsteps):
        ts = t_a + s * h
        for j in range(2):
            t = ts + (g1 if j == 0 else g2) * h
            for p in range(P):
                amp = E0[p] * _envelope(shape[p], ramp[p], sigma[p], (t - t_start[p]) / duration[p])
                th = TWO_PI * freq[p] * t + phase[p]
                cre[j, p] = -amp * np.cos(th)
                cim[j, p] = -amp * np.sin(th)
        for stage in range(2):
            wa = w1 if stage == 0 else w2
            wb = w2 if stage == 0 else w1
            H[:, :] = 0.0
            for i in range(n):
                H[i, i] = h0[i]
            for p in range(P):
                a = wa * cre[0, p] + wb * cre[1, p]
                b = wa * cim[0, p] + wb * cim[1, p]
                if a != 0.0:
                    H += a * m_re[p]
                if b != 0.0:
                    H += b * m_im[p]
            psi = _chebyshev(H, psi, coef, center, half, cphase)
    return psi
