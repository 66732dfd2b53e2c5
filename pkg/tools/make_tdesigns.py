"""Regenerate the shipped spherical t-design grid files.

Point sets are found by minimising the design residual

    A_t(X) = 1/n^2 sum_ij sum_{l=1..t} (2l+1) P_l(x_i . x_j)

which is non-negative and vanishes exactly when X is a spherical t-design.
The L-BFGS result is then polished by a least-squares solve driving the
grid means of all spherical harmonics of degree 1..t to zero.
The 12-point set is the icosahedron (a 5-design) and needs no optimisation.

Usage::

    python3 tools/make_tdesigns.py 240 18
"""
import sys
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares, minimize
from scipy.special import sph_harm_y

OUT = Path(__file__).resolve().parents[1] / "src" / "dirverb" / "data"


def fibonacci(n):
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    phi = np.pi * (1 + 5 ** 0.5) * i
    r = np.sqrt(1 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def icosahedron():
    g = (1 + 5 ** 0.5) / 2
    v = []
    for a in (-1, 1):
        for b in (-g, g):
            v += [(0, a, b), (a, b, 0), (b, 0, a)]
    v = np.array(v, dtype=float)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def residual(x, t):
    """Return A_t and its gradient with respect to the unit vectors."""
    n = len(x)
    c = np.clip(x @ x.T, -1.0, 1.0)
    p_prev, p = np.ones_like(c), c.copy()
    dp_prev, dp = np.zeros_like(c), np.ones_like(c)
    total = 3 * p
    dtotal = 3 * dp
    for l in range(2, t + 1):
        p_next = ((2 * l - 1) * c * p - (l - 1) * p_prev) / l
        dp_next = dp_prev + (2 * l - 1) * p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
        total += (2 * l + 1) * p
        dtotal += (2 * l + 1) * dp
    value = total.sum() / n**2
    grad = 2 * (dtotal @ x) / n**2
    return value, grad


def optimise(n, t, seed=0, restarts=20):
    rng = np.random.default_rng(seed)
    best = None
    for attempt in range(restarts):
        x0 = fibonacci(n) if attempt == 0 else rng.normal(size=(n, 3))
        x0 /= np.linalg.norm(x0, axis=1, keepdims=True)

        def fun(flat):
            y = flat.reshape(n, 3)
            r = np.linalg.norm(y, axis=1, keepdims=True)
            u = y / r
            v, g = residual(u, t)
            # chain rule through the normalisation
            g = (g - np.sum(g * u, axis=1, keepdims=True) * u) / r
            return v, g.ravel()

        res = minimize(fun, x0.ravel(), jac=True, method="L-BFGS-B",
                       options=dict(maxiter=20000, ftol=1e-30, gtol=1e-16, maxcor=30))
        u = res.x.reshape(n, 3)
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        val = residual(u, t)[0]
        print(f"n={n} t={t} attempt={attempt} residual={val:.3e}", flush=True)
        if best is None or val < best[0]:
            best = (val, u)
        if val < 1e-11:
            break
    return best


def _moments(theta, phi, t):
    """Grid means of Y_lm for l = 1..t, m >= 0, as one real vector."""
    out = []
    for l in range(1, t + 1):
        for m in range(l + 1):
            y = sph_harm_y(l, m, theta, phi)
            out.append(y.real)
            if m:
                out.append(y.imag)
    return np.array(out)


def polish(u, t):
    n = len(u)
    theta0 = np.arccos(np.clip(u[:, 2], -1, 1))
    phi0 = np.arctan2(u[:, 1], u[:, 0])

    def fun(p):
        return _moments(p[:n], p[n:], t).mean(axis=1)

    def jac(p, h=1e-7):
        # each angle moves only its own point's column of the mean
        base = _moments(p[:n], p[n:], t)
        d_theta = (_moments(p[:n] + h, p[n:], t) - base) / (h * n)
        d_phi = (_moments(p[:n], p[n:] + h, t) - base) / (h * n)
        return np.hstack([d_theta, d_phi])

    res = least_squares(fun, np.concatenate([theta0, phi0]), jac=jac, method="trf",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    theta, phi = res.x[:n], res.x[n:]
    v = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], 1)
    print(f"polished: max moment {np.abs(res.fun).max():.2e}", flush=True)
    return v


def save(n, t, u, residual_value):
    az = np.degrees(np.arctan2(u[:, 1], u[:, 0]))
    el = np.degrees(np.arcsin(np.clip(u[:, 2], -1, 1)))
    w = np.full(n, 4 * np.pi / n)
    lines = [f"# spherical {t}-design, {n} points, residual {residual_value:.2e}",
             "# azimuth_deg elevation_deg weight"]
    lines += [f"{a:.17g} {e:.17g} {wi:.17g}" for a, e, wi in zip(az, el, w)]
    (OUT / f"tdesign_{n:04d}.txt").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    n, t = int(sys.argv[1]), int(sys.argv[2])
    if n == 12:
        u = icosahedron()
        save(12, 5, u, residual(u, 5)[0])
    else:
        _, u = optimise(n, t)
        u = polish(u, t)
        save(n, t, u, residual(u, t)[0])
