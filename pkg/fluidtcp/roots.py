"""Grid-seeded Newton iteration for roots of analytic characteristic functions."""

from __future__ import annotations

from typing import Callable

import numpy as np

ComplexFn = Callable[[np.ndarray], np.ndarray]


def seed_grid(scale: float, n_re: int = 40, n_im: int = 120) -> np.ndarray:
    """Rectangle Re in [-5 s, s], Im in [0, 10 s]."""
    re = np.linspace(-5.0 * scale, scale, n_re)
    im = np.linspace(0.0, 10.0 * scale, n_im)
    return (re[None, :] + 1j * im[:, None]).ravel()


def newton(
    f: ComplexFn,
    df: ComplexFn,
    seeds: np.ndarray,
    maxiter: int = 100,
    tol: float = 1e-13,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised Newton. Returns (roots, |f(roots)|) for finite iterates only."""
    z = np.asarray(seeds, dtype=complex).copy()
    with np.errstate(all="ignore"):
        for _ in range(maxiter):
            step = f(z) / df(z)
            z = z - step
            done = ~np.isfinite(step) | (np.abs(step) <= tol * np.maximum(1.0, np.abs(z)))
            if done.all():
                break
        res = np.abs(f(z))
    ok = np.isfinite(z) & np.isfinite(res)
    return z[ok], res[ok]


def unique_roots(roots: np.ndarray, res: np.ndarray, tol: float, resolution: float) -> tuple[np.ndarray, np.ndarray]:
    """Roots with residual <= tol, deduplicated to `resolution`, sorted by decreasing real part."""
    keep = res <= tol
    roots, res = roots[keep], res[keep]
    if roots.size == 0:
        return roots, res
    # fold conjugates onto the upper half plane
    roots = np.where(roots.imag < 0, roots.conj(), roots)
    keys = np.round(np.column_stack([roots.real, roots.imag]) / resolution).astype(np.int64)
    _, idx = np.unique(keys, axis=0, return_index=True)
    roots, res = roots[idx], res[idx]
    order = np.argsort(-roots.real, kind="stable")
    return roots[order], res[order]


def polish(f: ComplexFn, df: ComplexFn, z0: complex, maxiter: int = 100) -> tuple[complex, float]:
    """Scalar Newton from z0; keeps the best iterate by residual."""
    z = complex(z0)
    best, best_res = z, float(abs(f(np.array([z]))[0]))
    with np.errstate(all="ignore"):
        for _ in range(maxiter):
            fz = f(np.array([z]))[0]
            dz = df(np.array([z]))[0]
            if dz == 0 or not np.isfinite(dz):
                break
            z = z - fz / dz
            r = float(abs(f(np.array([z]))[0]))
            if not np.isfinite(r):
                break
            if r < best_res:
                best, best_res = z, r
            if r == 0.0 or abs(fz / dz) <= 1e-16 * max(1.0, abs(z)):
                break
    return best, best_res
