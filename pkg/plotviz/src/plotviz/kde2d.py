"""2-D Gaussian kernel density evaluation on a regular grid."""

from __future__ import annotations

import numpy as np

__all__ = ["kde_grid", "density_orientation"]


def kde_grid(points: np.ndarray, xlim, ylim, resolution: int = 120):
    """Evaluate a product-Gaussian KDE of (n, 2) points on a grid.

    Scott's-rule bandwidth per axis with a small floor. Returns (gx, gy,
    density) where density has shape (resolution, resolution) indexed [ix, iy].
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("points must be (n, 2)")
    n = points.shape[0]
    bw = np.maximum(n ** (-1.0 / 6.0) * points.std(axis=0, ddof=1), 1e-3)
    gx = np.linspace(xlim[0], xlim[1], resolution)
    gy = np.linspace(ylim[0], ylim[1], resolution)
    zx = (gx[:, None] - points[None, :, 0]) / bw[0]
    zy = (gy[:, None] - points[None, :, 1]) / bw[1]
    kx = np.exp(-0.5 * zx**2) / (bw[0] * np.sqrt(2.0 * np.pi))
    ky = np.exp(-0.5 * zy**2) / (bw[1] * np.sqrt(2.0 * np.pi))
    density = kx @ ky.T / n
    return gx, gy, density


def density_orientation(gx, gy, density):
    """Principal-axis angle (radians) and axis-length ratio of a density grid.

    Diagnostic for contour geometry: a correlated Gaussian gives an angle
    near +-pi/4 and a ratio well above 1.
    """
    gx = np.asarray(gx)
    gy = np.asarray(gy)
    w = density / density.sum()
    mx = (w.sum(axis=1) * gx).sum()
    my = (w.sum(axis=0) * gy).sum()
    dx = gx - mx
    dy = gy - my
    cxx = (w.sum(axis=1) * dx**2).sum()
    cyy = (w.sum(axis=0) * dy**2).sum()
    cxy = (w * np.outer(dx, dy)).sum()
    cov = np.array([[cxx, cxy], [cxy, cyy]])
    eigvals, eigvecs = np.linalg.eigh(cov)
    major = eigvecs[:, np.argmax(eigvals)]
    angle = np.arctan2(major[1], major[0])
    ratio = float(np.sqrt(eigvals.max() / max(eigvals.min(), 1e-12)))
    return float(angle), ratio
