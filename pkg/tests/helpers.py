"""Shared test utilities: small camera rigs and reference implementations
used as independent oracles."""

import numpy as np

from stochtri.geometry import Camera


def default_K(f=1100.0, c=(500.0, 500.0)):
    return np.array([[f, 0.0, c[0]], [0.0, f, c[1]], [0.0, 0.0, 1.0]])


def look_at(eye, target, K=None, up=(0.0, 0.0, 1.0)):
    """Camera at `eye` with optical axis through `target`, world z up."""
    eye = np.asarray(eye, dtype=float)
    target = np.asarray(target, dtype=float)
    z = target - eye
    z = z / np.linalg.norm(z)
    x = np.cross(z, np.asarray(up, dtype=float))
    if np.linalg.norm(x) < 1e-8:
        x = np.cross(z, np.array([0.0, 1.0, 0.0]))
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    return Camera(default_K() if K is None else K, R, -R @ eye)


def ring_cameras(n, radius=4000.0, height=1600.0, center=(0.0, 0.0, 0.0)):
    center = np.asarray(center, dtype=float)
    angles = 2.0 * np.pi * np.arange(n) / n
    return [look_at(center + np.array([radius * np.cos(a), radius * np.sin(a),
                                       height - center[2]]), center)
            for a in angles]


def arc_cameras(n, span=np.deg2rad(150.0), radius=4000.0, height=1600.0,
                center=(0.0, 0.0, 0.0)):
    center = np.asarray(center, dtype=float)
    angles = np.linspace(0.0, span, n)
    return [look_at(center + np.array([radius * np.cos(a), radius * np.sin(a),
                                       height - center[2]]), center)
            for a in angles]


def algebraic_project(cam, X):
    """Dehomogenized P @ [X; 1] without any depth check (test oracle)."""
    h = cam.matrix @ np.append(np.asarray(X, dtype=float), 1.0)
    return h[:2] / h[2]


def unnormalized_eight_point(corrs):
    """Eight-point solve on raw pixel coordinates (test oracle: the
    conditioning baseline the normalized solver must beat)."""
    corrs = np.asarray(corrs, dtype=float)
    u1, v1, u2, v2 = corrs[:, 0], corrs[:, 1], corrs[:, 2], corrs[:, 3]
    A = np.stack([u2 * u1, u2 * v1, u2, v2 * u1, v2 * v1, v2, u1, v1,
                  np.ones_like(u1)], axis=-1)
    _, _, vt = np.linalg.svd(A)
    F = vt[-1].reshape(3, 3)
    Uf, sf, Vtf = np.linalg.svd(F)
    sf = sf.copy()
    sf[2] = 0.0
    F = (Uf * sf) @ Vtf
    return F / np.linalg.norm(F)


def epipolar_distance(F, corrs):
    """Mean symmetric point-to-epiline distance in pixels."""
    corrs = np.asarray(corrs, dtype=float)
    xa = np.concatenate([corrs[:, :2], np.ones((len(corrs), 1))], axis=1)
    xb = np.concatenate([corrs[:, 2:], np.ones((len(corrs), 1))], axis=1)
    la = xa @ F.T  # epiline in image b
    lb = xb @ F    # epiline in image a
    num = np.abs(np.sum(xb * la, axis=1))
    da = num / np.linalg.norm(la[:, :2], axis=1)
    db = num / np.linalg.norm(lb[:, :2], axis=1)
    return float(np.mean(0.5 * (da + db)))
