"""Saddle fixed points P (x > 0) and Q (x < 0) and their local manifold seeds."""
import logging
import math

import numpy as np

from errors import NewtonError, PreconditionError
from models import FixedPointData, PolyCurve

logger = logging.getLogger(__name__)

MAX_SEED_HALF_LENGTH = 0.05


def one_d_fixed_points(a):
    """Closed-form roots (p_a, q_a) of 1 - a x^2 = x, with p_a > q_a."""
    disc = 1.0 + 4.0 * a
    if disc < 0:
        raise PreconditionError("complex roots", a=a)
    if a == 0:
        raise PreconditionError("a = 0 has a single fixed point", a=a)
    if a < 2:
        logger.warning("one_d_fixed_points called with a=%s below 2", a)
    root = math.sqrt(disc)
    p, q = (-1.0 + root) / (2.0 * a), (-1.0 - root) / (2.0 * a)
    return (p, q) if p > q else (q, p)


def _seeds(fmap):
    a, b = fmap.a, fmap.b
    disc = (1.0 - b) ** 2 + 4.0 * a
    if disc < 0:
        raise PreconditionError("complex roots", a=a, b=b)
    root = math.sqrt(disc)
    xs = [(-(1.0 - b) + root) / (2.0 * a), (-(1.0 - b) - root) / (2.0 * a)]
    return [np.array([x, b * x]) for x in xs]


def _newton_fixed_point(fmap, seed, max_iter):
    w = np.asarray(seed, dtype=float)
    for _ in range(max_iter):
        residual = fmap.apply(w) - w
        if np.abs(residual).max() <= 1e-15 * (1.0 + np.abs(w).max()):
            return w
        step = np.linalg.solve(fmap.jacobian(w) - np.eye(2), residual)
        w = w - step
        if not np.all(np.isfinite(w)):
            break
        if np.abs(step).max() <= 1e-16 * (1.0 + np.abs(w).max()):
            return w
    if np.all(np.isfinite(w)) and np.abs(fmap.apply(w) - w).max() <= 1e-12:
        return w
    raise NewtonError("Newton failed", seed=list(map(float, seed)), iterations=max_iter)


def _unit_oriented(v):
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return v


def classify(fmap, location, label):
    J = fmap.jacobian(location)
    values, vectors = np.linalg.eig(J)
    if np.iscomplexobj(values) and np.any(np.abs(values.imag) > 0):
        raise PreconditionError("complex eigenvalues at fixed point", label=label)
    values = values.real
    vectors = vectors.real
    order = np.argsort(-np.abs(values))
    lam_exp, lam_con = float(values[order[0]]), float(values[order[1]])
    eigvecs = np.array([_unit_oriented(vectors[:, order[0]]), _unit_oriented(vectors[:, order[1]])])
    orientation = "Reversing" if fmap.b > 0 else "Preserving"
    return FixedPointData(label=label, location=np.asarray(location, dtype=float),
                          eigenvalues=(lam_exp, lam_con), eigenvectors=eigvecs,
                          orientation=orientation)


def find_fixed_points(fmap, max_iter=50):
    """Return (P, Q) located by Newton from the closed-form seeds on y = b x."""
    found = []
    for seed in _seeds(fmap):
        found.append(_newton_fixed_point(fmap, seed, max_iter))
    if np.linalg.norm(found[0] - found[1]) < 1e-8:
        raise NewtonError("points coincide", location=found[0].tolist())
    found.sort(key=lambda w: -w[0])
    if not (found[0][0] > 0 > found[1][0]):
        logger.warning("Fixed points do not straddle x=0: %s", [w.tolist() for w in found])
    P = classify(fmap, found[0], "P")
    Q = classify(fmap, found[1], "Q")
    det = np.linalg.det(fmap.jacobian(P.location))
    if abs(P.eigenvalues[0] * P.eigenvalues[1] - det) > 1e-12 * max(1.0, abs(det)):
        logger.warning("Eigenvalue product at P differs from det by %.3g",
                       abs(P.eigenvalues[0] * P.eigenvalues[1] - det))
    return P, Q


def local_manifold_seed(fp, kind, half_length=MAX_SEED_HALF_LENGTH, n_points=101):
    """Straight segment through fp along the expanding or contracting eigenvector.

    The fixed point is the exact middle vertex (``meta['anchor']``).
    """
    if kind not in ("stable", "unstable"):
        raise ValueError(f"kind must be 'stable' or 'unstable', got {kind!r}")
    if half_length > MAX_SEED_HALF_LENGTH:
        raise PreconditionError("seed half_length exceeds the local linear regime",
                                half_length=half_length)
    if not fp.is_saddle:
        raise PreconditionError("not a saddle", label=fp.label, eigenvalues=list(fp.eigenvalues))
    if n_points % 2 == 0:
        n_points += 1
    index = 0 if kind == "unstable" else 1
    direction = fp.eigenvectors[index]
    eigenvalue = fp.eigenvalues[index]
    t = np.linspace(-half_length, half_length, n_points)
    vertices = fp.location[None, :] + t[:, None] * direction[None, :]
    anchor = n_points // 2
    vertices[anchor] = fp.location
    tag = f"{'Wu' if kind == 'unstable' else 'Ws'}({fp.label})"
    meta = {"kind": kind, "eigenvalue": eigenvalue,
            "eigenvalue_sign": "negative" if eigenvalue < 0 else "positive",
            "anchor": anchor}
    tangents = np.tile(direction, (n_points, 1))
    return PolyCurve(vertices, tangents, np.zeros(n_points), t + half_length, tag, (), meta)
