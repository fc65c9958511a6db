"""Hénon-like maps f(x, y) = (1 - a x^2 + y, b x) + phi(x, y, a).

All evaluations accept a single point of shape (2,) or a batch of shape (N, 2)
and return arrays of matching leading shape.
"""
import logging

import numpy as np

from errors import InverseError
from models import MapParams, Orbit

logger = logging.getLogger(__name__)

BLOWUP = 1e6


class Perturbation:
    """C^2 perturbation phi with analytic first and second derivatives.

    gradient rows are (phi1, phi2), columns (d/dx, d/dy, d/da); hessian is the
    matching (2, 3, 3) tensor.
    """

    name = "base"
    is_zero = False

    def value(self, x, y, a):
        raise NotImplementedError

    def gradient(self, x, y, a):
        raise NotImplementedError

    def hessian(self, x, y, a):
        raise NotImplementedError

    def inverse_correction(self, x, y, a):
        """Closed-form inverse correction; None when the perturbation supplies none."""
        return None


class ZeroPerturbation(Perturbation):
    name = "zero"
    is_zero = True

    def value(self, x, y, a):
        zero = np.zeros(np.shape(x))
        return zero, zero.copy()

    def gradient(self, x, y, a):
        return np.zeros(np.shape(x) + (2, 3))

    def hessian(self, x, y, a):
        return np.zeros(np.shape(x) + (2, 3, 3))

    def inverse_correction(self, x, y, a):
        zero = np.zeros(np.shape(x))
        return zero, zero.copy()


class BumpPerturbation(Perturbation):
    """phi = c (sin 3x cos 2y, cos x sin y) with c = epsilon * scale."""

    name = "bump"

    def __init__(self, epsilon=0.01, scale=1.0):
        self.epsilon = float(epsilon)
        self.scale = float(scale)
        self.c = self.epsilon * self.scale

    def value(self, x, y, a):
        c = self.c
        return c * np.sin(3 * x) * np.cos(2 * y), c * np.cos(x) * np.sin(y)

    def gradient(self, x, y, a):
        c = self.c
        g = np.zeros(np.shape(x) + (2, 3))
        g[..., 0, 0] = 3 * c * np.cos(3 * x) * np.cos(2 * y)
        g[..., 0, 1] = -2 * c * np.sin(3 * x) * np.sin(2 * y)
        g[..., 1, 0] = -c * np.sin(x) * np.sin(y)
        g[..., 1, 1] = c * np.cos(x) * np.cos(y)
        return g

    def hessian(self, x, y, a):
        c = self.c
        h = np.zeros(np.shape(x) + (2, 3, 3))
        h[..., 0, 0, 0] = -9 * c * np.sin(3 * x) * np.cos(2 * y)
        h[..., 0, 0, 1] = h[..., 0, 1, 0] = -6 * c * np.cos(3 * x) * np.sin(2 * y)
        h[..., 0, 1, 1] = -4 * c * np.sin(3 * x) * np.cos(2 * y)
        h[..., 1, 0, 0] = -c * np.cos(x) * np.sin(y)
        h[..., 1, 0, 1] = h[..., 1, 1, 0] = -c * np.sin(x) * np.cos(y)
        h[..., 1, 1, 1] = -c * np.cos(x) * np.sin(y)
        return h


PERTURBATIONS = {
    "zero": ZeroPerturbation,
    "bump": BumpPerturbation,
}


def build_perturbation(name, params=None):
    try:
        cls = PERTURBATIONS[name]
    except KeyError:
        raise ValueError(f"Unknown perturbation '{name}'; known: {sorted(PERTURBATIONS)}") from None
    return cls(**(params or {}))


class HenonLikeMap:
    """Evaluator for a MapParams family member."""

    def __init__(self, params, blowup=BLOWUP, check_eta=True):
        if not isinstance(params, MapParams):
            params = MapParams.from_dict(params)
        self.params = params
        self.a = params.a
        self.b = params.b
        self.blowup = blowup
        self.phi = build_perturbation(params.perturbation, params.perturbation_params)
        if check_eta and not self.phi.is_zero:
            measured = measure_eta(self, params.window)
            if measured > params.eta_bound:
                logger.warning("Declared eta_bound %.3g is below the measured C2 sup %.3g",
                               params.eta_bound, measured)

    def __repr__(self):
        return f'<HenonLikeMap a={self.a} b={self.b} phi={self.phi.name}>'

    def apply(self, z):
        z = np.asarray(z, dtype=float)
        x, y = z[..., 0], z[..., 1]
        out = np.stack((1.0 - self.a * x * x + y, self.b * x), axis=-1)
        if not self.phi.is_zero:
            p1, p2 = self.phi.value(x, y, self.a)
            out = out + np.stack((p1, p2), axis=-1)
        return out

    def apply_inverse(self, z, max_iter=50):
        if self.b == 0:
            raise InverseError("inverse undefined for b=0")
        z = np.asarray(z, dtype=float)
        X, Y = z[..., 0], z[..., 1]
        x = Y / self.b
        w = np.stack((x, X - 1.0 + self.a * x * x), axis=-1)
        if self.phi.is_zero:
            return w
        correction = self.phi.inverse_correction(X, Y, self.a)
        if correction is not None:
            return w + np.stack(correction, axis=-1)
        return self._newton_inverse(z, w, max_iter)

    def _newton_inverse(self, z, w, max_iter):
        # Newton on apply(w) = z, seeded with the unperturbed closed form.
        flat_z = z.reshape(-1, 2)
        flat_w = w.reshape(-1, 2).copy()
        scale = 1.0 + np.abs(flat_z).max(axis=1)
        for _ in range(max_iter):
            residual = self.apply(flat_w) - flat_z
            if np.all(np.abs(residual).max(axis=1) <= 1e-13 * scale):
                break
            J = self.jacobian(flat_w)
            with np.errstate(all="ignore"):
                flat_w = flat_w - np.linalg.solve(J, residual[..., None])[..., 0]
        residual = np.abs(self.apply(flat_w) - flat_z).max(axis=1)
        if not np.all(np.isfinite(residual)) or np.any(residual > 1e-10 * scale):
            raise InverseError("no inverse supplied and Newton fallback diverged",
                               worst_residual=float(np.nanmax(residual)))
        return flat_w.reshape(w.shape)

    def jacobian(self, z):
        z = np.asarray(z, dtype=float)
        x = z[..., 0]
        J = np.zeros(x.shape + (2, 2))
        J[..., 0, 0] = -2.0 * self.a * x
        J[..., 0, 1] = 1.0
        J[..., 1, 0] = self.b
        if not self.phi.is_zero:
            J = J + self.phi.gradient(x, z[..., 1], self.a)[..., :, :2]
        return J

    def second_derivatives(self, z):
        """D^2 f as a (..., 2, 2, 2) tensor: component, then the two (x, y) slots."""
        z = np.asarray(z, dtype=float)
        x = z[..., 0]
        H = np.zeros(x.shape + (2, 2, 2))
        H[..., 0, 0, 0] = -2.0 * self.a
        if not self.phi.is_zero:
            H = H + self.phi.hessian(x, z[..., 1], self.a)[..., :, :2, :2]
        return H

    def iterate(self, z, n, blowup=None):
        """Orbit of z for |n| steps, forward when n > 0 and backward when n < 0."""
        blowup = self.blowup if blowup is None else blowup
        step = self.apply if n >= 0 else self.apply_inverse
        points = [np.asarray(z, dtype=float)]
        escaped = False
        for _ in range(abs(int(n))):
            nxt = step(points[-1])
            points.append(nxt)
            if not np.all(np.isfinite(nxt)) or np.abs(nxt).max() > blowup:
                escaped = True
                break
        return Orbit(np.array(points), escaped=escaped, direction=1 if n >= 0 else -1)

    def push_vector(self, z, v, n):
        """Point f^n(z) and Df^n_z(v) with the log of the accumulated norm.

        The vector is renormalised at every step; the returned vector is unit.
        """
        z = np.asarray(z, dtype=float)
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v, axis=-1)
        log_gain = np.log(norm)
        v = v / np.expand_dims(norm, -1)
        for _ in range(n):
            v = np.einsum("...ij,...j->...i", self.jacobian(z), v)
            norm = np.linalg.norm(v, axis=-1)
            log_gain = log_gain + np.log(norm)
            v = v / np.expand_dims(norm, -1)
            z = self.apply(z)
        return z, v, log_gain


class LinearMap:
    """Affine map z -> M z + c with constant Jacobian, used as a reference map."""

    def __init__(self, matrix, offset=(0.0, 0.0)):
        self.matrix = np.asarray(matrix, dtype=float)
        self.offset = np.asarray(offset, dtype=float)
        self.a = 0.0
        self.b = float(np.linalg.det(self.matrix))
        self.blowup = BLOWUP

    def apply(self, z):
        return np.asarray(z, dtype=float) @ self.matrix.T + self.offset

    def apply_inverse(self, z):
        return (np.asarray(z, dtype=float) - self.offset) @ np.linalg.inv(self.matrix).T

    def jacobian(self, z):
        shape = np.shape(z)[:-1]
        return np.broadcast_to(self.matrix, shape + (2, 2)).copy()

    def second_derivatives(self, z):
        return np.zeros(np.shape(z)[:-1] + (2, 2, 2))

    iterate = HenonLikeMap.iterate
    push_vector = HenonLikeMap.push_vector


def measure_eta(fmap, window=(-2.0, 2.0, -2.0, 2.0), n=100):
    """Grid sup of |phi|, |grad phi| and |D^2 phi| entries over the window (x, y derivatives only)."""
    xmin, xmax, ymin, ymax = window
    xs, ys = np.meshgrid(np.linspace(xmin, xmax, n), np.linspace(ymin, ymax, n))
    phi = fmap.phi
    p1, p2 = phi.value(xs, ys, fmap.a)
    grad = phi.gradient(xs, ys, fmap.a)[..., :, :2]
    hess = phi.hessian(xs, ys, fmap.a)[..., :, :2, :2]
    return float(max(np.abs(p1).max(), np.abs(p2).max(), np.abs(grad).max(), np.abs(hess).max()))


def det_bound_check(fmap, window=(-2.0, 2.0, -2.0, 2.0), n=100):
    """Return (sup |det Df| on the grid, |b| + 12 eta) with eta measured on the same grid."""
    xmin, xmax, ymin, ymax = window
    xs, ys = np.meshgrid(np.linspace(xmin, xmax, n), np.linspace(ymin, ymax, n))
    pts = np.stack((xs.ravel(), ys.ravel()), axis=-1)
    dets = np.abs(np.linalg.det(fmap.jacobian(pts)))
    eta = measure_eta(fmap, window, n) if not fmap.phi.is_zero else 0.0
    return float(dets.max()), abs(fmap.b) + 12.0 * eta
