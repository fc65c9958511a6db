"""One-dimensional kit: g_a = h_a + phi with h_a(x) = 1 - a x^2."""
import logging
import math

import numpy as np
from scipy.optimize import brentq

from errors import BracketError
from fixed_points import one_d_fixed_points

logger = logging.getLogger(__name__)

MAX_PERIOD = 14


class OneDBump:
    """phi(x) = s sin 3x, so the C^2 norm is 9 s."""

    def __init__(self, scale=1e-3):
        self.scale = float(scale)

    @property
    def eta(self):
        return 9.0 * abs(self.scale)

    def value(self, x):
        return self.scale * np.sin(3.0 * x)

    def derivative(self, x):
        return 3.0 * self.scale * np.cos(3.0 * x)

    def second(self, x):
        return -9.0 * self.scale * np.sin(3.0 * x)


class OneDMap:
    def __init__(self, a, perturbation=None):
        self.a = float(a)
        self.phi = perturbation

    def __repr__(self):
        return f'<OneDMap a={self.a} eta={self.eta}>'

    @property
    def eta(self):
        return self.phi.eta if self.phi is not None else 0.0

    def with_a(self, a):
        return OneDMap(a, self.phi)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = 1.0 - self.a * x * x
        return y + self.phi.value(x) if self.phi is not None else y

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        d = -2.0 * self.a * x
        return d + self.phi.derivative(x) if self.phi is not None else d

    def second(self, x):
        x = np.asarray(x, dtype=float)
        d = np.full(x.shape, -2.0 * self.a)
        return d + self.phi.second(x) if self.phi is not None else d

    def iterate(self, x, n):
        with np.errstate(all="ignore"):
            for _ in range(n):
                x = self(x)
        return x

    def multiplier(self, orbit):
        return float(np.prod(self.derivative(np.asarray(orbit))))


def _polish(g, x, max_iter=50):
    for _ in range(max_iter):
        step = (g(x) - x) / (g.derivative(x) - 1.0)
        x = x - step
        if abs(step) < 1e-15:
            break
    return float(x)


def od_fixed_points(a_or_map):
    """(p_a, q_a); perturbed maps are polished by Newton from the closed form."""
    if isinstance(a_or_map, OneDMap):
        p, q = one_d_fixed_points(a_or_map.a)
        if a_or_map.phi is None:
            return p, q
        return _polish(a_or_map, p), _polish(a_or_map, q)
    return one_d_fixed_points(a_or_map)


def _power_residual(g, p):
    def h(x):
        return g.iterate(x, p) - x
    return h


def od_periodic_orbits(g, max_period=12, interval=(-1.5, 1.5)):
    """Orbits of primitive period <= max_period from sign changes of g^p(x) - x, with multipliers."""
    if max_period > MAX_PERIOD:
        raise ValueError(f"max_period must be at most {MAX_PERIOD}")
    orbits, keys = [], []
    for p in range(1, max_period + 1):
        h = _power_residual(g, p)
        xs = np.linspace(*interval, int(max(1e4, 16 * 2 ** p)))
        with np.errstate(all="ignore"):
            hs = h(xs)
        finite = np.isfinite(hs[:-1]) & np.isfinite(hs[1:])
        for i in np.flatnonzero(finite & (np.sign(hs[:-1]) != np.sign(hs[1:]))):
            root = brentq(lambda x: float(h(x)), xs[i], xs[i + 1], xtol=1e-15)
            orbit = [root]
            for _ in range(p - 1):
                orbit.append(float(g(orbit[-1])))
            orbit = np.array(orbit)
            if p > 1 and np.any(np.abs(orbit[1:] - orbit[0]) < 1e-9):
                continue
            key = orbit.min()
            if any(abs(key - k) < 1e-9 for k in keys):
                continue
            keys.append(key)
            mult = g.multiplier(orbit)
            orbits.append({"period": p, "points": orbit.tolist(), "multiplier": mult,
                           "exponent": math.log(abs(mult)) / p if mult != 0 else -math.inf})
    return orbits


def tangency_functional(g):
    """g^2(0) minus the left fixed point of g."""
    _, q = od_fixed_points(g)
    return float(g(g(0.0))) - q


def od_a_star(perturbation=None, bracket=(1.5, 2.5), tol=1e-12):
    """Parameter where the critical orbit lands on the left fixed point."""
    base = OneDMap(bracket[0], perturbation)

    def T(a):
        return tangency_functional(base.with_a(a))

    lo, hi = T(bracket[0]), T(bracket[1])
    if np.sign(lo) == np.sign(hi):
        raise BracketError("no sign change", bracket=list(bracket), values=[lo, hi])
    return brentq(T, bracket[0], bracket[1], xtol=tol, rtol=4 * np.finfo(float).eps)


def od_expansion_check(g, epsilon=0.15, lambda_hat=0.55, samples=2000, max_len=60, C_target=0.1):
    """UE1-style products of |g'| along orbit segments outside (-eps, eps) in [q, -q]."""
    _, q = od_fixed_points(g)
    bound = abs(q)
    xs = np.linspace(-bound, bound, samples)
    xs = xs[np.abs(xs) >= epsilon]
    worst = np.full(len(xs), np.inf)
    log_d = np.zeros(len(xs))
    alive = np.ones(len(xs), dtype=bool)
    x = xs.copy()
    with np.errstate(all="ignore"):
        for k in range(1, max_len + 1):
            log_d = np.where(alive, log_d + np.log(np.abs(g.derivative(x))), log_d)
            x = np.where(alive, g(x), x)
            worst = np.where(alive, np.minimum(worst, log_d - lambda_hat * k), worst)
            alive &= (np.abs(x) <= bound + 1e-12) & (np.abs(x) >= epsilon)
            if not alive.any():
                break
    finite = worst[np.isfinite(worst)]
    measured = float(math.exp(min(finite.min(), 0.0))) if len(finite) else 1.0
    return {"a": g.a, "epsilon": epsilon, "lambda_hat": lambda_hat, "segments": len(xs),
            "measured_C_eps": measured, "C_target": C_target, "passed": measured >= C_target}
