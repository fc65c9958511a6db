"""Records passed between the analysis modules and serialised into reports."""
from dataclasses import dataclass, field, fields, is_dataclass, replace
import math

import numpy as np
from scipy.spatial import cKDTree


def to_jsonable(obj):
    """Convert dataclasses, numpy values and non-finite floats into JSON-safe data."""
    if is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return "NaN"
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        return value
    return obj


@dataclass(frozen=True)
class MapParams:
    """Parameters of f(x, y) = (1 - a x^2 + y, b x) + phi(x, y, a)."""
    a: float
    b: float
    eta_bound: float = 0.0
    perturbation: str = "zero"
    perturbation_params: dict = field(default_factory=dict)
    window: tuple = (-2.0, 2.0, -4.0, 2.0)

    def with_a(self, a):
        return replace(self, a=float(a))

    def to_dict(self):
        return {
            "a": self.a,
            "b": self.b,
            "eta_bound": self.eta_bound,
            "perturbation": self.perturbation,
            "perturbation_params": dict(self.perturbation_params),
            "window": list(self.window),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            a=float(data["a"]),
            b=float(data["b"]),
            eta_bound=float(data.get("eta_bound", 0.0)),
            perturbation=data.get("perturbation", "zero"),
            perturbation_params=dict(data.get("perturbation_params", {})),
            window=tuple(float(v) for v in data.get("window", (-2.0, 2.0, -4.0, 2.0))),
        )


@dataclass(frozen=True)
class Constants:
    delta: float = 0.1
    alpha: float = 0.5
    epsilon: float = 0.15
    k0: int = 3
    lambda_hat: float = 0.55
    max_spacing: float = 1e-3
    max_turn: float = 0.05
    blowup: float = 1e6


@dataclass(frozen=True)
class RefinementConfig:
    max_spacing: float = 1e-3
    max_turn: float = 0.05
    max_vertices: int = 1_000_000
    max_passes: int = 60
    min_gap: float = 1e-13


@dataclass
class RunConfig:
    command: str
    family: MapParams
    constants: Constants = field(default_factory=Constants)
    options: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "out"

    def to_dict(self):
        return {
            "command": self.command,
            "family": self.family.to_dict(),
            "constants": {f.name: getattr(self.constants, f.name) for f in fields(self.constants)},
            "options": dict(self.options),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }


@dataclass
class Orbit:
    points: np.ndarray
    escaped: bool = False
    direction: int = 1

    def __len__(self):
        return len(self.points)


@dataclass
class FixedPointData:
    label: str
    location: np.ndarray
    eigenvalues: tuple
    eigenvectors: np.ndarray
    orientation: str

    @property
    def is_saddle(self):
        lam_exp, lam_con = self.eigenvalues
        return abs(lam_exp) > 1.0 > abs(lam_con)

    def to_dict(self):
        return {
            "label": self.label,
            "location": self.location,
            "eigenvalues": list(self.eigenvalues),
            "eigenvectors": self.eigenvectors,
            "orientation": self.orientation,
        }


class PolyCurve:
    """Polyline with per-vertex tangents, signed curvatures and arclength.

    ``breaks`` lists the vertex indices i for which the segment (i, i + 1) is a
    gap between clipped pieces rather than part of the curve.
    """

    def __init__(self, vertices, tangents, curvatures, param, tag="", breaks=(), meta=None):
        self.vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        self.tangents = np.asarray(tangents, dtype=float).reshape(-1, 2)
        self.curvatures = np.asarray(curvatures, dtype=float).reshape(-1)
        self.param = np.asarray(param, dtype=float).reshape(-1)
        self.tag = tag
        self.breaks = tuple(int(i) for i in breaks)
        self.meta = dict(meta or {})

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f'<PolyCurve {self.tag} n={len(self)} pieces={len(self.breaks) + 1}>'

    @classmethod
    def from_pieces(cls, pieces, tag="", meta=None):
        pieces = [_drop_repeats(np.asarray(p, dtype=float).reshape(-1, 2)) for p in pieces if len(p) > 0]
        if not pieces:
            return cls(np.empty((0, 2)), np.empty((0, 2)), np.empty(0), np.empty(0), tag, (), meta)
        verts, tans, kappas, params, breaks = [], [], [], [], []
        offset = 0.0
        count = 0
        for piece in pieces:
            if count:
                breaks.append(count - 1)
                offset += float(np.hypot(*(piece[0] - verts[-1][-1])))
            t, k, s = piece_geometry(piece)
            verts.append(piece)
            tans.append(t)
            kappas.append(k)
            params.append(s + offset)
            offset = params[-1][-1]
            count += len(piece)
        return cls(np.vstack(verts), np.vstack(tans), np.concatenate(kappas),
                   np.concatenate(params), tag, breaks, meta)

    def piece_slices(self):
        starts = [0] + [b + 1 for b in self.breaks]
        stops = [b + 1 for b in self.breaks] + [len(self)]
        return [slice(a, b) for a, b in zip(starts, stops)]

    def pieces(self):
        return [self.vertices[s] for s in self.piece_slices()]

    def segment_mask(self):
        """Boolean mask over vertex pairs (i, i + 1) that are real segments."""
        mask = np.ones(max(len(self) - 1, 0), dtype=bool)
        if self.breaks:
            mask[list(self.breaks)] = False
        return mask

    def segments(self):
        """Return (start points, end points, start indices) of the real segments."""
        idx = np.flatnonzero(self.segment_mask())
        return self.vertices[idx], self.vertices[idx + 1], idx

    @property
    def length(self):
        p0, p1, _ = self.segments()
        return float(np.hypot(*(p1 - p0).T).sum()) if len(p0) else 0.0

    def closest_to(self, points):
        """Distance from each point to the curve and the closest point on it."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(self) == 0:
            return np.full(len(points), np.inf), np.full(points.shape, np.nan)
        p0, p1, _ = self.segments()
        if len(p0) == 0:
            d = np.linalg.norm(points[:, None, :] - self.vertices[None, :, :], axis=-1)
            j = d.argmin(axis=1)
            return d[np.arange(len(points)), j], self.vertices[j]
        if len(p0) * len(points) <= 1_000_000:
            d, c = _segment_closest(points[:, None, :], p0[None], p1[None])
            j = d.argmin(axis=1)
            rows = np.arange(len(points))
            return d[rows, j], c[rows, j]
        tree = cKDTree(self.vertices)
        k = min(8, len(self))
        _, nearest = tree.query(points, k=k)
        nearest = nearest.reshape(len(points), k)
        seg_mask = self.segment_mask()
        best = np.full(len(points), np.inf)
        where = np.full(points.shape, np.nan)
        for col in range(k):
            for cand in (nearest[:, col] - 1, nearest[:, col]):
                ok = (cand >= 0) & (cand < len(seg_mask))
                ok[ok] = seg_mask[cand[ok]]
                if not ok.any():
                    continue
                d, c = _segment_closest(points[ok], self.vertices[cand[ok]], self.vertices[cand[ok] + 1])
                better = d < best[ok]
                rows = np.flatnonzero(ok)[better]
                best[rows] = d[better]
                where[rows] = c[better]
        return best, where

    def distance_to(self, points):
        return self.closest_to(points)[0]

    def hausdorff(self, other):
        if len(self) == 0 or len(other) == 0:
            return math.inf
        d_ab = other.distance_to(self.vertices).max()
        d_ba = self.distance_to(other.vertices).max()
        return float(max(d_ab, d_ba))

    def to_dict(self):
        return {"tag": self.tag, "vertices": len(self), "pieces": len(self.breaks) + 1,
                "length": self.length, "meta": self.meta}


def _drop_repeats(piece):
    if len(piece) < 2:
        return piece
    keep = np.concatenate(([True], np.any(np.diff(piece, axis=0) != 0, axis=1)))
    return piece[keep]


def piece_geometry(piece):
    """Unit tangents, signed curvatures and arclength of a single polyline piece."""
    n = len(piece)
    steps = np.hypot(*np.diff(piece, axis=0).T) if n > 1 else np.empty(0)
    s = np.concatenate(([0.0], np.cumsum(steps)))
    if n == 1:
        return np.array([[1.0, 0.0]]), np.zeros(1), s
    if n == 2:
        d = (piece[1] - piece[0]) / max(steps[0], 1e-300)
        return np.tile(d, (2, 1)), np.zeros(2), s
    dx = np.gradient(piece[:, 0], s)
    dy = np.gradient(piece[:, 1], s)
    ddx = np.gradient(dx, s)
    ddy = np.gradient(dy, s)
    speed = np.hypot(dx, dy)
    speed = np.where(speed > 0, speed, 1e-300)
    tangents = np.column_stack((dx, dy)) / speed[:, None]
    kappa = (dx * ddy - dy * ddx) / speed ** 3
    return tangents, kappa, s


def _segment_closest(p, a, b):
    ab = b - a
    denom = np.einsum("...i,...i->...", ab, ab)
    denom = np.where(denom > 0, denom, 1.0)
    t = np.clip(np.einsum("...i,...i->...", p - a, ab) / denom, 0.0, 1.0)
    closest = a + t[..., None] * ab
    return np.linalg.norm(p - closest, axis=-1), closest


@dataclass
class CrossingReport:
    points: list
    count: int
    min_clearance: float
    witness: tuple = None

    def to_dict(self):
        return {
            "count": self.count,
            "min_clearance": self.min_clearance,
            "points": [{"x": p[0], "y": p[1], "angle": ang} for p, ang in self.points],
            "witness": self.witness,
        }


@dataclass(frozen=True)
class RegionSpec:
    kind: str
    epsilon: float = None
    n: int = None
    delta: float = 0.1


class DRegion:
    """Closed curved polygon, counterclockwise, bounded by manifold arcs."""

    def __init__(self, boundary, tag="D", meta=None):
        boundary = np.asarray(boundary, dtype=float).reshape(-1, 2)
        if _signed_area(boundary) < 0:
            boundary = boundary[::-1]
        self.boundary = boundary
        self.tag = tag
        self.meta = dict(meta or {})

    @property
    def area(self):
        return abs(_signed_area(self.boundary))

    @property
    def bbox(self):
        lo = self.boundary.min(axis=0)
        hi = self.boundary.max(axis=0)
        return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])

    def contains(self, points):
        """Nonzero winding number of the boundary around each point."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        x, y = points[:, 0][:, None], points[:, 1][:, None]
        v0 = self.boundary
        v1 = np.roll(self.boundary, -1, axis=0)
        edge = v1 - v0
        winding = np.zeros(len(points), dtype=int)
        chunk = max(1, 2_000_000 // max(len(v0), 1))
        for start in range(0, len(points), chunk):
            xs, ys = x[start:start + chunk], y[start:start + chunk]
            left = edge[:, 0] * (ys - v0[:, 1]) - edge[:, 1] * (xs - v0[:, 0])
            up = (v0[:, 1] <= ys) & (v1[:, 1] > ys) & (left > 0)
            down = (v0[:, 1] > ys) & (v1[:, 1] <= ys) & (left < 0)
            winding[start:start + chunk] = up.sum(axis=1) - down.sum(axis=1)
        return winding != 0

    def sample(self, n, rng):
        """Rejection-sample n points uniformly inside the region."""
        xmin, xmax, ymin, ymax = self.bbox
        out = []
        have = 0
        while have < n:
            batch = rng.uniform((xmin, ymin), (xmax, ymax), size=(max(4 * (n - have), 256), 2))
            batch = batch[self.contains(batch)]
            out.append(batch)
            have += len(batch)
        return np.vstack(out)[:n]

    def to_dict(self):
        return {"tag": self.tag, "vertices": len(self.boundary), "area": self.area,
                "bbox": list(self.bbox), "meta": self.meta}


def _signed_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass
class EscapeReport:
    region: str
    grid: int
    samples: int
    max_steps: int
    failures: list = field(default_factory=list)
    doubling_violations: int = 0
    direction: str = "forward"

    @property
    def passed(self):
        return not self.failures and self.doubling_violations == 0

    def to_dict(self):
        return {"region": self.region, "grid": self.grid, "samples": self.samples,
                "max_steps": self.max_steps, "direction": self.direction,
                "doubling_violations": self.doubling_violations,
                "failures": self.failures, "passed": self.passed}


@dataclass
class LocalizationReport:
    samples: int
    n_iter: int
    bounded: int
    violations: list
    area_ratio: float
    area_bound: float
    tol_loc: float
    area_steps: int = 5

    @property
    def passed(self):
        return not self.violations and self.area_ratio <= self.area_bound

    def to_dict(self):
        return {"samples": self.samples, "n_iter": self.n_iter, "bounded": self.bounded,
                "violations": self.violations, "area_ratio": self.area_ratio,
                "area_bound": self.area_bound, "area_steps": self.area_steps, "tol_loc": self.tol_loc,
                "passed": self.passed}


@dataclass
class HyperbolicFrame:
    order: int
    e_k: np.ndarray
    f_k: np.ndarray
    log_e: float
    log_f: float
    contdir_mismatch: float = None

    @property
    def log_h(self):
        return self.log_e - self.log_f

    @property
    def contdir_agrees(self):
        """False when the closed-form angle and the SVD frame disagree beyond 1e-8."""
        return self.contdir_mismatch is None or self.contdir_mismatch <= 1e-8


@dataclass
class FoliationLeaf:
    curve: PolyCurve
    order: int
    seed: np.ndarray


@dataclass
class AdmissibleCurve:
    curve: object
    alpha: float
    max_slope: float
    max_curvature: float
    is_long: bool
    epsilon: float

    @property
    def admissible(self):
        return self.max_slope < self.alpha and self.max_curvature < self.alpha


@dataclass
class CriticalPoint:
    order: int
    t: float
    c_k: np.ndarray
    c0_k: np.ndarray
    residual: float
    image_curvature: float
    a: float = None
    b: float = None

    @property
    def quadratic(self):
        return self.a is None or self.image_curvature > self.a / abs(self.b)

    def to_dict(self):
        return {"order": self.order, "t": self.t, "cx": self.c_k[0], "cy": self.c_k[1],
                "c0x": self.c0_k[0], "c0y": self.c0_k[1], "residual": self.residual,
                "image_curvature": self.image_curvature}


@dataclass
class TangencyReport:
    a_star: float
    case: str
    tol: float
    bracket_history: list
    gap_samples: list
    witness: tuple = None
    manifolds: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)


@dataclass
class SegmentStat:
    start: tuple
    length: int
    log_expansion: float
    ue1_passed: bool
    returns_to_delta: bool = False
    ue2_passed: bool = None


@dataclass
class ConeCertificate:
    epsilon: float
    alpha: float
    lambda_hat: float
    samples: int
    slope_violations: list
    segment_stats: list
    measured_C_eps: float
    C_eps_target: float
    below_a_star: bool = False

    @property
    def passed(self):
        return (not self.slope_violations
                and all(s.ue1_passed for s in self.segment_stats)
                and all(s.ue2_passed is not False for s in self.segment_stats))

    def to_dict(self):
        return {"epsilon": self.epsilon, "alpha": self.alpha, "lambda_hat": self.lambda_hat,
                "samples": self.samples, "slope_violations": self.slope_violations,
                "segments": len(self.segment_stats),
                "ue1_failures": sum(not s.ue1_passed for s in self.segment_stats),
                "ue2_checked": sum(s.ue2_passed is not None for s in self.segment_stats),
                "ue2_failures": sum(s.ue2_passed is False for s in self.segment_stats),
                "segment_stats": self.segment_stats,
                "measured_C_eps": self.measured_C_eps, "C_eps_target": self.C_eps_target,
                "below_a_star": self.below_a_star, "passed": self.passed}


@dataclass
class LyapunovReport:
    label: str
    lambda_u: float
    lambda_s: float
    n: int
    residual: float
    escaped: bool = False
    period: int = None
    points: np.ndarray = None


@dataclass
class OmegaSample:
    """Points approximating the non-wandering set, with unit W^u tangents."""

    points: np.ndarray
    tangents: np.ndarray
    method: str
    curve: PolyCurve = None

    def __len__(self):
        return len(self.points)

    def to_dict(self):
        return {"method": self.method, "samples": len(self.points),
                "bbox": [float(self.points[:, 0].min()), float(self.points[:, 0].max()),
                         float(self.points[:, 1].min()), float(self.points[:, 1].max())]
                if len(self.points) else None}


@dataclass
class SplittingField:
    points: np.ndarray
    e_u: np.ndarray
    e_s: np.ndarray
    angles: np.ndarray
    forward_logs: np.ndarray
    backward_logs: np.ndarray
    modulus: dict
    invariance_defect: float
    k_split: int

    @property
    def min_angle(self):
        return float(self.angles.min()) if len(self.angles) else math.nan

    @property
    def mean_angle(self):
        return float(self.angles.mean()) if len(self.angles) else math.nan

    def to_dict(self):
        return {"samples": len(self.points), "k_split": self.k_split,
                "min_angle": self.min_angle, "mean_angle": self.mean_angle,
                "modulus": {str(h): v for h, v in self.modulus.items()},
                "invariance_defect": self.invariance_defect}


@dataclass
class HypConstants:
    lam: float
    lambda_hat: float
    epsilon: float
    k0: int
    N_a: int
    C_N_plus: float
    C_N_minus: float
    C_eps: float
    C_a: float
    spot_check_failures: list = field(default_factory=list)
