"""Averages over dilated flat pieces of submanifolds of R^d.

A flat piece is ``U = {u + V lam : lam in (0, 1)^m}`` with ``u`` outside the
span of the m columns of V.  Its dilate ``tU`` carries the normalised
average ``int_(0,1)^m f(U_{t(u + V lam)} x) d lam``.  Re-indexing the flow by
``W = [u | V]`` turns this into an average over the box ``{t} x (0, t)^m``
for the (m+1)-parameter action ``s -> U_{W s}``, which is how box-average
counterexamples transfer to flat pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .averaging import (
    QuadratureResult,
    exact_indicator_box_average,
    exact_indicator_segment_average,
    exact_point,
    sample_points,
    tensor_midpoint,
)
from .cone_geometry import generate_family
from .exact import ExactScalar, as_exact, exact_sqrt, rational_rank
from .systems import Indicator, TorusSystem, canonical_suspension, field_nullspace
from .sweepout import build_counterexample_set, sweepout_plan
from .torus_sets import TorusSet
from .towers import suspension_tower

__all__ = [
    "DependentDirections",
    "TowerDoesNotFit",
    "FlatPiece",
    "flat_piece",
    "reindexed_matrix",
    "flow_for_reindexed",
    "dilated_flat_average",
    "reduction_check",
    "lower_bound_check",
    "genericity_failure_experiment",
    "gram_determinant",
    "jacobian_check",
    "character_flat_average",
    "GenericityReport",
]

PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


class DependentDirections(ValueError):
    """u, v_1, ..., v_m are linearly dependent."""


class TowerDoesNotFit(ValueError):
    """The flow tower needed by the experiment wraps around the torus."""


def _mat_mul(A, B):
    return [[sum((A[i][k] * B[k][j] for k in range(len(B))), ExactScalar(0)) for j in range(len(B[0]))]
            for i in range(len(A))]


def _det(M) -> ExactScalar:
    """Exact determinant by Gaussian elimination over the number field."""
    M = [list(r) for r in M]
    n = len(M)
    det = ExactScalar(1)
    for c in range(n):
        p = next((r for r in range(c, n) if M[r][c]), None)
        if p is None:
            return ExactScalar(0)
        if p != c:
            M[c], M[p] = M[p], M[c]
            det = -det
        det = det * M[c][c]
        inv = M[c][c].inverse()
        for r in range(c + 1, n):
            if M[r][c]:
                f = M[r][c] * inv
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return det


def _inverse(M):
    n = len(M)
    aug = [list(r) + [ExactScalar(1 if i == j else 0) for j in range(n)] for i, r in enumerate(M)]
    for c in range(n):
        p = next(r for r in range(c, n) if aug[r][c])
        aug[c], aug[p] = aug[p], aug[c]
        inv = aug[c][c].inverse()
        aug[c] = [v * inv for v in aug[c]]
        for r in range(n):
            if r != c and aug[r][c]:
                f = aug[r][c]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[c])]
    return [row[n:] for row in aug]


def gram_determinant(V: Sequence[Sequence]) -> ExactScalar:
    """det(V^T V) for direction vectors given as the columns of V."""
    cols = [[as_exact(v) for v in col] for col in V]
    m = len(cols)
    G = [[sum((a * b for a, b in zip(cols[i], cols[j])), ExactScalar(0)) for j in range(m)] for i in range(m)]
    return _det(G)


@dataclass(frozen=True)
class FlatPiece:
    u: tuple
    V: tuple  # m direction vectors of length d
    gram: ExactScalar
    vol: ExactScalar

    @property
    def d(self) -> int:
        return len(self.u)

    @property
    def m(self) -> int:
        return len(self.V)

    def W(self) -> list[list[ExactScalar]]:
        """d x (m+1) matrix with columns u, v_1, ..., v_m."""
        cols = [self.u] + list(self.V)
        return [[cols[j][i] for j in range(len(cols))] for i in range(self.d)]

    def to_json(self) -> dict:
        return {"u": [str(v) for v in self.u], "V": [[str(v) for v in col] for col in self.V],
                "gram": str(self.gram), "gram_float": float(self.gram), "vol": str(self.vol)}


def _field_rank(rows) -> int:
    if not rows:
        return 0
    return len(rows[0]) - len(field_nullspace(rows))


def flat_piece(u: Sequence, V: Sequence[Sequence], vol=None) -> FlatPiece:
    """Validated flat piece; ``vol`` is the m-volume of the ambient manifold (default: the piece's own)."""
    uu = tuple(as_exact(v) for v in u)
    VV = tuple(tuple(as_exact(v) for v in col) for col in V)
    d, m = len(uu), len(VV)
    if m < 1 or m >= d or any(len(col) != d for col in VV):
        raise ValueError("need 1 <= m < d direction vectors of length d")
    rows = [list(uu)] + [list(col) for col in VV]
    if all(v.is_rational() for r in rows for v in r):
        rank = rational_rank([[v.to_fraction() for v in r] for r in rows])
    else:
        rank = _field_rank(rows)
    if rank < m + 1:
        raise DependentDirections("u, v_1, ..., v_m must be linearly independent")
    det = gram_determinant(VV)
    if not det.is_rational():
        raise ValueError("directions must give a rational Gram determinant")
    gram = exact_sqrt(det.to_fraction())
    vol = gram if vol is None else as_exact(vol)
    if vol < gram:
        raise ValueError("the ambient manifold cannot be smaller than the piece")
    return FlatPiece(uu, VV, gram, vol)


def reindexed_matrix(system: TorusSystem, piece: FlatPiece) -> list[list[ExactScalar]]:
    """Translation matrix of the action s -> U_{W s}: Theta W."""
    return _mat_mul([list(r) for r in system.matrix], piece.W())


def flow_for_reindexed(target: TorusSystem, piece: FlatPiece) -> TorusSystem:
    """The R^d flow whose re-indexed action along the piece is ``target``.

    With d = m + 1 this is Theta_target W^-1.  For d > m + 1 the matrix W is
    completed with standard basis vectors to an invertible one, and the
    extra directions act by the remaining columns of ``target``.
    """
    d, m = piece.d, piece.m
    W = piece.W()
    if target.d != d:
        raise ValueError("target action must have d parameters")
    cols = [[W[i][j] for i in range(d)] for j in range(m + 1)]
    for e in range(d):
        if len(cols) == d:
            break
        cand = cols + [[ExactScalar(1 if i == e else 0) for i in range(d)]]
        if _field_rank(cand) == len(cand):
            cols = cand
    Wfull = [[cols[j][i] for j in range(d)] for i in range(d)]
    theta = _mat_mul([list(r) for r in target.matrix], _inverse(Wfull))
    return TorusSystem("suspension", tuple(tuple(r) for r in theta), name="flow_for_reindexed")


def _start_and_directions(system, piece, x, t):
    """x + t Theta u and the columns t Theta v_j, exact."""
    te = as_exact(t) if not isinstance(t, float) else ExactScalar(Fraction(t))
    xe = exact_point(x)
    M = reindexed_matrix(system, piece)
    start = tuple((xc + te * M[c][0]).frac() for c, xc in enumerate(xe))
    dirs = [tuple(te * M[c][j + 1] for c in range(system.m)) for j in range(piece.m)]
    return start, dirs, M, te, xe


def dilated_flat_average(system: TorusSystem, obs, x, piece: FlatPiece, t, method: str = "parametrized",
                         **kw):
    """Normalised average of f over the dilate tU.

    ``parametrized`` integrates over lam in (0, 1)^m; ``reindexed`` averages
    over the box (0, t)^m of the re-indexed action and divides by t^m.
    Indicators with m = 1 are integrated exactly on either path; everything
    else uses tensor-midpoint quadrature (a :class:`QuadratureResult`).
    """
    start, dirs, M, te, xe = _start_and_directions(system, piece, x, t)
    m = piece.m
    if method == "parametrized":
        if isinstance(obs, Indicator) and m == 1:
            return exact_indicator_segment_average(obs, start, dirs[0])
        aux = TorusSystem("suspension", tuple(tuple(d[c] for d in dirs) for c in range(system.m)))
        return tensor_midpoint(aux, obs, np.array([float(v) for v in start]), ((0,) * m, (1,) * m), **kw)
    if method == "reindexed":
        aux = TorusSystem("suspension", tuple(tuple(M[c][j + 1] for j in range(m)) for c in range(system.m)))
        box = ((ExactScalar(0),) * m, (te,) * m)
        if isinstance(obs, Indicator):
            try:
                return exact_indicator_box_average(aux, obs, start, box)
            except NotImplementedError:
                pass
        fbox = ((0.0,) * m, (float(te),) * m)
        return tensor_midpoint(aux, obs, np.array([float(v) for v in start]), fbox, **kw)
    raise ValueError(f"unknown method {method!r}")


def character_flat_average(system: TorusSystem, freq, x, piece: FlatPiece, t) -> complex:
    """Closed form of the flat-piece average of a character.

    exp(2 pi i xi . (x + t Theta u)) * prod_j (exp(2 pi i t c_j) - 1) / (2 pi i t c_j)
    with c_j = xi . Theta v_j (factors with c_j = 0 equal 1).
    """
    M = np.array([[float(v) for v in row] for row in reindexed_matrix(system, piece)])
    xi = np.asarray(freq, dtype=np.float64)
    tf = float(as_exact(t)) if not isinstance(t, float) else t
    c = xi @ M
    val = np.exp(2j * math.pi * (xi @ np.asarray([float(v) for v in exact_point(x)]) + tf * c[0]))
    for cj in c[1:]:
        z = 2j * math.pi * tf * cj
        val *= 1.0 if cj == 0 else np.expm1(z) / z
    return complex(val)


def _value(v):
    if isinstance(v, QuadratureResult):
        return v.value, v.error
    return v, 0.0


def reduction_check(system: TorusSystem, obs, x, piece: FlatPiece, t, **kw) -> dict:
    """Both sides of the change of variables between the unit-cube and (0, t)^m forms."""
    lhs, e1 = _value(dilated_flat_average(system, obs, x, piece, t, "parametrized", **kw))
    rhs, e2 = _value(dilated_flat_average(system, obs, x, piece, t, "reindexed", **kw))
    exact = isinstance(lhs, ExactScalar) and isinstance(rhs, ExactScalar)
    diff = (lhs - rhs) if exact else abs(complex(lhs) - complex(rhs))
    return {
        "lhs": str(lhs) if exact else repr(lhs),
        "rhs": str(rhs) if exact else repr(rhs),
        "exact": exact,
        "difference": str(diff) if exact else float(diff),
        "agree": (diff == 0) if exact else float(diff) <= max(1e-8, e1 + e2),
        "tolerance": 0 if exact else max(1e-8, e1 + e2),
    }


def jacobian_check(piece: FlatPiece, t) -> tuple[ExactScalar, ExactScalar]:
    """m-volume of tU from its parametrisation versus t^m sqrt(det V^T V).

    The left side scales each direction by t and takes the square root of the
    Gram determinant of the scaled columns, an independent exact computation.
    """
    te = as_exact(t)
    scaled = [[te * v for v in col] for col in piece.V]
    left = exact_sqrt(gram_determinant(scaled).to_fraction())
    return left, te**piece.m * piece.gram


def lower_bound_check(system: TorusSystem, S: TorusSet, x, piece: FlatPiece, t) -> dict:
    """Full-manifold average of the indicator against (gram / vol) * unit-cube average.

    The part of the manifold outside the piece is counted as zero, the worst
    case.  For m = 1 the piece integral is taken in arc length: the segment
    has length |v| = gram, so the integral is |v| times the mean along it.
    """
    obs = Indicator(S)
    avg_v, _ = _value(dilated_flat_average(system, obs, x, piece, t, "parametrized"))
    if piece.m == 1 and isinstance(avg_v, ExactScalar):
        start, dirs, *_ = _start_and_directions(system, piece, x, t)
        length = exact_sqrt(gram_determinant(piece.V).to_fraction())
        integral = length * exact_indicator_segment_average(obs, start, dirs[0])
        full = integral / piece.vol
        right = piece.gram / piece.vol * avg_v
        ok = full >= right
        return {"full_average": str(full), "full_average_float": float(full), "lower_bound": str(right),
                "lower_bound_float": float(right), "holds": bool(ok), "exact": True}
    full = float(piece.gram) * float(np.real(avg_v)) / float(piece.vol)
    right = float(piece.gram / piece.vol) * float(np.real(avg_v))
    return {"full_average": repr(full), "full_average_float": full, "lower_bound": repr(right),
            "lower_bound_float": right, "holds": full >= right - 1e-12, "exact": False}


# -- the genericity experiment ----------------------------------------------


def _plan_for(p: int, m: int, K: int):
    fam = generate_family(f"flat_boxes:m={m}", K)
    plan = sweepout_plan(fam, 1, p, pad=False)
    L1 = plan.heights[0]
    rest = [3 * h for h in plan.heights[1:]]
    gamma = ExactScalar(1 / max(as_exact(v).to_fraction() for v in [L1] + rest))
    mu_E = 4 * as_exact(plan.lam) * gamma
    for v in rest:
        mu_E = mu_E * gamma * v
    return fam, plan, gamma, mu_E


def _float_segment_scan(E: TorusSet, starts: np.ndarray, direction: np.ndarray, n: int = 4096) -> np.ndarray:
    lam = (np.arange(n) + 0.5) / n
    pts = np.mod(starts[:, None, :] + lam[None, :, None] * direction[None, None, :], 1.0)
    return E.contains(pts).mean(axis=1)


@dataclass
class GenericityReport:
    p: int
    lam: int
    K: int
    gamma: ExactScalar
    mu_E: ExactScalar
    E: TorusSet
    t_r: list
    best: dict
    lower_bound: float
    gap: float
    success: bool
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    system: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "lambda": self.lam,
            "K": self.K,
            "gamma": str(self.gamma),
            "mu_E": str(self.mu_E),
            "mu_E_float": float(self.mu_E),
            "E": self.E.to_json(),
            "t_r": self.t_r,
            "best": self.best,
            "lower_bound": self.lower_bound,
            "gap": self.gap,
            "success": self.success,
            "notes": self.notes,
            "system": self.system,
        }


def genericity_failure_experiment(piece: FlatPiece, eps=Fraction(1, 10), *, p: int | None = None,
                                  samples: int = 64, seed: int = 0, tol: float = 0.02, target: float = 0.97,
                                  margin: float = 0.5, t_grid: Sequence | None = None, E: TorusSet | None = None,
                                  max_p: int = 64) -> GenericityReport:
    """Flat-piece averages of a small counterexample set that come close to 1.

    The box family [k-1, k) x [0, k)^m has bounded first side, so its cone
    cross-sections grow.  A continuous plan sized so that mu(E) <= eps
    yields E = H on a canonical suspension T^(m+2) carrying the re-indexed
    action; the R^d flow is recovered through the piece's matrix W.
    """
    m = piece.m
    eps_e = as_exact(eps) if not isinstance(eps, float) else ExactScalar(Fraction(eps).limit_denominator(10**6))
    if p is None:
        p = 1
        while True:
            fam, plan, gamma, mu_E = _plan_for(p, m, 16 * p + 16)
            if mu_E <= eps_e or p >= max_p:
                break
            p += 1
    else:
        fam, plan, gamma, mu_E = _plan_for(p, m, 16 * p + 16)
    a = [gamma * exact_sqrt(q) for q in PRIMES[: m + 1]]
    target_sys = canonical_suspension(gamma, a)
    heights = [plan.heights[0]] + [3 * h for h in plan.heights[1:]]
    try:
        tower = suspension_tower(target_sys, heights)
    except ValueError as exc:
        raise TowerDoesNotFit(str(exc)) from exc
    if piece.d != m + 1:
        raise NotImplementedError("the experiment is implemented for d = m + 1")
    sets = build_counterexample_set(plan, tower)
    if E is None:
        E = sets.H
        if E.measure != mu_E:
            raise AssertionError("H measure differs from the planned value")
    else:
        mu_E = E.measure
    flow_sys = flow_for_reindexed(target_sys, piece)
    notes = []
    # re-indexed action matrix (should equal the canonical one)
    M = reindexed_matrix(flow_sys, piece)
    theta = np.array([[float(v) for v in row] for row in M])
    pts = sample_points(flow_sys.m, samples, seed)
    if t_grid is None:
        t_grid = [k - 0.5 for k in range(1, plan.K + 2 * plan.lam + 2)]
    rows = []
    best = None
    found = []
    thr = target - tol
    for t in t_grid:
        probes = [float(t)]
        vals = _scan_t(E, pts, theta, float(t), m)
        for s_idx, v in enumerate(vals):
            rows.append([repr(float(t)), s_idx, repr(float(v))])
        k = math.floor(float(t)) + 1
        # bisection refinement inside [k-1, k) when a probe is close below the target
        if thr - 0.05 <= vals.max() < thr:
            lo, hi = k - 1.0, float(k)
            for _ in range(6):
                mid_l, mid_r = (lo + (lo + hi) / 2) / 2, ((lo + hi) / 2 + hi) / 2
                vl, vr = _scan_t(E, pts, theta, mid_l, m).max(), _scan_t(E, pts, theta, mid_r, m).max()
                if vl >= vr:
                    hi = (lo + hi) / 2
                    probes.append(mid_l)
                else:
                    lo = (lo + hi) / 2
                    probes.append(mid_r)
        for tp in probes:
            v = _scan_t(E, pts, theta, tp, m) if tp != float(t) else vals
            i = int(np.argmax(v))
            if best is None or v[i] > best[0]:
                best = (float(v[i]), tp, i)
            if v[i] >= thr:
                found.append((tp, i, float(v[i])))
    if best is None:
        raise ValueError("empty t grid")
    # exact recheck of the best probe (m = 1) through the re-indexed box path
    bval, bt, bi = best
    best_info = {"t": bt, "sample": bi, "float_average": bval}
    exact_val = None
    if m == 1:
        x = exact_point(pts[bi])
        exact_val = dilated_flat_average(flow_sys, Indicator(E), x, piece, ExactScalar(Fraction(bt)), "parametrized")
        best_info["exact_average"] = str(exact_val)
        best_info["exact_average_float"] = float(exact_val)
        best_info["point"] = [str(v) for v in x]
    avg_for_bound = float(exact_val) if exact_val is not None else bval
    lower = float(piece.gram / piece.vol) * avg_for_bound
    gap = lower - float(mu_E)
    success = bool(found) and avg_for_bound >= thr and gap >= margin
    if not found:
        notes.append("no t in the grid reached the threshold; extend the grid")
    return GenericityReport(
        p=plan.p, lam=plan.lam, K=plan.K, gamma=gamma, mu_E=mu_E, E=E,
        t_r=[{"t": tp, "sample": i, "average": v} for tp, i, v in found[:20]],
        best=best_info, lower_bound=lower, gap=gap, success=success, rows=rows, notes=notes,
        system={"target": target_sys.describe(), "flow": flow_sys.describe()},
    )


def _scan_t(E: TorusSet, pts: np.ndarray, theta: np.ndarray, t: float, m: int) -> np.ndarray:
    """Float flat averages at parameter t for every sample point (midpoint in lam)."""
    start = np.mod(pts + t * theta[:, 0], 1.0)
    if m == 1:
        return _float_segment_scan(E, start, t * theta[:, 1])
    n = max(8, int(round((1 << 16) ** (1.0 / m))))
    grids = np.meshgrid(*[(np.arange(n) + 0.5) / n for _ in range(m)], indexing="ij")
    lam = np.stack([g.ravel() for g in grids], axis=1)
    offs = t * lam @ theta[:, 1:].T
    vals = E.contains(np.mod(start[:, None, :] + offs[None], 1.0))
    return vals.mean(axis=1)
