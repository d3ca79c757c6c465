"""Translation actions on tori with exact parameters, and observables on them.

Two kinds of system share one representation, an m x d matrix ``Theta`` of
exact scalars acting by ``x -> x + Theta @ j (mod 1)``:

* ``discrete``: j ranges over Z^d (commuting rotations T_1..T_d, column i is
  the translation vector of T_i);
* ``suspension``: j ranges over R^d (a d-parameter translation flow).

Ergodicity and aperiodicity are decided exactly.  Expanding every entry in the
basis {sqrt(D)} turns each question into the rank of a rational matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .exact import ExactScalar, as_exact, rational_rank
from .torus_sets import TorusSet

__all__ = [
    "UncertifiableParameters",
    "TorusSystem",
    "make_system",
    "rotation",
    "product_rotation",
    "canonical_suspension",
    "flow",
    "act",
    "orbit_points",
    "Character",
    "Indicator",
    "TrigPoly",
    "Observable",
    "evaluate",
    "observable_mean",
    "set_measure",
    "sup_norm",
    "field_nullspace",
]

TWO_PI = 2.0 * math.pi


class UncertifiableParameters(ValueError):
    """Parameters are outside the exact classes, or a required property fails."""


def _radicands(entries) -> list[int]:
    out = set()
    for v in entries:
        out |= v.radicands()
    return sorted(out)


def field_nullspace(rows: Sequence[Sequence[ExactScalar]]) -> list[list[ExactScalar]]:
    """Basis of {v : rows @ v = 0} over the number field (exact RREF)."""
    mat = [[as_exact(v) for v in r] for r in rows]
    if not mat:
        return []
    ncols = len(mat[0])
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(mat)) if mat[i][c]), None)
        if p is None:
            continue
        mat[r], mat[p] = mat[p], mat[r]
        inv = mat[r][c].inverse()
        mat[r] = [v * inv for v in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][c]:
                f = mat[i][c]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
        if r == len(mat):
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [ExactScalar(0)] * ncols
        v[fc] = ExactScalar(1)
        for row_i, pc in enumerate(pivots):
            v[pc] = -mat[row_i][fc]
        basis.append(v)
    return basis


@dataclass(frozen=True)
class TorusSystem:
    """A Z^d or R^d translation action on T^m, immutable."""

    kind: str
    matrix: tuple[tuple[ExactScalar, ...], ...]
    ergodic: bool = field(init=False)
    aperiodic: bool = field(init=False)
    gamma: ExactScalar | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("discrete", "suspension"):
            raise ValueError(f"unknown system kind {self.kind!r}")
        rows = tuple(tuple(as_exact(v) for v in row) for row in self.matrix)
        if not rows or not rows[0] or any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("translation matrix must be a nonempty m x d array")
        object.__setattr__(self, "matrix", rows)
        object.__setattr__(self, "ergodic", self._certify_ergodic())
        object.__setattr__(self, "aperiodic", self._certify_aperiodic())

    @property
    def m(self) -> int:
        return len(self.matrix)

    @property
    def d(self) -> int:
        return len(self.matrix[0])

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    def column(self, i: int) -> tuple[ExactScalar, ...]:
        return tuple(row[i] for row in self.matrix)

    @cached_property
    def theta(self) -> np.ndarray:
        """Float copy of the matrix, entries reduced mod 1 for discrete systems."""
        if self.is_discrete:
            return np.array([[float(v.frac()) for v in row] for row in self.matrix])
        return np.array([[float(v) for v in row] for row in self.matrix])

    # -- certification -----------------------------------------------------
    def _entries(self):
        return [v for row in self.matrix for v in row]

    def _certify_ergodic(self) -> bool:
        rads = _radicands(self._entries())
        keep = [D for D in rads if D != 1] if self.is_discrete else rads
        # rows (generator i, radicand D); unknowns are the character xi_j
        rows = [[self.matrix[j][i].coefficient(D) for j in range(self.m)] for i in range(self.d) for D in keep]
        return rational_rank(rows) == self.m

    def _certify_aperiodic(self) -> bool:
        if self.is_discrete:
            rads = [D for D in _radicands(self._entries()) if D != 1]
            rows = [[self.matrix[j][i].coefficient(D) for i in range(self.d)] for j in range(self.m) for D in rads]
            return rational_rank(rows) == self.d
        transpose = [[self.matrix[j][i] for j in range(self.m)] for i in range(self.d)]
        # Theta must be injective on R^d
        if field_nullspace(self.matrix):
            return False
        left_null = field_nullspace(transpose)  # vectors n with n^T Theta = 0
        if not left_null:
            return False  # Theta is onto R^m, so Theta t hits Z^m for t != 0
        rads = _radicands([v for vec in left_null for v in vec])
        rows = [[vec[j].coefficient(D) for j in range(self.m)] for vec in left_null for D in rads]
        return rational_rank(rows) == self.m

    def describe(self) -> dict:
        out = {
            "kind": self.kind,
            "m": self.m,
            "d": self.d,
            "matrix": [[str(v) for v in row] for row in self.matrix],
            "ergodic": self.ergodic,
            "aperiodic": self.aperiodic,
        }
        if self.gamma is not None:
            out["gamma"] = str(self.gamma)
        if self.name:
            out["name"] = self.name
        return out


# -- constructors ----------------------------------------------------------


def _exact_or_fail(value) -> ExactScalar:
    if isinstance(value, float):
        raise UncertifiableParameters(
            f"float parameter {value!r} cannot be certified; give it as an exact string"
        )
    try:
        return as_exact(value)
    except (TypeError, ValueError) as exc:
        raise UncertifiableParameters(str(exc)) from exc


def rotation(theta) -> TorusSystem:
    t = _exact_or_fail(theta)
    return TorusSystem("discrete", ((t,),), name=f"rotation({t})")


def product_rotation(thetas: Sequence) -> TorusSystem:
    ts = [_exact_or_fail(t) for t in thetas]
    d = len(ts)
    mat = tuple(tuple(ts[i] if i == j else ExactScalar(0) for j in range(d)) for i in range(d))
    return TorusSystem("discrete", mat, name="product_rotation(" + ", ".join(map(str, ts)) + ")")


def canonical_suspension(gamma, a: Sequence) -> TorusSystem:
    """R^d flow on T^(d+1): x -> x + (gamma t_1, ..., gamma t_d, a . t)."""
    g = _exact_or_fail(gamma)
    av = [_exact_or_fail(v) for v in a]
    if g <= 0:
        raise UncertifiableParameters("gamma must be positive")
    d = len(av)
    rows = [tuple(g if i == j else ExactScalar(0) for j in range(d)) for i in range(d)]
    rows.append(tuple(av))
    return TorusSystem("suspension", tuple(rows), gamma=g, name="canonical_suspension")


def flow(matrix: Sequence[Sequence]) -> TorusSystem:
    mat = tuple(tuple(_exact_or_fail(v) for v in row) for row in matrix)
    return TorusSystem("suspension", mat, name="flow")


def make_system(spec: dict) -> TorusSystem:
    """Build a system from a config mapping.

    Recognised kinds: ``rotation`` (theta), ``product_rotation`` (thetas),
    ``discrete`` (thetas: list of d generator m-vectors), ``suspension``
    (gamma, a) in canonical form, ``flow`` (matrix).  An optional
    ``require`` list names properties that must be certified.
    """
    kind = spec.get("kind")
    if kind == "rotation":
        system = rotation(spec["theta"])
    elif kind == "product_rotation":
        system = product_rotation(spec["thetas"])
    elif kind == "discrete":
        gens = [[_exact_or_fail(v) for v in vec] for vec in spec["thetas"]]
        m = len(gens[0])
        if any(len(g) != m for g in gens):
            raise UncertifiableParameters("generator vectors must share the torus dimension")
        mat = tuple(tuple(gens[i][j] for i in range(len(gens))) for j in range(m))
        system = TorusSystem("discrete", mat, name="discrete")
    elif kind == "suspension":
        system = canonical_suspension(spec["gamma"], spec["a"])
    elif kind == "flow":
        system = flow(spec["matrix"])
    else:
        raise UncertifiableParameters(f"unknown system kind {kind!r}")
    for prop in spec.get("require", ()):
        if not getattr(system, prop):
            raise UncertifiableParameters(f"system is not {prop}")
    return system


# -- the action ------------------------------------------------------------


def _is_exact_seq(values) -> bool:
    return all(isinstance(v, (int, Fraction, ExactScalar, str)) and not isinstance(v, bool) for v in values)


def act(system: TorusSystem, x, exponent):
    """Apply the group element ``exponent`` to ``x``.

    Exact inputs give an exact tuple in [0, 1)^m; anything else goes through
    numpy, broadcasting over leading axes of ``x`` and ``exponent``.
    """
    if np.ndim(exponent) == 0:
        exponent = [exponent]
    if system.m == 1 and np.ndim(x) == 0:
        x = [x]
    if isinstance(x, (list, tuple)) and isinstance(exponent, (list, tuple)):
        if len(exponent) != system.d or len(x) != system.m:
            raise ValueError("dimension mismatch between system, point and exponent")
        if system.is_discrete and not all(isinstance(j, (int, np.integer)) for j in exponent):
            raise ValueError("discrete systems take integer exponents")
        if _is_exact_seq(x) and _is_exact_seq(exponent):
            ex = [as_exact(j) for j in exponent]
            return tuple(
                (as_exact(xc) + sum((row[i] * ex[i] for i in range(system.d)), ExactScalar(0))).frac()
                for xc, row in zip(x, system.matrix)
            )
    xa = np.asarray(x, dtype=np.float64)
    ja = np.asarray(exponent)
    if xa.shape[-1] != system.m or ja.shape[-1] != system.d:
        raise ValueError("dimension mismatch between system, point and exponent")
    theta = system.theta
    out = xa + np.zeros(np.broadcast_shapes(xa.shape[:-1], ja.shape[:-1]) + (system.m,))
    for i in range(system.d):
        out = out + ja[..., i : i + 1].astype(np.float64) * theta[:, i]
    return np.mod(out, 1.0)


def orbit_points(system: TorusSystem, x: np.ndarray, axes: Sequence[np.ndarray]) -> np.ndarray:
    """Float orbit of ``x`` over the lattice grid ``axes[0] x ... x axes[d-1]``.

    Returns an array of shape (len(axes[0]), ..., len(axes[d-1]), m).  Each
    point is computed elementwise in a fixed order, so the same exponent gives
    bitwise the same point whichever grid it belongs to.
    """
    theta = system.theta
    x = np.asarray(x, dtype=np.float64).reshape(system.m)
    shape = tuple(len(a) for a in axes)
    out = np.empty(shape + (system.m,))
    for c in range(system.m):
        acc = np.full(shape, x[c])
        for i, ax in enumerate(axes):
            sh = [1] * len(axes)
            sh[i] = len(ax)
            acc = acc + np.asarray(ax, dtype=np.float64).reshape(sh) * theta[c, i]
        out[..., c] = np.mod(acc, 1.0)
    return out


# -- observables -----------------------------------------------------------


@dataclass(frozen=True)
class Character:
    """x -> exp(2 pi i freq . x)."""

    freq: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "freq", tuple(int(v) for v in np.atleast_1d(self.freq)))


@dataclass(frozen=True)
class Indicator:
    set: TorusSet


@dataclass(frozen=True)
class TrigPoly:
    """Finite sum of coefficient * character."""

    terms: tuple[tuple[tuple[int, ...], complex], ...]

    def __post_init__(self):
        norm = tuple((tuple(int(v) for v in np.atleast_1d(f)), complex(c)) for f, c in self.terms)
        object.__setattr__(self, "terms", norm)

    @classmethod
    def constant(cls, c, m: int) -> "TrigPoly":
        return cls((((0,) * m, c),))


Observable = Union[Character, Indicator, TrigPoly]


def evaluate(obs: Observable, points: np.ndarray) -> np.ndarray:
    """Evaluate on float points of shape (..., m)."""
    pts = np.asarray(points, dtype=np.float64)
    if isinstance(obs, Indicator):
        return obs.set.contains(pts)
    if isinstance(obs, Character):
        phase = pts @ np.asarray(obs.freq, dtype=np.float64)
        return np.exp(1j * TWO_PI * phase)
    if isinstance(obs, TrigPoly):
        out = np.zeros(pts.shape[:-1], dtype=np.complex128)
        for f, c in obs.terms:
            if not any(f):
                out = out + c
            else:
                out = out + c * np.exp(1j * TWO_PI * (pts @ np.asarray(f, dtype=np.float64)))
        return out
    raise TypeError(f"unsupported observable {obs!r}")


def observable_mean(system: TorusSystem | None, obs: Observable):
    """Space mean mu(f); exact for indicators."""
    if isinstance(obs, Character):
        return 1 if not any(obs.freq) else 0
    if isinstance(obs, Indicator):
        return obs.set.measure
    if isinstance(obs, TrigPoly):
        return sum((c for f, c in obs.terms if not any(f)), 0j)
    raise TypeError(f"unsupported observable {obs!r}")


def set_measure(s: TorusSet) -> ExactScalar:
    return s.measure


def sup_norm(obs: Observable) -> float:
    if isinstance(obs, Character):
        return 1.0
    if isinstance(obs, Indicator):
        return 0.0 if obs.set.is_empty() else 1.0
    if isinstance(obs, TrigPoly):
        return float(sum(abs(c) for _, c in obs.terms))
    raise TypeError(f"unsupported observable {obs!r}")
