"""Noncommutative torus at rational flux and the magnetic Harper matrix.

A constant field is a skew form ``theta`` on the period lattice (entries
in turns, ``theta_ij = Theta(e_i, e_j)``).  Magnetic translations obey
``U_a U_b = alpha(a, b) U_{a+b}`` with ``alpha(a, b) = exp(i pi a.theta.b)``,
so generators commute up to ``exp(2 pi i theta_ij)``.  At rational
``theta`` the torus has finite-dimensional irreducible representations,
built here from an alternating normal form of ``N * theta`` over the
integers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .model import GaugeChoice, ModelError, QuotientGraphModel, make_gauge

__all__ = [
    "BurnsideResult",
    "ButterflyRow",
    "Classification",
    "FluxSpec",
    "FullnessCertificate",
    "FullnessReport",
    "RationalTorusRep",
    "WeylWord",
    "burnside_fullness",
    "butterfly",
    "certify_fullness",
    "classify",
    "classify_diamond",
    "classify_gyroid",
    "classify_honeycomb",
    "commutant_sigma",
    "count_gaps",
    "diamond_flux",
    "diamond_phis",
    "fullness_report",
    "gyroid_flux",
    "honeycomb_flux",
    "magnetic_entry",
    "magnetic_generators",
    "magnetic_harper",
    "parse_fraction",
    "torus_rep",
]

DIM_CAP = 512


def parse_fraction(text: str | int | Fraction) -> Fraction:
    """Exact rational from ``"p/q"`` or an integer; floats are rejected."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int) and not isinstance(text, bool):
        return Fraction(text)
    s = str(text).strip()
    if not s or any(c in s for c in ".eE"):
        raise ValueError(f"flux entries must be exact rationals p/q, got {text!r}")
    return Fraction(s)


def _turns(x: Fraction) -> Fraction:
    return x - math.floor(x)


# -- flux -------------------------------------------------------------------


@dataclass(frozen=True)
class FluxSpec:
    """Skew form on the period lattice, in turns.

    ``theta[i][j] = Theta(e_i, e_j)`` for lattice basis vectors; ``B = 2 pi Theta``.
    Entries are exact fractions when built from rationals.
    """

    theta: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.theta)
        for i in range(n):
            if len(self.theta[i]) != n:
                raise ValueError("theta must be square")
            for j in range(n):
                if self.theta[i][j] != -self.theta[j][i]:
                    raise ValueError("theta must be skew-symmetric")

    @classmethod
    def from_upper(cls, n: int, entries: Sequence) -> FluxSpec:
        """Build from the strict upper triangle, row by row (``theta_12, theta_13, ..``)."""
        pairs = list(itertools.combinations(range(n), 2))
        if len(entries) != len(pairs):
            raise ValueError(f"dimension {n} needs {len(pairs)} flux entries, got {len(entries)}")
        th = [[Fraction(0)] * n for _ in range(n)]
        for (i, j), v in zip(pairs, entries):
            v = parse_fraction(v)
            th[i][j], th[j][i] = v, -v
        return cls(tuple(tuple(r) for r in th))

    @classmethod
    def zero(cls, n: int) -> FluxSpec:
        return cls.from_upper(n, [0] * (n * (n - 1) // 2))

    @classmethod
    def from_cartesian(cls, model: QuotientGraphModel, theta_hat: np.ndarray,
                       max_denominator: int = 10**6) -> FluxSpec:
        """Pull a Cartesian form back to the lattice, ``L^T theta_hat L``, snapped to fractions."""
        L = np.array(model.lattice_basis, dtype=float).T
        lat = L.T @ np.asarray(theta_hat, dtype=float) @ L
        n = model.dim
        return cls.from_upper(n, [Fraction(lat[i, j]).limit_denominator(max_denominator)
                                  for i, j in itertools.combinations(range(n), 2)])

    @property
    def n(self) -> int:
        return len(self.theta)

    @property
    def array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.theta], dtype=float).reshape(self.n, self.n)

    @property
    def denominator(self) -> int:
        d = 1
        for row in self.theta:
            for x in row:
                d = d * Fraction(x).denominator // math.gcd(d, Fraction(x).denominator)
        return d

    @property
    def is_zero(self) -> bool:
        return all(x == 0 for row in self.theta for x in row)

    def upper(self) -> list[Fraction]:
        return [self.theta[i][j] for i, j in itertools.combinations(range(self.n), 2)]

    def pairing(self, u: Sequence[float], v: Sequence[float]) -> float:
        return float(np.asarray(u, dtype=float) @ self.array @ np.asarray(v, dtype=float))

    def alpha(self, u: Sequence[float], v: Sequence[float]) -> complex:
        """Cocycle ``exp(i pi u.theta.v)``."""
        return complex(np.exp(1j * np.pi * self.pairing(u, v)))

    def commutation(self, u: Sequence[float], v: Sequence[float]) -> complex:
        return complex(np.exp(2j * np.pi * self.pairing(u, v)))

    def __str__(self) -> str:
        return ",".join(str(x) for x in self.upper())


def honeycomb_flux(phi) -> FluxSpec:
    """Lattice form for the honeycomb with ``phi = Theta(-e_1, e_2)`` (bond vectors)."""
    phi = parse_fraction(phi)
    return FluxSpec.from_upper(2, [-3 * phi])


def diamond_flux(phis: Sequence) -> FluxSpec:
    """Lattice form for the diamond network from ``(phi_1, phi_2, phi_3)``.

    ``phi_1 = Theta(-e_1, e_2)``, ``phi_2 = Theta(-e_1, e_3)``,
    ``phi_3 = Theta(e_2, e_3)`` in terms of the four bond vectors.
    """
    p1, p2, p3 = (parse_fraction(p) for p in phis)
    return FluxSpec.from_upper(3, [-p1 + p2 + p3, -3 * p1 - p2 - p3, -p1 - 3 * p2 + p3])


def diamond_phis(flux: FluxSpec) -> tuple[Fraction, Fraction, Fraction]:
    """Inverse of :func:`diamond_flux`."""
    a, b, c = flux.upper()
    # a + b = -4 p1 and a - c = 4 p2
    p1 = -(a + b) / 4
    p2 = (a - c) / 4
    p3 = a + p1 - p2
    return p1, p2, p3


def gyroid_flux(t12, t13, t23) -> FluxSpec:
    """Lattice form for the gyroid; the lattice basis is the bcc triple ``g_1, g_2, g_3``."""
    return FluxSpec.from_upper(3, [t12, t13, t23])


# -- irreducible representations ------------------------------------------------


def _alternating_normal_form(A: list[list[int]]):
    """Integral congruence ``W^T A W`` to 2x2 blocks ``[[0, b], [-b, 0]]``.

    Returns ``(W, blocks)``; blocks sit on consecutive index pairs and the
    remaining indices are radical.
    """
    n = len(A)
    A = [row[:] for row in A]
    W = [[int(i == j) for j in range(n)] for i in range(n)]

    def addcol(a: int, b: int, q: int) -> None:  # e_b += q e_a
        for r in range(n):
            A[r][b] += q * A[r][a]
        for c in range(n):
            A[b][c] += q * A[a][c]
        for r in range(n):
            W[r][b] += q * W[r][a]

    def swap(a: int, b: int) -> None:
        if a == b:
            return
        for r in range(n):
            A[r][a], A[r][b] = A[r][b], A[r][a]
        A[a], A[b] = A[b], A[a]
        for r in range(n):
            W[r][a], W[r][b] = W[r][b], W[r][a]

    blocks = []
    k = 0
    while k < n - 1:
        while True:
            cand = [(abs(A[i][j]), i, j) for i in range(k, n) for j in range(i + 1, n) if A[i][j]]
            if not cand:
                return W, blocks
            _, i, j = min(cand)
            swap(k, i)
            if j == k:
                j = i
            swap(k + 1, j)
            a = A[k][k + 1]
            clean = True
            for col in range(k + 2, n):
                q = -(A[k][col] // a)
                if q:
                    addcol(k + 1, col, q)
                clean &= A[k][col] == 0
                q = -(A[k + 1][col] // A[k + 1][k])
                if q:
                    addcol(k, col, q)
                clean &= A[k + 1][col] == 0
            if clean:
                break
        blocks.append(A[k][k + 1])
        k += 2
    return W, blocks


def _int_inverse(W: list[list[int]]) -> np.ndarray:
    inv = np.rint(np.linalg.inv(np.array(W, dtype=float))).astype(np.int64)
    assert np.array_equal(np.array(W, dtype=np.int64) @ inv, np.eye(len(W), dtype=np.int64))
    return inv


def _mpow(m: np.ndarray, e: int) -> np.ndarray:
    return np.linalg.matrix_power(m if e >= 0 else m.conj().T, abs(int(e)))


@dataclass(frozen=True)
class RationalTorusRep:
    """Unitaries ``U_1..U_n`` with ``U_i U_j = exp(2 pi i theta_ij) U_j U_i``.

    Attributes
    ----------
    flux : FluxSpec
    N : int
        Common denominator of ``theta``.
    twist : tuple of complex
        Central character; ``U_i`` carries the factor ``twist[i]``.
    generators : tuple of ndarray
    irreducible : bool
    """

    flux: FluxSpec
    N: int
    twist: tuple[complex, ...]
    generators: tuple[np.ndarray, ...] = field(repr=False)
    irreducible: bool = True

    @property
    def dim(self) -> int:
        return self.generators[0].shape[0]

    def relation_error(self) -> float:
        th = self.flux.array
        U = self.generators
        err = 0.0
        for i, j in itertools.combinations(range(len(U)), 2):
            err = max(err, float(np.abs(U[i] @ U[j] - np.exp(2j * np.pi * th[i, j]) * U[j] @ U[i]).max()))
        for u in U:
            err = max(err, float(np.abs(u @ u.conj().T - np.eye(len(u))).max()))
        return err

    def monomial(self, m: Sequence[int]) -> np.ndarray:
        """Weyl-ordered ``U^m``; satisfies ``U^a U^b = alpha(a, b) U^{a+b}``."""
        th = self.flux.array
        n = len(m)
        phase = -sum(m[i] * m[j] * th[i, j] for i in range(n) for j in range(i + 1, n))
        out = np.eye(self.dim, dtype=complex)
        for u, e in zip(self.generators, m):
            out = out @ _mpow(u, e)
        return np.exp(1j * np.pi * phase) * out


def _random_twist(n: int, seed: int) -> tuple[complex, ...]:
    rng = np.random.default_rng(seed)
    return tuple(complex(z) for z in np.exp(2j * np.pi * rng.random(n)))


def torus_rep(
    flux: FluxSpec,
    N: int | None = None,
    twist: Sequence[complex] | None = None,
    *,
    seed: int = 0,
    irreducible: bool = True,
) -> RationalTorusRep:
    """Finite-dimensional representation of the rational noncommutative torus.

    The default is irreducible: ``N * theta`` is brought to alternating
    normal form over the integers, each block ``b / N = p / q`` becomes a
    ``q``-dimensional clock/shift pair, and the generators are recovered
    through the inverse basis change.  ``irreducible=False`` gives the
    ``N^n``-dimensional tensor construction (one clock/shift factor per
    direction).  ``twist`` (default: random from ``seed``) multiplies
    ``U_i`` by ``twist[i]``.

    Raises
    ------
    ValueError
        If some ``theta_ij`` is not a multiple of ``1/N``.
    """
    n = flux.n
    if N is None:
        N = flux.denominator
    for x in flux.upper():
        if (x * N).denominator != 1:
            raise ValueError(f"theta entry {x} is not a multiple of 1/{N}")
    z = tuple(complex(v) for v in (twist if twist is not None else _random_twist(n, seed)))
    if len(z) != n:
        raise ValueError(f"twist needs {n} entries")
    A = [[int(flux.theta[i][j] * N) for j in range(n)] for i in range(n)]
    if irreducible:
        W, blocks = _alternating_normal_form(A)
        C = _int_inverse(W)
        dims = [Fraction(b, N).denominator for b in blocks]
        D = int(np.prod(dims)) if dims else 1
        basis = []
        for bi, b in enumerate(blocks):
            t = Fraction(b, N)
            q, p = t.denominator, t.numerator
            clock = np.diag(np.exp(2j * np.pi * p * np.arange(q) / q))
            shift = np.roll(np.eye(q), 1, axis=0)
            for mat in (clock, shift):
                ops = [np.eye(d) for d in dims]
                ops[bi] = mat
                out = np.ones((1, 1), dtype=complex)
                for o in ops:
                    out = np.kron(out, o)
                basis.append(out)
        basis += [np.eye(D, dtype=complex)] * (n - len(basis))
        gens = []
        for i in range(n):
            R = np.eye(D, dtype=complex)
            for j in range(n):
                R = R @ _mpow(basis[j], C[j][i])
            gens.append(z[i] * R)
    else:
        w = np.exp(2j * np.pi / N)
        clock = np.diag(w ** np.arange(N))
        shift = np.roll(np.eye(N), 1, axis=0)
        gens = []
        for j in range(n):
            ops = [np.eye(N, dtype=complex) for _ in range(n)]
            ops[j] = shift
            for i in range(j):
                ops[i] = np.linalg.matrix_power(clock, (-A[i][j]) % N)
            out = np.ones((1, 1), dtype=complex)
            for o in ops:
                out = np.kron(out, o)
            gens.append(z[j] * out)
    rep = RationalTorusRep(flux, N, z, tuple(gens), irreducible)
    err = rep.relation_error()
    if err > 1e-12:
        raise RuntimeError(f"torus relations violated by {err:.2e}")
    return rep


# -- Weyl words and the magnetic Harper matrix ----------------------------------


@dataclass(frozen=True)
class WeylWord:
    """Net translation plus the scalar phase collected by composing translations."""

    vector: tuple[float, ...]
    phase: complex = 1.0

    @classmethod
    def identity(cls, n: int) -> WeylWord:
        return cls((0.0,) * n, 1.0)

    def compose(self, other: WeylWord, flux: FluxSpec) -> WeylWord:
        ph = self.phase * other.phase * flux.alpha(self.vector, other.vector)
        return WeylWord(tuple(a + b for a, b in zip(self.vector, other.vector)), ph)

    def inverse(self) -> WeylWord:
        return WeylWord(tuple(-a for a in self.vector), np.conj(self.phase))

    @classmethod
    def from_steps(cls, steps: Sequence[Sequence[float]], flux: FluxSpec) -> WeylWord:
        word = cls.identity(flux.n)
        for s in steps:
            word = word.compose(cls(tuple(float(x) for x in s)), flux)
        return word

    def integer_vector(self, tol: float = 1e-9) -> tuple[int, ...]:
        m = np.rint(self.vector)
        if np.max(np.abs(m - self.vector), initial=0.0) > tol:
            raise ValueError(f"word translation {self.vector} is not a lattice vector")
        return tuple(int(x) for x in m)


def _edge_vector(model: QuotientGraphModel, e) -> np.ndarray:
    pos = np.asarray(model.positions, dtype=float)
    return np.asarray(e.translation, dtype=float) + pos[e.head] - pos[e.tail]


def magnetic_entry(model: QuotientGraphModel, gauge: GaugeChoice, flux: FluxSpec, edge: int) -> WeylWord:
    """Magnetic translation along the loop root -> tail -> edge -> head -> root.

    Steps are geometric edge vectors (translation plus position
    difference, in lattice coordinates), so the net vector is the loop
    vector of the edge and the phase is the product of cocycles along the
    way.  Models without positions are accepted only at zero flux.
    """
    e = model.edges[edge]
    if model.positions is None:
        if not flux.is_zero:
            raise ModelError("model has no vertex positions; a magnetic field needs them")
        return WeylWord(tuple(float(x) for x in gauge.loop_vectors[edge]), 1.0)
    steps = []
    for i, s in gauge.tree_paths[e.tail]:
        steps.append(s * _edge_vector(model, model.edges[i]))
    steps.append(_edge_vector(model, e))
    for i, s in reversed(gauge.tree_paths[e.head]):
        steps.append(-s * _edge_vector(model, model.edges[i]))
    word = WeylWord.from_steps(steps, flux)
    if word.integer_vector() != tuple(gauge.loop_vectors[edge]):
        raise ModelError(f"edge {edge}: geometric loop does not close on its loop vector")
    return word


def magnetic_harper(
    model: QuotientGraphModel,
    gauge: GaugeChoice | None,
    rep: RationalTorusRep,
    *,
    weights: Sequence[complex] | None = None,
    cap: int = DIM_CAP,
) -> np.ndarray:
    """Hermitian ``(|V| D) x (|V| D)`` matrix of the magnetic Harper operator in ``rep``.

    Block ``(v, w)`` sums ``weight * phase * U^{m}`` over edges ``v -> w``;
    reverse orientations enter as the adjoint block.
    """
    gauge = gauge if gauge is not None else make_gauge(model)
    D = rep.dim
    k = model.num_vertices
    if k * D > cap:
        raise ValueError(f"dimension guard: |V| * D = {k * D} exceeds cap {cap}")
    w = [complex(e.weight) for e in model.edges] if weights is None else list(weights)
    pos = gauge.position
    A = np.zeros((k * D, k * D), dtype=complex)
    for i, e in enumerate(model.edges):
        word = magnetic_entry(model, gauge, rep.flux, i)
        blk = w[i] * word.phase * rep.monomial(word.integer_vector())
        r, c = pos[e.tail] * D, pos[e.head] * D
        A[r:r + D, c:c + D] += blk
    return A + A.conj().T


def magnetic_generators(model: QuotientGraphModel, gauge: GaugeChoice | None,
                        rep: RationalTorusRep) -> list[np.ndarray]:
    """``H`` and ``I_|V| (x) U_i``: the generators of the Bellissard-Harper algebra."""
    H = magnetic_harper(model, gauge, rep)
    eye = np.eye(model.num_vertices)
    return [H] + [np.kron(eye, u) for u in rep.generators]


# -- fullness -------------------------------------------------------------------


BURNSIDE_CAP = 48


@dataclass(frozen=True)
class BurnsideResult:
    rank: int
    full_rank: int
    ill_conditioned: bool

    @property
    def is_full(self) -> bool:
        return self.rank == self.full_rank


def burnside_fullness(generators: Sequence[np.ndarray], *, tol: float = 1e-8,
                      max_dim: int = BURNSIDE_CAP) -> BurnsideResult:
    """Dimension of the algebra generated by ``generators`` and their adjoints.

    Starts from the identity and the generators, multiplies the newest
    span vectors by every generator, and keeps components orthogonal to
    the span found so far until nothing new appears.  A residual
    singular value within two decades of ``tol`` marks the rank as
    ill-conditioned.

    The span lives in ``D^2`` dimensions, so memory grows like ``D^4``;
    matrices larger than ``max_dim`` are refused (use
    :func:`commutant_sigma` for those).
    """
    gens = [np.asarray(g, dtype=complex) for g in generators]
    D = gens[0].shape[0]
    if any(g.shape != (D, D) for g in gens):
        raise ValueError("generators must be square matrices of one size")
    if D > max_dim:
        raise ValueError(f"Burnside closure refused for dimension {D} > {max_dim}")
    gens = gens + [g.conj().T for g in gens]
    Q = np.zeros((0, D * D), dtype=complex)
    shaky = False

    def extend(cands: list[np.ndarray]) -> np.ndarray:
        nonlocal Q, shaky
        X = np.array([c.reshape(-1) for c in cands])
        norms = np.linalg.norm(X, axis=1)
        X = X[norms > 1e-14] / norms[norms > 1e-14, None]
        if not len(X):
            return X
        for _ in range(2):
            if len(Q):
                X = X - (X @ Q.conj().T) @ Q
        _, s, vh = np.linalg.svd(X, full_matrices=False)
        shaky |= bool(np.any((s > tol / 100) & (s < tol * 100)))
        new = vh[s > tol]
        Q = np.vstack([Q, new])
        return new

    frontier = extend([np.eye(D, dtype=complex)] + gens)
    while len(frontier) and len(Q) < D * D:
        frontier = extend([g @ f.reshape(D, D) for f in frontier for g in gens])
    return BurnsideResult(len(Q), D * D, shaky)


def commutant_sigma(H: np.ndarray, k: int) -> float:
    """Second-smallest singular value of ``X -> [X (x) I, H]`` on ``k x k`` matrices.

    With the torus generators acting irreducibly on the second factor, the
    algebra is the full matrix algebra iff this map has a one-dimensional
    kernel, i.e. the returned value is positive.
    """
    D = H.shape[0] // k
    Hb = H.reshape(k, D, k, D)
    cols = []
    for a in range(k):
        for b in range(k):
            C = np.zeros((k, D, k, D), dtype=complex)
            C[a] += Hb[b]
            C[:, :, b] -= Hb[:, :, a]
            cols.append(C.reshape(-1))
    s = np.linalg.svd(np.array(cols).T, compute_uv=False)
    return float(s[-2]) if len(s) > 1 else float("inf")


@dataclass(frozen=True)
class FullnessCertificate:
    """Fullness at a generic twist and over every fiber.

    ``generic_sigma`` is the commutant singular value at the seeded
    twist; ``min_sigma`` its minimum over twists, attained near
    ``special_twist`` (turns).  Burnside ranks at both twists are
    included when the dimension allows, else ``None``.
    """

    generic_sigma: float
    min_sigma: float
    special_twist: tuple[float, ...]
    sigma_tol: float
    generic: BurnsideResult | None
    special_rank: BurnsideResult | None

    @property
    def generic_full(self) -> bool:
        return self.generic_sigma > self.sigma_tol

    @property
    def full(self) -> bool:
        return self.min_sigma > self.sigma_tol

    def to_dict(self) -> dict:
        def rank(b):
            return None if b is None else {"rank": b.rank, "full_rank": b.full_rank,
                                           "ill_conditioned": b.ill_conditioned}
        return {"generic_full": self.generic_full, "full_on_every_fiber": self.full,
                "generic_sigma": self.generic_sigma, "min_sigma": self.min_sigma,
                "special_twist": list(self.special_twist),
                "generic_burnside": rank(self.generic), "special_burnside": rank(self.special_rank)}


def _sigma_at(model, gauge, flux, t) -> float:
    rep = torus_rep(flux, twist=np.exp(2j * np.pi * np.asarray(t)))
    return commutant_sigma(magnetic_harper(model, gauge, rep), model.num_vertices)


def _maybe_burnside(model, gauge, rep) -> BurnsideResult | None:
    if model.num_vertices * rep.dim > BURNSIDE_CAP:
        return None
    return burnside_fullness(magnetic_generators(model, gauge, rep))


def certify_fullness(
    model: QuotientGraphModel,
    flux: FluxSpec,
    *,
    seed: int = 0,
    grid: int = 4,
    polish: int = 3,
    sigma_tol: float = 1e-8,
) -> FullnessCertificate:
    """Decide fullness at a generic twist and over every fiber.

    A generic twist can miss proper subalgebras that appear only over
    special twists.  The commutant singular value is continuous in the
    twist, so it is minimized (grid of ``grid^n`` twists, then
    Nelder-Mead from the ``polish`` best).
    """
    gauge = make_gauge(model)
    rep0 = torus_rep(flux, seed=seed)
    generic_sigma = commutant_sigma(magnetic_harper(model, gauge, rep0), model.num_vertices)
    n = flux.n
    samples = []
    for g in itertools.product(range(grid), repeat=n):
        t = np.array(g, dtype=float) / grid
        samples.append((_sigma_at(model, gauge, flux, t), tuple(t)))
    samples.sort()
    best, best_t = samples[0]
    for val, t in samples[:polish]:
        if best < sigma_tol:
            break
        res = minimize(lambda x: _sigma_at(model, gauge, flux, x), np.array(t) + 0.01,
                       method="Nelder-Mead", options=dict(xatol=1e-10, fatol=1e-14, maxiter=1500))
        if res.fun < best:
            best, best_t = float(res.fun), tuple(float(x) for x in res.x)
    rep = torus_rep(flux, twist=np.exp(2j * np.pi * np.asarray(best_t)))
    return FullnessCertificate(
        float(generic_sigma), float(best), tuple(float(x) % 1.0 for x in best_t), sigma_tol,
        _maybe_burnside(model, gauge, rep0), _maybe_burnside(model, gauge, rep),
    )


@dataclass(frozen=True)
class FullnessReport:
    """Analytic verdict next to Burnside ranks at several seeded twists."""

    flux: FluxSpec
    classification: Classification | None
    ranks: tuple[BurnsideResult, ...]
    seeds: tuple[int, ...]

    @property
    def full_rank(self) -> int:
        return self.ranks[0].full_rank

    @property
    def numeric_full(self) -> bool:
        return 2 * sum(r.is_full for r in self.ranks) > len(self.ranks)

    @property
    def agree(self) -> bool | None:
        if self.classification is None:
            return None
        return self.classification.full == self.numeric_full

    def to_dict(self) -> dict:
        c = self.classification
        return {
            "flux": str(self.flux),
            "case_label": None if c is None else c.case,
            "analytic_verdict": None if c is None else ("full" if c.full else "proper"),
            "numeric_rank": [r.rank for r in self.ranks],
            "D2": self.full_rank,
            "ill_conditioned": [r.ill_conditioned for r in self.ranks],
            "seeds": list(self.seeds),
            "numeric_verdict": "full" if self.numeric_full else "proper",
            "agree": self.agree,
        }


def fullness_report(model: QuotientGraphModel, flux: FluxSpec, *, seeds: Sequence[int] = (0, 1, 2),
                    classification: Classification | None = None) -> FullnessReport:
    """Burnside rank at each seeded generic twist, summarized by majority."""
    gauge = make_gauge(model)
    ranks = tuple(burnside_fullness(magnetic_generators(model, gauge, torus_rep(flux, seed=s)))
                  for s in seeds)
    return FullnessReport(flux, classification, ranks, tuple(seeds))


# -- analytic classifiers -------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    model: str
    case: str
    full: bool
    parameters: dict

    def to_dict(self) -> dict:
        return {"model": self.model, "case": self.case, "full": self.full,
                "parameters": {k: str(v) for k, v in self.parameters.items()}}


def classify_honeycomb(phi) -> Classification:
    """Exceptional cases ``q = 1`` and ``q = -1, chi^4 = 1``.

    ``chi = exp(i pi phi)`` and ``q = conj(chi)^6``; phases are handled as
    exact turns modulo 1.
    """
    phi = parse_fraction(phi)
    q = _turns(-3 * phi)
    chi4 = _turns(2 * phi)
    params = {"phi": phi, "q_turns": q, "chi4_turns": chi4}
    if phi == 0:
        return Classification("honeycomb", "commutative", False, params)
    if q == 0:
        return Classification("honeycomb", "case 1 (q=1)", False, params)
    if q == Fraction(1, 2) and chi4 == 0:
        return Classification("honeycomb", "case 2 (q=-1, chi^4=1)", False, params)
    return Classification("honeycomb", "full", True, params)


def classify_diamond(phis: Sequence) -> Classification:
    """Five exceptional families of the diamond network, else full.

    Uses ``chi_i = exp(i pi phi_i)`` and ``q_1 = conj(chi_1)^2 chi_2^2 chi_3^2``,
    ``q_2 = conj(chi_1^6 chi_2^2 chi_3^2)``, ``q_3 = conj(chi_1^2 chi_2^6) chi_3^2``.
    """
    p1, p2, p3 = (parse_fraction(p) for p in phis)
    q1, q2, q3 = _turns(-p1 + p2 + p3), _turns(-3 * p1 - p2 - p3), _turns(-p1 - 3 * p2 + p3)
    c2 = [_turns(p) for p in (p1, p2, p3)]
    c4 = [_turns(2 * p) for p in (p1, p2, p3)]
    h = Fraction(1, 2)
    params = {"phi1": p1, "phi2": p2, "phi3": p3, "q1_turns": q1, "q2_turns": q2, "q3_turns": q3}

    def out(case: str) -> Classification:
        return Classification("diamond", case, case == "full", params)

    if q1 == q2 == q3 == 0:
        if all(c == 0 for c in c2):
            return out("commutative" if (p1, p2, p3) == (0, 0, 0) else "case 1a")
        if sorted(c4) == [0, h, h]:
            return out("case 1b")
    if q1 == q2 == q3 == h and all(c == 0 for c in c4):
        if all(c == h for c in c2):
            return out("case 2a")
        if sorted(c2) == [0, 0, h]:
            return out("case 2b")
    if _turns(-q1) == q2 == q3 == _turns(-2 * p2) and c2[0] == 0:
        return out("case 3")
    if q1 == q2 == q3 == _turns(-2 * p1) and c2[1] == 0:
        return out("case 4")
    if q1 == q2 == _turns(-q3) == _turns(-2 * p1) and c2[0] == _turns(-p2):
        return out("case 5")
    return out("full")


# -- butterfly ----------------------------------------------------------------------


def _gaps(lo: np.ndarray, hi: np.ndarray, floor: float) -> list[tuple[int, int]]:
    """Gaps as ``(band below, band above)`` index pairs, bands given by their ranges."""
    order = np.argsort(lo, kind="stable")
    out = []
    top = order[0]
    for j in order[1:]:
        if lo[j] - hi[top] > floor:
            out.append((int(top), int(j)))
        if hi[j] > hi[top]:
            top = j
    return out


def count_gaps(bands: np.ndarray, floor: float) -> tuple[int, list[tuple[float, float]]]:
    """Gaps of a band union.

    ``bands`` has shape ``(samples, nbands)`` (ascending per row); band
    ``j`` covers ``[min, max]`` of column ``j``.  Returns the number of
    open intervals of the complement inside the hull wider than
    ``floor`` and the intervals themselves.
    """
    lo, hi = bands.min(axis=0), bands.max(axis=0)
    gaps = [(float(hi[a]), float(lo[b])) for a, b in _gaps(lo, hi, floor)]
    return len(gaps), gaps


@dataclass
class ButterflyRow:
    p: int
    q: int
    flux: FluxSpec
    eigenvalues: np.ndarray
    gap_count: int
    gaps: list[tuple[float, float]]


def butterfly(
    model: QuotientGraphModel,
    direction: Sequence,
    max_q: int,
    *,
    twists: int = 8,
    gap_floor: float = 1e-3,
    cap: int = DIM_CAP,
) -> list[ButterflyRow]:
    """Spectra along the flux ray ``(p/q) * direction`` for ``q <= max_q``.

    ``direction`` lists the upper-triangle lattice entries (integers or
    rationals).  The spectrum at each flux is the union over a twist
    grid; its dependence on the twist has period ``1/N`` per axis, so
    ``twists + 1`` points per axis cover ``[0, 1/N]`` including both ends.
    Band edges that bound an apparent gap are then polished by
    Nelder-Mead over the twist, since band extrema (such as Dirac
    touchings) usually fall between grid points.  Gaps narrower than
    ``gap_floor`` times the spectral width are ignored.
    """
    gauge = make_gauge(model)
    direction = [parse_fraction(d) for d in direction]
    n = model.dim
    rows = []
    for q in range(1, max_q + 1):
        for p in range(0, q + 1):
            if math.gcd(p, q) != 1:
                continue
            flux = FluxSpec.from_upper(n, [Fraction(p, q) * d for d in direction])
            N = flux.denominator
            base = torus_rep(flux, twist=(1.0,) * n)
            if model.num_vertices * base.dim > cap:
                raise ValueError(f"dimension guard: |V| * D = {model.num_vertices * base.dim} exceeds cap {cap}")

            def spectrum(t, flux=flux):
                rep = torus_rep(flux, twist=np.exp(2j * np.pi * np.asarray(t)))
                return np.linalg.eigvalsh(magnetic_harper(model, gauge, rep, cap=cap))

            ts = np.array(list(itertools.product(np.arange(twists + 1) / (twists * N), repeat=n)))
            spectra = np.array([spectrum(t) for t in ts])
            lo, hi = spectra.min(axis=0), spectra.max(axis=0)
            floor = gap_floor * max(float(hi.max() - lo.min()), 1e-12)
            extra = []
            polished: set = set()
            for _ in range(4):
                # sign +1 pushes a band maximum up, -1 a band minimum down
                pairs = _gaps(lo, hi, floor)
                todo = ({(a, 1) for a, _ in pairs} | {(b, -1) for _, b in pairs}) - polished
                if not todo:
                    break
                for j, sign in sorted(todo):
                    start = ts[int(np.argmax(sign * spectra[:, j]))]
                    res = minimize(lambda t: -sign * spectrum(t)[j], start, method="Nelder-Mead",
                                   options=dict(xatol=1e-9, fatol=1e-13, initial_simplex=np.vstack(
                                       [start] + [start + np.eye(n)[i] / (2 * twists * N) for i in range(n)])))
                    val = -sign * float(res.fun)
                    extra.append(spectrum(res.x))
                    lo[j], hi[j] = min(lo[j], val), max(hi[j], val)
                    polished.add((j, sign))
            if extra:
                spectra = np.vstack([spectra, np.array(extra)])
            gaps = [(float(hi[a]), float(lo[b])) for a, b in _gaps(lo, hi, floor)]
            rows.append(ButterflyRow(p, q, flux, np.unique(np.round(spectra, 12)), len(gaps), gaps))
    return rows


def classify(model_name: str, flux: FluxSpec) -> Classification:
    """Dispatch to the analytic classifier of a built-in geometry."""
    if model_name == "honeycomb":
        (t12,) = flux.upper()
        return classify_honeycomb(-t12 / 3)
    if model_name == "D":
        return classify_diamond(diamond_phis(flux))
    if model_name == "G":
        return classify_gyroid(*flux.upper())
    raise ValueError(f"no analytic classification for model {model_name!r}")


def classify_gyroid(t12, t13, t23) -> Classification:
    """Gyroid verdict from the lattice form ``theta_ij`` (turns).

    With ``alpha = (theta_12, -theta_13, theta_23)`` and quarter phases
    ``phi = (theta_12, -theta_13, theta_23) / 4`` (turns), the algebra is
    full if ``Phi = sum(phi) != 0``, or if ``Phi = 0`` with some
    ``alpha != 0`` and pairwise distinct ``phi``; it equals the zero-field
    algebra if every ``phi`` vanishes and is a proper subalgebra otherwise.
    """
    t12, t13, t23 = (parse_fraction(t) for t in (t12, t13, t23))
    alpha = [_turns(t12), _turns(-t13), _turns(t23)]
    phi = [_turns(t12 / 4), _turns(-t13 / 4), _turns(t23 / 4)]
    big_phi = _turns(sum(phi))
    params = {"theta12": t12, "theta13": t13, "theta23": t23,
              "phi1_turns": phi[0], "phi2_turns": phi[1], "phi3_turns": phi[2], "Phi_turns": big_phi}
    if big_phi != 0 or (any(a != 0 for a in alpha) and len(set(phi)) == 3):
        return Classification("gyroid", "full", True, params)
    if all(x == 0 for x in phi):
        return Classification("gyroid", "commutative", False, params)
    return Classification("gyroid", "proper", False, params)
