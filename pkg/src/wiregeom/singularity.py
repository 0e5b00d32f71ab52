"""Degenerate points of a Bloch family and their local classification.

The pipeline is: coarse scan of the minimal eigenvalue gap on a grid,
Nelder-Mead refinement of each candidate, grouping of coincident
eigenvalues into A-type strata, and a Morse test on the characteristic
function ``F(k, z) = det(z - H(k))`` at every simple crossing.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .bloch import DEFAULT_BUDGET, HamiltonianFamily, check_budget, k_grid

__all__ = [
    "CharMapPoint",
    "DegeneracyReport",
    "DegeneratePoint",
    "DiracVerdict",
    "RefineResult",
    "Stratum",
    "analyze",
    "char_map",
    "classify_eigenvalues",
    "classify_stratum",
    "degenerate_scan",
    "dirac_test",
    "min_gap",
    "poly_from_roots",
    "refine_degenerate",
]

TWO_PI = 2.0 * np.pi
REFINE_TOL = 1e-8
CLUSTER_TOL = 1e-6


def poly_from_roots(roots: Sequence[float]) -> np.ndarray:
    """Coefficients ``c_0..c_k`` (ascending) of ``prod_j (z - r_j)``."""
    c = np.zeros(len(roots) + 1)
    c[0] = 1.0
    for j, r in enumerate(roots):
        # multiply by (z - r); c holds descending powers of the partial product
        c[1 : j + 2] = c[1 : j + 2] - r * c[: j + 1]
    return c[::-1].copy()


@dataclass(frozen=True)
class CharMapPoint:
    """Characteristic data at one k-point.

    ``b[i]`` is the coefficient of ``z^i`` in ``det(z - H(k))`` for
    ``i < size``.  ``a[i]`` is the coefficient of ``z^i`` after the shift
    that removes the trace.
    """

    k: np.ndarray
    b: np.ndarray
    a: np.ndarray
    discriminant: float
    eigenvalues: np.ndarray


def char_map(family: HamiltonianFamily, k: Sequence[float]) -> CharMapPoint:
    lam = family.eigvals(k)
    b = poly_from_roots(lam)[:-1]
    mu = lam - lam.mean()
    a = poly_from_roots(mu)[:-2]
    diffs = lam[:, None] - lam[None, :]
    disc = float(np.prod(diffs[np.triu_indices(len(lam), 1)] ** 2))
    return CharMapPoint(np.asarray(k, dtype=float), b, a, disc, lam)


def min_gap(eigs: np.ndarray) -> np.ndarray:
    """Smallest spacing between consecutive sorted eigenvalues (last axis)."""
    eigs = np.asarray(eigs)
    if eigs.shape[-1] < 2:
        return np.full(eigs.shape[:-1], np.inf)
    return np.min(np.diff(eigs, axis=-1), axis=-1)


# -- scan ---------------------------------------------------------------


def _neighbor_min(gap: np.ndarray) -> np.ndarray:
    n = gap.ndim
    best = np.full(gap.shape, np.inf)
    for shift in itertools.product((-1, 0, 1), repeat=n):
        if any(shift):
            best = np.minimum(best, np.roll(gap, shift, axis=tuple(range(n))))
    return best


def _components(idx: np.ndarray, m: int) -> list[list[int]]:
    """Connected components of grid points under periodic 3^n adjacency."""
    lookup = {tuple(p): i for i, p in enumerate(idx)}
    n = idx.shape[1]
    seen = [False] * len(idx)
    comps = []
    for start in range(len(idx)):
        if seen[start]:
            continue
        seen[start] = True
        stack, comp = [start], []
        while stack:
            i = stack.pop()
            comp.append(i)
            for shift in itertools.product((-1, 0, 1), repeat=n):
                j = lookup.get(tuple((idx[i] + shift) % m))
                if j is not None and not seen[j]:
                    seen[j] = True
                    stack.append(j)
        comps.append(sorted(comp))
    return comps


def _extent(points: np.ndarray, m: int) -> int:
    """Largest per-axis spread of a set of periodic grid indices."""
    spread = 0
    for col in points.T:
        occupied = np.zeros(m, dtype=bool)
        occupied[col % m] = True
        if occupied.all():
            return m
        # widest empty arc gives the complement of the occupied span
        gaps, run = 0, 0
        for x in np.concatenate([occupied, occupied]):
            run = 0 if x else run + 1
            gaps = max(gaps, run)
        spread = max(spread, m - min(gaps, m))
    return spread


def degenerate_scan(
    family: HamiltonianFamily,
    grid: int,
    coarse_tol: float | None = None,
    *,
    budget: float = DEFAULT_BUDGET,
    max_extent: int = 3,
) -> list[np.ndarray]:
    """Grid points where the minimal eigenvalue gap has a local minimum below ``coarse_tol``.

    Adjacent minima are merged and represented by their smallest-gap
    member.  A merged group spanning more than ``max_extent`` cells along
    some axis is a sampled continuous locus; all of its members are kept.

    Returns
    -------
    list of ndarray
        Candidate k-points in lexicographic grid order.
    """
    if grid < 8:
        raise ValueError("scan grid must be at least 8")
    n, size = family.dim, family.size
    if size < 2:
        return []
    if coarse_tol is None:
        coarse_tol = 0.3 * family.spectral_width / size
    check_budget(grid**n, size, budget)
    ks = k_grid(grid, n)
    gap = min_gap(family.eigvals_batch(ks)).reshape((grid,) * n)
    slack = 1e-12 * max(1.0, family.spectral_width)
    mask = (gap < coarse_tol) & (gap <= _neighbor_min(gap) + slack)
    idx = np.argwhere(mask)
    picked = []
    for comp in _components(idx, grid):
        pts = idx[comp]
        if len(comp) > 1 and _extent(pts, grid) > max_extent:
            picked.extend(tuple(p) for p in pts)
        else:
            vals = [gap[tuple(p)] for p in pts]
            picked.append(tuple(pts[int(np.argmin(vals))]))
    return [TWO_PI * np.array(p, dtype=float) / grid for p in sorted(picked)]


# -- refinement ---------------------------------------------------------


@dataclass(frozen=True)
class RefineResult:
    k: np.ndarray
    gap: float
    converged: bool
    iterations: int


def refine_degenerate(
    family: HamiltonianFamily,
    k0: Sequence[float],
    *,
    step: float = 0.05,
    tol: float = REFINE_TOL,
    max_iter: int = 4000,
) -> RefineResult:
    """Minimize the smallest eigenvalue gap with Nelder-Mead, starting at ``k0``.

    ``converged`` is true iff the final gap is below ``tol``; otherwise
    the best point found is returned with the flag cleared.
    """
    k0 = np.asarray(k0, dtype=float)

    def objective(k: np.ndarray) -> float:
        return float(min_gap(family.eigvals(k)))

    g0 = objective(k0)
    if g0 < 1e-3 * tol:
        return RefineResult(np.mod(k0, TWO_PI), g0, True, 0)
    n = len(k0)
    simplex = np.vstack([k0] + [k0 + step * np.eye(n)[i] for i in range(n)])
    best_k, best_g, total = k0, g0, 0
    # restarts shrink the simplex around the incumbent; cone minima need a few
    for _ in range(4):
        res = minimize(
            objective, best_k, method="Nelder-Mead",
            options=dict(initial_simplex=simplex, xatol=1e-13, fatol=1e-15, maxiter=max_iter),
        )
        total += int(res.nit)
        if res.fun < best_g:
            best_k, best_g = np.asarray(res.x), float(res.fun)
        if best_g < 1e-3 * tol:
            break
        step *= 0.1
        simplex = np.vstack([best_k] + [best_k + step * np.eye(n)[i] for i in range(n)])
    return RefineResult(np.mod(best_k, TWO_PI), best_g, best_g < tol, total)


# -- strata ---------------------------------------------------------------


@dataclass(frozen=True)
class Stratum:
    """Multiplicity pattern of a spectrum.

    ``partition`` lists cluster sizes in ascending eigenvalue order;
    ``types`` holds ``r`` for each cluster of size ``r + 1 >= 2`` (sorted),
    so ``(1, 1)`` reads (A1, A1).
    """

    partition: tuple[int, ...]
    types: tuple[int, ...]
    ambiguous: bool

    @property
    def label(self) -> str:
        return "(" + ",".join(f"A{r}" for r in self.types) + ")"


def classify_eigenvalues(eigs: Sequence[float], cluster_tol: float = CLUSTER_TOL) -> Stratum:
    eigs = np.sort(np.asarray(eigs, dtype=float))
    gaps = np.diff(eigs)
    partition, size = [], 1
    for g in gaps:
        if g < cluster_tol:
            size += 1
        else:
            partition.append(size)
            size = 1
    partition.append(size)
    types = tuple(sorted(s - 1 for s in partition if s > 1))
    ambiguous = bool(np.any((gaps >= cluster_tol) & (gaps <= 10 * cluster_tol)))
    s = len(types)
    assert sum(types) <= len(eigs) - s, "stratum violates sum r_i <= k - s"
    return Stratum(tuple(partition), types, ambiguous)


def classify_stratum(family: HamiltonianFamily, k: Sequence[float],
                     cluster_tol: float = CLUSTER_TOL) -> Stratum:
    return classify_eigenvalues(family.eigvals(k), cluster_tol)


# -- Morse test ------------------------------------------------------------


@dataclass(frozen=True)
class DiracVerdict:
    """Outcome of the Morse test at one crossing.

    ``signature`` is ``(positive, negative)`` Hessian eigenvalue counts.
    A Dirac point has exactly one eigenvalue whose sign differs from all
    the others; both overall sign conventions are accepted.
    """

    pair: tuple[int, int]
    hessian_eigenvalues: tuple[float, ...]
    signature: tuple[int, int]
    morse: bool
    is_dirac: bool

    @property
    def verdict(self) -> str:
        if not self.morse:
            return "not Morse"
        return "Dirac" if self.is_dirac else "Morse, not Dirac"


def _char_fn(family: HamiltonianFamily, x: np.ndarray) -> float:
    lam = family.eigvals(x[:-1])
    return float(np.prod(x[-1] - lam))


def _hessian(f, x: np.ndarray, h: float) -> np.ndarray:
    d = len(x)
    e = np.eye(d) * h
    f0 = f(x)
    out = np.empty((d, d))
    for i in range(d):
        out[i, i] = (f(x + e[i]) - 2 * f0 + f(x - e[i])) / h**2
        for j in range(i + 1, d):
            v = (f(x + e[i] + e[j]) - f(x + e[i] - e[j]) - f(x - e[i] + e[j]) + f(x - e[i] - e[j])) / (4 * h**2)
            out[i, j] = out[j, i] = v
    return out


def dirac_test(
    family: HamiltonianFamily,
    k: Sequence[float],
    pair: tuple[int, int],
    *,
    h: float = 1e-4,
    hessian_tol: float | None = None,
) -> DiracVerdict:
    """Morse test of ``det(z - H(k))`` at the crossing of bands ``pair``.

    The Hessian in ``(k, z)`` is taken by central differences with one
    Richardson step (``h`` and ``h/2``).  It counts as Morse when its
    smallest eigenvalue magnitude exceeds ``hessian_tol``, by default
    ``1e-6 * width**2``.
    """
    k = np.asarray(k, dtype=float)
    i, j = pair
    lam = family.eigvals(k)
    x = np.append(k, 0.5 * (lam[i] + lam[j]))
    if hessian_tol is None:
        hessian_tol = 1e-6 * family.spectral_width**2

    def f(y):
        return _char_fn(family, y)

    hess = (4 * _hessian(f, x, h / 2) - _hessian(f, x, h)) / 3
    ev = np.linalg.eigvalsh(0.5 * (hess + hess.T))
    pos, neg = int(np.sum(ev > 0)), int(np.sum(ev < 0))
    morse = bool(np.min(np.abs(ev)) > hessian_tol)
    is_dirac = morse and min(pos, neg) == 1
    return DiracVerdict((int(i), int(j)), tuple(float(v) for v in ev), (pos, neg), morse, is_dirac)


# -- pipeline -----------------------------------------------------------------


def _torus_dist(a: np.ndarray, b: np.ndarray) -> float:
    d = np.abs(np.mod(a - b + np.pi, TWO_PI) - np.pi)
    return float(np.max(d))


@dataclass
class DegeneratePoint:
    k: np.ndarray
    eigenvalues: np.ndarray
    gap: float
    converged: bool
    stratum: Stratum
    dirac: list[DiracVerdict]
    component: int = -1
    isolated: bool = True
    local_charges: list[int] | None = None

    def to_dict(self) -> dict:
        return {
            "k": [float(x) for x in self.k],
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "gap": float(self.gap),
            "converged": self.converged,
            "partition": list(self.stratum.partition),
            "stratum": self.stratum.label,
            "ambiguous": self.stratum.ambiguous,
            "dirac": [{"pair": list(d.pair), "verdict": d.verdict, "signature": list(d.signature),
                       "hessian_eigenvalues": list(d.hessian_eigenvalues)} for d in self.dirac],
            "component": self.component,
            "isolated": self.isolated,
            "local_charges": self.local_charges,
        }


@dataclass
class DegeneracyReport:
    """Refined degenerate points with strata, Morse verdicts and components.

    Points within ``4`` grid cells of each other share a component; a
    component with two or more points is labelled non-isolated.
    """

    points: list[DegeneratePoint]
    grid: int
    coarse_tol: float
    unconverged: int = 0
    params: dict = field(default_factory=dict)

    @property
    def isolated_points(self) -> list[DegeneratePoint]:
        return [p for p in self.points if p.isolated]

    @property
    def num_components(self) -> int:
        return len({p.component for p in self.points})

    def to_dict(self) -> dict:
        return {
            "grid": self.grid,
            "coarse_tol": self.coarse_tol,
            "unconverged": self.unconverged,
            "components": self.num_components,
            "points": [p.to_dict() for p in self.points],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def analyze(
    family: HamiltonianFamily,
    grid: int = 32,
    coarse_tol: float | None = None,
    *,
    cluster_tol: float = CLUSTER_TOL,
    refine_tol: float = REFINE_TOL,
    dedupe: float = 1e-6,
    run_dirac: bool = True,
    budget: float = DEFAULT_BUDGET,
) -> DegeneracyReport:
    """Scan, refine, classify and Morse-test the degenerate locus."""
    if coarse_tol is None:
        coarse_tol = 0.3 * family.spectral_width / max(family.size, 1)
    cands = degenerate_scan(family, grid, coarse_tol, budget=budget)
    step = 0.5 * TWO_PI / grid
    refined: list = []
    unconverged = 0
    for k0 in cands:
        r = refine_degenerate(family, k0, step=step, tol=refine_tol)
        if not r.converged:
            unconverged += 1
            continue
        if any(_torus_dist(r.k, q.k) < dedupe for q in refined):
            continue
        refined.append(r)
    refined.sort(key=lambda r: tuple(np.round(r.k, 9)))
    points = []
    for r in refined:
        lam = family.eigvals(r.k)
        st = classify_eigenvalues(lam, cluster_tol)
        verdicts = []
        if run_dirac:
            start = 0
            for size in st.partition:
                if size == 2:
                    verdicts.append(dirac_test(family, r.k, (start, start + 1)))
                start += size
        points.append(DegeneratePoint(r.k, lam, r.gap, True, st, verdicts))
    # components: link points closer than 4 grid cells
    radius = 4 * TWO_PI / grid
    comp = list(range(len(points)))

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for a, b in itertools.combinations(range(len(points)), 2):
        if _torus_dist(points[a].k, points[b].k) <= radius:
            comp[find(a)] = find(b)
    roots = sorted({find(i) for i in range(len(points))})
    sizes = {r: sum(1 for i in range(len(points)) if find(i) == r) for r in roots}
    for i, p in enumerate(points):
        p.component = roots.index(find(i))
        p.isolated = sizes[find(i)] == 1
    params = dict(grid=grid, coarse_tol=coarse_tol, cluster_tol=cluster_tol, refine_tol=refine_tol)
    return DegeneracyReport(points, grid, coarse_tol, unconverged, params)
