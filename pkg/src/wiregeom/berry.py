"""Per-band Chern numbers on 2-torus slices and monopole charges.

Chern numbers use the link-variable (plaquette) method: the Berry phase
around each plaquette is the argument of a product of normalized
eigenvector overlaps, and the sum over the slice is an exact multiple of
``2 pi``.  Sweeping the slice coordinate localizes degenerate points as
jumps; the jump across one point is its local charge, oriented by
increasing slice coordinate and listed by ascending band index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .bloch import HamiltonianFamily, Perturbation
from .singularity import (
    TWO_PI,
    DegeneracyReport,
    _torus_dist,
    analyze,
    classify_eigenvalues,
    min_gap,
    refine_degenerate,
)

__all__ = [
    "ChargeError",
    "ChargeReport",
    "JumpInterval",
    "PointCharge",
    "SliceChern",
    "SliceScan",
    "SlicingInapplicable",
    "StabilityReport",
    "chern_slice",
    "local_charges",
    "slice_scan",
    "stability_experiment",
]

GAP_FLOOR = 1e-3
LINK_FLOOR = 0.1
MAX_FLUX = 1.0
MAX_M = 512


class SlicingInapplicable(RuntimeError):
    """Every slice along the requested axis meets the degenerate locus."""


class ChargeError(RuntimeError):
    """Local charges cannot be assigned (no separating axis, invalid brackets)."""


@dataclass(frozen=True)
class SliceChern:
    axis: int
    s: float
    M: int
    chern: tuple[int, ...] | None
    raw: tuple[float, ...] | None
    min_gap: float
    min_link: float
    valid: bool
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "axis": self.axis, "s": self.s, "M": self.M, "valid": self.valid,
            "chern": list(self.chern) if self.chern is not None else None,
            "min_gap": self.min_gap, "min_link": self.min_link, "reason": self.reason,
        }


def _slice_points(n: int, axis: int, s: float, t1: np.ndarray, t2: np.ndarray,
                  base: np.ndarray) -> tuple[np.ndarray, tuple[int, int]]:
    a1, a2 = (axis + 1) % n, (axis + 2) % n
    ks = np.tile(base, (len(t1), len(t2), 1))
    ks[..., axis] = s
    ks[..., a1] = t1[:, None]
    ks[..., a2] = t2[None, :]
    return ks.reshape(-1, n), (a1, a2)


def _slice_min_gap(family: HamiltonianFamily, k_best: np.ndarray, plane: tuple[int, int], step: float) -> float:
    """Refine the smallest gap within the slice plane from a grid seed."""
    def objective(x):
        k = k_best.copy()
        k[list(plane)] = x
        return float(min_gap(family.eigvals(k)))

    x0 = k_best[list(plane)]
    simplex = np.array([x0, x0 + [step, 0.0], x0 + [0.0, step]])
    res = minimize(objective, x0, method="Nelder-Mead",
                   options=dict(initial_simplex=simplex, xatol=1e-9, fatol=1e-12, maxiter=400))
    return min(float(res.fun), objective(x0))


def _plaquettes(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Plaquette phases and smallest corner-link modulus on a periodic grid.

    ``v`` has shape ``(M1, M2, k, k)`` with eigenvectors in columns; both
    outputs have shape ``(M1, M2, k)``.
    """
    u1 = np.einsum("abji,abji->abi", np.conj(v), np.roll(v, -1, axis=0))
    u2 = np.einsum("abji,abji->abi", np.conj(v), np.roll(v, -1, axis=1))
    m1, m2 = np.abs(u1), np.abs(u2)
    weakest = np.minimum(np.minimum(m1, np.roll(m2, -1, axis=0)), np.minimum(np.roll(m1, -1, axis=1), m2))
    u1 = u1 / np.maximum(m1, 1e-300)
    u2 = u2 / np.maximum(m2, 1e-300)
    loop = u1 * np.roll(u2, -1, axis=0) * np.conj(np.roll(u1, -1, axis=1)) * np.conj(u2)
    return np.angle(loop), weakest


def _bisect(t: np.ndarray, rows: np.ndarray) -> np.ndarray:
    ends = np.append(t[1:], t[0] + TWO_PI)
    mids = 0.5 * (t[rows] + ends[rows])
    return np.sort(np.concatenate([t, mids]))


def chern_slice(
    family: HamiltonianFamily,
    axis: int,
    s: float,
    M: int = 24,
    *,
    gap_floor: float = GAP_FLOOR,
    link_floor: float = LINK_FLOOR,
    max_flux: float = MAX_FLUX,
    adaptive: bool = True,
    max_M: int = MAX_M,
    base: Sequence[float] | None = None,
) -> SliceChern:
    """Chern number of every band on the 2-torus ``k[axis] = s``.

    The slice is spanned by axes ``axis + 1`` and ``axis + 2`` (mod n);
    remaining coordinates, if any, come from ``base``.  The slice is valid
    when all bands stay separated by more than ``gap_floor`` (checked on
    the grid and refined off it) and every plaquette is resolved: its
    corner links exceed ``link_floor`` and its phase stays within
    ``max_flux``.  An unresolved plaquette can round to a wrong integer
    even with healthy links, so with ``adaptive`` the grid lines through
    unresolved plaquettes are bisected until every plaquette is resolved
    or an axis would exceed ``max_M`` points.  The link method stays
    exact on such non-uniform grids.
    """
    n = family.dim
    if n < 3:
        raise ValueError("slices need a family over a torus of dimension >= 3")
    if not 0 <= axis < n:
        raise ValueError(f"axis {axis} out of range for dimension {n}")
    if M < 8:
        raise ValueError("slice grid M must be at least 8")
    base = np.zeros(n) if base is None else np.asarray(base, dtype=float)
    t1 = t2 = TWO_PI * np.arange(M) / M
    checked_gap = False
    while True:
        ks, plane = _slice_points(n, axis, s, t1, t2, base)
        w, v = family.eigh_batch(ks)
        gaps = min_gap(w)
        j = int(np.argmin(gaps))
        gap = float(gaps[j])
        if not checked_gap and gap > gap_floor and family.size > 1:
            gap = min(gap, _slice_min_gap(family, ks[j].copy(), plane, TWO_PI / M))
            checked_gap = True
        size = max(len(t1), len(t2))
        if gap <= gap_floor:
            return SliceChern(axis, float(s), size, None, None, gap, 0.0, False, "band gap below floor")
        flux, weakest = _plaquettes(v.reshape(len(t1), len(t2), family.size, family.size))
        min_link = float(weakest.min())
        bad = ((weakest <= link_floor) | (np.abs(flux) > max_flux)).any(axis=-1)
        if not bad.any():
            # deterministic row-major accumulation
            raw = flux.reshape(-1, family.size).sum(axis=0) / TWO_PI
            chern = tuple(int(round(x)) for x in raw)
            return SliceChern(axis, float(s), size, chern, tuple(float(x) for x in raw), gap, min_link, True)
        rows, cols = np.flatnonzero(bad.any(axis=1)), np.flatnonzero(bad.any(axis=0))
        if not adaptive or len(t1) + len(rows) > max_M or len(t2) + len(cols) > max_M:
            reason = "link overlap below floor" if min_link <= link_floor else "plaquette flux above bound"
            return SliceChern(axis, float(s), size, None, None, gap, min_link, False, reason)
        t1, t2 = _bisect(t1, rows), _bisect(t2, cols)


# -- slice scan ------------------------------------------------------------


@dataclass(frozen=True)
class JumpInterval:
    s_low: float
    s_high: float
    delta: tuple[int, ...]

    def contains(self, s: float) -> bool:
        lo, hi = self.s_low, self.s_high
        if hi < lo:  # wraps through 0
            hi += TWO_PI
            s = s if s >= lo else s + TWO_PI
        return lo < s < hi


@dataclass
class SliceScan:
    axis: int
    slices: list[SliceChern]
    jumps: list[JumpInterval]

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "slices": [sl.to_dict() for sl in self.slices],
            "jumps": [{"s_low": j.s_low, "s_high": j.s_high, "delta": list(j.delta)} for j in self.jumps],
        }

    def to_csv(self) -> str:
        nb = next((len(sl.chern) for sl in self.slices if sl.valid), 0)
        lines = ["s,valid," + ",".join(f"chern{i + 1}" for i in range(nb))]
        for sl in self.slices:
            vals = [str(c) for c in sl.chern] if sl.valid else [""] * nb
            lines.append(",".join([f"{sl.s:.17g}", str(int(sl.valid))] + vals))
        return "\n".join(lines) + "\n"


def slice_scan(family: HamiltonianFamily, axis: int, S: int = 16, M: int = 24, **kw) -> SliceScan:
    """Chern vectors at ``S`` evenly spaced slices and the jumps between them.

    Invalid slices are skipped, so a jump interval runs between the
    nearest valid slices on either side (cyclically).

    Raises
    ------
    SlicingInapplicable
        If no slice along ``axis`` is valid.
    """
    if S < 8:
        raise ValueError("slice resolution S must be at least 8")
    slices = [chern_slice(family, axis, TWO_PI * j / S, M, **kw) for j in range(S)]
    valid = [sl for sl in slices if sl.valid]
    if not valid:
        raise SlicingInapplicable(
            f"slicing inapplicable along axis {axis}: every slice meets or nears the degenerate locus"
        )
    jumps = []
    for a, b in zip(valid, valid[1:] + valid[:1]):
        if a.chern != b.chern:
            delta = tuple(y - x for x, y in zip(a.chern, b.chern))
            jumps.append(JumpInterval(a.s, b.s, delta))
    return SliceScan(axis, slices, jumps)


# -- local charges -----------------------------------------------------------


@dataclass
class PointCharge:
    k: np.ndarray
    axis: int
    s_low: float
    s_high: float
    charges: tuple[int, ...]


@dataclass
class ChargeReport:
    points: list[PointCharge]
    total: tuple[int, ...]

    @property
    def balanced(self) -> bool:
        return all(t == 0 for t in self.total)

    def to_dict(self) -> dict:
        return {
            "orientation": "increasing slice coordinate, bands ascending",
            "points": [{"k": [float(x) for x in p.k], "axis": p.axis, "s_low": p.s_low,
                        "s_high": p.s_high, "charges": list(p.charges)} for p in self.points],
            "total": list(self.total),
            "balanced": self.balanced,
        }


def _circ(a: float, b: float) -> float:
    d = abs((a - b) % TWO_PI)
    return min(d, TWO_PI - d)


def separating_axis(points: Sequence[np.ndarray], n: int, margin: float, prefer: int | None = None) -> int:
    axes = [prefer] if prefer is not None else list(range(n))
    for ax in axes:
        coords = [float(p[ax]) for p in points]
        if all(_circ(a, b) > margin for i, a in enumerate(coords) for b in coords[i + 1:]):
            return ax
    raise ChargeError("no coordinate axis separates the degenerate points" if prefer is None
                      else f"axis {prefer} does not separate the degenerate points")


def local_charges(
    family: HamiltonianFamily,
    points: DegeneracyReport | Sequence[Sequence[float]],
    axis: int | None = None,
    M: int = 24,
    *,
    delta: float = TWO_PI / 64,
    **kw,
) -> ChargeReport:
    """Charge of each isolated degenerate point from bracketing slices.

    The charge of band ``i`` at ``p`` is its Chern number on the slice
    ``k[axis] = p[axis] + d`` minus that on ``p[axis] - d``.  ``d`` starts
    at ``delta`` and doubles (up to three times) while a bracket is
    invalid.
    """
    if isinstance(points, DegeneracyReport):
        if any(not p.isolated for p in points.points):
            raise ChargeError("report contains non-isolated degenerate components; charges need isolated points")
        pts = [np.asarray(p.k, dtype=float) for p in points.points]
    else:
        pts = [np.asarray(p, dtype=float) for p in points]
    n = family.dim
    axis = separating_axis(pts, n, 2 * delta, axis)
    out = []
    for p in pts:
        s = float(p[axis])
        others = [float(q[axis]) for q in pts if q is not p]
        d = delta
        for _ in range(4):
            lo = chern_slice(family, axis, (s - d) % TWO_PI, M, **kw)
            hi = chern_slice(family, axis, (s + d) % TWO_PI, M, **kw)
            clear = all(_circ(s, o) > d for o in others)
            if lo.valid and hi.valid and clear:
                break
            d *= 2
        else:
            raise ChargeError(f"bracketing slices around k={np.round(p, 6).tolist()} stay invalid")
        q = tuple(b - a for a, b in zip(lo.chern, hi.chern))
        out.append(PointCharge(p, axis, lo.s, hi.s, q))
    total = tuple(int(sum(c.charges[i] for c in out)) for i in range(family.size)) if out else ()
    return ChargeReport(out, total)


# -- stability -----------------------------------------------------------------


@dataclass
class MatchedComponent:
    original: np.ndarray
    original_stratum: str
    original_charges: tuple[int, ...] | None
    matches: list[np.ndarray]
    match_strata: list[str]
    match_charges: list[tuple[int, ...]] | None

    @property
    def conserved(self) -> bool | None:
        if self.original_charges is None or self.match_charges is None:
            return None
        summed = tuple(sum(c[i] for c in self.match_charges) for i in range(len(self.original_charges)))
        return summed == tuple(self.original_charges)

    def to_dict(self) -> dict:
        return {
            "original": [float(x) for x in self.original],
            "original_stratum": self.original_stratum,
            "original_charges": list(self.original_charges) if self.original_charges else None,
            "matches": [[float(x) for x in m] for m in self.matches],
            "match_strata": self.match_strata,
            "match_charges": [list(c) for c in self.match_charges] if self.match_charges is not None else None,
            "split": len(self.matches) > 1,
            "conserved": self.conserved,
        }


@dataclass
class StabilityReport:
    epsilon: float
    seed: int
    components: list[MatchedComponent]
    unmatched: list[np.ndarray]
    protected: bool
    note: str = ""
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "seed": self.seed,
            "protected": self.protected,
            "note": self.note,
            "components": [c.to_dict() for c in self.components],
            "unmatched": [[float(x) for x in u] for u in self.unmatched],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _local_search(family: HamiltonianFamily, center: np.ndarray, radius: float, starts: int,
                  rng: np.random.Generator) -> list[np.ndarray]:
    found: list[np.ndarray] = []
    seeds = [center] + [center + rng.uniform(-radius, radius, len(center)) for _ in range(starts)]
    for k0 in seeds:
        r = refine_degenerate(family, k0, step=0.25 * radius)
        if r.converged and _torus_dist(r.k, center) <= radius:
            if all(_torus_dist(r.k, f) > 1e-6 for f in found):
                found.append(r.k)
    return found


def _cluster_charges(family: HamiltonianFamily, pts: list[np.ndarray], center: float, axis: int,
                     M: int, pad: float, **kw) -> list[tuple[int, ...]] | None:
    """Charges of nearby points from slices at midpoints between their coordinates."""
    # coordinates unwrapped around the cluster center so the cluster is contiguous in s
    coords = [center + (float(p[axis]) - center + np.pi) % TWO_PI - np.pi for p in pts]
    order = sorted(range(len(pts)), key=lambda i: coords[i])
    cs = [coords[i] for i in order]
    cuts = [cs[0] - pad] + [0.5 * (a + b) for a, b in zip(cs, cs[1:])] + [cs[-1] + pad]
    slices = [chern_slice(family, axis, c % TWO_PI, M, **kw) for c in cuts]
    if not all(sl.valid for sl in slices):
        return None
    charges: list = [None] * len(pts)
    for j, i in enumerate(order):
        lo, hi = slices[j].chern, slices[j + 1].chern
        charges[i] = tuple(b - a for a, b in zip(lo, hi))
    return charges


def stability_experiment(
    family: HamiltonianFamily,
    epsilon: float | None = None,
    seed: int = 0,
    *,
    grid: int = 32,
    M: int = 24,
    radius: float = 0.3,
    starts: int = 24,
    axis: int | None = None,
    complex_weights: bool = False,
    baseline: DegeneracyReport | None = None,
    gap_floor: float = 1e-4,
) -> StabilityReport:
    """Perturb the edge weights and track the degenerate points and their charges.

    The perturbation adds ``epsilon * delta_e`` to every edge weight with
    ``delta_e`` uniform in ``[-1, 1]`` (complex box when
    ``complex_weights``), drawn from ``seed``.  ``epsilon`` defaults to
    ``0.01 *`` the spectral width.  Each original point is matched with
    the perturbed points within ``radius``: found by a global rescan and
    by a multi-start local search around it.
    """
    if epsilon is None:
        epsilon = 0.01 * family.spectral_width
    n_e = family.model.num_edges
    pert = (Perturbation.random_complex if complex_weights else Perturbation.random_real)(n_e, epsilon, seed)
    pfam = family.perturbed(pert)
    base = baseline if baseline is not None else analyze(family, grid)
    rng = np.random.default_rng(seed)
    rescan = analyze(pfam, grid, run_dirac=False)
    global_pts = [p.k for p in rescan.points]
    params = dict(grid=grid, M=M, radius=radius, starts=starts, complex_weights=complex_weights)

    if family.dim < 3:
        comps = []
        for p in base.points:
            near = [q for q in global_pts if _torus_dist(q, p.k) <= radius]
            comps.append(MatchedComponent(p.k, p.stratum.label, None, near,
                                          [classify_eigenvalues(pfam.eigvals(q)).label for q in near], None))
        return StabilityReport(epsilon, seed, comps, [], False,
                               "no protected charge: slicing charges need a torus of dimension >= 3", params)

    kw = dict(gap_floor=gap_floor)
    iso = [p for p in base.points if p.isolated]
    orig_charges = local_charges(family, [p.k for p in iso], axis, M) if iso else ChargeReport([], ())
    ax = orig_charges.points[0].axis if orig_charges.points else (axis or 0)
    comps, claimed = [], []
    for p, pc in zip(iso, orig_charges.points):
        near = [q for q in global_pts if _torus_dist(q, p.k) <= radius]
        for q in _local_search(pfam, p.k, radius, starts, rng):
            if all(_torus_dist(q, f) > 1e-6 for f in near):
                near.append(q)
        near.sort(key=lambda q: tuple(np.round(q, 9)))
        claimed.extend(near)
        strata = [classify_eigenvalues(pfam.eigvals(q)).label for q in near]
        charges = None
        if near:
            pad = 2 * TWO_PI / 64 + max(_circ(q[ax], p.k[ax]) for q in near)
            try:
                separating_axis(near, family.dim, 1e-4, ax)
                charges = _cluster_charges(pfam, near, float(p.k[ax]), ax, M, pad, **kw)
            except ChargeError:
                charges = None
        comps.append(MatchedComponent(p.k, p.stratum.label, pc.charges, near, strata, charges))
    unmatched = [q for q in global_pts if all(_torus_dist(q, c) > 1e-6 for c in claimed)]
    protected = all(c.conserved for c in comps) if comps else False
    return StabilityReport(epsilon, seed, comps, unmatched, protected, "", params)
