"""Zero-field Bloch Hamiltonians on a quotient graph.

In a fixed gauge the Hamiltonian at quasi-momentum ``k`` has entry
``(v, w) = sum_e weight_e * exp(i k . m_e)`` over edges ``v -> w``, plus
the Hermitian conjugate of every edge for the reverse orientation.
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .linalg import Spectrum, eig_hermitian, eigh_batch, eigvals_fast, eigvalsh_batch
from .model import GaugeChoice, ModelError, QuotientGraphModel, make_gauge

__all__ = [
    "BandTable",
    "BudgetError",
    "DEFAULT_BUDGET",
    "HamiltonianFamily",
    "Perturbation",
    "band_structure",
    "bloch_hamiltonian",
    "check_budget",
    "k_grid",
    "regauge_deviation",
]

# rough flop budget for grid work: points * k^3
DEFAULT_BUDGET = 2e10


class BudgetError(RuntimeError):
    """A requested grid exceeds the configured operation budget."""


def check_budget(points: int, size: int, budget: float = DEFAULT_BUDGET) -> None:
    cost = float(points) * size**3
    if cost > budget:
        raise BudgetError(
            f"operation budget exceeded: {points} points x {size}^3 = {cost:.3g} > {budget:.3g}"
        )


@dataclass(frozen=True)
class Perturbation:
    """Edge-weight deltas ``scale * deltas[e]`` added to the model weights."""

    deltas: tuple[complex, ...]
    scale: float = 1.0

    @classmethod
    def random_real(cls, n_edges: int, scale: float, seed: int = 0) -> Perturbation:
        rng = np.random.default_rng(seed)
        return cls(tuple(complex(x) for x in rng.uniform(-1.0, 1.0, n_edges)), scale)

    @classmethod
    def random_complex(cls, n_edges: int, scale: float, seed: int = 0) -> Perturbation:
        rng = np.random.default_rng(seed)
        z = rng.uniform(-1.0, 1.0, n_edges) + 1j * rng.uniform(-1.0, 1.0, n_edges)
        return cls(tuple(complex(x) for x in z), scale)


@dataclass(frozen=True)
class HamiltonianFamily:
    """The map ``k -> H(k)`` for a model in a fixed gauge.

    Rows and columns follow ``gauge.order``.  Calling the family with a
    single ``(n,)`` vector returns one matrix; :meth:`batch` evaluates a
    ``(B, n)`` stack.
    """

    model: QuotientGraphModel
    gauge: GaugeChoice
    perturbation: Perturbation | None = None
    _tables: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.gauge.loop_vectors) != self.model.num_edges or len(self.gauge.order) != self.model.num_vertices:
            raise ModelError("gauge does not belong to this model")
        if self.perturbation is not None and len(self.perturbation.deltas) != self.model.num_edges:
            raise ModelError("perturbation must give one delta per edge")
        pos = self.gauge.position
        rows = np.array([pos[e.tail] for e in self.model.edges], dtype=np.intp)
        cols = np.array([pos[e.head] for e in self.model.edges], dtype=np.intp)
        loops = np.array(self.gauge.loop_vectors, dtype=float).reshape(self.model.num_edges, self.model.dim)
        object.__setattr__(self, "_tables", (rows, cols, loops))

    @classmethod
    def of(cls, model: QuotientGraphModel, gauge: GaugeChoice | None = None,
           perturbation: Perturbation | None = None) -> HamiltonianFamily:
        return cls(model, gauge if gauge is not None else make_gauge(model), perturbation)

    @property
    def size(self) -> int:
        return self.model.num_vertices

    @property
    def dim(self) -> int:
        return self.model.dim

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.array([complex(e.weight) for e in self.model.edges])
        if self.perturbation is not None:
            w = w + self.perturbation.scale * np.asarray(self.perturbation.deltas)
        return w

    def perturbed(self, perturbation: Perturbation) -> HamiltonianFamily:
        return HamiltonianFamily(self.model, self.gauge, perturbation)

    def batch(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=float)
        if ks.ndim != 2 or ks.shape[1] != self.dim:
            raise ValueError(f"expected k stack of shape (B, {self.dim}), got {ks.shape}")
        rows, cols, loops = self._tables
        amp = self.weights[None, :] * np.exp(1j * (ks @ loops.T))
        a = np.zeros((ks.shape[0], self.size, self.size), dtype=complex)
        for e in range(len(rows)):
            a[:, rows[e], cols[e]] += amp[:, e]
        return a + np.conj(np.swapaxes(a, 1, 2))

    def __call__(self, k: Sequence[float]) -> np.ndarray:
        return self.batch(np.asarray(k, dtype=float)[None, :])[0]

    def eigvals(self, k: Sequence[float]) -> np.ndarray:
        """Ascending eigenvalues at one ``k`` (fast path for optimizers)."""
        return eigvals_fast(self(k))

    def eigvals_batch(self, ks: np.ndarray) -> np.ndarray:
        return eigvalsh_batch(self.batch(ks))

    def eigh_batch(self, ks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return eigh_batch(self.batch(ks))

    @cached_property
    def spectral_width(self) -> float:
        """``max - min`` eigenvalue over an 8-point-per-axis grid (plus 1e-12)."""
        w = self.eigvals_batch(k_grid(8, self.dim))
        return float(w.max() - w.min()) + 1e-12

    def norm_bound(self) -> float:
        return float(2.0 * np.sum(np.abs(self.weights)))


def bloch_hamiltonian(family: HamiltonianFamily, k: Sequence[float]) -> np.ndarray:
    return family(k)


def k_grid(m: int, n: int) -> np.ndarray:
    """``m^n`` points ``2 pi j / m``, lexicographic in the grid indices."""
    axis = 2.0 * np.pi * np.arange(m) / m
    return np.array(list(itertools.product(axis, repeat=n)), dtype=float).reshape(-1, n)


def regauge_deviation(
    model: QuotientGraphModel,
    gauge1: GaugeChoice,
    gauge2: GaugeChoice,
    ks: Iterable[Sequence[float]],
) -> float:
    """Largest l-infinity distance between sorted spectra in two gauges."""
    f1 = HamiltonianFamily(model, gauge1)
    f2 = HamiltonianFamily(model, gauge2)
    ks = np.asarray(list(ks), dtype=float).reshape(-1, model.dim)
    if len(ks) == 0:
        return 0.0
    return float(np.max(np.abs(f1.eigvals_batch(ks) - f2.eigvals_batch(ks))))


@dataclass(frozen=True)
class BandTable:
    k: np.ndarray
    bands: np.ndarray

    def to_csv(self) -> str:
        n, nb = self.k.shape[1], self.bands.shape[1]
        buf = io.StringIO()
        header = [f"k{i + 1}" for i in range(n)] + [f"lambda{i + 1}" for i in range(nb)]
        buf.write(",".join(header) + "\n")
        for kk, ll in zip(self.k, self.bands):
            buf.write(",".join(f"{x:.17g}" for x in (*kk, *ll)) + "\n")
        return buf.getvalue()


def band_structure(family: HamiltonianFamily, grid: int, *, budget: float = DEFAULT_BUDGET) -> BandTable:
    """Ascending eigenvalues on the ``grid^n`` lattice of k-points.

    Raises
    ------
    BudgetError
        If ``grid^n * k^3`` exceeds ``budget``.
    """
    if grid < 2:
        raise ValueError("grid must be at least 2")
    check_budget(grid**family.dim, family.size, budget)
    ks = k_grid(grid, family.dim)
    return BandTable(ks, family.eigvals_batch(ks))


def spectrum_at(family: HamiltonianFamily, k: Sequence[float]) -> Spectrum:
    return eig_hermitian(family(k))
