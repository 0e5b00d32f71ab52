"""Momentum-space geometry of periodic wire networks.

Quotient-graph models, Bloch spectra, band degeneracies and their
characteristic-map strata, slice Chern numbers, and finite-dimensional
noncommutative-torus representations at rational flux.
"""

from wiregeom.model import (
    Edge,
    GaugeChoice,
    ModelError,
    QuotientGraphModel,
    builtin,
    dump_model,
    load_model,
    make_gauge,
)
from wiregeom.linalg import Spectrum, eig_hermitian, eigh_batch
from wiregeom.bloch import HamiltonianFamily, Perturbation, band_structure, bloch_hamiltonian
from wiregeom.singularity import analyze, classify_eigenvalues, dirac_test
from wiregeom.berry import (
    ChargeError,
    SlicingInapplicable,
    chern_slice,
    local_charges,
    slice_scan,
    stability_experiment,
)
from wiregeom.nctorus import (
    FluxSpec,
    burnside_fullness,
    butterfly,
    classify,
    magnetic_harper,
    torus_rep,
)

__version__ = "0.1.0"

__all__ = [
    "ChargeError",
    "Edge",
    "FluxSpec",
    "GaugeChoice",
    "HamiltonianFamily",
    "ModelError",
    "Perturbation",
    "QuotientGraphModel",
    "SlicingInapplicable",
    "Spectrum",
    "analyze",
    "band_structure",
    "bloch_hamiltonian",
    "builtin",
    "burnside_fullness",
    "butterfly",
    "chern_slice",
    "classify",
    "classify_eigenvalues",
    "dirac_test",
    "dump_model",
    "eig_hermitian",
    "eigh_batch",
    "load_model",
    "local_charges",
    "magnetic_harper",
    "make_gauge",
    "slice_scan",
    "stability_experiment",
    "torus_rep",
]
