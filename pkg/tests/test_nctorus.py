from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

import wiregeom as wg
from wiregeom.model import make_gauge, model_from_dict
from wiregeom.nctorus import (
    FluxSpec,
    WeylWord,
    burnside_fullness,
    butterfly,
    certify_fullness,
    classify,
    classify_diamond,
    classify_gyroid,
    classify_honeycomb,
    count_gaps,
    diamond_flux,
    diamond_phis,
    honeycomb_flux,
    magnetic_entry,
    magnetic_generators,
    magnetic_harper,
    parse_fraction,
    torus_rep,
)

SQUARE = {
    "name": "square", "dim": 2, "lattice_basis": [[1, 0], [0, 1]], "vertices": ["o"], "positions": [[0, 0]],
    "edges": [{"from": 0, "to": 0, "translation": [1, 0]}, {"from": 0, "to": 0, "translation": [0, 1]}],
}


def test_parse_fraction():
    assert parse_fraction("3/6") == Fraction(1, 2)
    with pytest.raises(ValueError, match="exact"):
        parse_fraction("0.5")


def test_clock_shift_pair():
    rep = torus_rep(FluxSpec.from_upper(2, ["1/3"]))
    u, v = rep.generators
    assert rep.dim == 3 and rep.relation_error() < 1e-12
    assert np.allclose(u @ v, np.exp(2j * np.pi / 3) * v @ u)
    assert np.allclose(np.linalg.matrix_power(u, 3), np.linalg.matrix_power(u, 3)[0, 0] * np.eye(3))


def test_anticommuting_triple():
    rep = torus_rep(FluxSpec.from_upper(3, ["1/2"] * 3))
    U = rep.generators
    for i in range(3):
        for j in range(i + 1, 3):
            assert np.allclose(U[i] @ U[j], -U[j] @ U[i])


def test_one_dimensional_twist():
    rep = torus_rep(FluxSpec.zero(1), twist=[1j])
    assert rep.generators[0].shape == (1, 1) and rep.generators[0][0, 0] == 1j


def test_tensor_rep_option():
    rep = torus_rep(FluxSpec.from_upper(2, ["1/3"]), irreducible=False)
    assert rep.dim == 9 and rep.relation_error() < 1e-12


def test_monomial_cocycle():
    flux = FluxSpec.from_upper(3, ["1/3", "1/2", "1/6"])
    rep = torus_rep(flux)
    a, b = (1, -2, 1), (0, 1, 3)
    lhs = rep.monomial(a) @ rep.monomial(b)
    rhs = flux.alpha(a, b) * rep.monomial(tuple(x + y for x, y in zip(a, b)))
    assert np.allclose(lhs, rhs)


def test_weyl_word_inverse():
    flux = FluxSpec.from_upper(2, ["1/5"])
    w = WeylWord.from_steps([[1, 0], [0.5, 2], [-1, 1]], flux)
    e = w.compose(w.inverse(), flux)
    assert np.allclose(e.vector, 0) and abs(e.phase - 1) < 1e-14


def test_tree_edge_entry_is_identity():
    hc = wg.builtin("honeycomb")
    g = make_gauge(hc)
    word = magnetic_entry(hc, g, honeycomb_flux("1/7"), g.tree_edges[0])
    assert np.allclose(word.vector, 0) and abs(word.phase - 1) < 1e-14


def test_honeycomb_commutation_phase():
    phi = Fraction(1, 7)
    hc = wg.builtin("honeycomb")
    g = make_gauge(hc)
    flux = honeycomb_flux(phi)
    rest = [i for i in range(3) if i not in g.tree_edges]
    a, b = (magnetic_entry(hc, g, flux, i).integer_vector() for i in rest)
    q = flux.commutation(a, b)
    chi = np.exp(1j * np.pi * float(phi))
    assert abs(q - np.conj(chi) ** 6) < 1e-12 or abs(q - chi**6) < 1e-12


def test_harper_spectrum_bound():
    hc = wg.builtin("honeycomb")
    h = magnetic_harper(hc, None, torus_rep(honeycomb_flux("1/3")))
    assert np.allclose(h, h.conj().T)
    w = np.linalg.eigvalsh(h)
    assert w.min() >= -3 - 1e-12 and w.max() <= 3 + 1e-12


def test_dimension_cap():
    with pytest.raises(ValueError, match="cap"):
        magnetic_harper(wg.builtin("G"), None, torus_rep(FluxSpec.from_upper(3, ["1/7", 0, 0])), cap=8)


def test_burnside_matrix_units():
    D = 3
    units = [np.outer(np.eye(D)[i], np.eye(D)[j]) for i in range(D) for j in range(D)]
    r = burnside_fullness(units)
    assert r.is_full and r.rank == 9


def test_burnside_commutative_honeycomb():
    hc = wg.builtin("honeycomb")
    r = burnside_fullness(magnetic_generators(hc, None, torus_rep(FluxSpec.zero(2), seed=1)))
    assert r.rank == 2 and not r.is_full


def test_burnside_monotone():
    hc = wg.builtin("honeycomb")
    gens = magnetic_generators(hc, None, torus_rep(honeycomb_flux("1/5")))
    ranks = [burnside_fullness(gens[:i]).rank for i in range(1, len(gens) + 1)]
    assert ranks == sorted(ranks) and ranks[-1] <= 100


def test_honeycomb_classifier_examples():
    assert classify_honeycomb(0).case == "commutative"
    assert classify_honeycomb(1).case == "case 1 (q=1)"
    assert classify_honeycomb("1/6").full
    assert not classify_honeycomb("1/2").full


def test_diamond_classifier_examples():
    assert classify_diamond([0, 0, 0]).case == "commutative"
    assert classify_diamond(["1/2"] * 3).case == "case 2a"
    assert classify_diamond(["1/3", "1/5", "2/7"]).full


def test_diamond_phis_inverse():
    p = [Fraction(1, 3), Fraction(1, 5), Fraction(2, 7)]
    assert list(diamond_phis(diamond_flux(p))) == p


def test_gyroid_classifier_examples():
    assert classify_gyroid(0, 0, 0).case == "commutative"
    assert classify_gyroid("1/3", 0, 0).full
    assert classify_gyroid(1, 0, -1).case == "proper"


def test_classify_dispatch():
    assert classify("honeycomb", honeycomb_flux("1/5")) == classify_honeycomb("1/5")
    with pytest.raises(ValueError):
        classify("P", FluxSpec.zero(3))


def test_certificate_generic_full():
    cert = certify_fullness(wg.builtin("honeycomb"), honeycomb_flux("1/5"))
    assert cert.generic_full and cert.full and cert.generic.is_full


def test_certificate_special_fiber():
    # lattice flux 1/2: full at a generic twist, proper over special twists
    cert = certify_fullness(wg.builtin("honeycomb"), honeycomb_flux("1/6"))
    assert cert.generic_full and not cert.full


def test_count_gaps():
    bands = np.array([[0.0, 2.0, 2.05], [1.0, 3.0, 3.0]])
    n, gaps = count_gaps(bands, 0.1)
    assert n == 1 and gaps == [(1.0, 2.0)]


@pytest.mark.parametrize("q", [3, 5])
def test_hofstadter_odd_q(q):
    rows = [r for r in butterfly(model_from_dict(SQUARE), ["1"], q) if r.q == q]
    assert all(r.gap_count == q - 1 for r in rows)


def test_hofstadter_even_q_center_closes():
    rows = [r for r in butterfly(model_from_dict(SQUARE), ["1"], 4) if r.q == 4]
    assert all(r.gap_count == 2 for r in rows)


def test_honeycomb_zero_flux_gapless():
    rows = butterfly(wg.builtin("honeycomb"), ["1"], 1)
    zero = next(r for r in rows if r.p == 0)
    assert zero.gap_count == 0 and np.isclose(zero.eigenvalues.min(), -3) and np.isclose(zero.eigenvalues.max(), 3)
