import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carleman_kinetics.kinetics import (
    Arrhenius,
    KineticsError,
    Mechanism,
    MissingThermo,
    Nasa7,
    OutOfRange,
    RateOverflow,
    Reaction,
    Species,
    ThirdBody,
    UnsupportedOrder,
    direct_rates,
    element_matrix,
    element_totals,
    equilibrium_constant,
    equilibrium_reverse_rate,
    initial_concentrations,
    initial_mole_fractions,
    nasa7_props,
    rate_constant,
    to_polynomial,
)
from carleman_kinetics.mech_parser import load_mechanism
from carleman_kinetics.poly_ode import eval_rhs


def toy_thermo(a6=0.0, a7=0.0):
    c = (2.5, 0, 0, 0, 0, a6, a7)
    return Nasa7(200.0, 1000.0, 5000.0, low=c, high=c)


def mech_of(species, reactions, elements=("X",)):
    return Mechanism(tuple(elements), tuple(species), tuple(reactions))


@pytest.fixture(scope="module")
def h2():
    return load_mechanism("h2_air_9sp")


@pytest.fixture(scope="module")
def ch4():
    return load_mechanism("ch4_air_21sp")


class TestRateConstant:
    def test_degenerate(self):
        for T in (300.0, 1500.0, 2000.0):
            assert rate_constant(Arrhenius(1e13), T) == 1e13

    def test_power_law(self):
        assert rate_constant(Arrhenius(1.0, 1.0, 0.0), 2000.0) == pytest.approx(2000.0, rel=1e-15)

    def test_activation(self):
        assert rate_constant(Arrhenius(1.0, 0.0, 1.987204 * 2000), 2000.0) == pytest.approx(0.36787944117144233, rel=1e-14)

    def test_overflow(self):
        with pytest.raises(RateOverflow):
            rate_constant(Arrhenius(1e300, 100.0, 0.0), 2000.0)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            Arrhenius(0.0)
        with pytest.raises(ValueError):
            rate_constant(Arrhenius(1.0), 0.0)


class TestNasa7:
    def test_monatomic_form(self):
        s = Species("AR", {"Ar": 1}, toy_thermo())
        for T in (300.0, 2000.0):
            cp, h, _ = nasa7_props(s, T)
            assert cp == 2.5 and h == 2.5

    def test_h2o_at_2000K(self, h2):
        # high-range polynomial evaluated term by term from the file's coefficients
        cp, h, s = nasa7_props(h2.species_by_name("H2O"), 2000.0)
        assert cp == pytest.approx(6.224324189200001, rel=1e-13)
        assert h == pytest.approx(-10.150261033893333, rel=1e-13)
        assert s == pytest.approx(31.862043888273213, rel=1e-13)

    def test_low_range_below_common(self):
        th = Nasa7(200.0, 1000.0, 5000.0, low=(3.0, 0, 0, 0, 0, 0, 0), high=(4.0, 0, 0, 0, 0, 0, 0))
        s = Species("Q", {"X": 1}, th)
        assert nasa7_props(s, 999.0)[0] == 3.0
        assert nasa7_props(s, 1000.0)[0] == 4.0

    def test_out_of_range(self):
        s = Species("Q", {"X": 1}, toy_thermo())
        with pytest.raises(OutOfRange):
            nasa7_props(s, 6000.0)

    def test_missing(self):
        with pytest.raises(MissingThermo):
            nasa7_props(Species("Q", {"X": 1}), 1000.0)

    def test_range_order(self):
        with pytest.raises(ValueError):
            Nasa7(1000.0, 500.0, 5000.0, low=(0,) * 7, high=(0,) * 7)


class TestEquilibrium:
    def test_self_inverse(self):
        a, b = Species("A", {"X": 1}, toy_thermo(10.0, 1.0)), Species("B", {"X": 1}, toy_thermo(-20.0, 3.0))
        r = Reaction({"A": 1, "B": 1}, {"B": 1, "A": 1}, Arrhenius(3e12))
        m = mech_of([a, b], [r])
        assert equilibrium_reverse_rate(m, r, 1500.0) == pytest.approx(rate_constant(r.forward, 1500.0), rel=1e-15)

    def test_delta_nu_zero(self):
        # d(h/RT) = 1000/1000 = 1, d(s/R) = 0.5, so k_r = k_f exp(dG/RT) = k_f e^0.5
        a, b = Species("A", {"X": 1}, toy_thermo()), Species("B", {"X": 1}, toy_thermo(1000.0, 0.5))
        r = Reaction({"A": 1}, {"B": 1}, Arrhenius(1e13))
        m = mech_of([a, b], [r])
        assert equilibrium_reverse_rate(m, r, 1000.0) == pytest.approx(1.6487212707001282e13, rel=1e-14)

    def test_third_order_delta_nu_minus_one(self):
        # X + X + M <=> X2 + M at 1000 K: d(h/RT) = (2.5 - 5) - 2 * 2.5 = -7.5,
        # d(s/R) = -2.5 ln T - 2, so Kp = e^5.5 T^-2.5 and Kc = Kp * R_u T
        x, x2 = Species("X", {"X": 1}, toy_thermo()), Species("X2", {"X": 2}, toy_thermo(-5000.0, -2.0))
        r = Reaction({"X": 2}, {"X2": 1}, Arrhenius(1e15), third_body=ThirdBody())
        m = mech_of([x, x2], [r])
        kc = equilibrium_constant(m, r, 1000.0)
        hand = math.exp(5.5) * 1000.0**-2.5 * 82.0574 * 1000.0
        assert kc == pytest.approx(hand, rel=1e-12)
        assert equilibrium_reverse_rate(m, r, 1000.0) == pytest.approx(1e15 / hand, rel=1e-12)

    def test_detailed_balance(self, h2):
        T = 2000.0
        checked = 0
        for r in h2.reactions:
            if not r.from_equilibrium:
                continue
            m1 = Mechanism(h2.elements, h2.species, (r,))
            kc = equilibrium_constant(m1, r, T)
            idx = m1.index
            c = np.full(len(m1.species), 1e-6)
            # scale one product so that Q = Kc exactly
            prod = next(iter(r.products))
            nu = r.products[prod]
            q_other = math.prod(c[idx[s]] ** n for s, n in r.products.items() if s != prod)
            q_reac = math.prod(c[idx[s]] ** n for s, n in r.reactants.items())
            c[idx[prod]] = (kc * q_reac / q_other) ** (1.0 / nu)
            if prod in r.reactants:
                continue
            rates = eval_rhs(to_polynomial(m1, T), c)
            fwd = rate_constant(r.forward, T) * q_reac * (1.0 if r.third_body is None else c.sum())
            assert np.max(np.abs(rates)) <= 1e-10 * fwd, r.equation()
            checked += 1
        assert checked >= 10


class TestCompile:
    def test_first_order_decay(self):
        a, b = Species("A", {"X": 1}), Species("B", {"X": 1})
        sys = to_polynomial(mech_of([a, b], [Reaction({"A": 1}, {"B": 1}, Arrhenius(5.0), reversible=False)]), 1000.0)
        assert sys.degree == 1
        np.testing.assert_array_equal(sys.coeffs[0].toarray(), [[-5.0, 0.0], [5.0, 0.0]])

    def test_second_order_no_symmetry_factor(self):
        a, b = Species("A", {"X": 1}), Species("B", {"X": 2})
        sys = to_polynomial(mech_of([a, b], [Reaction({"A": 2}, {"B": 1}, Arrhenius(1.0), reversible=False)]), 1000.0)
        np.testing.assert_array_equal(eval_rhs(sys, [2.0, 0.0]), [-8.0, 4.0])

    def test_canonical_column(self):
        a, b, c = Species("A", {"X": 1}), Species("B", {"X": 1}), Species("C", {"X": 2})
        r = Reaction({"B": 1, "A": 1}, {"C": 1}, Arrhenius(2.0), reversible=False)
        sys = to_polynomial(mech_of([a, b, c], [r]), 1000.0)
        # species order A, B, C; sorted digits (0, 1) -> column 0*3 + 1
        assert {col for _, col, _ in sys.coeffs[1].entries()} == {1}

    def test_third_body_expands_one_degree_up(self):
        x, x2 = Species("X", {"X": 1}), Species("X2", {"X": 2})
        r = Reaction({"X": 2}, {"X2": 1}, Arrhenius(1.0), reversible=False, third_body=ThirdBody({"X2": 0.0}))
        sys = to_polynomial(mech_of([x, x2], [r]), 1000.0)
        assert sys.degree == 3
        c = np.array([2.0, 5.0])
        # [M] = c_X only because X2 has zero efficiency
        np.testing.assert_allclose(eval_rhs(sys, c), [-2 * 4 * 2, 4 * 2])

    def test_unsupported_order(self):
        a, b = Species("A", {"X": 1}), Species("B", {"X": 4})
        r = Reaction({"A": 4}, {"B": 1}, Arrhenius(1.0), reversible=False)
        with pytest.raises(UnsupportedOrder):
            to_polynomial(mech_of([a, b], [r]), 1000.0)

    def test_missing_thermo(self):
        a, b = Species("A", {"X": 1}), Species("B", {"X": 1})
        with pytest.raises(MissingThermo):
            to_polynomial(mech_of([a, b], [Reaction({"A": 1}, {"B": 1}, Arrhenius(1.0))]), 1000.0)

    def test_explicit_reverse(self):
        a, b = Species("A", {"X": 1}), Species("B", {"X": 1})
        r = Reaction({"A": 1}, {"B": 1}, Arrhenius(3.0), rev=Arrhenius(2.0))
        sys = to_polynomial(mech_of([a, b], [r]), 1000.0)
        np.testing.assert_allclose(eval_rhs(sys, [1.0, 1.0]), [-1.0, 1.0])

    def test_mechanism_validation(self):
        a = Species("A", {"X": 1})
        with pytest.raises(KineticsError, match="undeclared"):
            mech_of([a], [Reaction({"A": 1}, {"B": 1}, Arrhenius(1.0), reversible=False)])
        b = Species("B", {"X": 2})
        with pytest.raises(KineticsError, match="balanced"):
            mech_of([a, b], [Reaction({"A": 1}, {"B": 1}, Arrhenius(1.0), reversible=False)])
        with pytest.raises(KineticsError, match="unique"):
            mech_of([a, a], [])


@pytest.mark.parametrize("name", ["h2_air_9sp", "ch4_air_21sp"])
def test_compiled_rhs_matches_direct_rates(name, rng):
    mech = load_mechanism(name)
    sys = to_polynomial(mech, 2000.0)
    assert sys.degree == 3
    worst = 0.0
    for _ in range(100):
        c = rng.uniform(0, 1, len(mech.species)) * 1e-5
        a, b = eval_rhs(sys, c), direct_rates(mech, 2000.0, c)
        worst = max(worst, np.max(np.abs(a - b)) / np.max(np.abs(b)))
    assert worst <= 1e-12


@settings(max_examples=30)
@given(st.lists(st.floats(0, 1e-5), min_size=21, max_size=21))
def test_element_conservation_property(values):
    mech = _CH4
    c = np.array(values)
    rate = eval_rhs(_CH4_SYS, c)
    scale = max(1.0, np.max(np.abs(direct_rates(mech, 2000.0, c)))) if c.any() else 1.0
    assert np.max(np.abs(element_matrix(mech) @ rate)) <= 1e-12 * scale


_CH4 = load_mechanism("ch4_air_21sp")
_CH4_SYS = to_polynomial(_CH4, 2000.0)


class TestComposition:
    def test_element_totals(self, h2):
        c = np.zeros(len(h2.species))
        c[h2.index["H2"]] = 1.0
        assert element_totals(h2, c) == {"O": 0.0, "H": 2.0, "N": 0.0}
        assert set(element_totals(h2, np.zeros(len(h2.species))).values()) == {0.0}
        c[h2.index["H2"]], c[h2.index["O2"]] = 2.0, 1.0
        assert element_totals(h2, c) == {"O": 2.0, "H": 4.0, "N": 0.0}

    def test_stoichiometric_h2_air(self, h2):
        x = initial_mole_fractions(h2, 1.0, "H2")
        assert x[h2.index["H2"]] == pytest.approx(0.2957746478873239, rel=1e-14)

    def test_lean_h2_air(self, h2):
        x = initial_mole_fractions(h2, 0.8, "H2")
        idx = h2.index
        assert x[idx["H2"]] == pytest.approx(0.25149700598802394, rel=1e-14)
        assert x[idx["O2"]] == pytest.approx(0.15718562874251496, rel=1e-14)
        assert x[idx["N2"]] == pytest.approx(0.5913173652694611, rel=1e-14)
        others = [i for n, i in idx.items() if n not in ("H2", "O2", "N2")]
        assert not x[others].any()
        assert x.sum() == pytest.approx(1.0, rel=1e-15)

    def test_concentrations_ideal_gas(self, h2):
        c = initial_concentrations(h2, 2000.0, 1.0, 0.8, "H2")
        assert c.sum() == pytest.approx(1.0 / (82.0574 * 2000.0), rel=1e-14)

    def test_methane_demand(self, ch4):
        x = initial_mole_fractions(ch4, 1.0, "CH4")
        assert x[ch4.index["CH4"]] == pytest.approx(0.105 / 1.105, rel=1e-14)

    def test_errors(self, h2):
        with pytest.raises(KineticsError):
            initial_mole_fractions(h2, 0.8, "CH4")
        with pytest.raises(KineticsError):
            initial_mole_fractions(h2, 0.8, "H2", {"O2": 0.21, "AR": 0.79})
        with pytest.raises(ValueError):
            initial_mole_fractions(h2, 0.0, "H2")
