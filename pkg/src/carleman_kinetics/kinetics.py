"""Isothermal mass-action kinetics compiled into a polynomial ODE.

Units follow the mechanism-file convention: concentrations in mol/cm^3,
activation energies in cal/mol, temperatures in K, pre-exponential factors in
the matching mol-cm-s units for the reaction order.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .poly_ode import PolynomialSystem
from .sparse_core import SparseMatrix

R_CAL = 1.987204  # cal/(mol K), Arrhenius exponent
R_ATM_CM3 = 82.0574  # atm cm^3/(mol K), concentration conversions and K_c
P_REF_ATM = 1.0
MAX_MOLECULARITY = 3


class KineticsError(ValueError):
    pass


class UnsupportedOrder(KineticsError):
    pass


class MissingThermo(KineticsError):
    pass


class OutOfRange(KineticsError):
    pass


class RateOverflow(KineticsError, OverflowError):
    pass


@dataclass(frozen=True)
class Nasa7:
    t_low: float
    t_common: float
    t_high: float
    low: tuple[float, ...]
    high: tuple[float, ...]

    def __post_init__(self):
        if not self.t_low < self.t_common < self.t_high:
            raise ValueError(f"NASA-7 ranges out of order: {self.t_low}, {self.t_common}, {self.t_high}")
        if len(self.low) != 7 or len(self.high) != 7:
            raise ValueError("NASA-7 needs 7 coefficients per range")
        object.__setattr__(self, "low", tuple(float(a) for a in self.low))
        object.__setattr__(self, "high", tuple(float(a) for a in self.high))

    def coeffs_at(self, T: float) -> tuple[float, ...]:
        if not self.t_low <= T <= self.t_high:
            raise OutOfRange(f"T={T} K outside [{self.t_low}, {self.t_high}] K")
        return self.low if T < self.t_common else self.high


@dataclass(frozen=True)
class Species:
    name: str
    composition: Mapping[str, int]
    thermo: Nasa7 | None = None

    def __post_init__(self):
        if any(n < 0 for n in self.composition.values()) or not any(n > 0 for n in self.composition.values()):
            raise ValueError(f"species {self.name}: composition needs nonnegative counts, at least one positive")


@dataclass(frozen=True)
class Arrhenius:
    A: float
    b: float = 0.0
    Ea: float = 0.0

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError(f"pre-exponential factor must be positive, got {self.A}")


@dataclass(frozen=True)
class ThirdBody:
    efficiencies: Mapping[str, float] = field(default_factory=dict)
    default: float = 1.0

    def efficiency(self, name: str) -> float:
        return self.efficiencies.get(name, self.default)


@dataclass(frozen=True)
class Reaction:
    """Elementary reaction; ``rev`` set means explicit reverse Arrhenius,
    ``reversible`` without ``rev`` means reverse rate from equilibrium."""

    reactants: Mapping[str, int]
    products: Mapping[str, int]
    forward: Arrhenius
    reversible: bool = True
    rev: Arrhenius | None = None
    third_body: ThirdBody | None = None
    duplicate: bool = False

    @property
    def from_equilibrium(self) -> bool:
        return self.reversible and self.rev is None

    def molecularity(self, reverse: bool = False) -> int:
        side = self.products if reverse else self.reactants
        return sum(side.values()) + (1 if self.third_body is not None else 0)

    def delta_nu(self) -> int:
        return sum(self.products.values()) - sum(self.reactants.values())

    def net(self) -> Counter:
        out = Counter()
        for s, nu in self.products.items():
            out[s] += nu
        for s, nu in self.reactants.items():
            out[s] -= nu
        return out

    def equation(self) -> str:
        def side(st):
            text = "+".join(s if nu == 1 else f"{nu}{s}" for s, nu in st.items())
            return text + ("+M" if self.third_body is not None else "")

        arrow = "<=>" if self.reversible else "=>"
        return f"{side(self.reactants)}{arrow}{side(self.products)}"


@dataclass(frozen=True)
class Mechanism:
    elements: tuple[str, ...]
    species: tuple[Species, ...]
    reactions: tuple[Reaction, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise KineticsError("species names must be unique")
        known = set(names)
        for k, r in enumerate(self.reactions):
            missing = (set(r.reactants) | set(r.products)) - known
            if r.third_body is not None:
                missing |= set(r.third_body.efficiencies) - known
            if missing:
                raise KineticsError(f"reaction {k} ({r.equation()}) uses undeclared species {sorted(missing)}")
            bad = element_imbalance(self, r)
            if bad:
                raise KineticsError(f"reaction {k} ({r.equation()}) is not element balanced: {bad}")

    @property
    def species_names(self) -> list[str]:
        return [s.name for s in self.species]

    @cached_property
    def index(self) -> dict[str, int]:
        return {s.name: i for i, s in enumerate(self.species)}

    def species_by_name(self, name: str) -> Species:
        return self.species[self.index[name]]


def element_imbalance(mech: Mechanism, r: Reaction) -> dict[str, int]:
    comp = {s.name: s.composition for s in mech.species}
    delta = Counter()
    for s, nu in r.net().items():
        for el, n in comp[s].items():
            delta[el] += nu * n
    return {el: d for el, d in delta.items() if d != 0}


def rate_constant(a: Arrhenius, T: float) -> float:
    """Modified Arrhenius ``A T^b exp(-Ea / (R T))``."""
    if not T > 0:
        raise ValueError("temperature must be positive")
    try:
        k = a.A * T**a.b * math.exp(-a.Ea / (R_CAL * T))
    except OverflowError as exc:
        raise RateOverflow(f"rate constant overflows for {a} at T={T}") from exc
    if not math.isfinite(k) or k <= 0:
        raise RateOverflow(f"rate constant {k} for {a} at T={T} is not a positive finite number")
    return k


def nasa7_props(s: Species, T: float) -> tuple[float, float, float]:
    """``(cp/R, h/(R T), s/R)`` from the NASA-7 fit valid at ``T``."""
    if s.thermo is None:
        raise MissingThermo(f"species {s.name} has no thermo data")
    a1, a2, a3, a4, a5, a6, a7 = s.thermo.coeffs_at(T)
    cp = a1 + T * (a2 + T * (a3 + T * (a4 + T * a5)))
    h = a1 + T * (a2 / 2 + T * (a3 / 3 + T * (a4 / 4 + T * a5 / 5))) + a6 / T
    ent = a1 * math.log(T) + T * (a2 + T * (a3 / 2 + T * (a4 / 3 + T * a5 / 4))) + a7
    return cp, h, ent


def equilibrium_constant(mech: Mechanism, r: Reaction, T: float, p_ref: float = P_REF_ATM) -> float:
    """Concentration-based ``K_c`` in mol/cm^3 units."""
    d_s = d_h = 0.0
    for name, nu in r.net().items():
        _, h, ent = nasa7_props(mech.species_by_name(name), T)
        d_s += nu * ent
        d_h += nu * h
    kp = math.exp(d_s - d_h)
    return kp * (p_ref / (R_ATM_CM3 * T)) ** r.delta_nu()


def equilibrium_reverse_rate(mech: Mechanism, r: Reaction, T: float, p_ref: float = P_REF_ATM) -> float:
    return rate_constant(r.forward, T) / equilibrium_constant(mech, r, T, p_ref)


def reverse_rate_constant(mech: Mechanism, r: Reaction, T: float) -> float | None:
    if not r.reversible:
        return None
    if r.rev is not None:
        return rate_constant(r.rev, T)
    for name in r.net():
        if mech.species_by_name(name).thermo is None:
            raise MissingThermo(f"{r.equation()}: species {name} lacks thermo for the equilibrium reverse rate")
    return equilibrium_reverse_rate(mech, r, T)


def _expand(side: Mapping[str, int], index: Mapping[str, int]) -> list[int]:
    out = []
    for name, nu in side.items():
        out.extend([index[name]] * nu)
    return out


def to_polynomial(mech: Mechanism, T: float) -> PolynomialSystem:
    """Compile the mechanism at fixed ``T`` into ``dc/dt = sum_j A_j c^(kron j)``.

    Every mass-action term sits in a single Kronecker column, the one whose
    digits are the participating species indices sorted ascending.
    """
    idx = mech.index
    n = len(mech.species)
    terms: list[tuple[tuple[int, ...], Counter, float]] = []
    for r in mech.reactions:
        net = r.net()
        directions = [(r.reactants, rate_constant(r.forward, T), 1.0, False)]
        kr = reverse_rate_constant(mech, r, T)
        if kr is not None:
            directions.append((r.products, kr, -1.0, True))
        for side, k, sign, is_rev in directions:
            if r.molecularity(is_rev) > MAX_MOLECULARITY:
                raise UnsupportedOrder(
                    f"{r.equation()}: molecularity {r.molecularity(is_rev)} exceeds {MAX_MOLECULARITY}"
                )
            base = _expand(side, idx)
            if r.third_body is None:
                terms.append((tuple(sorted(base)), net, sign * k))
                continue
            for s in mech.species:
                eff = r.third_body.efficiency(s.name)
                if eff != 0.0:
                    terms.append((tuple(sorted(base + [idx[s.name]])), net, sign * k * eff))

    degree = max([len(t[0]) for t in terms], default=1)
    entries: list[list[tuple[int, int, float]]] = [[] for _ in range(degree)]
    for digits, net, coef in terms:
        col = 0
        for d in digits:
            col = col * n + d
        for name, nu in net.items():
            if nu:
                entries[len(digits) - 1].append((idx[name], col, nu * coef))
    coeffs = tuple(SparseMatrix(n, n**j, entries[j - 1]) for j in range(1, degree + 1))
    return PolynomialSystem(n, coeffs)


def direct_rates(mech: Mechanism, T: float, c) -> np.ndarray:
    """Species production rates by looping over reactions.

    Shares no code with :func:`to_polynomial`; used to cross-check it.
    """
    c = np.asarray(c, dtype=float)
    idx = mech.index
    out = np.zeros(len(mech.species))
    for r in mech.reactions:
        q = rate_constant(r.forward, T) * math.prod(c[idx[s]] ** nu for s, nu in r.reactants.items())
        if r.reversible:
            kr = rate_constant(r.rev, T) if r.rev is not None else equilibrium_reverse_rate(mech, r, T)
            q -= kr * math.prod(c[idx[s]] ** nu for s, nu in r.products.items())
        if r.third_body is not None:
            q *= sum(r.third_body.efficiency(s.name) * c[i] for i, s in enumerate(mech.species))
        for s, nu in r.products.items():
            out[idx[s]] += nu * q
        for s, nu in r.reactants.items():
            out[idx[s]] -= nu * q
    return out


def element_matrix(mech: Mechanism) -> np.ndarray:
    """``E[e, i]`` = atoms of element ``e`` in species ``i``."""
    E = np.zeros((len(mech.elements), len(mech.species)))
    for i, s in enumerate(mech.species):
        for el, n in s.composition.items():
            E[mech.elements.index(el), i] = n
    return E


def element_totals(mech: Mechanism, c) -> dict[str, float]:
    totals = element_matrix(mech) @ np.asarray(c, dtype=float)
    return dict(zip(mech.elements, totals.tolist()))


def mole_fractions(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    total = c.sum(axis=-1, keepdims=True)
    return c / total


def stoich_o2(species: Species) -> float:
    """Moles of O2 to burn one mole of ``species`` to CO2 and H2O."""
    comp = species.composition
    return comp.get("C", 0) + comp.get("H", 0) / 4.0 - comp.get("O", 0) / 2.0


def initial_mole_fractions(
    mech: Mechanism,
    phi: float,
    fuel: str,
    oxidizer: Mapping[str, float] | None = None,
) -> np.ndarray:
    """Fuel/air mole fractions at equivalence ratio ``phi`` (air O2:N2 = 21:79 by default)."""
    if not phi > 0:
        raise ValueError("equivalence ratio must be positive")
    oxidizer = dict(oxidizer or {"O2": 0.21, "N2": 0.79})
    idx = mech.index
    if fuel not in idx:
        raise KineticsError(f"unknown fuel species {fuel!r}")
    for name in oxidizer:
        if name not in idx:
            raise KineticsError(f"oxidizer species {name!r} missing from mechanism")
    if "O2" not in oxidizer:
        raise KineticsError("oxidizer must contain O2")
    demand = stoich_o2(mech.species_by_name(fuel))
    if demand <= 0:
        raise KineticsError(f"{fuel} needs no oxygen; cannot define an equivalence ratio")
    x = np.zeros(len(mech.species))
    for name, frac in oxidizer.items():
        x[idx[name]] += frac
    x[idx[fuel]] += phi * oxidizer["O2"] / demand
    return x / x.sum()


def initial_concentrations(
    mech: Mechanism,
    T: float,
    P: float,
    phi: float,
    fuel: str,
    oxidizer: Mapping[str, float] | None = None,
) -> np.ndarray:
    """Ideal-gas concentrations (mol/cm^3) at ``T`` [K] and ``P`` [atm]."""
    return initial_mole_fractions(mech, phi, fuel, oxidizer) * P / (R_ATM_CM3 * T)


def concentrations_from_mole_fractions(mech: Mechanism, T: float, P: float, x: Mapping[str, float]) -> np.ndarray:
    idx = mech.index
    out = np.zeros(len(mech.species))
    for name, v in x.items():
        if name not in idx:
            raise KineticsError(f"unknown species {name!r}")
        out[idx[name]] = v
    if out.sum() <= 0:
        raise KineticsError("mole fractions must have a positive sum")
    return out / out.sum() * P / (R_ATM_CM3 * T)


def formula_composition(name: str, elements: Sequence[str]) -> dict[str, int] | None:
    """Composition guessed from a chemical-formula name like ``CH2O``; ``None`` if it doesn't parse."""
    core = re.sub(r"\(.*?\)", "", name).upper()
    spelled = {e.upper(): e for e in elements}
    els = sorted(spelled, key=len, reverse=True)
    comp: Counter = Counter()
    pos = 0
    while pos < len(core):
        for el in els:
            if core.startswith(el, pos):
                pos += len(el)
                m = re.match(r"\d+", core[pos:])
                n = int(m.group()) if m else 1
                pos += m.end() if m else 0
                comp[spelled[el]] += n
                break
        else:
            return None
    return dict(comp) if comp else None
