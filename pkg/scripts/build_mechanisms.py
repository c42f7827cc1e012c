"""Extract the curated H2-air and CH4-air mechanisms from GRI-Mech 3.0.

Needs cantera (not a runtime dependency); the generated files are committed
under src/carleman_kinetics/data/. Falloff reactions are collapsed to an
elementary reaction whose rate constant is the effective value at the
isothermal reactor condition (2000 K, 1 atm, phi=0.8 air mixture), since the
mechanism grammar rejects LOW/TROE.
"""
import argparse
from pathlib import Path

import cantera as ct

H2_SPECIES = "H2 O2 H O OH HO2 H2O2 H2O N2".split()
CH4_SPECIES = (
    "H2 H O O2 OH H2O HO2 H2O2 CH CH2 CH2(S) CH3 CH4 CO CO2 HCO CH2O CH2OH "
    "CH3O CH3OH N2"
).split()

T_REACTOR = 2000.0
P_REACTOR = ct.one_atm
CAL = 4184.0  # J/kmol per cal/mol


def _num(x):
    return float("%.10g" % x)


def _fmt_side(stoich):
    parts = []
    for name, nu in stoich.items():
        nu = int(round(nu))
        parts.append(name if nu == 1 else f"{nu}{name}")
    return "+".join(parts)


def _thermo_block(sp):
    c = sp.thermo.coeffs
    tmid, high, low = c[0], c[1:8], c[8:15]
    comp = "".join(f"{el:<2s}{int(n):3d}" for el, n in sp.composition.items())
    line1 = f"{sp.name:<18s}      {comp:<20s}G{sp.thermo.min_temp:10.2f}{sp.thermo.max_temp:10.2f}{tmid:8.2f}"
    line1 = f"{line1:<79s}1"
    vals = list(high) + list(low)
    rows = [vals[0:5], vals[5:10], vals[10:14]]
    out = [line1]
    for k, row in enumerate(rows, start=2):
        text = "".join(f"{v:15.8E}" for v in row)
        out.append(f"{text:<79s}{k}")
    return out


def build(species, title, phi_fuel):
    gas = ct.Solution("gri30.yaml")
    keep = set(species)
    gas.TP = T_REACTOR, P_REACTOR
    gas.set_equivalence_ratio(0.8, phi_fuel, "O2:0.21, N2:0.79")
    k_eff = gas.forward_rate_constants

    lines = [f"! {title}", "! GRI-Mech 3.0 subset; falloff reactions collapsed at 2000 K / 1 atm", ""]
    elements = [e for e in gas.element_names if any(gas.species(s).composition.get(e, 0) for s in species)]
    lines += ["ELEMENTS", " ".join(elements), "END", "SPECIES", " ".join(species), "END", "THERMO"]
    lines.append(f"{300.0:10.3f}{1000.0:10.3f}{5000.0:10.3f}")
    for name in species:
        lines += _thermo_block(gas.species(name))
    lines += ["END", "REACTIONS  CAL/MOLE"]

    for idx, rxn in enumerate(gas.reactions()):
        names = set(rxn.reactants) | set(rxn.products)
        if rxn.reaction_type == "three-body-Arrhenius" and rxn.third_body.name != "M":
            names.add(rxn.third_body.name)
        if not names <= keep:
            continue
        arrow = "<=>" if rxn.reversible else "=>"
        reac, prod = dict(rxn.reactants), dict(rxn.products)
        aux = []
        order = sum(reac.values())
        rtype = rxn.reaction_type
        if rtype.startswith("falloff"):
            a, b, ea = k_eff[idx] * 1e3 ** (order - 1), 0.0, 0.0
            note = f"  ! collapsed {rxn.equation}"
        else:
            rate = rxn.rate
            note = ""
            if rtype == "three-body-Arrhenius":
                tb = rxn.third_body
                if tb.name == "M":
                    order += 1
                    effs = {s: e for s, e in tb.efficiencies.items() if s in keep}
                    if effs:
                        aux.append(" ".join(f"{s}/{_num(e)}/" for s, e in effs.items()))
                    reac = dict(reac, M=1)
                    prod = dict(prod, M=1)
                else:
                    # explicit collider written as an ordinary participant
                    order += 1
                    reac[tb.name] = reac.get(tb.name, 0) + 1
                    prod[tb.name] = prod.get(tb.name, 0) + 1
            a = rate.pre_exponential_factor * 1e3 ** (order - 1)
            b = rate.temperature_exponent
            ea = rate.activation_energy / CAL
        if rxn.duplicate:
            aux.append("DUPLICATE")
        eqn = f"{_fmt_side(reac)}{arrow}{_fmt_side(prod)}"
        lines.append(f"{eqn:<32s} {_num(a):>14.6E} {_num(b):>8.3f} {_num(ea):>10.2f}{note}")
        lines += aux
    lines += ["END", ""]
    return "\n".join(lines)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).parent.parent / "src/carleman_kinetics/data")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "h2_air_9sp.inp").write_text(build(H2_SPECIES, "H2-air, 9 species", "H2"))
    (args.out / "ch4_air_21sp.inp").write_text(build(CH4_SPECIES, "CH4-air C1, 21 species", "CH4"))


if __name__ == "__main__":
    main()
