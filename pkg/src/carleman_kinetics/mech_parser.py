"""Reader and writer for a Chemkin-style mechanism subset.

Supported: ELEMENTS, SPECIES, fixed-column NASA-7 THERMO data (inline or in a
separate file), and REACTIONS with elementary, ``+M`` third-body, ``REV`` and
``DUPLICATE`` reactions. Anything else the grammar could mean (falloff,
PLOG, Chebyshev, reaction orders, non-default units) is rejected with a
line-numbered diagnostic rather than skipped.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .kinetics import (
    MAX_MOLECULARITY,
    Arrhenius,
    Mechanism,
    Nasa7,
    Reaction,
    Species,
    ThirdBody,
    formula_composition,
)

UNSUPPORTED_KEYWORDS = {"LOW", "TROE", "SRI", "PLOG", "FORD", "RORD", "HIGH", "CHEB", "TCHEB", "PCHEB", "LT", "RLT", "JAN", "FIT1", "EXCI", "MOME", "XSMI", "UNITS", "TDEP"}
ACCEPTED_UNITS = {"CAL/MOLE", "CAL/MOL", "MOLES", "MOLE"}
NAME_RE = re.compile(r"^[A-Za-z0-9()\-+*]+$")
SECTION_ALIASES = {
    "ELEMENTS": "ELEMENTS", "ELEM": "ELEMENTS",
    "SPECIES": "SPECIES", "SPEC": "SPECIES",
    "THERMO": "THERMO", "THER": "THERMO",
    "REACTIONS": "REACTIONS", "REAC": "REACTIONS",
}
DEFAULT_TEMPS = (300.0, 1000.0, 5000.0)

BUILTIN = {
    "h2_air_9sp": "h2_air_9sp.inp",
    "ch4_air_21sp": "ch4_air_21sp.inp",
}


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str  # "error" | "warning"
    line: int
    message: str
    code: str = "syntax"

    def __post_init__(self):
        if self.line < 1:
            raise ValueError("diagnostic line numbers are 1-based")

    def __str__(self) -> str:
        return f"line {self.line}: {self.severity}: {self.message}"


class MechanismParseError(ValueError):
    def __init__(self, diagnostics: list[ParseDiagnostic]):
        self.diagnostics = list(diagnostics)
        errors = [d for d in self.diagnostics if d.severity == "error"]
        super().__init__("\n".join(str(d) for d in errors) or "mechanism parse failed")


class UnsupportedFeature(MechanismParseError):
    pass


def _number(tok: str) -> float:
    return float(tok.strip().replace("D", "E").replace("d", "e"))


def _strip_comment(line: str) -> str:
    return line.split("!", 1)[0]


# --------------------------------------------------------------------- thermo


def parse_thermo(text: str, first_line: int = 1, elements=None) -> dict[str, Species]:
    """Parse fixed-column NASA-7 entries; ``first_line`` is the file line of ``text``'s first line."""
    diags: list[ParseDiagnostic] = []
    out = _parse_thermo_lines(text.splitlines(), first_line, diags, elements)
    if any(d.severity == "error" for d in diags):
        raise MechanismParseError(diags)
    return out


def _parse_thermo_lines(lines, first_line, diags, elements=None) -> dict[str, Species]:
    out: dict[str, Species] = {}
    temps = DEFAULT_TEMPS
    rows = []
    for k, raw in enumerate(lines):
        lineno = first_line + k
        stripped = raw.strip()
        if not stripped or stripped.startswith("!"):
            continue
        word = stripped.split()[0].upper()
        if word.startswith("THER"):
            continue
        if word == "END":
            break
        rows.append((lineno, raw.rstrip("\n")))

    # optional default temperature line
    if rows and _marker(rows[0][1]) is None:
        lineno, raw = rows[0]
        try:
            vals = [_number(t) for t in _strip_comment(raw).split()]
        except ValueError:
            vals = []
        if 1 <= len(vals) <= 3:
            temps = tuple(vals) + DEFAULT_TEMPS[len(vals):]
            rows = rows[1:]

    pos = 0
    while pos < len(rows):
        lineno, l1 = rows[pos]
        if _marker(l1) != "1":
            diags.append(ParseDiagnostic("error", lineno, "expected NASA-7 entry line 1 (marker '1' in column 80)", "thermo"))
            pos += 1
            continue
        group = rows[pos : pos + 4]
        who = (l1[:18].split() or ["?"])[0]
        bad = False
        for expect, (ln, text) in enumerate(group[1:], start=2):
            if _marker(text) != str(expect):
                diags.append(ParseDiagnostic("error", ln, f"NASA-7 entry for {who} (from line {lineno}) is missing line {expect} (marker '{expect}' in column 80)", "thermo"))
                bad = True
                break
        if not bad and len(group) < 4:
            last = group[-1][0]
            diags.append(ParseDiagnostic("error", last, f"NASA-7 entry for {who} (from line {lineno}) truncated after {len(group)} line(s)", "thermo"))
            bad = True
        if bad:
            # resynchronize at the next line-1 marker
            pos += 1
            while pos < len(rows) and _marker(rows[pos][1]) != "1":
                pos += 1
            continue
        sp = _thermo_entry(group, temps, diags, elements)
        if sp is not None:
            out[sp.name] = sp
        pos += 4
    return out


def _marker(line: str) -> str | None:
    if len(line) < 80:
        return None
    ch = line[79]
    return ch if ch in "1234" else None


def _thermo_entry(group, temps, diags, elements) -> Species | None:
    (n1, l1), (n2, l2), (n3, l3), (n4, l4) = group
    name = l1[:18].split()[0] if l1[:18].split() else ""
    if not name:
        diags.append(ParseDiagnostic("error", n1, "missing species name in columns 1-18", "thermo"))
        return None
    comp: dict[str, int] = {}
    fields = [l1[24 + 5 * i : 29 + 5 * i] for i in range(4)] + [l1[73:78]]
    for f in fields:
        el, cnt = f[:2].strip(), f[2:].strip()
        if not el or el == "0":
            continue
        try:
            n = int(round(_number(cnt))) if cnt else 0
        except ValueError:
            diags.append(ParseDiagnostic("error", n1, f"{name}: non-numeric element count {cnt!r}", "number"))
            return None
        if n:
            el = el.capitalize() if elements is None else _match_element(el, elements)
            comp[el] = comp.get(el, 0) + n
    try:
        t_low = _number(l1[45:55]) if l1[45:55].strip() else temps[0]
        t_high = _number(l1[55:65]) if l1[55:65].strip() else temps[2]
        t_mid = _number(l1[65:73]) if l1[65:73].strip() else temps[1]
    except ValueError:
        diags.append(ParseDiagnostic("error", n1, f"{name}: non-numeric temperature range in columns 46-73", "number"))
        return None
    coeffs: list[float] = []
    for ln, text, count in ((n2, l2, 5), (n3, l3, 5), (n4, l4, 4)):
        for i in range(count):
            field = text[15 * i : 15 * (i + 1)]
            try:
                coeffs.append(_number(field))
            except ValueError:
                diags.append(ParseDiagnostic("error", ln, f"{name}: non-numeric coefficient {field!r} in columns {15 * i + 1}-{15 * i + 15}", "number"))
                return None
    try:
        thermo = Nasa7(t_low, t_mid, t_high, low=tuple(coeffs[7:14]), high=tuple(coeffs[0:7]))
        return Species(name, comp, thermo)
    except ValueError as exc:
        diags.append(ParseDiagnostic("error", n1, f"{name}: {exc}", "thermo"))
        return None


def _match_element(el: str, elements) -> str:
    for e in elements:
        if e.upper() == el.upper():
            return e
    return el.capitalize()


# ------------------------------------------------------------------ mechanism


@dataclass
class _PendingReaction:
    line: int
    reactants: dict
    products: dict
    reversible: bool
    forward: Arrhenius
    third_body: bool
    efficiencies: dict
    rev: Arrhenius | None = None
    duplicate: bool = False


def parse_mechanism(text: str, thermo: str | None = None) -> Mechanism:
    """Parse mechanism text (and optional separate thermo text) into a :class:`Mechanism`.

    Raises :class:`MechanismParseError` (or :class:`UnsupportedFeature`) carrying
    every diagnostic found; parsing continues past errors so one pass reports
    them all.
    """
    diags: list[ParseDiagnostic] = []
    elements: list[str] = []
    species: list[tuple[str, int]] = []
    thermo_rows: list[tuple[int, str]] = []
    reactions: list[_PendingReaction] = []
    section = None
    current: _PendingReaction | None = None
    lines = text.splitlines()

    def err(line, msg, code="syntax"):
        diags.append(ParseDiagnostic("error", line, msg, code))

    k = 0
    while k < len(lines):
        lineno = k + 1
        raw = lines[k]
        k += 1
        body = _strip_comment(raw).strip()
        if not body:
            continue
        first = body.split()[0].upper()

        if section is None or (section != "THERMO" and first in SECTION_ALIASES):
            if first not in SECTION_ALIASES:
                err(lineno, f"unexpected text outside any section: {body!r}")
                continue
            section = SECTION_ALIASES[first]
            rest = body.split()[1:]
            if section == "THERMO":
                continue
            if section == "REACTIONS":
                for unit in rest:
                    if unit.upper() not in ACCEPTED_UNITS:
                        diags.append(ParseDiagnostic("error", lineno, f"unsupported REACTIONS unit {unit!r}; only CAL/MOLE and MOLES", "unsupported"))
                continue
            body = " ".join(rest)
            if not body:
                continue

        if section == "THERMO":
            if first == "END":
                section = None
                continue
            thermo_rows.append((lineno, raw))
            continue

        if section in ("ELEMENTS", "SPECIES"):
            for tok in body.split():
                if tok.upper() == "END":
                    section = None
                    break
                if section == "ELEMENTS":
                    elements.append(tok.split("/")[0])
                else:
                    if tok.upper() == "M":
                        err(lineno, "species name 'M' is reserved for third bodies", "species")
                    elif not NAME_RE.match(tok):
                        err(lineno, f"invalid species name {tok!r}", "species")
                    elif any(tok == s for s, _ in species):
                        err(lineno, f"species {tok} declared twice", "species")
                    else:
                        species.append((tok, lineno))
            continue

        if section == "REACTIONS":
            if first == "END":
                section = None
                current = None
                continue
            names = {s for s, _ in species}
            if "=" in body:
                current = _reaction_line(body, lineno, names, err)
                if current is not None:
                    reactions.append(current)
                continue
            _aux_line(body, lineno, current, names, err)
            continue

    if section is not None and section != "REACTIONS":
        err(len(lines) or 1, f"{section} section not closed with END")

    # thermo
    thermo_map: dict[str, Species] = {}
    if thermo_rows:
        first = thermo_rows[0][0]
        # pad skipped lines so diagnostics keep file line numbers
        block = []
        for ln, text_ in thermo_rows:
            while first + len(block) < ln:
                block.append("")
            block.append(text_)
        thermo_map.update(_parse_thermo_lines(block, first, diags, elements))
    if thermo is not None:
        ext_diags: list[ParseDiagnostic] = []
        ext = _parse_thermo_lines(thermo.splitlines(), 1, ext_diags, elements)
        for d in ext_diags:
            diags.append(ParseDiagnostic(d.severity, d.line, f"(thermo file) {d.message}", d.code))
        for name, sp in ext.items():
            thermo_map.setdefault(name, sp)

    built_species: list[Species] = []
    for name, ln in species:
        sp = thermo_map.get(name)
        if sp is not None:
            unknown = set(sp.composition) - set(elements)
            if unknown:
                err(ln, f"species {name} contains undeclared element(s) {sorted(unknown)}", "species")
                continue
            built_species.append(sp)
            continue
        comp = formula_composition(name, elements)
        if comp is None:
            err(ln, f"species {name} has no thermo entry and its composition cannot be read from the name", "species")
            continue
        built_species.append(Species(name, comp, None))

    comp_of = {s.name: s.composition for s in built_species}
    thermo_of = {s.name: s.thermo for s in built_species}
    built_reactions: list[Reaction] = []
    for p in reactions:
        if any(s not in comp_of for s in list(p.reactants) + list(p.products)):
            continue  # species already reported
        tb = ThirdBody(dict(p.efficiencies)) if p.third_body else None
        rxn = Reaction(p.reactants, p.products, p.forward, p.reversible, p.rev, tb, p.duplicate)
        delta: dict[str, int] = {}
        for s, nu in rxn.net().items():
            for el, n in comp_of[s].items():
                delta[el] = delta.get(el, 0) + nu * n
        bad = {el: d for el, d in delta.items() if d}
        if bad:
            err(p.line, f"reaction {rxn.equation()} is not element balanced: {bad}", "unbalanced")
            continue
        for reverse in (False, True) if rxn.reversible else (False,):
            if rxn.molecularity(reverse) > MAX_MOLECULARITY:
                err(p.line, f"reaction {rxn.equation()} has molecularity {rxn.molecularity(reverse)} > {MAX_MOLECULARITY}", "unsupported")
        if rxn.from_equilibrium:
            missing = sorted(s for s in rxn.net() if thermo_of.get(s) is None)
            if missing:
                err(p.line, f"reaction {rxn.equation()} needs thermo for {missing} to compute its reverse rate", "thermo")
        built_reactions.append(rxn)

    if not reactions and not any(d.severity == "error" for d in diags):
        diags.append(ParseDiagnostic("warning", len(lines) or 1, "no reactions found", "syntax"))

    errors = [d for d in diags if d.severity == "error"]
    if errors:
        cls = UnsupportedFeature if any(d.code == "unsupported" for d in errors) else MechanismParseError
        raise cls(sorted(diags, key=lambda d: d.line))
    return Mechanism(tuple(elements), tuple(built_species), tuple(built_reactions))


def _reaction_line(body: str, lineno: int, names: set[str], err) -> _PendingReaction | None:
    toks = body.split()
    if len(toks) < 4:
        err(lineno, "reaction line needs an equation followed by A, b and Ea")
        return None
    try:
        A, b, Ea = (_number(t) for t in toks[-3:])
    except ValueError:
        err(lineno, f"malformed number among {toks[-3:]}", "number")
        return None
    eqn = "".join(toks[:-3])
    if re.search(r"\(\+", eqn):
        err(lineno, f"pressure-dependent (falloff) reaction {eqn} is not supported", "unsupported")
        return None
    if "<=>" in eqn:
        lhs, rhs = eqn.split("<=>", 1)
        reversible = True
    elif "=>" in eqn:
        lhs, rhs = eqn.split("=>", 1)
        reversible = False
    else:
        lhs, rhs = eqn.split("=", 1)
        reversible = True
    if "=" in rhs or "<" in rhs:
        err(lineno, f"cannot read reaction equation {eqn!r}")
        return None
    left = _side(lhs, names)
    right = _side(rhs, names)
    for side, text in ((left, lhs), (right, rhs)):
        if isinstance(side, str):
            err(lineno, f"undeclared species {side!r} in {eqn}", "undeclared")
            return None
    (reac, m_left), (prod, m_right) = left, right
    if m_left != m_right:
        err(lineno, f"third body M must appear on both sides of {eqn}")
        return None
    if not reac or not prod:
        err(lineno, f"reaction {eqn} has an empty side")
        return None
    try:
        fwd = Arrhenius(A, b, Ea)
    except ValueError as exc:
        err(lineno, str(exc), "number")
        return None
    return _PendingReaction(lineno, reac, prod, reversible, fwd, m_left, {})


def _resolve(token: str, names: set[str]):
    if token.upper() == "M":
        return ("M", 1)
    if token in names:
        return (token, 1)
    m = re.match(r"^(\d+)(.+)$", token)
    if m and m.group(2) in names:
        return (m.group(2), int(m.group(1)))
    if m and m.group(2).upper() == "M":
        return None
    return None


def _side(text: str, names: set[str]):
    """``({species: nu}, has_M)`` or the first unresolvable token."""
    pieces = text.split("+")
    stoich: dict[str, int] = {}
    has_m = False
    i = 0
    while i < len(pieces):
        match = None
        # longest run of '+'-joined pieces naming a species, to allow '+' in names
        for j in range(len(pieces), i, -1):
            cand = "+".join(pieces[i:j])
            if not cand:
                continue
            hit = _resolve(cand, names)
            if hit is None and j < len(pieces) and pieces[j] == "":
                hit = _resolve(cand + "+", names)
                if hit is not None:
                    j += 1
            if hit is not None:
                match = (hit, j)
                break
        if match is None:
            return pieces[i] or text
        (name, nu), i = match
        if name == "M":
            if has_m:
                return "M"
            has_m = True
        else:
            stoich[name] = stoich.get(name, 0) + nu
    return stoich, has_m


_AUX_RE = re.compile(r"([^\s/]+)\s*(?:/([^/]*)/)?")


def _aux_line(body: str, lineno: int, current: _PendingReaction | None, names: set[str], err) -> None:
    if current is None:
        err(lineno, f"auxiliary data {body!r} does not follow a reaction")
        return
    for m in _AUX_RE.finditer(body):
        key, val = m.group(1), m.group(2)
        up = key.upper()
        if up in ("DUP", "DUPLICATE"):
            current.duplicate = True
            continue
        if up in UNSUPPORTED_KEYWORDS:
            err(lineno, f"auxiliary keyword {key} is not supported", "unsupported")
            continue
        if up == "REV":
            try:
                A, b, Ea = (_number(t) for t in (val or "").split())
                current.rev = Arrhenius(A, b, Ea)
            except ValueError:
                err(lineno, f"malformed REV parameters {val!r}", "number")
            if not current.reversible:
                err(lineno, "REV given for an irreversible reaction")
            continue
        if val is None:
            err(lineno, f"unrecognized auxiliary keyword {key!r}")
            continue
        if key not in names:
            err(lineno, f"undeclared species {key!r} in third-body efficiencies", "undeclared")
            continue
        if not current.third_body:
            err(lineno, f"efficiency for {key} given on a reaction without +M")
            continue
        try:
            eff = _number(val)
        except ValueError:
            err(lineno, f"malformed efficiency {val!r} for {key}", "number")
            continue
        if eff < 0:
            err(lineno, f"negative third-body efficiency for {key}", "number")
            continue
        current.efficiencies[key] = eff


# ------------------------------------------------------------------- writing


def _thermo_lines(sp: Species) -> list[str]:
    t = sp.thermo
    comp = "".join(f"{el.upper():<2s}{n:3d}" for el, n in list(sp.composition.items())[:4])
    extra = list(sp.composition.items())[4:5]
    line1 = f"{sp.name:<18s}      {comp:<20s}G{t.t_low:10.3f}{t.t_high:10.3f}{t.t_common:8.2f}"
    if extra:
        el, n = extra[0]
        line1 += f"{el.upper():<2s}{n:3d}"
    lines = [f"{line1:<79s}1"]
    vals = list(t.high) + list(t.low)
    for k, row in enumerate((vals[0:5], vals[5:10], vals[10:14]), start=2):
        text = "".join(f"{v:15.8E}" for v in row)
        lines.append(f"{text:<79s}{k}")
    return lines


def serialize_mechanism(mech: Mechanism) -> str:
    out = ["ELEMENTS", " ".join(mech.elements), "END", "SPECIES"]
    out.append(" ".join(mech.species_names))
    out.append("END")
    with_thermo = [s for s in mech.species if s.thermo is not None]
    if with_thermo:
        out.append("THERMO")
        for sp in with_thermo:
            out.extend(_thermo_lines(sp))
        out.append("END")
    out.append("REACTIONS CAL/MOLE")
    for r in mech.reactions:
        f = r.forward
        out.append(f"{r.equation():<36s} {f.A!r} {f.b!r} {f.Ea!r}")
        if r.third_body is not None and r.third_body.efficiencies:
            out.append(" ".join(f"{s}/{e!r}/" for s, e in r.third_body.efficiencies.items()))
        if r.rev is not None:
            out.append(f"REV / {r.rev.A!r} {r.rev.b!r} {r.rev.Ea!r} /")
        if r.duplicate:
            out.append("DUPLICATE")
    out.append("END")
    return "\n".join(out) + "\n"


def read_text(path_or_name: str | Path) -> str:
    key = str(path_or_name)
    if key in BUILTIN:
        return resources.files("carleman_kinetics").joinpath("data", BUILTIN[key]).read_text()
    return Path(path_or_name).read_text()


def load_mechanism(path_or_name: str | Path, thermo: str | Path | None = None) -> Mechanism:
    """Parse a mechanism file, or one of the bundled ones by name (``h2_air_9sp``, ``ch4_air_21sp``)."""
    return parse_mechanism(read_text(path_or_name), Path(thermo).read_text() if thermo else None)
