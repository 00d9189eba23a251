"""
Defect Group Algebra
Commutative group on the generators v, v*, e, s with v + v* = 2e and
e + s = 0. Multisets of generators reduce to (w, chi) vectors; a reaction is
legal when both sides reduce to the same vector.
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Union

from defectline.errors import InvalidArgumentError, ReactionParseError

logger = logging.getLogger(__name__)

GENERATORS: dict[str, tuple[int, int]] = {
    "v": (1, 1),
    "v*": (-1, 1),
    "s": (0, -1),
    "e": (0, 1),
}

# time reversal of a leg
CROSSING = {"v": "v*", "v*": "v", "s": "e", "e": "s"}

_ALIASES = {
    "v": "v",
    "vortex": "v",
    "v*": "v*",
    "antivortex": "v*",
    "anti-vortex": "v*",
    "e": "e",
    "maximum": "e",
    "minimum": "e",
    "extremum": "e",
    "s": "s",
    "saddle": "s",
}

_VACUUM = {"0", "∅", "vacuum", ""}
_TERM = re.compile(r"^(\d*)\s*([A-Za-z\-]+\*?)\s*('?)$")


@dataclass(frozen=True)
class Leg:
    symbol: str
    past_directed: bool = False

    @property
    def effective(self) -> str:
        return CROSSING[self.symbol] if self.past_directed else self.symbol


@dataclass(frozen=True)
class DefectVector:
    m: int
    n_index: int
    ledger: tuple[tuple[str, int], ...] = ()

    def __add__(self, other: "DefectVector") -> "DefectVector":
        counts = Counter(dict(self.ledger))
        counts.update(dict(other.ledger))
        return DefectVector(self.m + other.m, self.n_index + other.n_index, _ledger(counts))

    def __neg__(self) -> "DefectVector":
        return DefectVector(-self.m, -self.n_index)

    @property
    def vector(self) -> tuple[int, int]:
        return self.m, self.n_index

    def count(self, symbol: str) -> int:
        return dict(self.ledger).get(symbol, 0)


@dataclass(frozen=True)
class DefectComplex:
    w: int
    chi: int
    p: int
    members: tuple[str, ...]

    @property
    def species_count(self) -> int:
        return len(set(self.members))

    @property
    def label(self) -> str:
        return " + ".join(self.members)


@dataclass(frozen=True)
class ReactionCheck:
    incoming: tuple[Leg, ...]
    outgoing: tuple[Leg, ...]
    before: tuple[int, int]
    after: tuple[int, int]

    @property
    def legal(self) -> bool:
        return self.before == self.after


Multiset = Union[Iterable, Mapping[str, int]]


def normalize_symbol(name) -> str:
    """Generator symbol for a symbol, species name or Species member."""
    raw = getattr(name, "symbol", None) or str(name)
    key = raw.strip().lower()
    if key not in _ALIASES:
        raise ReactionParseError(f"unknown defect symbol {name!r}")
    return _ALIASES[key]


def _legs(members: Multiset) -> list[Leg]:
    if isinstance(members, Mapping):
        items: Iterable = [sym for sym, k in members.items() for _ in range(int(k))]
    else:
        items = members
    out = []
    for item in items:
        if isinstance(item, Leg):
            out.append(item)
            continue
        text = getattr(item, "symbol", None) or str(item)
        past = text.endswith("'")
        out.append(Leg(normalize_symbol(text.rstrip("'")), past))
    return out


def _ledger(counts: Mapping[str, int]) -> tuple[tuple[str, int], ...]:
    return tuple((sym, int(counts[sym])) for sym in GENERATORS if counts.get(sym, 0))


def group_reduce(members: Multiset) -> DefectVector:
    """(m, n) of a multiset: #v - #v*, #v + #v* + #e - #s."""
    counts = Counter(leg.effective for leg in _legs(members))
    m = sum(GENERATORS[sym][0] * k for sym, k in counts.items())
    n = sum(GENERATORS[sym][1] * k for sym, k in counts.items())
    return DefectVector(m, n, _ledger(counts))


def enumerate_multiplet(p: int) -> list[DefectComplex]:
    """All C(p + 3, 3) multisets of p generators, ordered by (chi, w, members)."""
    if p < 1:
        raise InvalidArgumentError(f"multiplet size must be >= 1, got {p}")
    rows = []
    for combo in combinations_with_replacement(tuple(GENERATORS), p):
        vec = group_reduce(combo)
        rows.append(DefectComplex(w=vec.m, chi=vec.n_index, p=p, members=tuple(combo)))
    rows.sort(key=lambda c: (-c.chi, c.w, c.members))
    return rows


def vertex_legal(incoming: Multiset, outgoing: Multiset) -> bool:
    return group_reduce(incoming).vector == group_reduce(outgoing).vector


def _parse_side(text: str) -> list[Leg]:
    text = text.strip()
    if text.lower() in _VACUUM:
        return []
    legs: list[Leg] = []
    for term in text.split("+"):
        term = term.strip()
        if term.lower() in _VACUUM:
            continue
        match = _TERM.match(term)
        if not match:
            raise ReactionParseError(f"cannot parse reaction term {term!r}")
        count, name, prime = match.groups()
        symbol = normalize_symbol(name)
        legs.extend(Leg(symbol, bool(prime)) for _ in range(int(count) if count else 1))
    return legs


def parse_reaction(text: str) -> tuple[list[Leg], list[Leg]]:
    """
    "v+v* -> e+e", "0 -> v+v*+2s", "v' -> e".

    0 or ∅ is the vacuum, a leading integer repeats a term, a trailing ' marks
    a past-directed leg.
    """
    for arrow in ("->", "→"):
        if arrow in text:
            left, _, right = text.partition(arrow)
            if arrow in right:
                raise ReactionParseError(f"more than one arrow in {text!r}")
            return _parse_side(left), _parse_side(right)
    raise ReactionParseError(f"reaction needs an arrow '->': {text!r}")


def check_reaction(text: str) -> ReactionCheck:
    incoming, outgoing = parse_reaction(text)
    return ReactionCheck(
        incoming=tuple(incoming),
        outgoing=tuple(outgoing),
        before=group_reduce(incoming).vector,
        after=group_reduce(outgoing).vector,
    )


def format_legs(legs: Iterable[Leg]) -> str:
    parts = [leg.symbol + ("'" if leg.past_directed else "") for leg in legs]
    return " + ".join(parts) if parts else "0"
