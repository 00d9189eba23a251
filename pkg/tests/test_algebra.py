import math

import pytest

from defectline.errors import InvalidArgumentError, ReactionParseError
from defectline.services.algebra import (
    Leg,
    check_reaction,
    enumerate_multiplet,
    format_legs,
    group_reduce,
    normalize_symbol,
    parse_reaction,
    vertex_legal,
)
from defectline.services.topology import Species


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_multiplet_sizes(p):
    assert len(enumerate_multiplet(p)) == math.comb(p + 3, 3)


def test_multiplet_order_and_metadata():
    rows = enumerate_multiplet(1)
    assert [r.members for r in rows] == [("v*",), ("e",), ("v",), ("s",)]
    assert [(r.w, r.chi) for r in rows] == [(-1, 1), (0, 1), (1, 1), (0, -1)]
    pairs = {r.members: r for r in enumerate_multiplet(2)}
    assert pairs[("v", "v")].species_count == 1
    assert pairs[("v", "s")].species_count == 2
    assert pairs[("v", "v*")].label == "v + v*"


def test_multiplet_needs_positive_size():
    with pytest.raises(InvalidArgumentError):
        enumerate_multiplet(0)


def test_group_relations():
    assert group_reduce(["v", "v*"]).vector == group_reduce(["e", "e"]).vector == (0, 2)
    assert group_reduce(["e", "s"]).vector == (0, 0)
    assert (-group_reduce(["v*"])).vector == group_reduce(["v", "s", "s"]).vector


def test_vector_addition_keeps_ledger():
    total = group_reduce(["v"]) + group_reduce({"s": 2})
    assert total.vector == (1, -1)
    assert total.count("s") == 2 and total.count("v") == 1


def test_aliases_and_species():
    assert normalize_symbol("Vortex") == "v"
    assert normalize_symbol(Species.MINIMUM) == "e"
    assert group_reduce([Species.SADDLE, "antivortex"]).vector == (-1, 0)
    with pytest.raises(ReactionParseError):
        normalize_symbol("q")


@pytest.mark.parametrize(
    "reaction,legal",
    [
        ("v -> v+v+v*+s+s", True),
        ("v+v* -> e+e", True),
        ("0 -> v + v* + 2s", True),
        ("∅ → e + s", True),
        ("e + s -> 0", True),
        ("v -> e", False),
        ("v + v -> e + e", False),
        ("e' -> s", True),
    ],
)
def test_reactions(reaction, legal):
    assert check_reaction(reaction).legal is legal


def test_past_directed_leg_is_crossed():
    incoming, outgoing = parse_reaction("v' -> v*")
    assert incoming == [Leg("v", past_directed=True)]
    assert incoming[0].effective == "v*"
    assert vertex_legal(incoming, outgoing)
    assert format_legs(incoming) == "v'"
    assert format_legs([]) == "0"


def test_reaction_vectors():
    check = check_reaction("v+v* -> e+e")
    assert check.before == check.after == (0, 2)


@pytest.mark.parametrize("text", ["v + e", "v -> e -> s", "v -> x", "v -> 2"])
def test_parse_errors(text):
    with pytest.raises(ReactionParseError):
        parse_reaction(text)
