import random
from dataclasses import fields

from crowdsense import group
from crowdsense.params import SIDES, derive_generators


def test_sides_and_bases():
    gens = derive_generators(random.Random(1), b"t")
    for name, side in SIDES.items():
        assert getattr(gens, name).side == side
    assert gens.G == group.pair(gens.g, gens.g)
    assert gens.H == group.pair(gens.h, gens.h)
    assert gens.calG not in (gens.G, gens.H)


def test_hashed_generators_depend_only_on_tag():
    a = derive_generators(random.Random(1), b"t")
    b = derive_generators(random.Random(2), b"t")
    c = derive_generators(random.Random(1), b"u")
    assert a.g1 == b.g1 and a.h4 == b.h4 and a.calG == b.calG
    assert a.h != b.h
    assert a.g1 != c.g1


def test_generators_distinct():
    gens = derive_generators(random.Random(1))
    encs = [getattr(gens, f.name).encode() for f in fields(gens)]
    assert len(set(encs)) == len(encs)
