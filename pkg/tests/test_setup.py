import json
import random

import pytest

from crowdsense import bgn, group
from crowdsense.protocol import setup as S
from crowdsense.protocol.setup import DuplicateIdentity, IntegrityError, TaRecordStore, UnknownTag


@pytest.fixture(scope="module")
def saved(tmp_path_factory, small_setup):
    out = tmp_path_factory.mktemp("params")
    S.save_setup(small_setup, out)
    return out


def test_roundtrip(saved, small_setup):
    loaded = S.load_setup(saved)
    assert loaded.public == small_setup.public
    assert (loaded.alpha, loaded.beta) == (small_setup.alpha, small_setup.beta)
    assert loaded.range_params == small_setup.range_params
    assert (saved / "secrets.json").stat().st_mode & 0o077 == 0


def test_keys(small_setup):
    pp = small_setup.public
    g, h = pp.gens.g, pp.gens.h
    assert pp.T == g.only("right") ** small_setup.alpha
    assert pp.T_h == h.only("right") ** small_setup.alpha
    assert pp.S == h.only("right") ** small_setup.beta
    assert pp.credit_key("ta").w == pp.T_h and pp.credit_key("provider").w == pp.S
    assert pp.table.E0 == group.pair(pp.gens.g0, g)


def corrupt(path, mutate):
    doc = json.loads(path.read_text())
    mutate(doc)
    path.write_text(json.dumps(doc))


@pytest.mark.parametrize("mutate", [
    lambda d: d["body"].update(V=d["body"]["V"] + 1) if "V" in d["body"] else d["body"].update(x=1),
    lambda d: d.update(version=99),
    lambda d: d.update(kind="secrets"),
    lambda d: d.update(sha256="0" * 64),
])
def test_public_corruption(tmp_path, saved, mutate):
    for f in ("public.json", "secrets.json"):
        (tmp_path / f).write_text((saved / f).read_text())
    corrupt(tmp_path / "public.json", mutate)
    with pytest.raises(IntegrityError):
        S.load_setup(tmp_path)


def test_truncated_file(tmp_path, saved):
    (tmp_path / "public.json").write_text((saved / "public.json").read_text()[:100])
    with pytest.raises(IntegrityError):
        S.load_public(tmp_path / "public.json")


def test_resealed_tampering_is_caught(tmp_path, saved, small_setup):
    # a consistent digest over altered content still fails the semantic checks
    other = S.service_setup(random.Random(2), V=16, grid=(6, 6))
    (tmp_path / "public.json").write_text((saved / "public.json").read_text())
    (tmp_path / "secrets.json").write_text(S._seal_doc("secrets", {
        "alpha": str(other.alpha), "beta": str(small_setup.beta), "phi": str(small_setup.range_params.phi_secret)}))
    with pytest.raises(IntegrityError):
        S.load_setup(tmp_path)


def test_circle_roundtrip(tmp_path):
    params = bgn.bgn_setup(32, 2 ** 10, random.Random(3))
    S.save_circle(params, tmp_path)
    loaded = S.load_circle(tmp_path)
    assert loaded.public == params.public and (loaded.q1, loaded.q2) == (params.q1, params.q2)
    doc = json.loads((tmp_path / "circle_secrets.json").read_text())
    doc["body"]["q1"] = str(params.q1 + 2)
    (tmp_path / "circle_secrets.json").write_text(S._seal_doc("circle_secrets", doc["body"]))
    with pytest.raises(IntegrityError):
        S.load_circle(tmp_path)


def test_record_store(tmp_path):
    path = tmp_path / "records.csv"
    store = TaRecordStore(path)
    g = group.generator()
    a1, a2 = g.only("left") ** 5, g.only("left") ** 6
    store.add(b"alice", 10, a1)
    store.add(b"bob", 20, a2)
    with pytest.raises(DuplicateIdentity):
        store.add(b"alice", 1, a2)
    again = TaRecordStore(path)
    assert again.identities() == [b"alice", b"bob"]
    assert again.get(b"bob").P0 == 20
    assert again.identity_for_tag(group.pair(a2, g)) == b"bob"
    with pytest.raises(UnknownTag):
        again.identity_for_tag(group.pair(g ** 7, g))
    path.write_text(path.read_text() + "zz,1,00\n")
    with pytest.raises(IntegrityError):
        TaRecordStore(path)


def test_setup_rejects_bad_grid():
    with pytest.raises(ValueError):
        S.service_setup(random.Random(1), V=4, grid=(0, 3))
    with pytest.raises(ValueError):
        S.service_setup(random.Random(1), V=0, grid=(3, 3))
