import random
from dataclasses import replace

import pytest

from crowdsense import geo, group, zkp
from crowdsense.protocol.parties import MobileUser, bind, report_v
from crowdsense.protocol.setup import ANCHORS
from crowdsense.zkp import ProofError, ProofTranscript, RangeError


def spk_statement(r):
    return (r.Cp, r.Q, r.X, r.Y, r.Z, r.num)


def verify_report(world, report, nonce):
    pp = world.setup.public
    anchor = ANCHORS[report.anchor]
    return zkp.verify_spk(spk_statement(report), pp.range, report.proof, pp.gens, pp.table, anchor,
                          pp.anchor_key(anchor), bind(nonce, report))


def flip_response(tr, i):
    zs = list(tr.responses)
    zs[i] = (zs[i] + 1) % group.ORDER
    return replace(tr, responses=tuple(zs))


def test_pk1(small_setup):
    pp = small_setup.public
    req = MobileUser(b"x", pp, random.Random(1)).registration_request(b"n" * 16)
    st = (req.C, req.Cp, req.Ahat)
    ctx = bind(b"n" * 16, req)
    assert zkp.verify_pk1(st, req.proof, pp.gens, ctx)
    assert not zkp.verify_pk1(st, req.proof, pp.gens, bind(b"m" * 16, req))
    for i in range(3):
        assert not zkp.verify_pk1(st, flip_response(req.proof, i), pp.gens, ctx)
    assert not zkp.verify_pk1((req.C, req.Cp, req.Ahat ** 2), req.proof, pp.gens, ctx)


def test_pk1_rejects_false_witness(small_setup):
    g = small_setup.public.gens
    with pytest.raises(ProofError):
        zkp.prove_pk1((1, 2, 3), (g.g1, g.h1, g.g.only("left")), g, b"ctx")


def test_credential_proof_kinds(world):
    pp = world.setup.public
    nonce = world.sp.issue_nonce()
    req = world.user.match_request(geo.GridRegion.of(6, 6, [(0, 0)]), nonce)
    ctx = bind(nonce, req)
    assert zkp.verify_credential(pp.T, req.proof, pp.gens, pp.table, ctx, "PK3")
    assert not zkp.verify_credential(pp.T, req.proof, pp.gens, pp.table, ctx, "PK2")
    for i in range(len(req.proof.responses)):
        assert not zkp.verify_credential(pp.T, flip_response(req.proof, i), pp.gens, pp.table, ctx, "PK3")
    swapped = replace(req.proof, aux=(req.proof.aux[0], req.proof.aux[0]))
    assert not zkp.verify_credential(pp.T, swapped, pp.gens, pp.table, ctx, "PK3")


def test_spk_complete_and_sound(world):
    report, nonce, _ = world.report(Q=10)
    assert verify_report(world, report, nonce)
    for i in range(len(report.proof.responses)):
        assert not verify_report(world, replace(report, proof=flip_response(report.proof, i)), nonce)
    assert not verify_report(world, replace(report, Q=11), nonce)
    assert not verify_report(world, replace(report, X=report.X + 1), nonce)


def test_spk_range_boundary(world):
    V = world.setup.public.range.V  # 16, credit 20
    report, nonce, _ = world.report(Q=20 - V)
    assert verify_report(world, report, nonce)
    with pytest.raises(RangeError):
        world.report(Q=20 - V - 1)
    with pytest.raises(RangeError):
        world.report(Q=20)


def test_spk_hook_breaks_proof(world):
    c = world.user.credential
    pp = world.setup.public
    report, nonce, _ = world.report()
    # a prover that lies about one commitment cannot pass
    ctx = bind(nonce, replace(report, proof=None))
    t1 = world.user._pending[report.Y.encode()][0][0]
    w = (c.B, c.f, c.t, t1, c.a, c.I, c.P, report_v(c.a, report.num, c.identity, report.tau))
    bad = zkp.prove_spk(w, spk_statement(report), pp.range, pp.gens, pp.table, "ta", pp.T_h, ctx,
                        random.Random(1), _commitment_hook=lambda ts: ts[:-1] + [ts[-1] * pp.gens.G])
    assert not zkp.verify_spk(spk_statement(report), pp.range, bad, pp.gens, pp.table, "ta", pp.T_h, ctx)


def test_transcript_codec(world):
    report, _, _ = world.report()
    tr = report.proof
    data = tr.encode()
    assert len(data) == tr.encoded_size() == zkp.transcript_size("SPK")
    assert ProofTranscript.decode(data) == tr
    with pytest.raises(group.DecodeError):
        ProofTranscript.decode(data[:-1])
    with pytest.raises(group.DecodeError):
        ProofTranscript.decode(b"\x09" + data[1:])


def test_digit_signatures(small_setup):
    rp = small_setup.range_params
    pub = rp.public()
    assert all(zkp.check_digit(pub, d, pub.phi(d)) for d in range(1, pub.V + 1))
    assert not zkp.check_digit(pub, 2, pub.phi(3))
    with pytest.raises(RangeError):
        pub.phi(0)
    with pytest.raises(ValueError):
        zkp.gen_range_params(-1)
