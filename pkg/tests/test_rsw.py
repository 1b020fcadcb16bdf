"""Conference control tests: invitations, membership, chairman authority, RTP."""

from __future__ import annotations

import random

import pytest

from voipsim import (
    ConferenceNotActive,
    ConferencePhase,
    EmptyInviteeList,
    EmptyMediaDescription,
    MemberStatus,
    NotChairman,
    NotInvited,
    ObserverCannotSend,
    ResponsePolicy,
    Role,
    RswError,
    RswInvitee,
    RswMessage,
    RtpTxState,
    UnknownConference,
    Verb,
    create_conference,
    decode_rsw,
    decode_rtp,
    encode_rsw,
    encode_rtp,
    new_rtp_tx,
    send_media_rtp,
    server_route,
)

MEDIA = "codec=pcm;frame_ms=20"


def over_wire(msg: RswMessage) -> RswMessage:
    """Round-trip a control message through the text codec."""
    return decode_rsw(encode_rsw(msg))


def fresh_conference(invitees=("p1", "p2"), observers=(), conf_id=7):
    """CREATE routed through the server; returns (fan-out, server's state)."""
    msg, _ = create_conference(
        "chair", list(invitees), MEDIA, conf_id=conf_id, observers=list(observers)
    )
    return server_route(over_wire(msg), None)


# -- creating -----------------------------------------------------------------


def test_create_message_shape():
    msg, conf = create_conference("chair", ["p1"], MEDIA, conf_id=7)
    assert msg == RswMessage(Verb.CREATE, 7, "chair", "p1", MEDIA)
    assert over_wire(msg) == msg
    assert conf.chairman == "chair"
    assert conf.phase is ConferencePhase.CREATING
    assert conf.members["chair"].role is Role.CHAIRMAN
    assert conf.members["chair"].status is MemberStatus.JOINED
    assert conf.members["p1"].role is Role.PARTICIPANT
    assert conf.members["p1"].status is MemberStatus.INVITED


def test_create_lists_observers_with_tag():
    msg, conf = create_conference("chair", ["p1", "p2"], MEDIA, observers=["watch"])
    assert msg.recipient == "p1,p2,watch:observer"
    assert conf.members["watch"].role is Role.PASSIVE_OBSERVER
    assert conf.members["watch"].status is MemberStatus.INVITED
    assert over_wire(msg) == msg


def test_create_with_observers_only_is_allowed():
    msg, conf = create_conference("chair", [], MEDIA, observers=["watch"])
    assert msg.recipient == "watch:observer"
    assert set(conf.members) == {"chair", "watch"}


def test_create_requires_someone_to_invite():
    with pytest.raises(EmptyInviteeList):
        create_conference("chair", [], MEDIA)


def test_create_requires_media_description():
    with pytest.raises(EmptyMediaDescription):
        create_conference("chair", ["p1"], "")


@pytest.mark.parametrize("bad", ["", "a b", "a,b", "a:b", "a\tb"])
def test_create_rejects_malformed_member_ids(bad):
    with pytest.raises(ValueError):
        create_conference("chair", [bad], MEDIA)
    with pytest.raises(ValueError):
        create_conference(bad, ["p1"], MEDIA)


@pytest.mark.parametrize(
    "invitees,observers",
    [(["p1", "p1"], []), (["p1"], ["p1"]), (["chair"], [])],
)
def test_create_rejects_duplicate_members(invitees, observers):
    with pytest.raises(ValueError):
        create_conference("chair", invitees, MEDIA, observers=observers)


# -- server: CREATE fan-out ------------------------------------------------------


def test_server_fans_out_one_invitation_per_invitee():
    out, conf = fresh_conference(invitees=("p1", "p2"), observers=("watch",))
    invitations, ack = out[:-1], out[-1]
    assert [m.verb for m in invitations] == [Verb.CREATE] * 3
    assert [m.recipient for m in invitations] == ["p1", "p2", "watch"]
    assert all(m.sender == "server" for m in invitations)
    assert all(m.body == MEDIA for m in invitations)
    assert ack == RswMessage(Verb.ACK, 7, "server", "chair")
    assert conf.phase is ConferencePhase.CREATING
    assert conf.members["watch"].role is Role.PASSIVE_OBSERVER
    assert all(over_wire(m) == m for m in out)


def test_server_refuses_second_create():
    _, conf = fresh_conference()
    msg, _ = create_conference("chair", ["p9"], MEDIA, conf_id=7)
    with pytest.raises(RswError):
        server_route(msg, conf)


@pytest.mark.parametrize("spec", ["p1,:observer", "p1:boss", "p1,p1"])
def test_server_rejects_bad_invitee_specs(spec):
    msg = RswMessage(Verb.CREATE, 7, "chair", spec, MEDIA)
    with pytest.raises(RswError):
        server_route(msg, None)


# -- server: invitation responses -------------------------------------------------


def test_join_activates_and_relays_to_chairman():
    _, conf = fresh_conference()
    out, conf = server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), conf)
    assert conf.members["p1"].status is MemberStatus.JOINED
    assert conf.phase is ConferencePhase.ACTIVE
    assert out == [
        RswMessage(Verb.ACK, 7, "server", "p1"),
        RswMessage(Verb.JOIN, 7, "p1", "chair"),
    ]
    assert all(over_wire(m) == m for m in out)


@pytest.mark.parametrize(
    "verb,status",
    [(Verb.REJECT, MemberStatus.REJECTED), (Verb.BUSY, MemberStatus.BUSY)],
)
def test_decline_responses_do_not_activate(verb, status):
    _, conf = fresh_conference()
    out, conf = server_route(RswMessage(verb, 7, "p1", "server"), conf)
    assert conf.members["p1"].status is status
    assert conf.phase is ConferencePhase.CREATING  # only a JOIN activates
    assert out == [
        RswMessage(Verb.ACK, 7, "server", "p1"),
        RswMessage(verb, 7, "p1", "chair"),
    ]


def test_second_join_keeps_conference_active():
    _, conf = fresh_conference()
    _, conf = server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), conf)
    _, conf = server_route(RswMessage(Verb.JOIN, 7, "p2", "server"), conf)
    assert conf.phase is ConferencePhase.ACTIVE
    assert conf.members["p2"].status is MemberStatus.JOINED


def test_stranger_cannot_respond():
    _, conf = fresh_conference()
    with pytest.raises(NotInvited):
        server_route(RswMessage(Verb.JOIN, 7, "gatecrasher", "server"), conf)


def test_invitation_is_single_use_at_server():
    _, conf = fresh_conference()
    _, conf = server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), conf)
    with pytest.raises(NotInvited):
        server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), conf)
    with pytest.raises(NotInvited):
        server_route(RswMessage(Verb.REJECT, 7, "p1", "server"), conf)


def test_status_never_moves_backwards():
    _, conf = fresh_conference()
    _, conf = server_route(RswMessage(Verb.REJECT, 7, "p1", "server"), conf)
    with pytest.raises(NotInvited):  # a decline cannot become a join
        server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), conf)
    assert conf.members["p1"].status is MemberStatus.REJECTED


# -- server: leaving ---------------------------------------------------------------


def test_leave_after_join():
    _, conf = fresh_conference()
    _, conf = server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), conf)
    out, conf = server_route(RswMessage(Verb.LEAVE, 7, "p1", "server"), conf)
    assert out == [RswMessage(Verb.ACK, 7, "server", "p1")]
    assert conf.members["p1"].status is MemberStatus.LEFT
    assert conf.phase is ConferencePhase.ACTIVE  # the room outlives one member


@pytest.mark.parametrize("who", ["p2", "gatecrasher"])
def test_leave_requires_joined_membership(who):
    _, conf = fresh_conference()
    _, conf = server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), conf)
    with pytest.raises(NotInvited):
        server_route(RswMessage(Verb.LEAVE, 7, who, "server"), conf)


def test_leave_then_rejoin_is_refused():
    _, conf = fresh_conference()
    _, conf = server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), conf)
    _, conf = server_route(RswMessage(Verb.LEAVE, 7, "p1", "server"), conf)
    with pytest.raises(NotInvited):
        server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), conf)


# -- server: ending ------------------------------------------------------------------


def test_chairman_end_notifies_joined_members_only():
    _, conf = fresh_conference()
    _, conf = server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), conf)
    _, conf = server_route(RswMessage(Verb.REJECT, 7, "p2", "server"), conf)
    out, conf = server_route(RswMessage(Verb.END, 7, "chair", "server"), conf)
    assert conf.phase is ConferencePhase.ENDED
    assert out == [
        RswMessage(Verb.ACK, 7, "server", "chair"),
        RswMessage(Verb.END, 7, "server", "p1"),  # p2 declined, gets nothing
    ]
    assert all(over_wire(m) == m for m in out)


def test_only_chairman_may_end():
    _, conf = fresh_conference()
    _, conf = server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), conf)
    for rogue in ("p1", "p2", "gatecrasher"):
        with pytest.raises(NotChairman):
            server_route(RswMessage(Verb.END, 7, rogue, "server"), conf)
        assert conf.phase is ConferencePhase.ACTIVE


def test_nothing_is_routable_after_end():
    _, conf = fresh_conference()
    _, conf = server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), conf)
    _, conf = server_route(RswMessage(Verb.END, 7, "chair", "server"), conf)
    for verb in (Verb.JOIN, Verb.LEAVE, Verb.END, Verb.ACK):
        with pytest.raises(RswError):
            server_route(RswMessage(verb, 7, "p2", "server"), conf)


def test_unknown_conference_is_refused():
    with pytest.raises(UnknownConference):
        server_route(RswMessage(Verb.JOIN, 7, "p1", "server"), None)
    _, conf = fresh_conference(conf_id=7)
    with pytest.raises(UnknownConference):
        server_route(RswMessage(Verb.JOIN, 8, "p1", "server"), conf)


def test_stray_ack_is_ignored():
    _, conf = fresh_conference()
    out, conf2 = server_route(RswMessage(Verb.ACK, 7, "p1", "server"), conf)
    assert out == []
    assert conf2 is conf
    assert conf.phase is ConferencePhase.CREATING


# -- invitee side -----------------------------------------------------------------


def test_invitee_accepts_with_join_to_server():
    out, _ = fresh_conference(invitees=("p1",))
    invitee = RswInvitee("p1")
    invitation = invitee.receive_invitation(out[0])
    assert invitation.conf_id == 7
    assert invitation.media_desc == MEDIA
    assert invitation.inviter == "server"
    reply = invitee.respond(ResponsePolicy.ACCEPT)
    assert reply == RswMessage(Verb.JOIN, 7, "p1", "server")


@pytest.mark.parametrize(
    "policy,verb",
    [(ResponsePolicy.REJECT, Verb.REJECT), (ResponsePolicy.BUSY, Verb.BUSY)],
)
def test_invitee_decline_responses(policy, verb):
    out, _ = fresh_conference(invitees=("p1",))
    invitee = RswInvitee("p1")
    invitee.receive_invitation(out[0])
    assert invitee.respond(policy) == RswMessage(verb, 7, "p1", "server")


def test_invitee_response_is_single_use():
    out, _ = fresh_conference(invitees=("p1",))
    invitee = RswInvitee("p1")
    invitee.receive_invitation(out[0])
    invitee.respond(ResponsePolicy.ACCEPT)
    with pytest.raises(NotInvited):
        invitee.respond(ResponsePolicy.ACCEPT)


def test_invitee_cannot_respond_uninvited():
    with pytest.raises(NotInvited):
        RswInvitee("p1").respond(ResponsePolicy.ACCEPT)


def test_invitee_rejects_non_invitations():
    with pytest.raises(ValueError):
        RswInvitee("p1").receive_invitation(RswMessage(Verb.ACK, 7, "server", "p1"))


def test_invitee_id_is_validated():
    with pytest.raises(ValueError):
        RswInvitee("bad id")


# -- media ---------------------------------------------------------------------------


def test_rtp_stream_counters_stride():
    tx = RtpTxState(seq=10, timestamp=1000, ssrc=0xABCD, samples_per_frame=160)
    pkts = [
        send_media_rtp(tx, b"x", role=Role.PARTICIPANT, phase=ConferencePhase.ACTIVE)
        for _ in range(3)
    ]
    assert [p.seq for p in pkts] == [10, 11, 12]
    assert [p.timestamp for p in pkts] == [1000, 1160, 1320]
    assert all(p.ssrc == 0xABCD for p in pkts)


def test_rtp_counters_wrap():
    tx = RtpTxState(seq=0xFFFE, timestamp=0xFFFFFF60, ssrc=1, samples_per_frame=160)
    seqs, stamps = [], []
    for _ in range(4):
        p = send_media_rtp(tx, b"", role=Role.CHAIRMAN, phase=ConferencePhase.ACTIVE)
        seqs.append(p.seq)
        stamps.append(p.timestamp)
    assert seqs == [0xFFFE, 0xFFFF, 0x0000, 0x0001]
    assert stamps == [0xFFFFFF60, 0x00000000, 0x000000A0, 0x00000140]


def test_new_rtp_tx_is_seed_deterministic():
    a = new_rtp_tx(random.Random(5), samples_per_frame=160)
    b = new_rtp_tx(random.Random(5), samples_per_frame=160)
    assert (a.seq, a.timestamp, a.ssrc) == (b.seq, b.timestamp, b.ssrc)
    assert 0 <= a.seq < 1 << 16
    assert 0 <= a.timestamp < 1 << 32
    assert 0 <= a.ssrc < 1 << 32


def test_observers_cannot_send_media():
    tx = new_rtp_tx(random.Random(1))
    with pytest.raises(ObserverCannotSend):
        send_media_rtp(tx, b"x", role=Role.PASSIVE_OBSERVER, phase=ConferencePhase.ACTIVE)


@pytest.mark.parametrize("phase", [ConferencePhase.CREATING, ConferencePhase.ENDED])
def test_media_requires_active_conference(phase):
    tx = new_rtp_tx(random.Random(1))
    with pytest.raises(ConferenceNotActive):
        send_media_rtp(tx, b"x", role=Role.CHAIRMAN, phase=phase)


def test_rtp_media_round_trips_the_wire():
    tx = RtpTxState(seq=1, timestamp=2, ssrc=3, samples_per_frame=160)
    pkt = send_media_rtp(tx, b"voice!", role=Role.CHAIRMAN, phase=ConferencePhase.ACTIVE)
    wire = encode_rtp(pkt)
    assert wire[0] == 0x80  # version 2, nothing else in byte 0
    assert decode_rtp(wire) == pkt


# -- whole lifecycle over the wire -----------------------------------------------------


def test_full_conference_lifecycle():
    msg, _ = create_conference("chair", ["p1", "p2"], MEDIA, conf_id=3, observers=["watch"])
    out, conf = server_route(over_wire(msg), None)

    invitees = {mid: RswInvitee(mid) for mid in ("p1", "p2", "watch")}
    answers = {"p1": ResponsePolicy.ACCEPT, "p2": ResponsePolicy.BUSY, "watch": ResponsePolicy.ACCEPT}
    relayed = []
    for invitation in out[:-1]:
        invitee = invitees[invitation.recipient]
        invitee.receive_invitation(over_wire(invitation))
        reply = invitee.respond(answers[invitation.recipient])
        replies, conf = server_route(over_wire(reply), conf)
        relayed.extend(m for m in replies if m.recipient == "chair")

    assert conf.phase is ConferencePhase.ACTIVE
    assert {m.verb for m in relayed} == {Verb.JOIN, Verb.BUSY}
    assert conf.members["p1"].status is MemberStatus.JOINED
    assert conf.members["p2"].status is MemberStatus.BUSY
    assert conf.members["watch"].status is MemberStatus.JOINED

    tx = new_rtp_tx(random.Random(9))
    pkt = send_media_rtp(tx, b"\x00" * 160, role=Role.CHAIRMAN, phase=conf.phase)
    assert decode_rtp(encode_rtp(pkt)) == pkt

    out, conf = server_route(over_wire(RswMessage(Verb.END, 3, "chair", "server")), conf)
    assert conf.phase is ConferencePhase.ENDED
    assert {m.recipient for m in out[1:]} == {"p1", "watch"}
    assert all(m.verb is Verb.END for m in out[1:])
