"""Deterministic VoIP testbed: two signaling stacks, a network emulator,
an E-model scorer, and a delay-sweep experiment harness."""

__version__ = "0.1.0"

from .frames import (
    DecodeError,
    EncodeError,
    FrameError,
    FrameKind,
    FullFrame,
    Malformed,
    MiniFrame,
    NotFullFrame,
    NotMiniFrame,
    RswMessage,
    RtpPacket,
    Signal,
    TooShort,
    UnknownFrameType,
    UnknownSignal,
    UnknownVerb,
    Verb,
    decode_full,
    decode_mini,
    decode_rsw,
    decode_rtp,
    encode_full,
    encode_mini,
    encode_rsw,
    encode_rtp,
)
from .iax import (
    CalleePolicy,
    CallState,
    IaxCallState,
    IaxEndpoint,
    IaxError,
    MediaRxState,
    NoFreeCallNumbers,
    NotInCall,
    ProtocolViolation,
    StaleFrame,
    receive_media,
)
from .rsw import (
    ConferencePhase,
    ConferenceState,
    EmptyInviteeList,
    EmptyMediaDescription,
    Member,
    MemberStatus,
    NotChairman,
    NotInvited,
    ObserverCannotSend,
    ConferenceNotActive,
    ResponsePolicy,
    Role,
    RswError,
    RswInvitee,
    RtpTxState,
    UnknownConference,
    create_conference,
    new_rtp_tx,
    send_media_rtp,
    server_route,
)
from .netsim import (
    EmptyPacket,
    EventKind,
    HorizonExceeded,
    LinkConfig,
    SimEvent,
    Simulator,
    serialization_ms,
)
from .qos import (
    EModelError,
    EModelParams,
    MOS_LABELS,
    NegativeDelay,
    QosReport,
    idd,
    mos_label,
    r_to_mos,
    score_run,
)
from .scenarios import MediaStats, TraceLog, run_iax_call, run_rsw_conference
from .experiment import (
    CSV_HEADER,
    MissingProtocol,
    SweepConfig,
    SweepResult,
    compare_report,
    emit_csv,
    emit_trace,
    run_scenario,
    run_sweep,
    sweep_points,
)

__all__ = [name for name in dir() if not name.startswith("_")]
