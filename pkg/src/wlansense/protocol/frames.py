"""Sensing frame kinds, their airtime, and the line-oriented trace format."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

BROADCAST = "*"

# required fields per frame kind
FRAME_KINDS = {
    "SessionSetupReq": (),
    "SessionSetupResp": ("status",),
    "MeasSetupReq": ("setup",),
    "MeasSetupResp": ("setup", "status"),
    "Poll": ("sta",),
    "PollResp": ("type",),
    "SensingSoundingTrigger": ("sta",),
    "SensingNdpa": ("sta",),
    "Ndp": ("dir",),
    "ReportTrigger": ("sta",),
    "Report": ("payload",),
    "CsiVariationReport": ("value",),
    "BrpTx": ("trn_p", "trn_m", "dmg_sensing_flag"),
    "BrpReport": ("payload",),
    "SensingRequest": (),
    "SensingResponse": ("status",),
    "SensingPpdu": (),
    "MultiStaticPpdu": ("sync", "pad", "trn_p", "trn_m"),
    "Beacon": ("sector",),
    "Ssw": ("sector",),
    "InfoReq": (),
    "InfoResp": ("directions", "location"),
    "SbpReq": (),
    "SbpResp": ("status",),
    "TerminateSetup": ("setup",),
    "TerminateSession": (),
}

# non-frame trace records
EVENT_KINDS = ("Measure", "Discard", "Refused", "NoOp", "State", "Lost", "Deliver")


def fmt_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.4f}"
    if isinstance(v, (list, tuple)):
        return ",".join(fmt_value(x) for x in v) if v else "-"
    return str(v)


@dataclass(frozen=True)
class Frame:
    kind: str
    src: str
    dst: str
    fields: dict = field(default_factory=dict)
    payload_bits: int = 0
    min_length: bool = False

    def __post_init__(self):
        if self.kind not in FRAME_KINDS:
            raise ValueError(f"unknown frame kind {self.kind!r}")
        missing = [k for k in FRAME_KINDS[self.kind] if k not in self.fields]
        if missing:
            raise ValueError(f"{self.kind} frame lacks fields {missing}")
        if self.kind == "BrpTx" and self.fields["dmg_sensing_flag"] not in (0, 1):
            raise ValueError("dmg_sensing_flag is a single bit")


@dataclass(frozen=True)
class AirtimeModel:
    """``duration = overhead[kind] + payload_bits / phy_rate`` in integer ns."""

    overhead_ns: dict
    phy_rate: float
    ndp_min_ns: int
    trn_subfield_ns: int = 0
    sync_field_ns: int = 0
    trn_unit_ns: int = 0

    def duration(self, frame: Frame) -> int:
        if frame.kind == "Ndp" and frame.min_length:
            return self.ndp_min_ns
        d = self.overhead_ns[frame.kind]
        if frame.kind in ("BrpTx", "MultiStaticPpdu"):
            d += (int(frame.fields["trn_p"]) + int(frame.fields["trn_m"])) * self.trn_subfield_ns
        if frame.kind == "MultiStaticPpdu":
            n_sync = len(frame.fields["sync"])
            d += n_sync * self.sync_field_ns + int(frame.fields["pad"])
        if frame.payload_bits:
            d += math.ceil(frame.payload_bits * 1e9 / self.phy_rate)
        return d


def _us(x):
    return int(round(x * 1000))


SUB7_AIRTIME = AirtimeModel(
    overhead_ns={
        "SessionSetupReq": _us(60), "SessionSetupResp": _us(60),
        "MeasSetupReq": _us(60), "MeasSetupResp": _us(60),
        "Poll": _us(52), "PollResp": _us(44),
        "SensingSoundingTrigger": _us(52), "SensingNdpa": _us(48), "Ndp": _us(56),
        "ReportTrigger": _us(52), "Report": _us(44), "CsiVariationReport": _us(44),
        "BrpTx": _us(60), "BrpReport": _us(60), "SensingRequest": _us(60),
        "SensingResponse": _us(60), "SensingPpdu": _us(56), "MultiStaticPpdu": _us(60),
        "Beacon": _us(80), "Ssw": _us(44), "InfoReq": _us(60), "InfoResp": _us(60),
        "SbpReq": _us(60), "SbpResp": _us(60), "TerminateSetup": _us(52),
        "TerminateSession": _us(52),
    },
    phy_rate=480e6,
    ndp_min_ns=_us(32),
)

# 60 GHz: TRN subfields of 256 chips, Sync fields of 1024 chips, TRN units of 5 subfields
_CHIP_NS = 1e9 / 1.76e9
DMG_TRN_SUBFIELD_CHIPS = 256
DMG_SYNC_CHIPS = 1024
DMG_TRN_UNIT_CHIPS = 5 * DMG_TRN_SUBFIELD_CHIPS

DMG_AIRTIME = AirtimeModel(
    overhead_ns={k: v // 10 for k, v in SUB7_AIRTIME.overhead_ns.items()},
    phy_rate=2.5e9,
    ndp_min_ns=_us(2),
    trn_subfield_ns=round(DMG_TRN_SUBFIELD_CHIPS * _CHIP_NS),
    sync_field_ns=round(DMG_SYNC_CHIPS * _CHIP_NS),
    trn_unit_ns=round(DMG_TRN_UNIT_CHIPS * _CHIP_NS),
)


def sync_padding_chips(n_sync: int) -> int:
    """Chips that pad ``n_sync`` Sync fields to a whole number of TRN units."""
    return (-n_sync * DMG_SYNC_CHIPS) % DMG_TRN_UNIT_CHIPS


@dataclass(frozen=True)
class TraceEvent:
    id: int
    time_ns: int
    src: str
    dst: str
    kind: str
    fields: tuple = ()  # ordered (key, value-string) pairs
    duration_ns: int = 0

    @property
    def is_frame(self) -> bool:
        return self.kind in FRAME_KINDS

    @property
    def end_ns(self) -> int:
        return self.time_ns + self.duration_ns

    def get(self, key, default=None):
        for k, v in self.fields:
            if k == key:
                return v
        return default

    def line(self) -> str:
        t = f"{self.time_ns // 1000}.{self.time_ns % 1000:03d}"
        body = " ".join([f"id={self.id}"] + [f"{k}={v}" for k, v in self.fields])
        if self.is_frame:
            body += f" dur={self.duration_ns}"
        return f"{t} | {self.src}→{self.dst} | {self.kind} | {body}"


def parse_line(line: str) -> TraceEvent:
    t, link, kind, body = (p.strip() for p in line.split(" | ", 3))
    src, dst = link.split("→")
    us, frac = t.split(".")
    items = [kv.split("=", 1) for kv in body.split()]
    d = dict(items)
    ev_id = int(d.pop("id"))
    dur = int(d.pop("dur", 0))
    fields = tuple((k, v) for k, v in items if k not in ("id", "dur"))
    return TraceEvent(ev_id, int(us) * 1000 + int(frac), src, dst, kind, fields, dur)


class Trace:
    def __init__(self, events=None):
        self.events = list(events or [])

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def append(self, ev: TraceEvent):
        if self.events and ev.time_ns < self.events[-1].time_ns:
            raise AssertionError("trace time went backwards")
        self.events.append(ev)

    def since(self, start: int) -> "Trace":
        return Trace(self.events[start:])

    def frames(self, kind=None):
        return [e for e in self.events if e.is_frame and (kind is None or e.kind == kind)]

    def kinds(self):
        return [e.kind for e in self.events]

    def text(self) -> str:
        return "".join(e.line() + "\n" for e in self.events)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.text())

    @classmethod
    def parse(cls, text: str) -> "Trace":
        return cls(parse_line(l) for l in text.splitlines() if l.strip())
