"""Simulator state shared by every procedure: stations, sessions, the event
engine, the trace, and stored measurements."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..feedback import FeedbackPayload, FullCsi, encode_diff, encode_partial, encode_tcir
from ..quantization import (Cfr, quantize_fractional, quantize_legacy, quantize_pow2,
                            quantize_simplified)
from .engine import Engine
from .frames import BROADCAST, SUB7_AIRTIME, AirtimeModel, Frame, Trace, TraceEvent, fmt_value
from .session import (ProtocolError, SensingSession, SetupAttributes, SetupRefused,
                      SetupTerminated, Sta, MeasurementSetup)

_QUANTIZERS = {"legacy": quantize_legacy, "simplified": quantize_simplified,
               "pow2": quantize_pow2, "fractional": quantize_fractional}


def csi_variation(prev: Cfr, cur: Cfr) -> float:
    """``1 - |<prev, cur>| / (|prev| |cur|)``; 1 when either norm is zero."""
    a, b = np.ravel(prev.h), np.ravel(cur.h)
    if a.shape != b.shape:
        raise ValueError("CSI shapes differ")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 1.0
    return float(min(1.0, max(0.0, 1.0 - abs(np.vdot(a, b)) / (na * nb))))


def select_reporters(variations: dict, thresholds: dict) -> list:
    """Responders whose variation reaches their own threshold, in input order."""
    return [r for r, v in variations.items() if v >= thresholds[r]]


@dataclass
class LossModel:
    """Bernoulli frame loss with ``p = 1 / (1 + exp((snr - midpoint) / slope))``."""

    snr_db: callable  # (src, dst) -> dB
    rng: np.random.Generator
    midpoint_db: float = 3.0
    slope_db: float = 1.0

    def p_loss(self, src, dst) -> float:
        return 1.0 / (1.0 + math.exp((self.snr_db(src, dst) - self.midpoint_db) / self.slope_db))

    def lost(self, src, dst) -> bool:
        return bool(self.rng.random() < self.p_loss(src, dst))


def _flat_measure(tx, rx, t):
    return Cfr(np.ones(16, complex))


@dataclass
class Measurement:
    cfr: Cfr
    event_id: int
    instance_id: int


class Simulator:
    def __init__(self, stas, sifs_ns: int = 16_000, airtime: AirtimeModel = SUB7_AIRTIME,
                 measure=None, loss: LossModel | None = None, positions=None):
        self.stas = {}
        for s in stas:
            if s.id in self.stas:
                raise ValueError(f"duplicate STA id {s.id}")
            self.stas[s.id] = s
        self.sifs_ns = int(sifs_ns)
        self.airtime = airtime
        self.measure_fn = measure or _flat_measure
        self.loss = loss
        self.positions = dict(positions or {})
        self.engine = Engine()
        self.trace = Trace()
        self.sessions = []
        self.measurements = {}  # (session key, setup id, measurer) -> {instance: Measurement}
        self._next_id = 1
        self.payload_log = []  # encoded FeedbackPayload bytes, in report order

    # -- plumbing ----------------------------------------------------------------

    def sta(self, sta_id) -> Sta:
        try:
            return self.stas[sta_id]
        except KeyError:
            raise ProtocolError(f"unknown STA {sta_id}") from None

    def log(self, src, dst, kind, fields=None, duration=0) -> TraceEvent:
        pairs = tuple((k, fmt_value(v)) for k, v in (fields or {}).items())
        ev = TraceEvent(self._next_id, self.engine.now, src, dst, kind, pairs, int(duration))
        self._next_id += 1
        self.trace.append(ev)
        return ev

    def emit(self, frames):
        """Put frames on the air together; resumes when the longest one ends."""
        evs = []
        for f in frames:
            fields = dict(f.fields)
            if f.kind == "Ndp":
                fields["min"] = int(f.min_length)
            evs.append(self.log(f.src, f.dst, f.kind, fields, self.airtime.duration(f)))
        yield max(e.duration_ns for e in evs)
        return evs

    def send(self, kind, src, dst, payload_bits=0, min_length=False, **fields):
        evs = yield from self.emit([Frame(kind, src, dst, fields, payload_bits, min_length)])
        return evs[0]

    def sifs(self):
        yield self.sifs_ns

    def refuse(self, src, reason, exc=ProtocolError, **fields):
        self.log(src, src, "Refused", {**fields, "reason": reason})
        raise exc(reason)

    def call(self, proc, at_ns: int | None = None):
        """Run one procedure to completion; returns (result, trace slice)."""
        start = len(self.trace)
        t0 = self.engine.now + (self.sifs_ns if self.trace.events else 0)
        if at_ns is not None:
            if at_ns < self.engine.now:
                raise ValueError("procedure start lies in the past")
            t0 = int(at_ns)
        box = {}

        def wrap():
            box["v"] = yield from proc
        self.engine.spawn(wrap(), at=t0)
        self.engine.run()
        return box.get("v"), self.trace.since(start)

    def delivered(self, src, dst) -> bool:
        return self.loss is None or not self.loss.lost(src, dst)

    # -- measurements --------------------------------------------------------------

    def record(self, measurer, tx, rx, ref: TraceEvent, setups, t_ns=None) -> TraceEvent:
        """Measure the tx→rx channel at the start of ``ref`` and file it per setup."""
        t = (ref.time_ns if t_ns is None else t_ns) * 1e-9
        cfr = self.measure_fn(tx, rx, t)
        insts = [s.next_instance - 1 for s in setups]
        ev = self.log(measurer, measurer, "Measure",
                      {"link": f"{tx}>{rx}", "ref": ref.id,
                       "setup": [s.setup_id for s in setups], "inst": insts})
        for s, inst in zip(setups, insts):
            self.measurements.setdefault(self._mkey(s, measurer), {})[inst] = Measurement(cfr, ev.id, inst)
        return ev

    @staticmethod
    def _mkey(setup, by):
        return (setup.session.session_key, setup.setup_id, by)

    def measurement(self, setup, inst, by=None):
        """What ``by`` (default: the setup's responder) measured in an instance."""
        return self.measurements.get(self._mkey(setup, by or setup.responder), {}).get(inst)

    def previous_measurement(self, setup, inst, by=None):
        store = self.measurements.get(self._mkey(setup, by or setup.responder), {})
        earlier = [k for k in store if k < inst]
        return store[max(earlier)] if earlier else None

    def encode_report(self, setup, m: Measurement) -> FeedbackPayload:
        a = setup.attributes
        H = m.cfr
        if a.report_type == "full":
            body = FullCsi(_QUANTIZERS[a.quantizer](H, n_b=a.n_b))
        elif a.report_type == "tcir":
            body = encode_tcir(H, min(a.tcir_taps, H.n_subcarriers), a.n_b)
        elif a.report_type == "diff":
            body = encode_diff(H, a.n_b, max(2, a.n_b // 2))
        elif a.report_type == "partial_amplitude":
            body = encode_partial(H, "amplitude", a.n_b)
        elif a.report_type == "partial_phase":
            body = encode_partial(H, "phase", a.n_b)
        else:
            raise ProtocolError("setup carries no report type")
        return FeedbackPayload(body, setup.setup_id, m.instance_id)

    def report_fields(self, items):
        """Fields and bit count for a Report carrying ``(setup, Measurement)`` items."""
        payloads = [self.encode_report(s, m) for s, m in items]
        blobs = [p.to_bytes() for p in payloads]
        fields = {"setup": [s.setup_id for s, _ in items], "inst": [m.instance_id for _, m in items],
                  "payload": [f"{p.kind}:{len(b)}B" for p, b in zip(payloads, blobs)],
                  "meas": [m.event_id for _, m in items]}
        self.payload_log.extend(blobs)
        return fields, 8 * sum(len(b) for b in blobs), payloads

    # -- lifecycle -----------------------------------------------------------------

    def _session_key(self, ini: Sta, res: Sta):
        party = res if ini.is_ap or not res.is_ap else ini
        if ini.id == res.id:
            party = ini
        return (party.mac_addr, party.aid_or_uid)

    def live_session(self, initiator, responder):
        for s in self.sessions:
            if s.state != "Terminated" and s.initiator == initiator and s.responder == responder:
                return s
        return None

    def _setup_session(self, initiator, responder, dmg=False):
        ini, res = self.sta(initiator), self.sta(responder)
        self_session = ini.id == res.id
        if not self_session:
            yield from self.send("SessionSetupReq", ini.id, res.id, dmg=int(dmg))
        reason = None
        if self_session and not dmg:
            reason = "self-session-needs-dmg"
        for s in {ini.id: ini, res.id: res}.values():
            if reason is None and not s.capabilities.wlan_sensing:
                reason = f"{s.id}-no-wlan-sensing"
            if reason is None and dmg and not s.capabilities.dmg_sensing:
                reason = f"{s.id}-no-dmg-sensing"
        key = self._session_key(ini, res)
        if reason is None and any(s.session_key == key and s.state != "Terminated" for s in self.sessions):
            reason = "duplicate-session-key"
        if not self_session:
            yield from self.sifs()
            yield from self.send("SessionSetupResp", res.id, ini.id,
                                 status="refused" if reason else "ok",
                                 **({"reason": reason} if reason else {"key": key[1]}))
        if reason:
            raise SetupRefused(reason)
        sess = SensingSession(key, ini.id, res.id, state="Active")
        self.sessions.append(sess)
        if self_session:
            self.log(ini.id, ini.id, "State", {"session": key[1], "state": "Active"})
        return sess

    def setup_session(self, initiator, responder, dmg=False) -> SensingSession:
        return self.call(self._setup_session(initiator, responder, dmg))[0]

    def _setup_measurement(self, session, attributes: SetupAttributes):
        if session.state != "Active":
            self.refuse(session.initiator, "session-terminated", SetupTerminated, session=session.key_label)
        live = [i for i, s in session.setups.items() if s.state == "Active"]
        sid = max(live, default=0) + 1
        a = attributes
        fields = {"setup": sid, "roles": sorted(a.responder_roles), "report": a.report_type,
                  "reporting": a.reporting}
        if a.threshold is not None:
            fields["threshold"] = float(a.threshold)
        if session.initiator != session.responder:
            yield from self.send("MeasSetupReq", session.initiator, session.responder, **fields)
            yield from self.sifs()
            yield from self.send("MeasSetupResp", session.responder, session.initiator,
                                 setup=sid, status="ok")
        else:
            self.log(session.initiator, session.initiator, "State", {"setup": sid, "state": "Active"})
        setup = MeasurementSetup(sid, session, attributes)
        session.setups[sid] = setup
        return setup

    def setup_measurement(self, session, attributes: SetupAttributes | None = None) -> MeasurementSetup:
        return self.call(self._setup_measurement(session, attributes or SetupAttributes()))[0]

    def _terminate(self, target):
        if isinstance(target, MeasurementSetup):
            s = target
            if s.state == "Terminated":
                self.log(s.initiator, s.initiator, "NoOp", {"setup": s.setup_id, "reason": "already-terminated"})
                return
            if s.initiator != s.responder:
                yield from self.send("TerminateSetup", s.initiator, s.responder, setup=s.setup_id)
            else:
                self.log(s.initiator, s.initiator, "State", {"setup": s.setup_id, "state": "Terminated"})
            s.state = "Terminated"
            s.session.setups.pop(s.setup_id, None)
            return
        sess = target
        if sess.state == "Terminated":
            self.log(sess.initiator, sess.initiator, "NoOp",
                     {"session": sess.key_label, "reason": "already-terminated"})
            return
        if sess.initiator != sess.responder:
            yield from self.send("TerminateSession", sess.initiator, sess.responder, session=sess.key_label)
        else:
            self.log(sess.initiator, sess.initiator, "State", {"session": sess.key_label, "state": "Terminated"})
        for s in sess.setups.values():
            s.state = "Terminated"
        sess.setups.clear()
        sess.state = "Terminated"

    def terminate(self, target) -> Trace:
        return self.call(self._terminate(target))[1]

    def check_live(self, setups):
        for s in setups:
            if not s.live:
                self.refuse(s.initiator, "setup-terminated", SetupTerminated, setup=s.setup_id)

    @staticmethod
    def start_instances(setups):
        for s in setups:
            s.next_instance += 1

    def broadcast(self):
        return BROADCAST
