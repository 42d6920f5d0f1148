"""60 GHz sensing instances: monostatic, bistatic, multistatic, the two
coordinated variants, and passive sensing off beacons or SSW frames."""
from __future__ import annotations

import numpy as np

from ..sequences import ChipSequence, aperiodic_xcorr, build_sync, concat
from .frames import BROADCAST, DMG_SYNC_CHIPS, Frame, Trace, sync_padding_chips
from .session import ProtocolError
from .simulator import Simulator

DMG_MODES = ("Monostatic", "Bistatic", "Multistatic", "CoordMonostatic", "CoordBistatic", "Passive")
MAX_SYNC_ROWS = 8
SBIFS_NS = 1_000


def multistatic_sync_section(rows) -> ChipSequence:
    """Sync fields for rows ``1..n`` back to back, zero-padded to a TRN-unit multiple."""
    seqs = [build_sync(r) for r in rows]
    pad = sync_padding_chips(len(seqs))
    body = concat(seqs).chips.astype(complex)
    return ChipSequence(np.concatenate([body, np.zeros(pad)]), seqs[0].chip_rate)


def locate_sync(section: ChipSequence, row: int):
    """Correlate a received Sync section against ``build_sync(row)``.

    Returns the slot index of the peak and whether it is unique (no other
    slot-aligned lag reaches the same magnitude).
    """
    ref = build_sync(row)
    c = np.abs(aperiodic_xcorr(section, ref))
    lags = np.arange(-(len(ref) - 1), len(section))
    aligned = (lags >= 0) & (lags % DMG_SYNC_CHIPS == 0) & (lags + len(ref) <= len(section))
    vals = c[aligned]
    k = int(np.argmax(vals))
    unique = int(np.sum(vals == vals[k])) == 1
    return int(lags[aligned][k] // DMG_SYNC_CHIPS), unique, float(vals[k])


def _dmg_check(sim, setups, mode):
    for s in setups:
        for sid in {s.initiator, s.responder}:
            if not sim.sta(sid).capabilities.dmg_sensing:
                sim.refuse(s.initiator, "mode-capability-mismatch", mode=mode, sta=sid)


def _monostatic(sim, setups):
    for s in setups:
        me = s.initiator
        if not sim.sta(me).capabilities.monostatic:
            sim.refuse(me, "mode-capability-mismatch", mode="Monostatic", sta=me)
    sim.start_instances(setups)
    for i, s in enumerate(setups):
        if i:
            yield from sim.sifs()
        me = s.initiator
        ppdu = yield from sim.send("SensingPpdu", me, me, setup=s.setup_id, inst=s.next_instance - 1)
        sim.record(me, me, me, ppdu, [s])
        for other in sorted(sim.stas):
            if other != me and sim.sta(other).capabilities.dmg_sensing:
                sim.log(other, other, "Discard", {"ref": ppdu.id, "reason": "not-addressed"})


def _bistatic_one(sim, s, trn_p, trn_m, n_brp, report=True):
    ini, res = s.initiator, s.responder
    roles = s.attributes.responder_roles
    inst = s.next_instance - 1
    if roles == frozenset({"receiver"}):
        # transmit initiator: BRP+TRN toward the responder, responder measures, BRP report back
        for k in range(n_brp):
            if k:
                yield from sim.sifs()
            brp = yield from sim.send("BrpTx", ini, res, trn_p=trn_p, trn_m=trn_m, dmg_sensing_flag=1,
                                      setup=s.setup_id, inst=inst)
            sim.record(res, ini, res, brp, [s])
        if report and s.attributes.reporting != "none":
            yield from sim.sifs()
            fields, bits, _ = sim.report_fields([(s, sim.measurement(s, inst))])
            yield from sim.send("BrpReport", res, ini, bits, **fields)
    elif roles == frozenset({"transmitter"}):
        # receive initiator: a BRP request, then the responder's BRP+TRN; no reporting phase
        yield from sim.send("BrpTx", ini, res, trn_p=0, trn_m=0, dmg_sensing_flag=1,
                            setup=s.setup_id, inst=inst)
        for k in range(n_brp):
            yield from sim.sifs()
            brp = yield from sim.send("BrpTx", res, ini, trn_p=trn_p, trn_m=trn_m, dmg_sensing_flag=1,
                                      setup=s.setup_id, inst=inst)
            sim.record(ini, res, ini, brp, [s])
    else:
        sim.refuse(ini, "bistatic-needs-one-responder-role", setup=s.setup_id)


def _bistatic(sim, setups, trn_p, trn_m, n_brp):
    if len(setups) != 1:
        raise ProtocolError("bistatic sensing pairs one initiator with one responder")
    sim.start_instances(setups)
    yield from _bistatic_one(sim, setups[0], trn_p, trn_m, n_brp)


def _handshake(sim, setups, **extra):
    for i, s in enumerate(setups):
        if i:
            yield from sim.sifs()
        fields = {k: v[i] if isinstance(v, list) else v for k, v in extra.items()}
        yield from sim.send("SensingRequest", s.initiator, s.responder, setup=s.setup_id,
                            inst=s.next_instance - 1, **fields)
        yield from sim.sifs()
        yield from sim.send("SensingResponse", s.responder, s.initiator, setup=s.setup_id, status="ok")


def _polled_reports(sim, setups, kind="Report"):
    for s in setups:
        m = sim.measurement(s, s.next_instance - 1)
        if m is None or s.attributes.reporting == "none":
            continue
        yield from sim.sifs()
        yield from sim.send("ReportTrigger", s.initiator, s.responder, sta=[s.responder])
        yield from sim.sifs()
        fields, bits, _ = sim.report_fields([(s, m)])
        yield from sim.send(kind, s.responder, s.initiator, bits, **fields)


def _multistatic(sim, setups, trn_p, trn_m):
    if len(setups) > MAX_SYNC_ROWS:
        sim.refuse(setups[0].initiator, "too-many-responders", n=len(setups), max=MAX_SYNC_ROWS)
    ini = setups[0].initiator
    if any(s.initiator != ini for s in setups):
        raise ProtocolError("multistatic setups share one initiator")
    sim.start_instances(setups)
    yield from _handshake(sim, setups)
    yield from sim.sifs()
    rows = list(range(1, len(setups) + 1))
    assign = [f"{s.responder}:{r}" for s, r in zip(setups, rows)]
    pad_chips = sync_padding_chips(len(rows))
    pad_ns = round(pad_chips * 1e9 / 1.76e9)
    section = multistatic_sync_section(rows)
    ppdu = yield from sim.send("MultiStaticPpdu", ini, BROADCAST, sync=assign, pad=pad_ns,
                               trn_p=trn_p * len(rows), trn_m=trn_m)
    for s, r in zip(setups, rows):
        slot, unique, peak = locate_sync(section, r)
        sim.log(s.responder, s.responder, "State",
                {"sync_row": r, "slot": slot, "unique": int(unique), "peak": int(round(peak))})
        sim.record(s.responder, ini, s.responder, ppdu, [s])
    yield from _polled_reports(sim, setups)


def _coord_monostatic(sim, setups, simultaneous):
    for s in setups:
        if not sim.sta(s.responder).capabilities.monostatic:
            sim.refuse(s.initiator, "mode-capability-mismatch", mode="CoordMonostatic", sta=s.responder)
    sim.start_instances(setups)
    beams = list(range(len(setups)))
    yield from _handshake(sim, setups, tx_beam=beams, rx_beam=beams)
    yield from sim.sifs()
    if simultaneous:
        evs = yield from sim.emit([Frame("SensingPpdu", s.responder, s.responder,
                                         {"setup": s.setup_id, "inst": s.next_instance - 1})
                                   for s in setups])
        for s, ev in zip(setups, evs):
            sim.record(s.responder, s.responder, s.responder, ev, [s])
    else:
        for i, s in enumerate(setups):
            if i:
                yield from sim.sifs()
            ev = yield from sim.send("SensingPpdu", s.responder, s.responder,
                                     setup=s.setup_id, inst=s.next_instance - 1)
            sim.record(s.responder, s.responder, s.responder, ev, [s])
    yield from _polled_reports(sim, setups)


def _coord_bistatic(sim, setups, trn_p, trn_m, n_brp):
    sim.start_instances(setups)
    yield from _handshake(sim, setups)
    for s in setups:
        yield from sim.sifs()
        yield from _bistatic_one(sim, s, trn_p, trn_m, n_brp, report=False)
    for s in setups:
        if s.attributes.responder_roles == frozenset({"receiver"}):
            m = sim.measurement(s, s.next_instance - 1)
            if m is not None and s.attributes.reporting != "none":
                yield from sim.sifs()
                fields, bits, _ = sim.report_fields([(s, m)])
                yield from sim.send("BrpReport", s.responder, s.initiator, bits, **fields)


def _loc(sim, sta_id):
    p = sim.positions.get(sta_id)
    return "unknown" if p is None else ",".join(f"{x:.2f}" for x in p)


def _passive(sim, setups, direction, n_sectors):
    aps = {s.initiator if sim.sta(s.initiator).is_ap else s.responder for s in setups}
    if len(aps) != 1 or not sim.sta(next(iter(aps))).is_ap:
        raise ProtocolError("passive sensing involves exactly one AP")
    ap = aps.pop()
    stas = [s.responder if s.initiator == ap else s.initiator for s in setups]
    if not sim.sta(ap).capabilities.passive_sensing_support:
        sim.refuse(ap, "mode-capability-mismatch", mode="Passive", sta=ap)
    sim.start_instances(setups)
    dirs = [round(360 * k / n_sectors) for k in range(n_sectors)]
    if direction == "downlink":
        # BTI: beacons swept across sectors, measured by every interested STA
        for k in range(n_sectors):
            if k:
                yield SBIFS_NS
            b = yield from sim.send("Beacon", ap, BROADCAST, sector=k, passive=1)
            for s, sta in zip(setups, stas):
                sim.record(sta, ap, sta, b, [s])
        for s, sta in zip(setups, stas):
            yield from sim.sifs()
            yield from sim.send("InfoReq", sta, ap, setup=s.setup_id)
            yield from sim.sifs()
            yield from sim.send("InfoResp", ap, sta, directions=dirs, location=_loc(sim, ap))
    elif direction == "uplink":
        # A-BFT: each STA sweeps SSW frames, the AP measures them
        for i, (s, sta) in enumerate(zip(setups, stas)):
            for k in range(n_sectors):
                if i or k:
                    yield SBIFS_NS
                f = yield from sim.send("Ssw", sta, ap, sector=k)
                sim.record(ap, sta, ap, f, [s])
        for s, sta in zip(setups, stas):
            yield from sim.sifs()
            yield from sim.send("InfoReq", ap, sta, setup=s.setup_id)
            yield from sim.sifs()
            yield from sim.send("InfoResp", sta, ap, directions=dirs, location=_loc(sim, sta))
    else:
        raise ProtocolError(f"unknown passive direction {direction!r}")


def _dmg_proc(sim: Simulator, setups, mode, trn_p=4, trn_m=8, n_brp=1, simultaneous=False,
              direction="downlink", n_sectors=4):
    setups = list(setups)
    if mode not in DMG_MODES:
        raise ProtocolError(f"unknown DMG mode {mode!r}")
    if not setups:
        raise ProtocolError("no setups given")
    sim.check_live(setups)
    _dmg_check(sim, setups, mode)
    if mode == "Monostatic":
        yield from _monostatic(sim, setups)
    elif mode == "Bistatic":
        yield from _bistatic(sim, setups, trn_p, trn_m, n_brp)
    elif mode == "Multistatic":
        yield from _multistatic(sim, setups, trn_p, trn_m)
    elif mode == "CoordMonostatic":
        yield from _coord_monostatic(sim, setups, simultaneous)
    elif mode == "CoordBistatic":
        yield from _coord_bistatic(sim, setups, trn_p, trn_m, n_brp)
    else:
        yield from _passive(sim, setups, direction, n_sectors)


def run_dmg_instance(sim: Simulator, setups, mode: str, at_ns=None, **opts) -> Trace:
    """One DMG sensing instance of the given type.

    Options: ``trn_p``, ``trn_m`` (TRN subfields with fixed and swept AWV),
    ``n_brp``, ``simultaneous`` (CoordMonostatic), ``direction`` and
    ``n_sectors`` (Passive).
    """
    return sim.call(_dmg_proc(sim, setups, mode, **opts), at_ns)[1]
