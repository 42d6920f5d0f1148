"""Sub-7 GHz measurement instances: trigger-based (with optional
threshold-based reporting), non-trigger-based, and sensing by proxy."""
from __future__ import annotations

from .frames import BROADCAST, Frame, Trace
from .session import ProtocolError, SetupAttributes
from .simulator import Simulator, csi_variation

TB_PHASES = ("Polling", "TfSounding", "NdpaSounding", "Reporting")


def _check_phases(phases):
    phases = tuple(phases)
    unknown = [p for p in phases if p not in TB_PHASES]
    if unknown:
        raise ProtocolError(f"unknown phases {unknown}")
    if len(set(phases)) != len(phases):
        raise ProtocolError("each phase may appear at most once per instance")
    if list(phases) != sorted(phases, key=TB_PHASES.index):
        raise ProtocolError("phases must keep the order Polling, TfSounding, NdpaSounding, Reporting")
    if any(p.endswith("Sounding") for p in phases) and (not phases or phases[0] != "Polling"):
        raise ProtocolError("polling must precede any sounding phase")
    return phases


def _group(setups):
    """Responder id -> its setups, in first-appearance order."""
    by_sta = {}
    for s in setups:
        by_sta.setdefault(s.responder, []).append(s)
    return by_sta


def _roles(group):
    out = set()
    for s in group:
        out |= s.attributes.responder_roles
    return out


def _tb_proc(sim: Simulator, setups, phases, unavailable=()):
    setups = list(setups)
    if not setups:
        raise ProtocolError("no setups given")
    phases = _check_phases(phases)
    sim.check_live(setups)
    ap = setups[0].initiator
    if any(s.initiator != ap for s in setups):
        raise ProtocolError("all setups of a TB instance share one initiator")
    if not sim.sta(ap).is_ap:
        sim.refuse(ap, "tb-initiator-not-ap")
    by_sta = _group(setups)
    for r in by_sta:
        if sim.sta(r).is_ap:
            sim.refuse(ap, "tb-responder-is-ap", sta=r)
    sim.start_instances(setups)
    inst_of = {s.setup_id: s.next_instance - 1 for s in setups}
    participants = list(by_sta)
    first = True

    def gap():
        nonlocal first
        if not first:
            yield from sim.sifs()
        first = False

    if "Polling" in phases:
        yield from gap()
        yield from sim.send("Poll", ap, BROADCAST, sta=list(by_sta),
                            setup=[s.setup_id for s in setups], inst=[s.next_instance - 1 for s in setups])
        participants = [r for r in by_sta if r not in unavailable and sim.delivered(ap, r)]
        for r in by_sta:
            if r not in participants:
                sim.log(r, r, "State", {"polled": "no-response"})
        if not participants:
            return
        yield from gap()
        yield from sim.emit([_frame("PollResp", r, r, type="cts-to-self") for r in participants])

    if "TfSounding" in phases:
        txers = [r for r in participants if "transmitter" in _roles(by_sta[r])]
        if txers:
            yield from gap()
            yield from sim.send("SensingSoundingTrigger", ap, BROADCAST, sta=txers)
            yield from gap()
            ndps = yield from sim.emit([_frame("Ndp", r, ap, dir="R2I") for r in txers])
            for r, ev in zip(txers, ndps):
                own = [s for s in by_sta[r] if "transmitter" in s.attributes.responder_roles]
                sim.record(ap, r, ap, ev, own)

    if "NdpaSounding" in phases:
        rxers = [r for r in participants if "receiver" in _roles(by_sta[r])]
        if rxers:
            yield from gap()
            yield from sim.send("SensingNdpa", ap, BROADCAST, sta=rxers)
            yield from gap()
            ndp = yield from sim.send("Ndp", ap, BROADCAST, dir="I2R")
            for r in rxers:
                own = [s for s in by_sta[r] if "receiver" in s.attributes.responder_roles]
                sim.record(r, ap, r, ndp, own)

    if "Reporting" in phases:
        items = {}
        for r in participants:
            for s in by_sta[r]:
                mode = s.attributes.reporting
                if mode == "immediate":
                    m = sim.measurement(s, inst_of[s.setup_id])
                elif mode == "delayed":
                    m = sim.measurement(s, inst_of[s.setup_id] - 1)
                else:
                    continue
                if m is not None:
                    items.setdefault(r, []).append((s, m))
        if items:
            yield from gap()
            yield from sim.send("ReportTrigger", ap, BROADCAST, sta=list(items), subphase="measurement")
            yield from gap()
            yield from _reports(sim, items, ap)
        thr = [(r, s) for r in participants for s in by_sta[r]
               if s.attributes.reporting == "threshold" and sim.measurement(s, inst_of[s.setup_id])]
        if thr:
            yield from gap()
            yield from _threshold_subphases(sim, ap, thr, inst_of)


def _frame(kind, src, dst, payload_bits=0, min_length=False, **fields):
    return Frame(kind, src, dst, fields, payload_bits, min_length)


def _reports(sim, items, dst):
    frames = []
    for r, its in items.items():
        fields, bits, _ = sim.report_fields(its)
        frames.append(_frame("Report", r, dst, bits, **fields))
    yield from sim.emit(frames)


def _threshold_subphases(sim, ap, pairs, inst_of):
    var = {}
    for r, s in pairs:
        inst = inst_of[s.setup_id]
        cur = sim.measurement(s, inst)
        prev = sim.previous_measurement(s, inst)
        var[(r, s.setup_id)] = float("inf") if prev is None else csi_variation(prev.cfr, cur.cfr)
    stas = list(dict.fromkeys(r for r, _ in pairs))
    yield from sim.send("ReportTrigger", ap, BROADCAST, sta=stas, subphase="variation")
    yield from sim.sifs()
    yield from sim.emit([_frame("CsiVariationReport", r, ap, setup=s.setup_id,
                                value=var[(r, s.setup_id)]) for r, s in pairs])
    items = {}
    for r, s in pairs:
        if var[(r, s.setup_id)] >= s.attributes.threshold:
            items.setdefault(r, []).append((s, sim.measurement(s, inst_of[s.setup_id])))
    if not items:
        return
    yield from sim.sifs()
    yield from sim.send("ReportTrigger", ap, BROADCAST, sta=list(items), subphase="measurement")
    yield from sim.sifs()
    yield from _reports(sim, items, ap)


def run_tb_instance(sim: Simulator, setups, phases=TB_PHASES, unavailable=(), at_ns=None) -> Trace:
    """One trigger-based instance over per-responder setups sharing an AP initiator."""
    return sim.call(_tb_proc(sim, setups, phases, frozenset(unavailable)), at_ns)[1]


def run_threshold_reporting(sim: Simulator, setups, unavailable=(), at_ns=None) -> Trace:
    """Polling, NDPA sounding, then the variation and measurement subphases."""
    for s in setups:
        if s.attributes.reporting != "threshold":
            raise ProtocolError(f"setup {s.label()} is not threshold-based")
        if s.attributes.responder_roles != frozenset({"receiver"}):
            raise ProtocolError("threshold reporting needs the initiator to be the transmitter")
    return run_tb_instance(sim, setups, ("Polling", "NdpaSounding", "Reporting"), unavailable, at_ns)


_OPPOSITE = {"transmitter": "receiver", "receiver": "transmitter"}


def _non_tb_proc(sim: Simulator, setup, ndpa_lost=None):
    sim.check_live([setup])
    ini, ap = setup.initiator, setup.responder
    if sim.sta(ini).is_ap or not sim.sta(ap).is_ap:
        sim.refuse(ini, "non-tb-needs-sta-initiator-and-ap-responder")
    roles = {_OPPOSITE[r] for r in setup.attributes.responder_roles}
    is_tx, is_rx = "transmitter" in roles, "receiver" in roles
    sim.start_instances([setup])
    inst = setup.next_instance - 1
    yield from sim.send("SensingNdpa", ini, ap, sta=[ap], setup=setup.setup_id, inst=inst)
    lost = (not sim.delivered(ini, ap)) if ndpa_lost is None else bool(ndpa_lost)
    if lost:
        sim.log(ap, ap, "Lost", {"frame": "SensingNdpa", "outcome": "aborted"})
        return
    yield from sim.sifs()
    i2r = yield from sim.send("Ndp", ini, ap, min_length=not is_tx, dir="I2R")
    if is_tx:
        sim.record(ap, ini, ap, i2r, [setup])
    yield from sim.sifs()
    r2i = yield from sim.send("Ndp", ap, ini, min_length=not is_rx, dir="R2I")
    if is_rx:
        sim.record(ini, ap, ini, r2i, [setup])
    if is_tx and setup.attributes.reporting != "none":
        yield from sim.sifs()
        yield from _reports(sim, {ap: [(setup, sim.measurement(setup, inst))]}, ini)


def run_non_tb_instance(sim: Simulator, setup, ndpa_lost=None, at_ns=None) -> Trace:
    """A non-AP initiator sounds the channel with an AP responder."""
    return sim.call(_non_tb_proc(sim, setup, ndpa_lost), at_ns)[1]


def _sbp_proc(sim: Simulator, sbp_initiator, proxy_ap, targets, initiator_joins, attributes):
    ini, ap = sim.sta(sbp_initiator), sim.sta(proxy_ap)
    if ini.is_ap:
        sim.refuse(ini.id, "sbp-initiator-is-ap")
    yield from sim.send("SbpReq", ini.id, ap.id, sta=list(targets), join=int(initiator_joins))
    yield from sim.sifs()
    if not (ap.is_ap and ap.capabilities.sbp_support):
        yield from sim.send("SbpResp", ap.id, ini.id, status="declined")
        return None
    yield from sim.send("SbpResp", ap.id, ini.id, status="accepted")
    responders = list(targets) + ([ini.id] if initiator_joins else [])
    setups = []
    for r in responders:
        yield from sim.sifs()
        sess = sim.live_session(ap.id, r)
        if sess is None:
            sess = yield from sim._setup_session(ap.id, r)
            yield from sim.sifs()
        s = yield from sim._setup_measurement(sess, attributes)
        setups.append(s)
    yield from sim.sifs()
    yield from _tb_proc(sim, setups, ("Polling", "NdpaSounding", "Reporting"))
    got = [(s, sim.measurement(s, s.next_instance - 1)) for s in setups]
    got = [(s, m) for s, m in got if m is not None]
    if not got:
        return setups
    yield from sim.sifs()
    fields, bits, _ = sim.report_fields(got)
    yield from sim.send("Report", ap.id, ini.id, bits, sbp=1, **{"from": [s.responder for s, _ in got]}, **fields)
    return setups


def run_sbp(sim: Simulator, sbp_initiator, proxy_ap, targets, initiator_joins=False,
            attributes: SetupAttributes | None = None, at_ns=None) -> Trace:
    """Sensing by proxy: the AP senses with ``targets`` and reports to the requester."""
    attrs = attributes or SetupAttributes(frozenset({"receiver"}), "full", "immediate")
    return sim.call(_sbp_proc(sim, sbp_initiator, proxy_ap, targets, initiator_joins, attrs), at_ns)[1]
