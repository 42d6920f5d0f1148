"""Trace invariants: time order, measurement causality, report provenance."""
from __future__ import annotations

from .frames import Trace

SOUNDING_KINDS = {"Ndp", "BrpTx", "MultiStaticPpdu", "SensingPpdu", "Beacon", "Ssw"}


class InvariantViolation(AssertionError):
    pass


def check_trace(trace: Trace) -> None:
    seen = {}
    last = None
    for ev in trace:
        if last is not None and ev.time_ns < last:
            raise InvariantViolation(f"event {ev.id} goes back in time")
        last = ev.time_ns
        if ev.kind == "Measure":
            ref = seen.get(int(ev.get("ref")))
            if ref is None or ref.kind not in SOUNDING_KINDS:
                raise InvariantViolation(f"measurement {ev.id} cites no earlier sounding frame")
            if ref.end_ns > ev.time_ns:
                raise InvariantViolation(f"measurement {ev.id} precedes the end of its sounding")
        if ev.kind in ("Report", "BrpReport"):
            for m in ev.get("meas", "").split(","):
                src = seen.get(int(m)) if m.isdigit() else None
                if src is None or src.kind != "Measure":
                    raise InvariantViolation(f"report {ev.id} cites no earlier measurement")
        seen[ev.id] = ev


def sifs_gaps(trace: Trace):
    """Gaps between each frame batch and the next frame start, in order.

    Frames starting together form a batch; the gap runs from the batch's
    latest end to the next frame's start.
    """
    frames = trace.frames()
    gaps = []
    i = 0
    while i < len(frames):
        j = i
        while j + 1 < len(frames) and frames[j + 1].time_ns == frames[i].time_ns:
            j += 1
        end = max(f.end_ns for f in frames[i:j + 1])
        if j + 1 < len(frames):
            gaps.append(frames[j + 1].time_ns - end)
        i = j + 1
    return gaps
