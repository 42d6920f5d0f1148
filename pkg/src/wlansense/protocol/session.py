"""Stations, sensing sessions and measurement setups."""
from __future__ import annotations

from dataclasses import dataclass, field

ROLES = frozenset({"transmitter", "receiver"})
REPORT_TYPES = ("full", "tcir", "diff", "partial_amplitude", "partial_phase", "none")
REPORTING = ("immediate", "delayed", "threshold", "none")
QUANTIZERS = ("legacy", "simplified", "pow2", "fractional")


class ProtocolError(Exception):
    """A procedure was refused; ``reason`` says why."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class SetupRefused(ProtocolError):
    pass


class SetupTerminated(ProtocolError):
    pass


@dataclass(frozen=True)
class Aid:
    n: int

    def __str__(self):
        return f"AID{self.n}"


@dataclass(frozen=True)
class Uid:
    n: int

    def __str__(self):
        return f"UID{self.n}"


@dataclass(frozen=True)
class Capabilities:
    wlan_sensing: bool = True
    dmg_sensing: bool = False
    passive_sensing_support: bool = False
    sbp_support: bool = False
    monostatic: bool = True


@dataclass(frozen=True)
class Sta:
    id: str
    mac_addr: str
    aid_or_uid: Aid | Uid
    is_ap: bool = False
    capabilities: Capabilities = field(default_factory=Capabilities)

    def __post_init__(self):
        if self.is_ap and not isinstance(self.aid_or_uid, Aid):
            raise ValueError("an AP is identified by an AID")


@dataclass(frozen=True)
class BurstSchedule:
    intra_burst_interval: float = 0.0
    inter_burst_interval: float = 0.0
    instances_per_burst: int = 1

    def __post_init__(self):
        if self.instances_per_burst < 1 or self.intra_burst_interval < 0 or self.inter_burst_interval < 0:
            raise ValueError("bad burst schedule")

    def instance_times(self, n_bursts: int = 1) -> list:
        """Start time (s) of every instance, burst-major."""
        burst_len = (self.instances_per_burst - 1) * self.intra_burst_interval
        out = []
        for b in range(n_bursts):
            t0 = b * (burst_len + self.inter_burst_interval)
            out.extend(t0 + i * self.intra_burst_interval for i in range(self.instances_per_burst))
        return out


@dataclass(frozen=True)
class SetupAttributes:
    responder_roles: frozenset = frozenset({"receiver"})
    report_type: str = "full"
    reporting: str = "immediate"
    threshold: float | None = None
    quantizer: str = "legacy"
    n_b: int = 8
    tcir_taps: int = 16
    burst: BurstSchedule = field(default_factory=BurstSchedule)

    def __post_init__(self):
        roles = frozenset(self.responder_roles)
        if not roles or not roles <= ROLES:
            raise ValueError(f"responder roles must be a nonempty subset of {sorted(ROLES)}")
        object.__setattr__(self, "responder_roles", roles)
        if self.report_type not in REPORT_TYPES:
            raise ValueError(f"unknown report type {self.report_type!r}")
        if self.reporting not in REPORTING:
            raise ValueError(f"unknown reporting mode {self.reporting!r}")
        if self.quantizer not in QUANTIZERS:
            raise ValueError(f"unknown quantizer {self.quantizer!r}")
        if (self.reporting == "threshold") != (self.threshold is not None):
            raise ValueError("a threshold is given exactly when reporting is threshold-based")
        if self.threshold is not None and not 0 <= self.threshold <= 1:
            raise ValueError("CSI variation thresholds lie in [0, 1]")


@dataclass
class MeasurementSetup:
    setup_id: int
    session: "SensingSession"
    attributes: SetupAttributes
    state: str = "Active"  # Active | Terminated
    next_instance: int = 1

    @property
    def initiator(self) -> str:
        return self.session.initiator

    @property
    def responder(self) -> str:
        return self.session.responder

    @property
    def live(self) -> bool:
        return self.state == "Active" and self.session.state != "Terminated"

    def label(self) -> str:
        return f"{self.responder}/{self.setup_id}"


@dataclass
class SensingSession:
    session_key: tuple  # (mac_addr, Aid | Uid)
    initiator: str
    responder: str
    state: str = "SetupDone"  # SetupDone | Active | Terminated
    setups: dict = field(default_factory=dict)

    @property
    def key_label(self) -> str:
        return str(self.session_key[1])

    def live_setups(self):
        return [s for _, s in sorted(self.setups.items()) if s.state == "Active"]
