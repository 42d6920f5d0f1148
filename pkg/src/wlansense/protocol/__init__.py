"""Discrete-event execution of the sensing session, setup and instance procedures."""
from .dmg import DMG_MODES, locate_sync, multistatic_sync_section, run_dmg_instance
from .engine import Engine
from .frames import (BROADCAST, DMG_AIRTIME, FRAME_KINDS, SUB7_AIRTIME, AirtimeModel, Frame,
                     Trace, TraceEvent, parse_line)
from .instances import (TB_PHASES, run_non_tb_instance, run_sbp, run_tb_instance,
                        run_threshold_reporting)
from .session import (Aid, BurstSchedule, Capabilities, MeasurementSetup, ProtocolError,
                      SensingSession, SetupAttributes, SetupRefused, SetupTerminated, Sta, Uid)
from .simulator import LossModel, Simulator, csi_variation, select_reporters


def setup_session(sim, initiator, responder, dmg=False):
    return sim.setup_session(initiator, responder, dmg)


def setup_measurement(sim, session, attributes=None):
    return sim.setup_measurement(session, attributes)


def terminate(sim, target):
    return sim.terminate(target)
