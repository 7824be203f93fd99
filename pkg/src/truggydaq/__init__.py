"""Off-road RC telemetry toolkit: binary session logs, a 32-byte packet
radio link with lossy-channel simulation, encoder and orientation math,
power/thermal models, a scenario simulator and analysis detectors."""

from .analysis import (DetectionEvent, RunSummary, compare_runs,
                       detect_crash, detect_diff_failure, export_csv,
                       lap_segmentation, run_all_detectors, summarize)
from .core_model import (RECORD_SIZE, SessionLog, TelemetryRecord,
                         deserialize_record, serialize_record)
from .encoder import (EncoderConfig, PulseEvent, PulseStreamTracker, SpeedEstimate,
                      speed_from_pulse_pair, speed_from_window, track_pulse_stream)
from .link import (ChannelConfig, Packet, Reassembler, ReassemblyStats,
                   chunk_record, send_records, transmit)
from .orientation import (EulerAngles, Quaternion, euler_to_quat, gimbal_guard,
                          normalize, quat_to_euler)
from .simulator import Scenario, SimRun, Track, default_track, run_scenario

__version__ = "0.1.0"
