"""Simulator and sensorless-control workbench for a tendon-driven hand
powered by stacked electrohydraulic (Peano-HASEL) actuators."""

from .actuator import (
    ActuatorStackState,
    StackConfig,
    active_force,
    capacitance_of,
    displacement_current,
    equilibrium_contraction,
)
from .config import (
    AmplifierModel,
    DetectionConfig,
    HandConfig,
    ProfileSpec,
    ScenarioPreset,
    SimConfig,
    config_hash,
    default_config,
    load_config,
    resolve_scenario,
    save_config,
)
from .control import (
    BaselineProfile,
    ContactAwareController,
    ControllerState,
    EpisodeReport,
    StreamingDetector,
    calibrate_threshold,
    contact_aware_step,
    detect_grasp,
    record_baseline,
    run_grasp_episode,
    smooth_causal,
)
from .errors import (
    BaselineExhaustedError,
    CalibrationError,
    ConfigError,
    DomainError,
    HaselHandError,
    InsufficientDataError,
    ModelConsistencyError,
    TraceSchemaError,
)
from .kinematics import (
    FingerLayout,
    FingerState,
    JointSpec,
    ObjectModel,
    angles_from_excursion,
    contact_torque,
    fingertip_force,
    tendon_tension_from_torques,
)
from .plant import Plant, PlantState, run_scenario, voltage_profile
from .trace import SignalTrace, load_trace, reconstruct_current
from .transmission import (
    TendonPath,
    delivered_tension,
    excursion_of,
    extensor_tension,
    motion_permitted,
    reflected_load,
)

__version__ = "0.1.0"
