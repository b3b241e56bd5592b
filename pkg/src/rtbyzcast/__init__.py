"""Real-time Byzantine reliable broadcast over lossy synchronous rounds."""

from .core import (
    BroadcastPayload,
    MsgKind,
    ParameterError,
    ProtocolMessage,
    SignatureSet,
    SystemParams,
    instance_key,
    live_quorum,
    max_faults,
    quorum_size,
)
from .experiments import estimate_R, run_reliability, sys_shutdown_basic, sys_shutdown_overprovisioned
from .monitors import check_world
from .netsim import World, burst_length_pmf, ge_stationary_loss
from .protocol import LifeCycle, Node

__version__ = "0.1.0"
