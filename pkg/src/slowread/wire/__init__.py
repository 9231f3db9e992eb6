"""Real-socket loopback harness: capped HTTP/1.0 server, slow-read client, probe."""
from .attack import WireAttackConfig, slow_read_attack
from .guard import OVERRIDE_FLAG, ensure_loopback
from .probe import PROBE_DEADLINE, probe
from .server import WireServer, WireServerConfig, serve

__all__ = ["WireAttackConfig", "slow_read_attack", "ensure_loopback", "OVERRIDE_FLAG",
           "probe", "PROBE_DEADLINE", "WireServer", "WireServerConfig", "serve"]
