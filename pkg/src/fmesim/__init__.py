"""Event-driven simulator for resilient small-cell LTE networks.

Base stations carry virtualized core-network agents reachable over ad hoc
wireless backhaul, and out-of-coverage terminals form direct device-to-device
networks. The package provides the simulation kernel, radio and mobility
models, the control-plane and data-plane machinery, the device-to-device
protocol, and reproducible experiment runners with CSV/JSON outputs.
"""

__version__ = "0.1.0"

from .engine import Simulator, Event, TraceLog, substream  # noqa: F401
