"""QoS-aware pod placement for cloud-assisted edge clusters, with a discrete-event cluster simulator."""

__version__ = "0.1.0"
