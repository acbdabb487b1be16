"""QoS-adaptive bandwidth allocation for layered MBS video and non-MBS calls."""
__version__ = "0.1.0"
