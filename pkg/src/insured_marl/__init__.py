"""MADDPG with CPPI/TIPP-insured actions for multi-agent portfolio trading."""

__version__ = "0.1.0"
