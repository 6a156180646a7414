"""Verification tools that run on top of the simulator."""
