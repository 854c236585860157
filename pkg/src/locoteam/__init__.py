"""Distributed consensus-ADMM MPC for quadruped teams carrying a shared payload."""

__version__ = "0.1.0"
