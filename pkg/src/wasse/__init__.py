"""Decentralized robust variational-Bayes UKF for wide-area power-system state estimation."""

__version__ = "0.1.0"
