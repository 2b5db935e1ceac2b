"""Discrete-round network simulator: scenarios, adversaries and traces."""
