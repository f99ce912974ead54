"""Impedance-strategy analysis for simulated peg-in-hole assembly."""
