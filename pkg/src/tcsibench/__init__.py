"""Closed-loop simulation testbed for a turbocharged SI engine with fault
injection, residual-based diagnosis and structural isolability analysis."""

__version__ = "0.1.0"
