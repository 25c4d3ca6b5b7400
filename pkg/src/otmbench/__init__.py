"""Workbench for one-time memories built from single-qubit random access codes.

Modules: f2codes (binary linear codes and exact decoding statistics),
qrac (the four-state qubit encoding), collinfo (collision-entropy
accounting on exact joint distributions), povmsearch (certified leakage
bounds over single-qubit measurements), lightcone (shallow-circuit
locality partitions and parameter feasibility), protocol (the memory
protocol and its exact simulator comparisons), cli (command-line entry
point).
"""

__version__ = "0.1.0"

__all__ = [
    "collinfo",
    "errors",
    "f2codes",
    "lightcone",
    "povmsearch",
    "protocol",
    "qrac",
    "seeds",
]
