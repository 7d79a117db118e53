"""One-time memories from QRAC qubits, fuzzy-lock oracles and a disturbance bound."""

__version__ = "0.1.0"
