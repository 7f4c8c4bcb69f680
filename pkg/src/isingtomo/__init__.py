"""Two-qubit state tomography by Ising mapping and a simulated variational eigensolver."""

__version__ = "0.1.0"
