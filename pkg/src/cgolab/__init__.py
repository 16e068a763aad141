"""CGO reconstruction toolkit for Schrodinger potentials on product cylinders R x M0.

Submodules: geometry (torus spectra, simple disks, geodesics), carleman (the
inverse of the conjugated Laplacian and its estimates), cgo (complex geometrical
optics solutions), forward (Dirichlet problems and DN maps on boxes), xray
(attenuated geodesic ray transform) and pipeline (end-to-end recovery).
Submodules are imported on demand so that the CLI can set thread counts first.
"""

__version__ = "0.1.0"

__all__ = ["geometry", "carleman", "cgo", "forward", "xray", "pipeline", "config", "gridio"]
