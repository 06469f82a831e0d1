"""Mesh-to-GSM driver shared by the CLI and the tests."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .constants import wavenumber
from .errors import ValidationError
from .gsm import Gsm, gsm_from_system, port_sparams
from .mesh import RwgBasisSet, TriangleMesh, build_rwg
from .mom import (MAGNETIC, AssemblyOptions, Discretization, ImpedanceSystem, OperatorBlocks,
                  PortModes, assemble_operators, assemble_system, build_projections)
from .sphwave import SphericalBasis
from .waveguide import WaveguideSpec, enumerate_modes

log = logging.getLogger(__name__)


@dataclass
class ElementModel:
    """A meshed antenna with waveguide ports, ready for frequency sweeps.

    ``ports`` maps port id to ``(spec, mode_count)``; ``mode_count`` may be
    ``None`` for the default enumeration.  Geometry-only work (RWG set,
    static near-field integrals) is done once and reused.
    """

    mesh: TriangleMesh
    ports: dict[int, tuple[WaveguideSpec, int | None]]
    center: np.ndarray | None = None
    options: AssemblyOptions = field(default_factory=AssemblyOptions)

    def __post_init__(self):
        missing = set(self.mesh.port_ids) - set(self.ports)
        if missing:
            raise ValidationError(f"mesh ports {sorted(missing)} have no waveguide specification")
        extra = set(self.ports) - set(self.mesh.port_ids)
        if extra:
            raise ValidationError(f"port specs {sorted(extra)} have no tagged triangles in the mesh")
        c, r = self.mesh.bounding_sphere(self.center)
        self.center, self.radius = c, r
        self.rwg: RwgBasisSet = build_rwg(self.mesh)
        self.disc = Discretization(self.rwg, self.options)

    def basis(self, k: float, l_max: int | None = None) -> SphericalBasis:
        return SphericalBasis(k, l_max) if l_max is not None else SphericalBasis.for_radius(k, self.radius)

    def modes(self, k: float) -> PortModes:
        return PortModes({p: enumerate_modes(spec, k, count) for p, (spec, count) in self.ports.items()})

    def operators(self, k: float) -> OperatorBlocks:
        return assemble_operators(self.rwg, k, disc=self.disc)

    def system(self, frequency: float, formulation: str = MAGNETIC, l_max: int | None = None,
               with_basis: bool = True, blocks: OperatorBlocks | None = None) -> ImpedanceSystem:
        k = wavenumber(frequency)
        blocks = blocks or self.operators(k)
        basis = self.basis(k, l_max) if with_basis else None
        pr = build_projections(blocks, self.modes(k), basis, self.center)
        return assemble_system(blocks, pr, formulation)

    def gsm(self, frequency: float, formulation: str = MAGNETIC, l_max: int | None = None) -> Gsm:
        t0 = time.perf_counter()
        system = self.system(frequency, formulation, l_max)
        t1 = time.perf_counter()
        g = gsm_from_system(system, frequency, radius=self.radius)
        t2 = time.perf_counter()
        log.info("f=%.6g Hz: %d unknowns, J=%d, M_p=%d, assembly %.2fs, solve %.2fs",
                 frequency, system.n, g.basis.J, g.n_ports, t1 - t0, t2 - t1)
        return g

    def port_sparams(self, frequency: float, formulation: str = MAGNETIC) -> np.ndarray:
        return port_sparams(self.system(frequency, formulation, with_basis=False))


def coax_spec(r_inner: float, r_outer: float, origin=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0)) -> WaveguideSpec:
    return WaveguideSpec("coaxial", (r_inner, r_outer), origin=tuple(origin), normal=tuple(normal))


__all__ = ["ElementModel", "coax_spec"]
