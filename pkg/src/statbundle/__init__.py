"""Lagrangian and Hamiltonian mechanics on the statistical bundle of a finite sample space."""
from .simplex import (
    CenteringError,
    Density,
    DomainError,
    FiberVector,
    SampleSpace,
    center,
    chart_s,
    e_transport,
    expectation,
    m_transport,
    pairing,
    patch_e,
)
from .mechanics import KINDS, KLParams, QuadraticParams, ScheduleABG, SystemSpec, builtin_potentials
from .integrate import IntegratorConfig, Trajectory, integrate, project

__version__ = "0.1.0"
