"""Polarization, minimum energy and greedy energy points for radial kernels."""
from .energy import (
    GreedySequence,
    discrete_energy,
    energy_asymptote_probe,
    energy_gradient,
    greedy_points,
    minimize_energy,
)
from .estimators import (
    EnergyMinimizer,
    EquilibriumMeasureEstimator,
    GreedyEnergyPoints,
    PolarizationMaximizer,
)
from .geometry import (
    Ball,
    Circle,
    CompactSet,
    CurveUnion,
    Interval,
    Mesh,
    MeshCapacityError,
    ParametricCurve,
    Sphere2,
    diameter,
    mesh,
    project,
    set_from_dict,
)
from .kernels import Riesz, ShiftedLog, kernel_from_dict
from .measures import (
    EquilibriumMeasure,
    QuadratureMeasure,
    assumption_check,
    bl_distance,
    counting_measure,
    energy,
    equilibrium_measure,
    potential,
    sample,
)
from .polarization import (
    Configuration,
    PolarizationReport,
    l1_flatness,
    maximin_solve,
    polarization,
    polarization_limit_probe,
)

__version__ = "0.1.0"
