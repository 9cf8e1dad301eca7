"""Single-qubit gates from relativistically accelerated detectors in cavities."""

__version__ = "0.1.0"

from .cavity import CavityConfig
from .errors import (
    AccuracyError,
    OutsideCavityError,
    PerturbativityWarning,
    PlanningError,
    TruncationWarning,
)
from .oracle import TruncatedFieldSpec, coherent_cutoff, convergence_check, exact_evolve
from .oscillatory import (
    PhaseIntegralTable,
    compute_table,
    integrand,
    m_integral,
    phase_integral,
)
from .perturbation import (
    CoherentPrep,
    QubitState,
    VacuumCoefficients,
    coherent_first_order,
    converged_vacuum_delta,
    vacuum_bloch_delta,
    vacuum_coefficients,
    vacuum_first_order_check,
)
from .rotation import (
    NetRotation,
    RotationSpec,
    axis_vs_time,
    azimuth_scan,
    compose,
    extract_rotation,
    phi_spread,
)
from .synthesis import GateSegment, GateSequence, SynthesisConstraints, segment_rotation, synthesize
from .worldline import (
    TrajectorySegment,
    UnitSystem,
    natural_to_si_acceleration,
    position,
    velocity,
)
