"""Energy release rates, generalized J-integrals and energy concentration
for traction-free cracks in linear elastic bodies, with P1 finite elements."""

__version__ = "0.1.0"

from .geometry import (CrackedDomain, Disc, GeometryError, Mesh, Rect, WholeBody, build_mesh,  # noqa: E402
                       length_variation, perimeter_measure)
from .material import ElasticModel, MaterialError  # noqa: E402
from .equilibrium import (BoundaryDisplacement, DisplacementField, EquilibriumProblem, SolverError,  # noqa: E402
                          StressField, moreau_bound, residual_norms, solve, total_energy)
from .velocity import PlateauField, TangencyError, tip_advance_field  # noqa: E402
from .flow import FlowError, integrate_flow, transport_crack  # noqa: E402
from .dtn import assemble_dtn, dtn_energy_identity, release_rate_richardson  # noqa: E402
from .jintegral import k2_annulus, k2_domain, k2_measure, prop51_check  # noqa: E402
from .concentration import ConcentrationError, c2_point, cantor_part_atoms, cm_plus  # noqa: E402
from .criteria import (griffith_classical, griffith_generalized, irwin_check,  # noqa: E402
                       minimaxi_report, theorem61_check)
from .propagation import LoadedBody, LoadSchedule, run_quasistatic  # noqa: E402
from .scenario import Scenario, ScenarioError  # noqa: E402

__all__ = [
    "CrackedDomain", "Disc", "GeometryError", "Mesh", "Rect", "WholeBody", "build_mesh", "length_variation",
    "perimeter_measure", "ElasticModel", "MaterialError", "BoundaryDisplacement", "DisplacementField",
    "EquilibriumProblem", "SolverError", "StressField", "moreau_bound", "residual_norms", "solve",
    "total_energy", "PlateauField", "TangencyError", "tip_advance_field", "FlowError", "integrate_flow",
    "transport_crack", "assemble_dtn", "dtn_energy_identity", "release_rate_richardson", "k2_annulus",
    "k2_domain", "k2_measure", "prop51_check", "ConcentrationError", "c2_point", "cantor_part_atoms",
    "cm_plus", "griffith_classical", "griffith_generalized", "irwin_check", "minimaxi_report",
    "theorem61_check", "LoadedBody", "LoadSchedule", "run_quasistatic", "Scenario", "ScenarioError",
    "__version__",
]
