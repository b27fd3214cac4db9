from .extract import extract_gripper, gripper_field
from .simp import SimpResult, compliance, density_filter, hex8_stiffness, simp_optimize
from .stage import TopoptParams, TopoptResult, contact_loads, run_topopt
from .volume import BoundaryConditions, DesignDomain, TopoptError, boundary_conditions, collision_free_volume
