from .candidates import CandidateError, generate_gcs, sample_candidate_points, sample_triples
from .contacts import ContactPoint, GraspConfiguration, effective_friction, wrench_basis
from .freespace import FreeSpace
from .ranking import pareto_fronts, rank_gcs
from .reachability import InstantaneousMotion, reachability_check
from .stability import balancing_forces, partial_force_closure, partial_min_wrench, wrench_feasible
from .synthesis import GraspParams, GraspSynthesisResult, synthesize_grasps
