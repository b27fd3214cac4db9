from .crs import CRSResult, crs_optimize
from .init import InitError, auto_forward_keyframe, default_retreat, init_skeleton, init_trajectory, simplify_path
from .pathcost import PathCoster, inside_distance, path_cost, wraparound_distance
from .problem import EnergyBreakdown, TrajoptParams, TrajoptProblem, resample_polyline, verify_collision_free
from .solve import Solution, build_problem, optimize_gc, solve_ranked
