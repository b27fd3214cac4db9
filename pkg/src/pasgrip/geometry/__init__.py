from .mesh import MeshError, TriMesh, load_mesh, sample_surface_points, save_obj, save_polylines_obj, save_stl
from .transform import RigidTransform
from .queries import (closest_points, point_inside, points_inside, segment_mesh_intersections,
                      segments_clear, winding_numbers)
