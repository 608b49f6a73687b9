"""Density ridge estimation and manifold unwrapping.

The package estimates density ridges (principal curves and surfaces) of
noisy point clouds from a Gaussian kernel density estimate and turns them
into flat coordinates. See the README for an overview of the pipeline.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import ConnectivityError, DensityRidgeError, InputError, NumericalError
from .kde import DensityModel, HessianSpectrum, PointCloud, bandwidth_heuristic, decompose, spectrum
from .ode import IvpProblem, SolverOptions, Termination, Trajectory, integrate, integrate_batch
from .ridge import RidgeConfig, RidgeEstimate, RidgePoint, out_of_sample_project, project_cloud, project_to_ridge
from .flow import FlowConfig, Mode, arc_length, cluster_modes, flow_to_mode, find_modes, unwrap_local_1d, orthogonal_unwrap_1d
from .graph import NeighborGraph, build_knn, connected_components, shortest_path, path_tangents
from .geodesic import GeodesicConfig, GeodesicPath, geodesic
from .charts import Atlas, Chart, build_tangent_chart, isometric_unfold, orientation_align, parallel_transport, translate_1d
from .datasets import LabeledDataset, generate
from .pca import pca_reduce

__all__ = [name for name in dir() if not name.startswith("_")]
