"""Coarse-to-fine registration and voxel fusion for cardiac point clouds."""

from .coarse import coarse_register, scale_factor, umeyama_rigid, umeyama_similarity
from .geometry import (
    PcaResult,
    Plane,
    PlaneProjection,
    PointCloud,
    SamplingMeta,
    SpatialIndex,
    bezier_sample,
    build_spatial_index,
    fit_plane_pca,
    pca,
    project_to_plane,
)
from .landmarks import (
    CircleFit,
    CtaLandmarkConfig,
    LandmarkSet,
    SpectLandmarkConfig,
    contact_points,
    contraction_search,
    cta_landmarks,
    junction_plane,
    long_axis_and_apex,
    ransac_circle,
    spect_junction_plane,
    spect_landmarks,
    spect_long_axis,
)
from .metrics import MetricReport, apex_angle, dice, gce, mge, mpe
from .phantom import PhantomData, PhantomSpec, generate
from .transforms import (
    AffineTransform,
    NonrigidTransform,
    RigidTransform,
    SimilarityTransform,
    rotation_about,
)
from .volume import (
    DeformationField,
    FusedVolumes,
    VoxelVolume,
    fuse,
    nn_offset_interpolate,
    resample,
    world_grid,
)

__version__ = "0.1.0"
