"""Part-level physical annotation toolkit for segmented 3D meshes.

Turns part-segmented geometry into physics-ready assets: absolute scale,
material, affordance, and joint parameters per part; plus property
rendering, shape/property metrics, voxel feature packing, a toy flow
matcher, procedural composition, and a review service.
"""

from .asset import (KIND_CODES, DescriptionSet, KinematicConstraint,
                    MaterialSpec, ObjectAsset, Part, Violation, assets_equal,
                    dump_asset_json, load_asset, require_valid, save_asset,
                    validate_asset)
from .config import EstimationConfig, config_from_dict, load_config
from .errors import PhysPartsError
from .geometry import (MergePolicy, PointCloud, is_mergeable, merge_tiny_parts,
                       normalize_object, surface_sample)
from .kinematics import (AxisCandidate, ContactRegion, FittedPlane,
                         contact_region, estimate_constraint, fit_plane,
                         gen_axis_candidates, pivot_candidates, score_candidates)
from .meshio import TriMesh, load_obj, merge_meshes, save_obj
from .metrics import MetricReport, chamfer, evaluate_assets, fscore, psnr, property_mae
from .physfeat import (CHANNEL_LAYOUT, PHYS_DIM, HashingEmbedder, PhysRecord,
                       VoxelGrid, embed_descriptions, load_voxel_grid,
                       normalize_channels, pack_phys, save_voxel_grid,
                       unpack_phys, voxelize)
from .render import (PropertyImage, ViewSpec, default_property_views,
                     load_property_map, rasterize, render_isolation,
                     save_property_map, write_png)
from .annotate import (MATERIAL_TABLE, MockVlm, RawAnnotation, ReviewLog,
                       ReviewState, apply_annotation, build_prompt,
                       material_from_name, parse_response, prompt_text,
                       query_vlm, review_transition, run_annotation)
from .cfm import (ConstantField, LinearField, MLPField, ToyBatch, TrainConfig,
                  cfm_loss, check_gradient, euler_sample, gaussian_mixture,
                  load_checkpoint, save_checkpoint, toy_mixture, train)
from .procgen import (AttachmentRegion, ComponentSpec, GenPlan, compose,
                      enumerate_plans, find_attachment_region, fit_component)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
