"""
* Types: Run Configuration
"""
# Standard Library Imports
from typing import Optional, TypedDict
from typing_extensions import NotRequired

"""
* Solver Options
"""


class SolverOptions(TypedDict, total=False):
    """Object representing the options of a hybrid system solve."""
    method: str
    tol: float
    max_iter: int
    cholesky_limit: int
    ordering: str
    quad_order: int


"""
* Run Configs
"""


class RunConfig(TypedDict):
    """Object representing one solve, as read from flags or a run config file."""
    case: str
    mesh: str
    nu: str
    nu0: NotRequired[float]
    beta: NotRequired[float]
    points: str
    quad_order: int
    solver: str
    tol: float
    max_iter: int
    ordering: NotRequired[str]
    solution: NotRequired[Optional[str]]
    csv: NotRequired[Optional[str]]


class ConvergenceConfig(TypedDict):
    """Object representing a refinement series of one case on one mesh family."""
    case: str
    family: str
    levels: list[int]
    nu: str
    nu0: NotRequired[float]
    beta: NotRequired[float]
    points: str
    quad_order: int
    solver: str
    tol: float
    max_iter: int
    jobs: int
    csv: NotRequired[Optional[str]]


"""
* Presets
"""


class PublishedReference(TypedDict, total=False):
    """Object representing published values a preset compares against, by mesh label."""
    e2_u: dict[str, float]
    e2_grad: dict[str, float]
    u_min: dict[str, float]
    u_max: dict[str, float]
    order_u: float
    order_grad: float


class Preset(TypedDict):
    """Object representing a named, one-command reproduction."""
    name: str
    description: str
    case: str
    meshes: list[str]
    nu: str
    points: str
    reference: PublishedReference


"""
* Config Defaults
"""

RunConfigDefaults = RunConfig(
    case='isotropic',
    mesh='squares:8',
    nu='fixed',
    points='centroid',
    quad_order=2,
    solver='auto',
    tol=1e-12,
    max_iter=20000)

PresetDefaults: dict[str, Preset] = {
    'lepotier-dq4': Preset(
        name='lepotier-dq4',
        description='Anisotropic heterogeneous case on 40x40 squares',
        case='lepotier', meshes=['squares:40'], nu='fixed', points='centroid',
        reference=PublishedReference(
            e2_u={'squares:40': 9.12e-4},
            u_min={'squares:40': 5.66e-4},
            u_max={'squares:40': 0.997})),
    'lepotier-dq5': Preset(
        name='lepotier-dq5',
        description='Anisotropic heterogeneous case on 80x80 squares',
        case='lepotier', meshes=['squares:80'], nu='fixed', points='centroid',
        reference=PublishedReference(
            e2_u={'squares:80': 1.62e-4},
            u_min={'squares:80': 1.41e-4},
            u_max={'squares:80': 0.999})),
    'lepotier-dq6': Preset(
        name='lepotier-dq6',
        description='Anisotropic heterogeneous case on 200x200 squares',
        case='lepotier', meshes=['squares:200'], nu='fixed', points='centroid',
        reference=PublishedReference(
            e2_u={'squares:200': 2.02e-5},
            u_min={'squares:200': 2.29e-5},
            u_max={'squares:200': 1.00})),
    'lepotier-dq1': Preset(
        name='lepotier-dq1',
        description='Anisotropic heterogeneous case on the four-quadrant nonconforming grid',
        case='lepotier', meshes=['quadrants:1'], nu='fixed', points='centroid',
        reference=PublishedReference(
            e2_u={'quadrants:1': 0.0232},
            u_min={'quadrants:1': 0.00259},
            u_max={'quadrants:1': 1.00})),
    'isotropic-squares': Preset(
        name='isotropic-squares',
        description='Isotropic case on uniform squares, n = 8, 16, 32, 64',
        case='isotropic', meshes=['squares:8', 'squares:16', 'squares:32', 'squares:64'],
        nu='fixed', points='centroid',
        reference=PublishedReference(order_u=2.0, order_grad=1.0)),
    'isotropic-triangles': Preset(
        name='isotropic-triangles',
        description='Isotropic case on diagonal triangulations, n = 8, 16, 32',
        case='isotropic', meshes=['triangles:8', 'triangles:16', 'triangles:32'],
        nu='fixed', points='centroid',
        reference=PublishedReference(order_grad=1.0)),
    'isotropic-quadrants': Preset(
        name='isotropic-quadrants',
        description='Isotropic case on the four-quadrant grid and its two edge divisions',
        case='isotropic', meshes=['quadrants:1', 'quadrants:2', 'quadrants:4'],
        nu='fixed', points='centroid',
        reference=PublishedReference(
            e2_u={'quadrants:1': 8.7e-4, 'quadrants:2': 1.7e-4, 'quadrants:4': 3.9e-5},
            e2_grad={'quadrants:1': 5.8e-3, 'quadrants:2': 1.3e-3, 'quadrants:4': 4.0e-4})),
    'patch-affine-distorted': Preset(
        name='patch-affine-distorted',
        description='Affine solution with constant anisotropic tensor on jittered quadrilaterals',
        case='patch-affine', meshes=['distorted:8:seed=7'], nu='fixed', points='centroid',
        reference=PublishedReference()),
    'patch-affine-nonconforming': Preset(
        name='patch-affine-nonconforming',
        description='Affine solution with constant anisotropic tensor on a locally refined grid',
        case='patch-affine', meshes=['refined:4:box=0.5,0.5,1,1:factor=2'], nu='fixed', points='centroid',
        reference=PublishedReference()),
    'simplicial-zero-nu': Preset(
        name='simplicial-zero-nu',
        description='Isotropic case on triangles without penalization, n = 8, 16, 32',
        case='isotropic', meshes=['triangles:8', 'triangles:16', 'triangles:32'],
        nu='zero', points='centroid',
        reference=PublishedReference(order_grad=1.0)),
}
