"""bsquant: a numerical laboratory for loop quantization on model Kahler spaces.

The package builds level-k holomorphic sections from weighted horizontal
loops in the unit circle bundle of two model spaces (the flat Bargmann-Fock
plane and the projective line with an ample power of the hyperplane bundle),
and compares the result against the predicted Gaussian scaling law with
half-power corrections.

Layers, from the bottom up:

* :mod:`bsquant.geometry`    -- tangent-space pairings and frame decompositions
* :mod:`bsquant.models`      -- the model spaces, circle-bundle points, charts
* :mod:`bsquant.hardy`       -- polynomial section bases and projector kernels
* :mod:`bsquant.legendrian`  -- horizontal loops, holonomy, branches, quantization
* :mod:`bsquant.asymptotics` -- Gaussian moments, half-power series, predictions
* :mod:`bsquant.experiments` -- reproducible experiment drivers and rate fits
* :mod:`bsquant.cli`         -- the ``bs-quantize`` command line front end
"""

from bsquant.geometry import (
    TangentVector,
    LagrangianFrame,
    TangentDecomposition,
    riemannian_inner,
    symplectic_pairing,
    decompose,
)
from bsquant.models import (
    ModelSpace,
    CircleBundlePoint,
    HeisenbergChart,
    parse_model,
    bf_point,
    cp1_point,
    circle_act,
    heisenberg_eval,
    chart_invert,
    base_distance,
    base_closure_defect,
    bundle_distance,
    fiber_phase_between,
    szego_kernel,
)
from bsquant.hardy import (
    HardyBasis,
    ProjectorKernel,
    XQuadrature,
    build_basis,
    cached_kernel,
    kernel_eval,
    kernel_trace,
    orthonormality_residual,
    reproducing_residual,
)
from bsquant.legendrian import (
    LegendrianLoop,
    LoopComponent,
    QuadratureSpec,
    QuantizedSection,
    Branch,
    BranchSet,
    BSResult,
    EmptyBranchError,
    make_loop,
    loop_presets,
    horizontality_residual,
    bohr_sommerfeld_check,
    horizontal_lift,
    find_branches,
    quantize,
)
from bsquant.asymptotics import (
    MomentTable,
    BranchExpansion,
    Prediction,
    gaussian_moment,
    compose_expansion,
    predict,
    remainder_bound,
    szego_remainder_bound,
)
from bsquant.experiments import (
    ExperimentConfig,
    ExperimentReport,
    ResultRow,
    RateFit,
    run_kernel_check,
    run_quantize,
    run_profile,
    run_decay,
    run_convergence,
    fit_rate,
    parse_w_grid,
)
from bsquant.reporting import rows_to_csv, report_to_json, write_report

__version__ = "0.1.0"

__all__ = [
    "TangentVector", "LagrangianFrame", "TangentDecomposition",
    "riemannian_inner", "symplectic_pairing", "decompose",
    "ModelSpace", "CircleBundlePoint", "HeisenbergChart", "parse_model",
    "bf_point", "cp1_point", "circle_act", "heisenberg_eval",
    "chart_invert", "base_distance", "base_closure_defect",
    "bundle_distance", "fiber_phase_between", "szego_kernel",
    "HardyBasis", "ProjectorKernel", "XQuadrature", "build_basis",
    "cached_kernel", "kernel_eval", "kernel_trace",
    "orthonormality_residual", "reproducing_residual",
    "LegendrianLoop", "LoopComponent", "QuadratureSpec", "QuantizedSection",
    "Branch", "BranchSet", "BSResult", "EmptyBranchError", "make_loop",
    "loop_presets", "horizontality_residual", "bohr_sommerfeld_check",
    "horizontal_lift", "find_branches", "quantize",
    "MomentTable", "BranchExpansion", "Prediction", "gaussian_moment",
    "compose_expansion", "predict", "remainder_bound",
    "szego_remainder_bound",
    "ExperimentConfig", "ExperimentReport", "ResultRow", "RateFit",
    "run_kernel_check", "run_quantize", "run_profile", "run_decay",
    "run_convergence", "fit_rate", "parse_w_grid",
    "rows_to_csv", "report_to_json", "write_report",
    "__version__",
]
