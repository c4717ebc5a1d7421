"""
disloclab: a numerical laboratory for nonlocal eikonal equations of
dislocation type.

The front normal velocity is a convolution of the occupied region with a
(possibly sign-changing) kernel plus an external driving term.  The package
computes weak solutions of the level-set formulation by a mollified
fixed-point construction, measures the structural estimates that govern when
those solutions are classical and unique, and reproduces the closed-form
family of distinct weak solutions created by front fattening.
"""

from .errors import ConfigError, DimensionError, ResourceError, StepSizeError
from .grid import (
    GridSpec,
    ScalarField,
    Trajectory,
    constant_field,
    field_from_function,
    godunov_magnitudes,
    lipschitz_estimate,
    one_sided_differences,
    read_field_csv,
    sublevel_measure,
    sup_norm,
    write_field_csv,
)
from .velocity import (
    ExternalVelocity,
    Kernel,
    OccupancyField,
    assemble_total_velocity,
    check_positivity,
    constant_velocity,
    convolve,
    indicator_kernel,
    indicator_occupancy,
    kernel_from_csv,
    time_profile_velocity,
    triangle_kernel,
    velocity_bounds,
    zero_kernel,
    zero_mean_wavelet_kernel,
)
from .eikonal import (
    CFL_DEFAULT,
    EikonalProblem,
    frozen_speed,
    oleinik_lax_inf,
    oleinik_lax_sup,
    scalar_speed,
    solve,
    step,
)
from .weak import (
    FixedPointConfig,
    FixedPointResult,
    WeakSolution,
    classicality_check,
    continuation,
    export_weak_solution,
    fixed_point,
    mollified_heaviside,
    picard_map,
    sandwich_check,
)
from .analysis import (
    band_growth,
    continuous_dependence_gap,
    front_perimeter,
    gradient_margin,
    inclusion_test,
    indicator_l1_distance,
    l1_stability_residual,
    semiconvexity_modulus,
)
from .fattening import (
    ClosedFormSolution,
    OccupancyControl,
    closed_form_solution,
    collapse_radius,
    driving_speed,
    fattening_measure,
    initial_profile,
    nonuniqueness_gap,
    solve_plateau_radius,
    verify_weak_solution,
)

__version__ = "0.1.0"
