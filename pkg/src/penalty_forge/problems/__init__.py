from .denoise import (
    DenoiseInstance,
    abs_eps,
    abs_eps_prime,
    abs_weights,
    denoise_step_multiparam,
    denoise_step_tv,
    difference_operators,
    make_denoise_instance,
    multiparam_energy,
    multiparam_gradient,
    psnr,
    solve_denoise,
    solve_tv1d,
    synthetic_image,
    tv1d_energy,
    tv1d_gradient,
    tv1d_step,
    tv_energy,
    tv_gradient,
    tv_penalty,
    tv_penalty_gradient,
    tv_weights,
)
from .grid import (
    GridSpec,
    assemble_fd_laplacian,
    distance_to_boundary,
    fd_laplacian_min_eigenvalue,
    q1_element_stiffness,
    q1_stiffness_full,
)
from .inverse import (
    InverseMediumInstance,
    InverseSourceInstance,
    NoiseSpec,
    add_noise,
    assemble_inverse_medium,
    assemble_inverse_source,
    square_indicator,
)
from .obstacle import ObstacleInstance, assemble_obstacle, interior_index
from .small import duplicate_row_qp, random_box_qp, random_convex_qp, scalar_fixed_point, scalar_problem
