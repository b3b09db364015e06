from .fock import (
    DEFAULT_DIM,
    annihilation_op,
    creation_op,
    displacement_op,
    number_op,
    parity_op,
)
from .measure import (
    DataVector,
    DisplacementRecipe,
    DisplacementSet,
    MeasurementRecipe,
    MeasurementSet,
    add_shot_noise,
    disk,
    explicit,
    generalized_q_ops,
    husimi_ops,
    sensing_matrix,
    sensing_matrix_rank,
    simulate_data,
    square_grid,
    subset,
    wigner_ops,
    within_disk,
)
from .metrics import fidelity, log_likelihood, purity, trace_distance
from .states import (
    DensityMatrix,
    StateSpec,
    StateVector,
    cat_state,
    coherent_state,
    density_from_ket,
    fock_state,
    make_state,
    maximally_mixed,
    random_density,
    snap_state,
)

__all__ = [
    "DEFAULT_DIM",
    "annihilation_op",
    "creation_op",
    "number_op",
    "parity_op",
    "displacement_op",
    "DensityMatrix",
    "StateSpec",
    "StateVector",
    "cat_state",
    "coherent_state",
    "density_from_ket",
    "fock_state",
    "make_state",
    "maximally_mixed",
    "random_density",
    "snap_state",
    "DataVector",
    "DisplacementRecipe",
    "DisplacementSet",
    "MeasurementRecipe",
    "MeasurementSet",
    "add_shot_noise",
    "disk",
    "explicit",
    "generalized_q_ops",
    "husimi_ops",
    "sensing_matrix",
    "sensing_matrix_rank",
    "simulate_data",
    "square_grid",
    "subset",
    "wigner_ops",
    "within_disk",
    "fidelity",
    "log_likelihood",
    "purity",
    "trace_distance",
]
