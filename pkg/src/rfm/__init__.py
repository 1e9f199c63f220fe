"""Random feature models for maps between function spaces.

Learns PDE solution operators from input-output pairs of discretized
functions: a linear expansion in randomly drawn, frozen feature maps whose
coefficients solve a ridge-regularized least squares problem. Includes the
field/grid substrate, Matern-like Gaussian field sampling, problem-specific
feature maps for the viscous Burgers' semigroup and the Darcy
coefficient-to-solution map, kernel-side verification tools, and a
config-driven experiment harness.
"""

from .fields import (
    Field,
    Grid,
    SpectralField,
    inner_product_l2,
    inverse_transform,
    norm_l2,
    relative_l2_error,
    spectral_transform,
    subsample,
)
from .grf import GrfSpec, LevelSetSpec, pushforward_levelset, sample_grf, sample_levelset
from .model import (
    BrownianBridgeFeatures,
    CustomFeatures,
    Dataset,
    FeatureFamily,
    FourierFeatures,
    PredictorCorrectorFeatures,
    TrainedModel,
    assemble_normal_system,
    expected_relative_test_error,
    load_model,
    predict,
    save_model,
    solve_ridge,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Field", "Grid", "SpectralField", "GrfSpec", "LevelSetSpec", "Dataset",
    "FeatureFamily", "FourierFeatures", "PredictorCorrectorFeatures",
    "BrownianBridgeFeatures", "CustomFeatures", "TrainedModel",
    "inner_product_l2", "norm_l2", "relative_l2_error", "spectral_transform",
    "inverse_transform", "subsample", "sample_grf", "sample_levelset",
    "pushforward_levelset", "assemble_normal_system", "solve_ridge", "train",
    "predict", "expected_relative_test_error", "save_model", "load_model",
]
