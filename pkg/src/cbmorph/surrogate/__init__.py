"""PCA/Kriging surrogates of reduced substructure matrices."""
from .features import cb_from_features, feature_length, features_from_cb, split_features
from .kriging import KrigingModel, kriging_fit, kriging_predict, loo_predictions
from .lagrange import LagrangeSupport, build_support, gauss_nodes, lagrange_interpolate
from .metrics import free_free_frequencies, reconstruction_error
from .multiregion import (MultiRegionSurrogate, RegionModel, loo_validate, predict_cb,
                          train_multiregion, train_region)
from .pca import PcaModel, pca_fit, pca_project, pca_reconstruct

__all__ = [
    "cb_from_features", "feature_length", "features_from_cb", "split_features",
    "KrigingModel", "kriging_fit", "kriging_predict", "loo_predictions",
    "LagrangeSupport", "build_support", "gauss_nodes", "lagrange_interpolate",
    "free_free_frequencies", "reconstruction_error",
    "MultiRegionSurrogate", "RegionModel", "loo_validate", "predict_cb", "train_multiregion",
    "train_region", "PcaModel", "pca_fit", "pca_project", "pca_reconstruct",
]
