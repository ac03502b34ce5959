from .almost_affine import AlmostAffineFit, almost_affine_fit
from .classify import ClassificationResult, classify
from .extremum import HypothesisError, Polyhedron, propagate_extremum_2d, propagate_extremum_3d, worst_case_field
from .lemmas import interval_lemma_oracle, surface_measure_bound
from .oscillation import bmo_modulus, mollify_distance, vmo_flag

__all__ = ["AlmostAffineFit", "almost_affine_fit", "ClassificationResult", "classify", "HypothesisError",
           "Polyhedron", "propagate_extremum_2d", "propagate_extremum_3d", "worst_case_field",
           "interval_lemma_oracle", "surface_measure_bound", "bmo_modulus", "mollify_distance", "vmo_flag"]
