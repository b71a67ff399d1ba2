"""Timeline predictors sharing one fit/predict estimator surface."""

from .base import Cohort, Predictions, TimelinePredictor
from .heuristics import HomeWorkModel, MarkovOrder0Model, MarkovOrder1Model
from .ilc import CompletedTimeline, IntermediateLocationModel, information_loss, inter
from .nextplace import NextPlaceModel
from .poi import PoiRecommendationModel, fit_power_law

MODEL_REGISTRY = {
    "ilc": IntermediateLocationModel,
    "homework": HomeWorkModel,
    "markov0": MarkovOrder0Model,
    "markov1": MarkovOrder1Model,
    "poi": PoiRecommendationModel,
    "nextplace": NextPlaceModel,
}

__all__ = [
    "Cohort",
    "Predictions",
    "TimelinePredictor",
    "HomeWorkModel",
    "MarkovOrder0Model",
    "MarkovOrder1Model",
    "IntermediateLocationModel",
    "CompletedTimeline",
    "information_loss",
    "inter",
    "NextPlaceModel",
    "PoiRecommendationModel",
    "fit_power_law",
    "MODEL_REGISTRY",
]
