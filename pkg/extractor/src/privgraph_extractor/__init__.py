"""Offline adapter turning detector/scene-model outputs into corpora."""

from .extract import (BACKGROUND_CATEGORY, NUM_CATEGORIES, aggregate_counts,
                      binarize_votes, extract, read_labels)
from .models import (Detection, ObjectDetector, SceneClassifier, StubDetector,
                     StubSceneClassifier)

__version__ = "0.1.0"

__all__ = [
    "BACKGROUND_CATEGORY", "NUM_CATEGORIES", "aggregate_counts",
    "binarize_votes", "extract", "read_labels",
    "Detection", "ObjectDetector", "SceneClassifier", "StubDetector",
    "StubSceneClassifier",
]
