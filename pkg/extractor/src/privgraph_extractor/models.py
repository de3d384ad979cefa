"""Detector and scene-model interfaces plus file-backed stub backends.

The adapter is agnostic about how detections are produced: anything
implementing the two protocols below can be plugged in (a YOLO wrapper, a
torchvision pipeline, ...). The stub backends replay precomputed outputs
from JSON sidecar files, which is also how the test fixtures drive the
pipeline without any model weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

NUM_DETECTOR_CLASSES = 80  # COCO label space, before background remapping


@dataclass(frozen=True)
class Detection:
    """One detected region: COCO category, confidence, xywh box."""

    category: int
    confidence: float
    box: tuple[float, float, float, float]

    def validate(self) -> None:
        if not 0 <= self.category < NUM_DETECTOR_CLASSES:
            raise ValueError(f"category {self.category} outside "
                             f"[0, {NUM_DETECTOR_CLASSES - 1}]")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@runtime_checkable
class ObjectDetector(Protocol):
    detector_id: str

    def detect(self, image, image_id: str) -> list[Detection]:
        """Detections for one decoded image."""


@runtime_checkable
class SceneClassifier(Protocol):
    model_id: str

    def scene_logits(self, image, image_id: str) -> tuple[float, float]:
        """Two-way privacy-head logits for one decoded image."""


class StubDetector:
    """Replays detections from a JSON file keyed by image id.

    File format: {image_id: [{"category": int, "confidence": float,
    "box": [x, y, w, h]}, ...], ...}. Images without an entry get no
    detections.
    """

    def __init__(self, path):
        with open(path, encoding="utf-8") as fh:
            self._by_id = json.load(fh)
        self.detector_id = f"stub:{path}"

    def detect(self, image, image_id: str) -> list[Detection]:
        out = []
        for doc in self._by_id.get(image_id, []):
            det = Detection(category=int(doc["category"]),
                            confidence=float(doc["confidence"]),
                            box=tuple(float(v) for v in doc.get("box",
                                                                (0, 0, 0, 0))))
            det.validate()
            out.append(det)
        return out


class StubSceneClassifier:
    """Replays scene logits from a JSON file: {image_id: [s1, s2], ...}."""

    def __init__(self, path, default=(0.0, 0.0)):
        with open(path, encoding="utf-8") as fh:
            self._by_id = json.load(fh)
        self._default = default
        self.model_id = f"stub:{path}"

    def scene_logits(self, image, image_id: str) -> tuple[float, float]:
        s1, s2 = self._by_id.get(image_id, self._default)
        return float(s1), float(s2)
