"""Image-folder to corpus-file extraction.

Walks an image directory, runs the configured detector and scene model on
every decodable image, and emits one JSON Lines record per labeled image
in the downstream corpus schema: detections below the confidence
threshold are dropped, at most ``max_objects`` survive (highest
confidence first), counts aggregate per category, and images with no
surviving detection get the background category. COCO's 80 detector
classes map to corpus categories 1..80; background is category 0, for a
total of K=81.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from .models import ObjectDetector, SceneClassifier

log = logging.getLogger(__name__)

BACKGROUND_CATEGORY = 0
NUM_CATEGORIES = 81  # background + 80 COCO classes
DEFAULT_THRESHOLD = 0.8
DEFAULT_MAX_OBJECTS = 12

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp", ".gif", ".webp")

VOTE_KINDS = ("public", "private", "undecidable")


def binarize_votes(votes) -> int:
    """Collapse annotator votes to a binary label.

    Public (0) only when public votes outnumber private votes by at least
    3:1; everything else, including all-undecidable, counts as private
    (1), favoring sensitivity.
    """
    votes = list(votes)
    if not votes:
        raise ValueError("at least one vote is required")
    unknown = set(votes) - set(VOTE_KINDS)
    if unknown:
        raise ValueError(f"unknown vote kinds: {sorted(unknown)}")
    n_public = votes.count("public")
    n_private = votes.count("private")
    if n_private == 0:
        return 0 if n_public > 0 else 1
    return 0 if n_public / n_private >= 3.0 else 1


def read_labels(path) -> dict[str, int]:
    """Labels CSV: either ``id,label`` rows or vote-count rows
    ``id,public,private,undecidable`` (binarized here)."""
    labels: dict[str, int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in reader.fieldnames or []]
        if fields == ["id", "label"]:
            for row in reader:
                labels[row["id"]] = int(row["label"])
        elif fields == ["id", "public", "private", "undecidable"]:
            for row in reader:
                votes = (["public"] * int(row["public"])
                         + ["private"] * int(row["private"])
                         + ["undecidable"] * int(row["undecidable"]))
                labels[row["id"]] = binarize_votes(votes)
        else:
            raise ValueError(
                "labels CSV must have header 'id,label' or "
                "'id,public,private,undecidable'")
    for rec_id, label in labels.items():
        if label not in (0, 1):
            raise ValueError(f"label for {rec_id!r} must be 0 or 1")
    return labels


def aggregate_counts(detections, threshold: float,
                     max_objects: int) -> dict[int, int]:
    """Threshold, cap by confidence rank, remap and count detections."""
    kept = sorted((d for d in detections if d.confidence >= threshold),
                  key=lambda d: -d.confidence)[:max_objects]
    if not kept:
        return {BACKGROUND_CATEGORY: 1}
    counts = Counter(d.category + 1 for d in kept)
    return dict(counts)


def _iter_images(image_dir: Path):
    for path in sorted(image_dir.iterdir()):
        if path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES:
            yield path


def extract(image_dir, labels_file, detector: ObjectDetector,
            scene_model: SceneClassifier, out_path,
            threshold: float = DEFAULT_THRESHOLD,
            max_objects: int = DEFAULT_MAX_OBJECTS) -> int:
    """Run the pipeline over a folder and write the corpus + metadata.

    Returns the number of records written. Undecodable images are
    skipped with a warning; images without a label are omitted and
    logged. Output lines are sorted by image id so reruns are
    byte-identical.
    """
    image_dir = Path(image_dir)
    out_path = Path(out_path)
    labels = read_labels(labels_file)
    records = []
    for path in _iter_images(image_dir):
        image_id = path.stem
        try:
            with Image.open(path) as image:
                image.load()
                detections = detector.detect(image, image_id)
                s1, s2 = scene_model.scene_logits(image, image_id)
        except (UnidentifiedImageError, OSError) as exc:
            log.warning("skipping undecodable image %s: %s", path.name, exc)
            continue
        if image_id not in labels:
            log.warning("no label for image %s; record omitted", image_id)
            continue
        objects = aggregate_counts(detections, threshold, max_objects)
        records.append({
            "id": image_id,
            "label": labels[image_id],
            "scene_logits": [s1, s2],
            "objects": {str(cat): count
                        for cat, count in sorted(objects.items())},
        })
    records.sort(key=lambda doc: doc["id"])
    with open(out_path, "w", encoding="utf-8") as fh:
        for doc in records:
            fh.write(json.dumps(doc) + "\n")
    metadata = {
        "detector_id": detector.detector_id,
        "scene_model_id": scene_model.model_id,
        "threshold": threshold,
        "max_objects": max_objects,
    }
    with open(out_path.with_suffix(".meta.json"), "w", encoding="utf-8") as fh:
        json.dump(metadata, fh, indent=2)
        fh.write("\n")
    return len(records)
