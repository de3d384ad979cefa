"""Command-line wrapper around the extraction pipeline (stub backend)."""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import DEFAULT_MAX_OBJECTS, DEFAULT_THRESHOLD, extract
from .models import StubDetector, StubSceneClassifier


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="privgraph-extract",
        description="Emit a privgraph corpus from per-image detector and "
                    "scene-model outputs")
    parser.add_argument("--images", required=True, help="image folder")
    parser.add_argument("--labels", required=True,
                        help="CSV: id,label or id,public,private,undecidable")
    parser.add_argument("--detections", required=True,
                        help="stub detections JSON keyed by image id")
    parser.add_argument("--scenes", required=True,
                        help="stub scene-logits JSON keyed by image id")
    parser.add_argument("--out", required=True, help="corpus output path")
    parser.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    parser.add_argument("--max-objects", type=int, default=DEFAULT_MAX_OBJECTS)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        n = extract(args.images, args.labels,
                    detector=StubDetector(args.detections),
                    scene_model=StubSceneClassifier(args.scenes),
                    out_path=args.out, threshold=args.threshold,
                    max_objects=args.max_objects)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {n} records to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
