"""Annotation manifest files.

A manifest is a JSON document listing images and their instances:

    {"format": "foodcal-annotations", "version": 1,
     "images": [{"image": "scene_0000", "width": 320, "height": 320,
                 "instances": [{"class": "Coin", "bbox": [x, y, w, h],
                                "confidence": 0.99,          # optional
                                "mask": "scene_0000_i00.pgm",# optional, relative
                                "calories_kcal": 210.5}]}]}  # optional

Masks are PGM files referenced relative to the manifest location. Ground
truth omits "confidence"; synthetic ground truth may carry per-instance
calorie labels.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from foodcal import maskgeom
from foodcal.errors import DataError
from foodcal.measurement import ClassLabel, DetectionInstance

MANIFEST_FORMAT = "foodcal-annotations"
MANIFEST_VERSION = 1


@dataclass
class ImageAnnotations:
    name: str
    width: int
    height: int
    instances: list[DetectionInstance] = field(default_factory=list)
    calories: list[float | None] = field(default_factory=list)  # aligned with instances


def write_manifest(path, images: list[ImageAnnotations], masks_dir: str | None = "masks") -> Path:
    """Write the manifest and the referenced PGM masks.

    Returns the manifest path. Masks land in ``masks_dir`` next to the
    manifest (set ``masks_dir=None`` to skip mask files entirely).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if masks_dir is not None:
        (path.parent / masks_dir).mkdir(parents=True, exist_ok=True)
    payload = {"format": MANIFEST_FORMAT, "version": MANIFEST_VERSION, "images": []}
    for img in images:
        entry = {"image": img.name, "width": img.width, "height": img.height, "instances": []}
        calories = img.calories if img.calories else [None] * len(img.instances)
        for k, (inst, cal) in enumerate(zip(img.instances, calories)):
            rec = {"class": inst.label.value, "bbox": [int(v) for v in inst.bbox]}
            if inst.confidence is not None:
                rec["confidence"] = inst.confidence
            if inst.mask is not None and masks_dir is not None:
                mask_name = f"{img.name}_i{k:02d}.pgm"
                maskgeom.write_pgm(path.parent / masks_dir / mask_name, inst.mask)
                rec["mask"] = f"{masks_dir}/{mask_name}"
            if cal is not None:
                rec["calories_kcal"] = cal
            entry["instances"].append(rec)
        payload["images"].append(entry)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=1)
        f.write("\n")
    return path


def read_manifest(path, load_masks: bool = True) -> list[ImageAnnotations]:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON manifest") from exc
    if payload.get("format") != MANIFEST_FORMAT:
        raise DataError(f"{path}: not a {MANIFEST_FORMAT} file")
    if payload.get("version") != MANIFEST_VERSION:
        raise DataError(f"{path}: unsupported manifest version {payload.get('version')}")
    images = []
    for entry in payload.get("images", []):
        try:
            img = ImageAnnotations(
                name=entry["image"], width=int(entry["width"]), height=int(entry["height"])
            )
            for rec in entry.get("instances", []):
                mask = None
                if load_masks and "mask" in rec:
                    mask = maskgeom.read_pgm(path.parent / rec["mask"])
                    if mask.shape != (img.height, img.width):
                        raise DataError(
                            f"{path}: mask {rec['mask']} is {mask.shape}, image is "
                            f"({img.height}, {img.width})"
                        )
                img.instances.append(
                    DetectionInstance(
                        label=ClassLabel.from_name(rec["class"]),
                        bbox=tuple(int(v) for v in rec["bbox"]),
                        confidence=rec.get("confidence"),
                        mask=mask,
                    )
                )
                img.calories.append(rec.get("calories_kcal"))
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: malformed image entry: {exc}") from exc
        images.append(img)
    return images


def masks_as_arrays(images: list[ImageAnnotations]) -> list[list[np.ndarray]]:
    return [[inst.mask for inst in img.instances] for img in images]
