"""Loading of image/marker/ground-truth directories for the CLI and service."""

from __future__ import annotations

import os

from . import imgcore, pngio


def list_pngs(directory):
    names = sorted(
        f for f in os.listdir(directory) if f.lower().endswith(".png")
    )
    if not names:
        raise FileNotFoundError(f"no PNG files in {directory}")
    return names


def load_training_set(images_dir, markers_dir):
    """Aligned (names, images, marker sets); every image needs a marker file."""
    names = list_pngs(images_dir)
    imgs, marker_sets = [], []
    for name in names:
        img = pngio.load_image(os.path.join(images_dir, name))
        marker_path = os.path.join(markers_dir, name)
        if not os.path.exists(marker_path):
            raise FileNotFoundError(f"missing marker file for {name}")
        label = pngio.load_gray(marker_path)
        if label.shape != img.shape[:2]:
            raise ValueError(f"marker dims differ from image dims for {name}")
        imgs.append(img)
        marker_sets.append(imgcore.markers_from_label_image(label, image_id=name))
    return names, imgs, marker_sets
