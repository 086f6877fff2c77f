import numpy as np
import pytest
from hypothesis import settings

from flimsod.imgcore import BACKGROUND, OBJECT, Marker, MarkerSet

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def marker_set(pixel_groups, classes=None, image_id="img"):
    """Build a MarkerSet from lists of (i, j) tuples."""
    classes = classes or [OBJECT] * len(pixel_groups)
    markers = [
        Marker(frozenset(pix), cls, mid + 1)
        for mid, (pix, cls) in enumerate(zip(pixel_groups, classes))
    ]
    return MarkerSet(image_id, markers)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
