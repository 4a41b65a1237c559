"""Shared fixtures: one prototype sign and its derived artifacts."""

import numpy as np
import pytest

from wedgealign.features import extract_builtin_features, similarity_volume
from wedgealign.synth import demo_skeleton, render_skeleton


@pytest.fixture(scope="session")
def proto_skeleton():
    return demo_skeleton()


@pytest.fixture(scope="session")
def proto_image(proto_skeleton):
    return render_skeleton(proto_skeleton, noise_sigma=0.0)


@pytest.fixture(scope="session")
def proto_features(proto_image):
    return extract_builtin_features(proto_image)


@pytest.fixture(scope="session")
def self_volume(proto_features):
    return similarity_volume(proto_features, proto_features)


@pytest.fixture(scope="session")
def small_skeleton():
    """Prototype scaled for fast 256x256 / 32x32-grid tests."""
    return demo_skeleton(canvas=(256, 256))


@pytest.fixture(scope="session")
def small_image(small_skeleton):
    return render_skeleton(small_skeleton, (256, 256), noise_sigma=0.0)


@pytest.fixture(scope="session")
def small_features(small_image):
    return extract_builtin_features(small_image, (32, 32))


def random_unit_feature_map(rng, channels, grid, image_size):
    """Random unit-normalized descriptors, used as a generic fixture."""
    data = rng.normal(size=(channels,) + grid)
    data /= np.linalg.norm(data, axis=0, keepdims=True)
    from wedgealign.features import FeatureMap

    return FeatureMap(data=data.astype(np.float32), source_image_size=image_size)
