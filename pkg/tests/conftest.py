"""Shared fixtures: small synthetic corpora sized for fast unit tests."""

import numpy as np
import pytest

from pcsample import PointCloud, SynthConfig, synth_corpus, synth_scene, train_bayes


def make_cloud(xyz, intensity=None, ring=None, format_tag="synthetic"):
    return PointCloud(np.asarray(xyz, dtype=np.float32), intensity, ring, format_tag)


@pytest.fixture(scope="session")
def small_config():
    """A quarter-size scene: same layout behaviour, much cheaper to generate."""
    return SynthConfig(ground_points=4000, n_objects=4, points_per_object=(150, 250))


@pytest.fixture(scope="session")
def small_scene(small_config):
    return synth_scene(small_config, seed=42)


@pytest.fixture(scope="session")
def small_corpus(small_config):
    return synth_corpus(small_config, 12, seed=7)


@pytest.fixture(scope="session")
def small_model(small_corpus):
    return train_bayes(small_corpus)
