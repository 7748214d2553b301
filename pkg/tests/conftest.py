import os

import hypothesis
import numpy as np
import pytest

from gestalt.preproc import SYNTHETIC8, LandmarkSet
from gestalt.preproc.landmarks import SYNTHETIC8_FRONTAL

SEED = 20190107

hypothesis.settings.register_profile("ci", deadline=None, derandomize=True)
hypothesis.settings.register_profile("dev", deadline=None, max_examples=20)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(SEED)


@pytest.fixture
def frontal() -> LandmarkSet:
    return LandmarkSet(SYNTHETIC8_FRONTAL.copy(), SYNTHETIC8)
