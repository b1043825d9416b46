import math

import numpy as np
import pytest

from satinterf.photonsim import DetectorModel, LinkModel
from satinterf.ranging import PassGeometry, build_phase_track, synthesize_pass
from satinterf.relativity import OpticalConfig


@pytest.fixture(scope="session")
def cfg():
    return OpticalConfig(532e-9, 83e-12, 3.4e-9, 10e-9)


@pytest.fixture(scope="session")
def det():
    return DetectorModel(0.5e-9, 81e-12)


@pytest.fixture(scope="session")
def beacon_geom():
    return PassGeometry(1000e3, 1200e3, 1500e3)


@pytest.fixture(scope="session")
def beacon_track(beacon_geom):
    return synthesize_pass(beacon_geom, 0.1, seed=0)


@pytest.fixture(scope="session")
def beacon_ptrack(beacon_track, cfg):
    return build_phase_track(beacon_track, cfg)


@pytest.fixture(scope="session")
def culmination_window(beacon_geom):
    tc = round(beacon_geom.duration / 2)
    return (float(tc - 30), float(tc + 30))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
