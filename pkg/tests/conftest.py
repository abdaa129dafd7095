"""Shared scene builders for the test suite."""
import numpy as np
import pytest

from cfxl.channel import (
    SceneChannel,
    VisibilityMask,
    VrConfig,
    generate_visibility_mask,
    large_scale_fading,
)
from cfxl.geometry import TopologyConfig, generate_topology
from cfxl.tasks.common import ReceiveChain


def make_scene(
    num_bs=1,
    bs_rows=2,
    bs_cols=2,
    num_ue=2,
    ue_rows=1,
    ue_cols=1,
    area_side=60.0,
    seed=0,
    shadowing_std_db=0.0,
    vr=None,
    ricean_kappa=2.0,
):
    config = TopologyConfig(
        num_bs=num_bs,
        bs_rows=bs_rows,
        bs_cols=bs_cols,
        num_ue=num_ue,
        ue_rows=ue_rows,
        ue_cols=ue_cols,
        area_side=area_side,
        wavelength=0.1,
    )
    topology = generate_topology(config, seed)
    lsf = large_scale_fading(topology, shadowing_std_db, seed + 1)
    mask = generate_visibility_mask(topology, vr or VrConfig())
    return SceneChannel(topology, lsf, mask, ricean_kappa)


@pytest.fixture
def desk_scene():
    return make_scene()


@pytest.fixture
def mr_chain():
    return ReceiveChain(combiner="mr")


@pytest.fixture
def mmse_chain():
    return ReceiveChain(combiner="mmse")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
