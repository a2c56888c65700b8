import dataclasses

import numpy as np
import pytest

from morphsim import dataset as datasetmod
from morphsim.grid import GridDesign, JointSpec, regular_grid


@pytest.fixture(scope="session")
def small_dataset():
    """16 oracle trajectories; shared by normalizer/model/training tests."""
    return datasetmod.generate_dataset(n=16, seed=7, batch_size=16)


@pytest.fixture(scope="session")
def normalizers(small_dataset):
    return datasetmod.fit_normalizers(small_dataset, cutoff=0.98)


@pytest.fixture()
def jittered_design():
    rng = np.random.default_rng(11)
    base = regular_grid(50.0)
    joints = tuple(
        dataclasses.replace(
            j,
            x=j.x + (0.0 if j.fixed else float(rng.uniform(-8, 8))),
            y=j.y + (0.0 if j.fixed else float(rng.uniform(-8, 8))),
        )
        for j in base.joints
    )
    beams = tuple(
        dataclasses.replace(b, actuator=float(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0])))
        for b in base.beams
    )
    return GridDesign(joints=joints, beams=beams)
