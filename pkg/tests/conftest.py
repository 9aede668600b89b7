import numpy as np
import pytest

from dcee import Ensemble, QuadraticRewardSpec, VehicleParams
from dcee.core import DceeProblem


@pytest.fixture
def spec():
    return QuadraticRewardSpec()


@pytest.fixture
def vehicle():
    return VehicleParams()


def make_problem(members, rates=None, v=20.0, spec=None, vehicle=None):
    """Small helper to build a DceeProblem from member rows."""
    members = np.asarray(members, dtype=float)
    if rates is None:
        rates = np.full(members.shape[0], 0.1)
    return DceeProblem(
        vehicle=vehicle or VehicleParams(),
        reward=spec or QuadraticRewardSpec(),
        ensemble=Ensemble(members=members, rates=np.asarray(rates, dtype=float)),
        v=v,
    )
