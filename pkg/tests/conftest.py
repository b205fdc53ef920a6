import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Roots of m(a) = 3 for the connected family, n = 2.  Frozen from the package
# and checked against the Radau oracle in test_shooting.
UNSTABLE_A = 0.29936361907315034
STABLE_A = 1.7902685531992852


@pytest.fixture(scope="session")
def unstable_profile():
    from expanderlab.stability import analysis_profile
    return analysis_profile("connected", UNSTABLE_A, 2, 16.0)


@pytest.fixture(scope="session")
def stable_profile():
    from expanderlab.stability import analysis_profile
    return analysis_profile("connected", STABLE_A, 2, 16.0)


@pytest.fixture(scope="session")
def unstable_eigen(unstable_profile):
    from expanderlab.stability import assemble_operator, lowest_eigenpair
    return lowest_eigenpair(assemble_operator(unstable_profile, 16.0, 1600))
