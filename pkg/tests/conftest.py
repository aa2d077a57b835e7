import pytest

import hjikit as hk
from hjikit import smoothing as sm


@pytest.fixture(scope="session")
def smoothed_sigma1():
    """One shared smoothing run: sigma1 / v1_scaled upgraded from gain 1 to 1.1."""
    sys = hk.zoo_entry("sigma1").system
    cert = sm.smooth_witness(sys, hk.builtin("v1_scaled"), 1.0, 1.1)
    assert cert.passed
    return cert
