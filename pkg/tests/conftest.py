import pytest

from spinsync.model import GAMMA1_NV, GAMMA2_NV, DriveParams


@pytest.fixture
def sync_params():
    """Resonant synchronization point with NV relaxation constants."""
    return DriveParams(6.0, 6.0, rf_amplitude=2.7, gamma1=GAMMA1_NV, gamma2=GAMMA2_NV)
