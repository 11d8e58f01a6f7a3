import numpy as np
import pytest

from conservekit import systems


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture(scope="session")
def rigid():
    return systems.rigid_body()


@pytest.fixture(scope="session")
def lv2():
    return systems.lotka_volterra_2()


@pytest.fixture(scope="session")
def lv3():
    return systems.lotka_volterra_3()


@pytest.fixture(scope="session")
def three_body():
    return systems.pr3bp()


@pytest.fixture(scope="session")
def oscillator():
    return systems.damped_harmonic_oscillator()


@pytest.fixture(scope="session")
def all_systems(request):
    return {
        sid: systems.get_system(sid)
        for sid in ("rigid-body", "lv2", "lv3", "pr3bp", "dho")
    }
