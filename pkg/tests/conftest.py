import pytest

from tcsibench.params import AmbientConditions, ControllerGains, EngineParams, VehicleSpec


@pytest.fixture(scope="session")
def params() -> EngineParams:
    return EngineParams()


@pytest.fixture(scope="session")
def vehicle() -> VehicleSpec:
    return VehicleSpec()


@pytest.fixture(scope="session")
def gains(params) -> ControllerGains:
    return ControllerGains.from_engine(params)


@pytest.fixture(scope="session")
def ambient() -> AmbientConditions:
    return AmbientConditions()
