import os
import sys
import pytest
from pathlib import Path

# Remove working dir to avoid importing the un-installed monoflow
try:
    sys.path.remove(os.getcwd())
except ValueError:
    pass

# Allow the import of support modules for tests
sys.path.append(str(Path(__file__).resolve().parent))

from support_modules.test_tools.fixtures import PropertyConfig, scenario_path

from monoflow.networks import motivating_network


@pytest.fixture
def motivating():
    return motivating_network()


@pytest.fixture
def scenario_file():
    return scenario_path


# Seeded property suites

def pytest_addoption(parser):
    parser.addoption("--property-instances", action="store", type=int, default=None,
                     help="Run the seeded property suites on this many instances (acceptance uses 100).")
    parser.addoption("--slow", action="store_true", default=False, help="Also run the long integrations.")


def pytest_runtest_setup(item):
    if 'slow' in item.keywords and not item.config.getoption("slow"):
        pytest.skip("need --slow option to run this test")


@pytest.fixture
def property_config(pytestconfig) -> PropertyConfig:
    instances = pytestconfig.getoption("property_instances")
    return PropertyConfig(instances=instances) if instances else PropertyConfig()
