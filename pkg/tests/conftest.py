import os

import pytest

from canrev.synth import simulate_suite, write_recording

SUITE_SEED = 7


@pytest.fixture(scope="session")
def suite():
    """Stop-and-go drive plus the three calibrations, simulated once."""
    return simulate_suite(SUITE_SEED)


@pytest.fixture(scope="session")
def suite_dirs(suite, tmp_path_factory):
    root = tmp_path_factory.mktemp("suite")
    out = {}
    for name, (rec, truth) in suite.items():
        directory = os.path.join(root, name)
        write_recording(rec, directory, truth)
        out[name] = directory
    return out
