import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cxlegendre import Box, Euclidean, FubiniStudy, Sphere, estimate_neighborhood

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def oracle():
    return json.loads(Path(__file__).with_name("frozen_oracles.json").read_text())


@pytest.fixture(scope="session")
def unit_box():
    return Box.cube(1, 1.0, 64)


@pytest.fixture(scope="session")
def euclid_nb(unit_box):
    return estimate_neighborhood(Euclidean(), unit_box)


@pytest.fixture(scope="session")
def fs_nb(unit_box):
    return estimate_neighborhood(FubiniStudy(), unit_box)


@pytest.fixture(scope="session")
def sphere():
    return Sphere(64)


@pytest.fixture(scope="session")
def sphere_nb(sphere):
    return estimate_neighborhood(FubiniStudy(), sphere)


def fd_gradient(f, x, h=1e-5):
    x = np.asarray(x, float)
    g = np.zeros_like(x)
    for a in range(x.size):
        e = np.zeros_like(x)
        e[a] = h
        g[a] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hessian(grad, x, h=1e-5):
    x = np.asarray(x, float)
    d = x.size
    H = np.zeros((d, d))
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        H[:, a] = (grad(x + e) - grad(x - e)) / (2 * h)
    return 0.5 * (H + H.T)


# -- acceptance summary ---------------------------------------------------------

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    def record(number, title, ok, detail):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
