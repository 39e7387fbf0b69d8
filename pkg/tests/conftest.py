import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chmc import AmbientMetric, PerturbationSpec  # noqa: E402


@pytest.fixture(scope="session")
def schw3():
    return AmbientMetric(n=3, m=2.0)


@pytest.fixture(scope="session")
def schw4():
    return AmbientMetric(n=4, m=2.0)


@pytest.fixture(scope="session")
def flat3():
    return AmbientMetric(n=3, m=0.0)


@pytest.fixture(scope="session")
def perturbed3():
    pert = PerturbationSpec(epsilon=2.0, cosine_coeffs=(0.5, 0.0, 1.0), cutoff_radius=2.0)
    return AmbientMetric(n=3, m=2.0, delta=0.5, perturbation=pert)


@pytest.fixture(scope="session")
def perturbed_chmc(perturbed3):
    """Converged CHMC surfaces of the perturbed metric at sigma = 20, 40, 80."""
    from chmc.flow import FlowConfig, run_to_convergence
    from chmc.surface import make_coordinate_sphere

    cfg = FlowConfig(dt_safety=1.0, record_every=100)
    return {s: run_to_convergence(make_coordinate_sphere(3, s, N=64), perturbed3, cfg)
            for s in (20.0, 40.0, 80.0)}


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(acceptance_log.RESULTS):
            terminalreporter.write_line(acceptance_log.RESULTS[k])
