import pytest

from truggydaq.simulator import Scenario, default_track, run_scenario


@pytest.fixture(scope="session")
def track():
    return default_track()


@pytest.fixture(scope="session")
def slow_3lap_run(track):
    return run_scenario(Scenario(name="slow_lap", laps=3, seed=42), track)


@pytest.fixture(scope="session")
def slow_120s_run(track):
    return run_scenario(Scenario(name="slow_lap", seed=7, duration_s=120.0), track)


@pytest.fixture(scope="session")
def fast_120s_run(track):
    return run_scenario(Scenario(name="fast_lap", seed=7, duration_s=120.0), track)


@pytest.fixture(scope="session")
def failure_run(track):
    return run_scenario(
        Scenario(name="locked_rear_diff", laps=3, seed=3, failure_onset_s=30.0),
        track)


@pytest.fixture(scope="session")
def crash_runs(track):
    return {n: run_scenario(Scenario(name="crash", seed=5, crash_tumbles=n), track)
            for n in (1, 2, 3)}


@pytest.fixture(scope="session")
def nominal_runs(track):
    """20 seeded nominal (slow) runs used for false-positive scoring."""
    return [run_scenario(Scenario(name="slow_lap", seed=100 + k, duration_s=60.0),
                         track)
            for k in range(20)]
