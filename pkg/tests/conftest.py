import pytest

import _criteria


@pytest.fixture(scope="session")
def small_scene():
    """A compact noiseless home shared by tests that just need a scene."""
    from panoplan.synth import HomeConfig, generate_home

    scene, layout = generate_home(HomeConfig(n_rooms=4, panos_per_room=2, seed=0))
    return scene, layout


def pytest_terminal_summary(terminalreporter):
    if not _criteria.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria.RESULTS):
        desc, passed, detail = _criteria.RESULTS[num]
        status = "PASS" if passed else "FAIL"
        line = f"criterion {num:2d} [{status}] {desc}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
