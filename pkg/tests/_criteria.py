"""Shared registry for the acceptance-criteria summary printed after pytest."""

RESULTS: dict[int, tuple[str, bool, str]] = {}


def expect(num: int, description: str) -> None:
    """Pre-register a criterion so an early crash still yields a FAIL line."""
    RESULTS[num] = (description, False, "test did not complete")


def record(num: int, description: str, passed: bool, detail: str = "") -> None:
    RESULTS[num] = (description, bool(passed), detail)
    assert passed, f"criterion {num}: {description}: {detail}"
