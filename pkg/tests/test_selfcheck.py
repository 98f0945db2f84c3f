from sparsity_bounds.routes.selfcheck import CHECKS, run_checks, run_selfcheck
from sparsity_bounds.structure.pydantic import Command


def test_check_names_are_unique():
    names = [check.name for check in CHECKS]
    assert len(names) == len(set(names))
    assert {check.module for check in CHECKS} == {"special_functions", "info_measures", "bounds", "simulator"}


def test_every_invariant_holds():
    results = run_checks()
    failed = [(r.name, r.detail) for r in results if not r.passed]
    assert failed == []


def test_tolerance_override_fails_only_that_check():
    results = run_checks({"xi2_closed_form": -1.0})
    assert [r.name for r in results if not r.passed] == ["xi2_closed_form"]


def test_outcome_lists_every_check():
    outcome = run_selfcheck()
    assert outcome.command == Command.SELFCHECK
    assert outcome.checks_passed
    assert [check.name for check in outcome.checks] == [check.name for check in CHECKS]
