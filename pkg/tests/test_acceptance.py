"""The fourteen acceptance criteria, each at its stated tolerance.

Every criterion prints one ``[PASS]``/``[FAIL]`` line; the lines are also
collected and repeated in the terminal summary.
"""

import pytest

from kpist.validation import CRITERIA, run_criterion


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, ctx, acceptance_log):
    result = run_criterion(number, ctx)
    line = result.line()
    print(line)
    acceptance_log.append(line)
    assert result.passed, line
