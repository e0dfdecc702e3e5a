"""Acceptance criteria 1 to 11, one pytest item each.

Each item runs the named check suite, records a one-line verdict for the
terminal summary and prints it. Run this file directly to get just the lines.
"""
import sys

import pytest

from cousinforge import suites

try:
    from conftest import ACCEPTANCE
except ImportError:          # run as a script from elsewhere
    ACCEPTANCE = {}


def _summary(res) -> str:
    bad = res.failures()
    if not bad:
        k = len(res.checks)
        return f"{res.name}: {k} check{'' if k == 1 else 's'} ({res.seconds:.2f}s)"
    return f"{res.name}: failed {', '.join(label for label, _ in bad)}"


def verdict(n: int):
    res = suites.SUITES[suites.CRITERIA[n]]()
    ok, line = res.ok, _summary(res)
    if n == 4:
        # the suite must also catch a dropped twist, with a t1 = r2 = 1 witness
        broken = suites.pseudofunctor(drop_twist=True)
        witnessed = [d for _, d in broken.failures() for d in d if d.get("t1=r2=1") and d["witness"]]
        ok = ok and not broken.ok and bool(witnessed)
        line += f"; drop-twist caught on {witnessed[0]['chain'] if witnessed else 'nothing'}"
    return ok, line, res


@pytest.mark.parametrize("n", sorted(suites.CRITERIA))
def test_criterion(n):
    ok, line, res = verdict(n)
    ACCEPTANCE[n] = (ok, line)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {line}")
    assert ok, res.failures()


def test_frozen_EZ_homology():
    from cousinforge.cousin import homology, homology_json
    H = homology_json(homology(suites.E_Z(7)))
    assert H == {"0": {"free": 1, "generators": [{"η": ["1/1"]}], "torsion": []},
                 "1": {"free": 0, "generators": [], "torsion": []}}


def test_frozen_criterion_shapes():
    labels = {k: [l for l, _, _ in suites.SUITES[v]().checks] for k, v in suites.CRITERIA.items() if k in (2, 3, 10)}
    assert labels[2][1::2] == ["n=1: 30 instances", "n=2: 30 instances", "n=3: 30 instances"]
    assert labels[3] == ["50 instances match", "20 violations rejected"]
    assert labels[10] == ["20 double duals"]


if __name__ == "__main__":
    failed = 0
    for n in sorted(suites.CRITERIA):
        ok, line, _ = verdict(n)
        failed += not ok
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {line}", flush=True)
    sys.exit(1 if failed else 0)
