import dataclasses

import pytest

from polycascade import bench, verify
from polycascade.constellation import derive_coefficients
from polycascade.kernel import KernelParams


def test_bench_rows_cover_grid_and_agree(tmp_path):
    rows = bench.run_bench(widths=(4, 8), batch_rows=(3, 16), repeats=2, seed=0)
    combos = {(r.op, r.n, r.r) for r in rows}
    assert len(combos) == len(rows) == 4 * 2 * 2  # one row per (op, n, r)
    assert all(r.max_rel_err <= bench.AGREEMENT_TOL for r in rows)
    out = tmp_path / "bench.csv"
    bench.write_csv(rows, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "op,n,r,fast_seconds,naive_seconds,max_rel_err"
    assert len(lines) == len(rows) + 1


def test_crossover_reporting():
    mk = lambda op, n, fast, naive: bench.BenchRow(op, n, 8, fast, naive, 0.0)
    rows = [mk("backward", 16, 2.0, 1.0), mk("backward", 32, 1.0, 2.0)]
    rows += [mk("squared_distances", 16, 2.0, 1.0)]
    xo = bench.crossover_widths(rows)
    assert xo["backward"] == 32
    assert xo["squared_distances"] is None  # none in range


def test_verify_battery_passes():
    results = verify.run_all(seed=0, report=lambda *_: None)
    assert all(r.passed for r in results)
    assert len(results) == len(verify.CHECKS)


def test_verify_fault_injection_names_failing_invariant():
    # corrupt one closed-form coefficient: the Gram-inverse equivalence
    # check must fail while carrying its name
    good = derive_coefficients(1, KernelParams(), 0.0)
    bad = dataclasses.replace(good, b3=good.b3 + 1e-3)
    with pytest.raises(AssertionError, match="closed-form inverse off"):
        verify.check_u_equivalence(0, coefficients=bad)

    reports = []
    original = verify.check_u_equivalence
    try:
        verify.CHECKS[0] = (verify.CHECKS[0][0],
                            lambda seed: original(seed, coefficients=bad))
        results = verify.run_all(seed=0, report=reports.append)
    finally:
        verify.CHECKS[0] = (verify.CHECKS[0][0], original)
    failed = [r for r in results if not r.passed]
    assert [r.name for r in failed] == ["closed-form-gram-inverse"]
    assert any("FAIL closed-form-gram-inverse" in line for line in reports)
    assert any("6/7 invariants passed" in line for line in reports)
