#!/usr/bin/env python3
"""Smoke test for the oalab_py extension module.

Builds nothing itself: it locates the compiled cdylib under target/
(release preferred), exposes it as an importable module, and exercises
the main types and operations end to end.

    cargo build -p oalab-python --release
    python3 python/smoke_test.py
"""

import json
import math
import pathlib
import shutil
import sys
import tempfile


def import_extension():
    root = pathlib.Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / "release" / "liboalab_py.so",
        root / "target" / "debug" / "liboalab_py.so",
    ]
    for built in candidates:
        if built.exists():
            staging = pathlib.Path(tempfile.mkdtemp(prefix="oalab_py_"))
            shutil.copy2(built, staging / "oalab_py.so")
            sys.path.insert(0, str(staging))
            import oalab_py

            return oalab_py
    sys.exit("liboalab_py.so not found; run `cargo build -p oalab-python` first")


def main():
    oal = import_extension()
    print(f"oalab_py {oal.__version__}")

    # Plain helpers.
    assert oal.binom(4, 2) == 6
    assert oal.binom(3, 5) == 0
    assert oal.is_prime(7) and not oal.is_prime(9)

    # Schedule values: n=16, k=1, d=0 has alpha_0 = 2, alpha_4 = 1, alpha_8 = 0.
    a = oal.alphas(16, 1, 0)
    assert abs(a[0] - 2.0) < 1e-12 and abs(a[4] - 1.0) < 1e-12 and a[8] == 0.0

    # The problem function and its witnesses.
    inst = oal.Instance.kdist(q=9, k=2, n=3)
    assert (inst.n, inst.q, inst.k, inst.d) == (3, 9, 2, 1)
    value, witnesses = inst.evaluate([0, 1, 0])
    assert value and witnesses == [[0, 2]]
    value, witnesses = inst.evaluate([0, 1, 2])
    assert not value and witnesses == []
    assert inst.consistency() is None

    # The rank-indexed polynomial variant is inconsistent.
    rank = oal.Instance.ddegree(q=7, deg=1, k=4, n=5, rank_indexed=True)
    assert rank.consistency() is not None

    # Census and the union-bound floor.
    valid, total, fraction = inst.census()
    assert total == 9**3
    assert fraction >= 1.0 - 3 * 9.0 ** (1 - 2) - 1e-12

    # Operator shapes and matvec/dense agreement on a basis vector.
    rows, cols = inst.operator_shape("plain")
    assert (rows, cols) == (3 * 9**2, 9**3)
    small = oal.Instance.ksum(q=3, k=2, t=0, n=3)
    dense = small.dense("plain")
    v = [0.0] * small.operator_shape("plain")[1]
    v[5] = 1.0
    col = small.matvec("plain", v)
    for r, row in enumerate(dense):
        assert abs(row[5] - col[r]) < 1e-12

    # Norms and the certificate report.
    norm, iters, converged = small.norm("plain")
    assert converged and norm > 0 and iters > 0
    report = json.loads(small.certificate_json(seed=3))
    assert report["schema"] == 1
    assert report["meta"]["n"] == 3
    assert all(check["pass"] for check in report["lemmas"])
    assert report["ratio"] > 0 and math.isfinite(report["ratio"])
    # Deterministic for a fixed seed.
    assert small.certificate_json(seed=3) == report_text_again(small)

    # Round trip through the text format.
    text = small.to_text()
    assert text.startswith("oa n=3 q=3 k=2 d=1\n")
    with tempfile.NamedTemporaryFile("w", suffix=".oa", delete=False) as f:
        f.write(text)
        path = f.name
    reloaded = oal.Instance.from_file(path)
    assert reloaded.to_text() == text

    print("smoke test: all checks passed")


def report_text_again(instance):
    return instance.certificate_json(seed=3)


if __name__ == "__main__":
    main()
