"""Smoke test for the kamlat_py extension.

Builds the extension with cargo, loads it from a temporary directory and
exercises the main entry points on small models.
"""

import json
import math
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "kamlat-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    tmp = tempfile.mkdtemp(prefix="kamlat_py_")
    shutil.copy(os.path.join(ROOT, "target", "release", "libkamlat_py.so"), os.path.join(tmp, "kamlat_py.so"))
    sys.path.insert(0, tmp)
    import kamlat_py

    return kamlat_py, tmp


def main():
    kp, tmp = load()
    print("kamlat_py", kp.__version__)

    ok, gap, drift = kp.check_kg_gaps(1.0, 50)
    assert ok and gap >= 0.5 and drift <= 1.0, (gap, drift)

    c = kp.lemma_constants([1.0, 2.0, 4.0], 0.25, 2.0)
    assert all(x > 0 for x in c)

    assert kp.unsold_defect(3, [(0.3, 1.1), (2.0, 4.0)]) < 1e-12

    m = kp.Model().with_w_max(3)
    print(m)
    lo, hi = m.param_box()
    rho = [0.5 * (lo + hi)] * m.n
    h0, f = m.build(rho, k_max=6, d_max=3)
    assert len(h0.omega) == m.n
    assert 0 < len(h0.normal_eigenvalues) <= f.dim
    assert all(isinstance(x, float) for x in h0.normal_eigenvalues)

    audit = json.loads(h0.audit(1e-4, 3))
    assert isinstance(audit, dict)

    v = f.norm()
    assert v > 0 and math.isfinite(v)
    g = m.jet_from_json(f.to_json(6))
    assert (g - f).max_abs() < 1e-12

    r = [0.01] * m.n
    th = [0.3, 1.2][: m.n]
    z = [0.001] * f.dim
    assert abs(g.eval(r, th, z) - f.eval(r, th, z)) < 1e-14

    b = f.bracket(h0.jet(), 12)
    assert math.isfinite(b.max_abs())

    s, rem, excluded = h0.solve(f.scale(1e-6), 1e-4, 6)
    print("homological step: excluded =", excluded, " |S| =", s.norm())

    fr, slope = kp.measure_exclusion(m, [1e-4, 1e-3], 3, 256, 1)
    assert len(fr) == 2 and all(0.0 <= x <= 1.0 for x in fr)

    out = os.path.join(tmp, "cli")
    code = kp.run_cli(["check_hypotheses", "--wmax", "3", "--out", out])
    assert code == 0, code
    assert os.path.exists(os.path.join(out, "manifest.json"))
    assert kp.run_cli(["check_hypotheses", "--eps", "2"]) == 2

    print("smoke test passed")


if __name__ == "__main__":
    main()
