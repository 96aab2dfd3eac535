"""Smoke test for the geodex Python bindings.

Build the extension first, for example with
`maturin develop -m crates/py/Cargo.toml`, or put a copy of the compiled
library named `geodex_py.so` on PYTHONPATH.
"""

import json
import math
import sys
import tempfile
from pathlib import Path

import geodex_py as gx


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}")
    return ok


def main():
    results = []

    interval = gx.MetricSpace(json.dumps({"type": "interval", "lo": 0, "hi": 10}))
    results.append(check("interval distance", interval.distance(2.0, 7.5) == 5.5))

    circle = gx.MetricSpace(json.dumps({"type": "circle", "circumference": 365}))
    results.append(check("circle wraps", circle.distance(1.0, 364.0) == 2.0))

    x = [1.0, 2.0, 3.0, 4.0, 5.0]
    y = [2.0, 1.0, 4.0, 3.0, 5.0]
    results.append(check("pearson", abs(gx.pearson(x, y) - 0.8) < 1e-12))
    results.append(check("kendall", abs(gx.kendall_tau_b(x, y) - 0.6) < 1e-12))

    n = 360
    rows = [[math.cos(2 * math.pi * i / n), math.sin(2 * math.pi * i / n)] for i in range(n)]
    values = [2 * math.pi * i / n for i in range(n)]
    loop = gx.MetricSpace(json.dumps({"type": "circle", "circumference": 2 * math.pi}))
    points = gx.EmbeddingSet(rows, values, loop)
    k, edges = gx.minimal_connected_k(rows)
    results.append(check("minimal K on a circle", k >= 1 and len(edges) >= n, f"(K={k})"))

    geo = gx.geodesic_isometry_test(points, loop)
    stats = geo["statistics"]
    results.append(check("geodesic pearson", stats["pearson"] >= 0.999, f"({stats['pearson']:.6f})"))
    results.append(check("geodesic slope", abs(stats["slope"] - 1) < 0.02, f"({stats['slope']:.6f})"))

    direct = gx.direct_isometry_test(points, loop)
    gp = direct["statistics"]["gprime0_estimate"]
    results.append(check("direct g'(0)", abs(gp + 0.5) < 0.025, f"({gp:.6f})"))

    arc = json.dumps({"kind": "arc", "alpha": 2.0, "n": 2, "dim": 16, "seed": 0})
    t1 = gx.validate_theorem1(arc, 10_000)
    results.append(check("curve length check", t1["relative_error"] <= 1e-4, f"({t1['relative_error']:.2e})"))

    spec = json.dumps({"kind": "arc", "alpha": 2.0, "n": 200, "dim": 64, "seed": 1})
    synth, space = gx.generate(spec)
    homeo = gx.homeomorphism_rank_test(synth.normalize_rows(), space)
    results.append(check("homeomorphism on clean arc", homeo["statistics"]["kendall"] >= 0.99))

    try:
        gx.EmbeddingSet([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [0.0, 1.0, 2.0], interval).normalize_rows()
        results.append(check("zero row rejected", False))
    except gx.GeodexError as e:
        results.append(check("zero row rejected", "row 0" in str(e)))

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        data = tmp / "data.csv"
        with data.open("w") as f:
            f.write("label,value,x0,x1\n")
            for i, (r, v) in enumerate(zip(rows, values)):
                f.write(f"p{i},{v!r},{r[0]!r},{r[1]!r}\n")
        manifest = tmp / "manifest.json"
        manifest.write_text(json.dumps({"data": "data.csv", "space": {"type": "circle", "circumference": 2 * math.pi}}))
        report = gx.run_diagnostics(str(data), str(manifest), out=str(tmp / "bundle"))
        results.append(check("report schema", report["schema"] == "geodex-report/1"))
        results.append(check("bundle written", (tmp / "bundle" / "report.json").exists()))

    print(f"{sum(results)}/{len(results)} checks passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
