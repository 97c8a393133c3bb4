"""Emit a regularity-proxy grid (smallest singular value of df) for a bundled
planar map, plus the critical-point classification at the origin.

Usage: python3 scripts/nu_grid.py [fixture_name] [out.csv]
"""

import sys

from semimap.cli import emit_grid, load_fixture
from semimap.region import Region
from semimap.regularity import NuSchedule, classify_point


def main():
    name = sys.argv[1] if len(sys.argv) > 1 else "ex_sqrt_abs"
    out = sys.argv[2] if len(sys.argv) > 2 else f"{name}_nu.csv"
    m = load_fixture(name)
    region = Region.box([-1.0, -1.0], [1.0, 1.0])
    count = emit_grid(m, region, "nu", 41, out)
    print(f"wrote {count} grid rows to {out}")
    cls = classify_point(m, [0.0, 0.0], NuSchedule(seed=0))
    print(f"origin: {cls.kind} (nu verdict {cls.nu.verdict}, value {cls.nu.value})")


if __name__ == "__main__":
    main()
