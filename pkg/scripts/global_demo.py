"""Run the global-invertibility diagnostics over a few bundled maps and
print one verdict line per check.

Usage: python3 scripts/global_demo.py
"""

from semimap.cli import load_fixture
from semimap.globalcheck import global_report, kinf_probe
from semimap.regularity import NuSchedule


def main():
    schedule = NuSchedule(seed=0)
    for name in ["identity2", "complex_square", "quat_square"]:
        m = load_fixture(name)
        rep = global_report(m, schedule=schedule, seed=0)
        print(f"{name}:")
        print(f"  properness  {rep.properness.verdict}")
        print(f"  pourciau    {rep.pourciau.verdict}")
        print(f"  kinf hits   {len(rep.kinf_evidence)}")

    shear = load_fixture("shear_product")
    hits = kinf_probe(shear, targets=[(0.0, 1.0)], seed=0)
    print("shear_product asymptotic-critical candidates:")
    for ev in hits:
        print(f"  {ev.candidate}  (final product {ev.products[-1]:.4g})")


if __name__ == "__main__":
    main()
