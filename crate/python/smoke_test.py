"""Import the extension and check a handful of known values."""

import json
import math

import pybellscope as bs


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    row = bs.witness_bound(3)
    close(row["s1"], 2.91485, 1e-4)
    close(row["s2"], 1.1547, 1e-4)
    close(bs.max_entangled_violation(3), 2.87293, 1e-5)

    rows = bs.cglmp_table(2, 4)
    assert [r["d"] for r in rows] == [2, 3, 4]

    v = bs.certify(4, 2.87, 0.04)
    assert v["certified"]

    std = bs.chsh_demo("standard")
    close(std["s_exact"], 2 * math.sqrt(2), 1e-10)
    assert std["fair_sampling"]

    sep = bs.chsh_demo("separable4")
    close(sep["s_exact"], 1.0, 1e-12)
    close(sep["s_postselected"], 4.0, 1e-12)
    assert not sep["fair_sampling"]

    scan = bs.scan_r(steps=71)
    close(scan["s_max"], 3.2645, 2e-3)
    assert len(scan["curve"]) == 71

    try:
        bs.certify(4, 2.87, -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative sigma accepted")

    # A two-setting qubit set with identical detection operators passes.
    # Matrix entries are [re, im] pairs.
    up = [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]
    down = [[[0, 0], [0, 0]], [[0, 0], [1, 0]]]
    setting = lambda label: {
        "label": label,
        "outcomes": [{"value": 1, "matrix": up}, {"value": -1, "matrix": down}],
    }
    report = bs.audit_json(json.dumps({"dim": 2, "settings": [setting("x"), setting("y")]}))
    assert report["passed"], report

    print("smoke test OK")


if __name__ == "__main__":
    main()
