"""Smoke test for the Python extension. Run after `maturin develop` or installing the wheel."""

import json
from fractions import Fraction
from pathlib import Path

import ipmech

DATA = Path(__file__).resolve().parent.parent / "data"


def main():
    used_car = ipmech.Environment.from_json((DATA / "used_car.json").read_text())
    assert (used_car.x_size, used_car.y_size) == (2, 2)
    assert "used_car" in ipmech.Environment.catalog_names()

    rsw = ipmech.solve_rsw(used_car)
    assert Fraction(rsw["allocation"]["t"][1][1]) == Fraction(800, 3)
    assert [Fraction(u) for u in rsw["payoffs"]] == [200, Fraction(800, 3)]
    assert all(c["passed"] for c in rsw["verification"])

    weighted = ipmech.solve_rsw(used_car, weights=[1, "3/2"])
    assert weighted["payoffs"] == rsw["payoffs"]

    full = ipmech.solve_full_information(ipmech.Environment.catalog("skewed_used_car"))
    assert [Fraction(u) for u in full["payoffs"]] == [200, 300]

    ex_ante = ipmech.solve_ex_ante_optimal(used_car)
    assert Fraction(ex_ante["value"]) == 250

    polygon = ipmech.seller_payoff_set(used_car)
    vertices = [tuple(Fraction(c) for c in v["payoff"]) for v in polygon["vertices"]]
    assert vertices == [(200, Fraction(800, 3)), (Fraction(700, 3), Fraction(800, 3)), (225, 275)]

    trapezoid = ipmech.Environment.catalog("core_trapezoid")
    g = ipmech.Allocation.from_json((DATA / "allocations" / "core_trapezoid_95_100.json").read_text(), 2, 2)
    assert ipmech.check_core(trapezoid, g)["core"] is True
    assert ipmech.check_constraints(trapezoid, ipmech.Allocation.no_trade(2, 2))["flags"]["feasible"] is True

    skewed = ipmech.Environment.catalog("skewed_used_car")
    assert ipmech.check_fgp_exists(skewed)["exists"] is True
    assert ipmech.check_snp_exists(skewed)["exists"] is False

    rsw_alloc = ipmech.Allocation.from_json(json.dumps(rsw["allocation"]), 2, 2)
    transformed = ipmech.epic_equivalent(used_car, rsw_alloc)
    assert transformed["trace"]["variant"] == "PreserveBoth"

    greedy = ipmech.Allocation.from_json('{"q":[[1,1],[1,1]],"t":[[999,999],[999,999]]}', 2, 2)
    try:
        ipmech.check_core(used_car, greedy)
    except ipmech.PreconditionError:
        pass
    else:
        raise AssertionError("infeasible allocation accepted")

    try:
        ipmech.Environment.from_json('{"x_size": 2}')
    except ipmech.InputError:
        pass
    else:
        raise AssertionError("malformed environment accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
