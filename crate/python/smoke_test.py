"""Smoke test for the mwstab_py extension."""

import json
import math

import mwstab_py as mw


def test_single_link_decision():
    net = mw.Network(2, [(0, 1)], [1], r_min=0.5, r_max=2.0)
    rates, transfer, obj = mw.max_weight(net, [[6.0], [0.0]], mw.RateSet.matching([2.0]))
    assert rates == [2.0]
    assert transfer == [2.0]
    # 2 * (6 - 0)
    assert math.isclose(obj, 12.0)
    assert mw.potential(net, [[6.0], [0.0]]) == 36.0


def test_approx_keeps_floor():
    net = mw.Network(3, [(0, 1), (1, 2)], [2], r_min=0.5, r_max=2.0)
    q = [[8.0], [3.0], [0.0]]
    rs = mw.RateSet.explicit([[2.0, 0.0], [0.0, 2.0]])
    _, _, exact = mw.max_weight(net, q, rs)
    for seed in range(20):
        _, _, obj = mw.max_weight(net, q, rs, eps_hat=0.3, seed=seed)
        assert obj >= 0.7 * exact - 1e-9


def test_fixed_load_verdicts():
    net = mw.Network(2, [(0, 1)], [1], r_min=0.5, r_max=1.0)
    rs = mw.RateSet.explicit([[1.0]])
    ok = mw.simulate_fixed(net, rs, [(0, 1)], [0.9], 5000)
    hot = mw.simulate_fixed(net, rs, [(0, 1)], [1.2], 5000)
    assert ok["verdict"] == "stable"
    assert hot["verdict"] == "unstable"
    assert len(ok["max_queue_series"]) == 5000


def test_exponential_and_bounds():
    r = mw.exponential_run(3, 0.1)
    assert r["halted"] is not None
    assert r["bad_packets"] == 0 and r["audit_passed"]
    assert math.isclose(mw.q_star(0.5, 1.0, 0.0), 2.4)
    b = json.loads(mw.bound_constants(2, 0.5, 0.5, 2.0, 1.0, 4.0))
    assert b["n"] == 2
    try:
        mw.bound_constants(10, 0.5, 0.5, 2.0, 1.0, 4.0)
    except ValueError as e:
        assert "budget" in str(e).lower()
    else:
        raise AssertionError("expected budget error")


def test_bad_input_raises():
    try:
        mw.Network(2, [(0, 0)], [1], r_min=0.5, r_max=1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("self-loop accepted")


if __name__ == "__main__":
    for name, f in list(globals().items()):
        if name.startswith("test_"):
            f()
            print("ok", name)
