"""Smoke test for the fedsim extension module.

Build and install first:  pip install --no-build-isolation ./crates/py
Then run:                 python3 python/smoke_test.py
"""

import fedsim


def check_profiles():
    private = fedsim.NetworkProfile("private", 10.0)
    assert private.block_period_s == 10.0
    assert abs(fedsim.expected_inclusion_wait(private) - 5.0) < 1e-12
    public = fedsim.NetworkProfile("public")
    assert public.expected_inclusion_wait() > public.block_period_s / 2
    try:
        fedsim.NetworkProfile("lunar")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown profile accepted")


def check_contract():
    c = fedsim.Contract()
    c.register("consumer", "consumer")
    for name in ("p7", "p5", "p9"):
        c.register(name, "provider")
    sid = c.announce_service("consumer", {"cpu_cores": "2"})
    for name, price in (("p7", 7), ("p5", 5), ("p9", 9)):
        c.place_bid(name, sid, price)
    try:
        c.place_bid("consumer", sid, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("self-bid accepted")
    assert c.choose_winner("consumer", sid) == "p5"
    c.confirm_deployment("p5", sid, "10.0.0.1", 80)
    c.complete_federation("consumer", sid)
    assert c.state(sid) == "Completed"


def check_runs():
    run = fedsim.run_federation(fedsim.NetworkProfile("private", 1.0), seed=1, measurement_only=True, traced=True)
    assert not run["failed"]
    assert abs(run["durations"]["ServiceDeployed"] - 36.0) < 1e-9
    assert any("SEAL" in line for line in run["trace"])

    toml = 'profiles = ["private"]\nblock_periods_s = [1.0, 20.0]\n'
    a = fedsim.run_campaign(toml, reps=5, seed=3)
    b = fedsim.run_campaign(toml, reps=5, seed=3)
    assert a["summary_csv"] == b["summary_csv"]
    assert len(a["timelines"]) == 10
    totals = {s["block_period_s"]: s["mean_s"] for s in a["summary"] if s["phase"] == "FederationCompleted"}
    assert totals[1.0] < totals[20.0]


if __name__ == "__main__":
    check_profiles()
    check_contract()
    check_runs()
    print("fedsim smoke test passed")
