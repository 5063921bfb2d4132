"""Smoke test for the wasep Python module.

Build and install first:  pip install maturin && maturin develop --release
(or `pip install . --no-build-isolation` from the repository root).
"""

import json
import math
import tempfile

import wasep


def main():
    report = json.loads(wasep.check_model("gradient:0.5", rho=0.3))
    assert report["pass"], report

    params = wasep.Params(n=32, gamma=1.0, a=1.0, rho=0.5, seed=3)
    thermo = params.thermo()
    assert abs(thermo["chi"] - 0.25) < 1e-12

    engine = wasep.Engine(params, index=0)
    before = sum(engine.occupations())
    engine.run_until(0.1)
    assert engine.events > 0
    assert sum(engine.occupations()) == before

    h = wasep.TestFunction.bump(0.0, 1.0, 4)
    observables = json.dumps([
        {"name": "Y", "kind": "density", "h": json.loads(h.to_json())},
        {"name": "M", "kind": "martingale", "h": json.loads(h.to_json())},
    ])
    grid = [0.0, 0.05, 0.1]
    a = wasep.simulate(params, observables, grid, index=4)
    b = wasep.simulate(params, observables, grid, index=4)
    assert a == b
    assert a["t"] == grid and a["M"][0] == 0.0

    var0 = wasep.ou_covariance(params, h, h, 0.0, 0.0)
    assert abs(var0 - 0.25 * h.l2_norm_squared()) < 1e-10
    fbm = wasep.fbm_covariance(params, 1.0, 1.0)
    assert abs(fbm - 0.5 * math.sqrt(2 / math.pi)) < 1e-12
    assert wasep.fbm_covariance(params, 1.0, 1.0, conventional=True) == 0.5 * fbm
    assert wasep.qv_prediction(params, h, 1.0) > wasep.qv_prediction(params, h, 1.0, stationary=True)

    profile = [0.8 if i < params.sites // 2 else 0.2 for i in range(params.sites)]
    evolved = wasep.solve_burgers(params, profile, 0.05)
    assert abs(sum(evolved) - sum(profile)) < 1e-9

    with tempfile.TemporaryDirectory() as tmp:
        config = json.dumps({"n": 16, "horizon": 0.1, "grid_dt": 0.05, "ensemble_size": 8, "seed": 1})
        run_dir = wasep.run_command("ensemble", config, out=f"{tmp}/run", workers=2)
        analysis = json.loads(wasep.analyze(run_dir))
        assert analysis["comparisons"]

    print("wasep", wasep.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
