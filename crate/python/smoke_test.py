"""Smoke test for the csflock_py extension.

Build and install first, e.g.
    maturin build --release -m crates/python/Cargo.toml -o dist && pip install dist/csflock_py-*.whl
then run `python python/smoke_test.py` from the repository root.
"""

import json
import math
import pathlib
import tempfile

import csflock_py as cf

ROOT = pathlib.Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"


def main():
    c_star, c = cf.contraction_constants(1.0, 1.0, 0.5, 1.0, 0.5)
    assert abs(c_star - 0.1839397) < 1e-6 and abs(c - 0.0676676) < 1e-6
    assert abs(cf.decay_rate(c, 1.0) - math.log(1 / (1 - c)) / 3) < 1e-14
    assert cf.diameters([0.0, 2.0, 0.5, -0.5], 2, 1) == (2.0, 1.0)

    sc = cf.Scenario.load(str(SCENARIOS / "two_agents.toml"))
    report = sc.run()
    t, _, dv = report.series()
    err = max(abs(v - math.exp(-2 * s)) / math.exp(-2 * s) for s, v in zip(t, dv) if s >= 0)
    assert err < 1e-6, err
    assert report.passed, report.checks()

    try:
        cf.Scenario.from_toml('name = "x"\n[system]\nagents = 2\ndelay = { kind = "pointwise", tau_bar = -1.0, tau = { kind = "constant", value = 0.0 } }\n')
    except ValueError as e:
        assert "system.delay.tau_bar" in str(e)
    else:
        raise AssertionError("negative tau_bar accepted")

    sweep = cf.Scenario.load(str(SCENARIOS / "agent_sweep.toml"))
    mus = {sweep.with_overrides(agents=n, t_end=9.0).run().mu for n in (2, 8, 32)}
    assert len(mus) == 1, mus

    with tempfile.TemporaryDirectory() as out:
        blackout = cf.Scenario.load(str(SCENARIOS / "blackout.toml")).run(out=out)
        assert not blackout.velocity_aligned
        doc = json.loads((pathlib.Path(out) / "diagnostics.json").read_text())
        assert doc["pass"] is False

    print("csflock_py smoke test ok:", report)


if __name__ == "__main__":
    main()
