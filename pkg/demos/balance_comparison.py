"""LQR versus sliding mode on both platforms, side by side.

Runs a matched stabilization experiment for each platform and controller
kind: the pole starts 0.05 rad off upright and the loop has 10 s to bring
it back. The closing table shows the tradeoff the two designs make, the
quadratic regulator spends less actuation and stays smooth while the
switching controller chatters but carries a built-in robustness argument.
"""

from pendulum_ctl.linearize import (
    discretize_zoh,
    nxtway_statespace_closed_form,
    rotpen_statespace_closed_form,
)
from pendulum_ctl.metrics import comparison_report, compute_metrics
from pendulum_ctl.plants import default_params
from pendulum_ctl.simulate import SimConfig, simulate
from pendulum_ctl.synthesis import (
    DEFAULT_ROTPEN_Q,
    DEFAULT_ROTPEN_R,
    design_smc,
    lqr_gain,
    nxtway_integral_lqr,
)

runs = []
for platform, closed_form, Ts in (
        ("rotpen", rotpen_statespace_closed_form, 0.002),
        ("nxtway", nxtway_statespace_closed_form, 0.004)):
    params = default_params(platform)
    ss = closed_form(params)

    # one quadratic design and one sliding-mode design per platform;
    # the two-wheeled robot gets integral action on the wheel angle
    if platform == "rotpen":
        lqr = lqr_gain(ss.A, ss.B, DEFAULT_ROTPEN_Q, DEFAULT_ROTPEN_R)
    else:
        lqr = nxtway_integral_lqr(ss)
    smc = design_smc(discretize_zoh(ss, Ts), alpha=100.0)

    cfg = SimConfig(duration=10.0, controller_Ts=Ts,
                    x0=(0.0, 0.05, 0.0, 0.0))
    for name, design in (("lqr", lqr), ("smc", smc)):
        trace = simulate(params, design, cfg)
        metrics = compute_metrics(trace, V_max=params.V_max)
        runs.append((f"{platform} {name}", metrics))
        print(f"{platform} {name}: quality {metrics.stabilization_quality}, "
              f"peak drive {metrics.u_inf:.2f} V "
              f"({metrics.u_pct_max:.1f}% of the limit)")

print()
print(comparison_report(runs))
