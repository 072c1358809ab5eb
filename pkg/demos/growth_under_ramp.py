"""Grow the edge crack under a ramped anti-plane load.

The tip value scales with the square of the load factor, so with toughness
G the crack should start to move at the first load step with
s^2 * K2(unit load) >= G. The script prints the predicted and observed
initiation step, the per-step energy balance and writes the trajectory to
``growth_trajectory.csv`` in the working directory.

    python demos/growth_under_ramp.py [G]
"""

import sys

import numpy as np

from crackenergy.benchmarks import EDGE_CRACK, UNIT_SQUARE, mode3_displacement
from crackenergy.material import ElasticModel
from crackenergy.propagation import (LoadedBody, LoadSchedule, _tip_sweep, initial_state, run_quasistatic,
                                     summary, trajectory_csv)


def main(G=0.36, h=1 / 64, steps=40):
    body = LoadedBody(UNIT_SQUARE, ElasticModel(), lambda p: mode3_displacement(p, (0.5, 0.5), (1.0, 0.0)), h)
    schedule = LoadSchedule.ramp(1.0, steps)
    unit = _tip_sweep(initial_state(body, EDGE_CRACK, schedule).unit_field, 1.0)[0]["value"]
    predicted = int(np.argmax(schedule.scales**2 * unit >= G)) if schedule.scales[-1]**2 * unit >= G else None
    print(f"unit-load tip value {unit:.5f}; G = {G}; predicted initiation step {predicted}")

    states = run_quasistatic(body, EDGE_CRACK, schedule, G, 2 * h)
    print(f"{'step':>4} {'load':>6} {'length':>8} {'work':>10} {'stored+diss':>12} {'tol':>9}  ok")
    for st in states[1:]:
        b = st.bookkeeping
        if st.grew:
            print(f"{st.step:4d} {st.scale:6.3f} {st.length:8.4f} {b['work']:10.3e} "
                  f"{b['stored_increase'] + b['dissipated']:12.3e} {b['tol']:9.2e}  {b['satisfied']}")
    s = summary(states, G)
    print(f"observed initiation step {s['initiation_step']}, length increase {s['length_increase']:.4f}, "
          f"bookkeeping {'ok' if s['bookkeeping_ok'] else 'violated'}")
    trajectory_csv(states, "growth_trajectory.csv")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 0.36)
