"""The battery droop experiment.

A fixed duty that should give 0.3 m/s at nominal voltage is held while the
supply sags from 14.8 V toward 13 V. Uncorrected, the speed error equals
the relative droop exactly (the plant is linear in volts); with the
first-order duty correction it shrinks to the droop squared.
"""
from gennav.runner import run_battery_experiment

for correction in (False, True):
    r = run_battery_experiment(correction_on=correction)
    droop = (r.v_nominal - r.v_final) / r.v_nominal
    label = "corrected " if correction else "uncorrected"
    print(f"{label}: target {r.target_speed} m/s, final {r.final_speed:.5f} m/s "
          f"at {r.v_final:.2f} V")
    print(f"  relative error {r.relative_error:.6f}  "
          f"(droop dV/V = {droop:.6f}, (dV/V)^2 = {droop**2:.6f})")

print("\nper-tick log of the corrected run (every 80th tick):")
r = run_battery_experiment(correction_on=True)
print("tick  v_true   v_supply  duty_pre  duty_post")
for row in r.rows[::80]:
    tick, v_cmd, v_true, v_odom, v_sup, pre, post = row
    print(f"{tick:4d}  {v_true:.4f}  {v_sup:7.3f}  {pre:.4f}    {post:.4f}")
