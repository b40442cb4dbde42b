"""Walk through the battery storage model.

Shows how the state-dependent storage efficiency shapes a charging frame,
how little of a large harvest actually lands in an empty battery, and how
the continuous trajectory quantizes onto the discrete state grid.

Run:  python demos/storage_model.py
"""

import numpy as np

from ehpolicy import (
    BatteryModel,
    ConstantEfficiency,
    QuadraticCapacitor,
    battery_step,
    efficiency_at,
    integrate_frame,
)

battery = BatteryModel(e_max=100, efficiency=QuadraticCapacitor(1.05))

print("Storage efficiency across the charge range (quadratic profile):")
for e in (0, 10, 25, 50, 75, 90, 100):
    print(f"  eta({e:3d}) = {efficiency_at(battery.efficiency, e, 100):.4f}")
print()

print("End-of-frame level after harvesting b quanta, starting empty:")
for b in (5, 10, 20, 50):
    y = integrate_frame(battery, 0.0, b)
    print(f"  b = {b:2d}  ->  y_T = {y:7.4f}   (stored {y / b:.1%} of the harvest)")
print()

print("The same harvest starting from half charge, where efficiency peaks:")
for b in (5, 10, 20, 50):
    y = integrate_frame(battery, 50.0, b)
    print(f"  b = {b:2d}  ->  y_T = {y:7.4f}   (stored {(y - 50) / b:.1%})")
print()

print("A lossless battery for comparison (constant efficiency 1):")
ideal = BatteryModel(e_max=100, efficiency=ConstantEfficiency(1.0))
for b in (5, 20, 50):
    print(f"  b = {b:2d}  ->  y_T = {integrate_frame(ideal, 0.0, b):7.4f}")
print()

print("Discrete transition: drain the transmission, charge, floor to the grid.")
for e, d, b in ((0, 0, 50), (50, 10, 20), (95, 0, 50), (6, 11, 0)):
    nxt = battery_step(battery, e, d, b)
    print(f"  E = {e:3d}, consume {d:2d}, harvest {b:2d}  ->  E' = {nxt}")
print()

print("Average stored fraction of a 20-quantum harvest, by start level:")
starts = np.arange(0, 101, 10, dtype=float)
ys = np.array([integrate_frame(battery, float(a), 20) for a in starts])
for a, y in zip(starts, ys):
    bar = "#" * int(50 * (y - a) / 20)
    print(f"  from {int(a):3d}: {(y - a) / 20:6.1%} {bar}")
