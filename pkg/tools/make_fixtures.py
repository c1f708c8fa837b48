#!/usr/bin/env python3
"""Regenerate the bundled scene fixtures (ADF + URDF twins) and phantom CSVs.

The two galen25 files must stay textually aligned: every number is written
with the same repr in both formats so the parsed descriptions compare equal
field-by-field.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "twinbridge" / "fixtures"

# (child, kind, axis, xyz, rpy, limits)
# 25 bodies: base + the 24 jointed links below, a serial chain.
CHAIN = [
    ("stage_x", "prismatic", (1, 0, 0), (0.0, 0.0, 0.35), (0.0, 0.0, 0.0), (-0.15, 0.15)),
    ("stage_y", "prismatic", (0, 1, 0), (0.0, 0.0, 0.06), (0.0, 0.0, 0.0), (-0.15, 0.15)),
    ("stage_z", "prismatic", (0, 0, 1), (0.0, 0.0, 0.06), (0.0, 0.0, 0.0), (-0.12, 0.12)),
    ("arm_yaw", "revolute", (0, 0, 1), (0.08, 0.0, 0.05), (0.0, 0.0, 0.0), (-2.6, 2.6)),
    ("arm_pitch", "revolute", (0, 1, 0), (0.07, 0.0, 0.03), (0.0, 0.0, 0.0), (-1.9, 1.9)),
    ("arm_roll", "revolute", (1, 0, 0), (0.07, 0.0, 0.0), (0.0, 0.0, 0.0), (-2.6, 2.6)),
]

SEG_AXES = [(0, 0, 1), (0, 1, 0), (1, 0, 0)]


def build_chain():
    chain = list(CHAIN)
    for i in range(17):
        axis = SEG_AXES[i % 3]
        rpy = (0.0, 0.2, 0.0) if i % 5 == 4 else (0.0, 0.0, 0.0)
        chain.append(
            (f"seg{i + 1:02d}", "revolute", axis, (0.05, 0.0, 0.01), rpy, (-2.4, 2.4))
        )
    chain.append(("tool_tip", "fixed", (0, 0, 1), (0.04, 0.0, 0.0), (0.0, 0.0, 0.0), None))
    return chain


def fmt(x: float) -> str:
    return repr(float(x))


def write_adf(chain) -> str:
    lines = ["# 25-body serial-chain fixture (positioning stages + articulated arm)",
             "scene: galen25", "bodies:"]

    def body(name, parent, xyz, rpy):
        lines.append(f"  - name: {name}")
        lines.append(f"    mesh: meshes/{name}.stl")
        lines.append(f"    parent: {parent}")
        lines.append(
            f"    pose: {{xyz: [{fmt(xyz[0])}, {fmt(xyz[1])}, {fmt(xyz[2])}], "
            f"rpy: [{fmt(rpy[0])}, {fmt(rpy[1])}, {fmt(rpy[2])}]}}"
        )
        lines.append(f"    mass: {fmt(1.0)}")

    body("base", "world", (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    parent = "base"
    for child, kind, axis, xyz, rpy, limits in chain:
        body(child, parent, xyz, rpy)
        parent = child

    lines.append("joints:")
    parent = "base"
    for i, (child, kind, axis, xyz, rpy, limits) in enumerate(chain, start=1):
        lines.append(f"  - name: q{i:02d}")
        lines.append(f"    kind: {kind}")
        lines.append(f"    parent: {parent}")
        lines.append(f"    child: {child}")
        lines.append(f"    axis: [{fmt(axis[0])}, {fmt(axis[1])}, {fmt(axis[2])}]")
        if limits is not None:
            lines.append(f"    limits: [{fmt(limits[0])}, {fmt(limits[1])}]")
        parent = child
    return "\n".join(lines) + "\n"


def write_urdf(chain) -> str:
    lines = ['<robot name="galen25">']
    lines.append('  <link name="base"/>')
    for child, *_ in chain:
        lines.append(f'  <link name="{child}"/>')
    parent = "base"
    for i, (child, kind, axis, xyz, rpy, limits) in enumerate(chain, start=1):
        lines.append(f'  <joint name="q{i:02d}" type="{kind}">')
        lines.append(f'    <parent link="{parent}"/>')
        lines.append(f'    <child link="{child}"/>')
        lines.append(
            f'    <origin xyz="{fmt(xyz[0])} {fmt(xyz[1])} {fmt(xyz[2])}" '
            f'rpy="{fmt(rpy[0])} {fmt(rpy[1])} {fmt(rpy[2])}"/>'
        )
        lines.append(f'    <axis xyz="{fmt(axis[0])} {fmt(axis[1])} {fmt(axis[2])}"/>')
        if limits is not None:
            lines.append(f'    <limit lower="{fmt(limits[0])}" upper="{fmt(limits[1])}"/>')
        lines.append("  </joint>")
        parent = child
    lines.append("</robot>")
    return "\n".join(lines) + "\n"


def write_phantom_csvs() -> None:
    rng = np.random.default_rng(42)
    n = 10
    fixed = rng.uniform(-0.06, 0.06, size=(n, 3))
    angle = 0.6
    axis = np.array([0.2, 0.9, 0.4])
    axis /= np.linalg.norm(axis)
    k = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    rot = np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)
    t = np.array([0.02, -0.015, 0.03])
    noise = rng.normal(0, 0.0005, size=(n, 3))
    moving = (rot.T @ (fixed - t).T).T + noise
    for name, pts in (("phantom_fixed.csv", fixed), ("phantom_moving.csv", moving)):
        rows = [f"f{i + 1},{p[0]:.6f},{p[1]:.6f},{p[2]:.6f}" for i, p in enumerate(pts)]
        (FIXTURES / name).write_text("\n".join(rows) + "\n")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    chain = build_chain()
    (FIXTURES / "galen25.adf").write_text(write_adf(chain))
    (FIXTURES / "galen25.urdf").write_text(write_urdf(chain))
    write_phantom_csvs()
    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
