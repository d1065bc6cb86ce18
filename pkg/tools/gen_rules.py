"""Regenerate the shipped controller tables in src/hybridpark/rules/.

The tables are reviewed as data; this script only records how they were
completed around the hand-written rules.  Run from the repository root:

    python tools/gen_rules.py
"""
from __future__ import annotations

import textwrap
from pathlib import Path

SIGNED = ["NL", "NS", "ZO", "PS", "PL"]
MAG = ["ZO", "S", "M", "L"]
OUT = Path(__file__).resolve().parents[1] / "src" / "hybridpark" / "rules"


def signed_uniform(lo, hi):
    s = (hi - lo) / 4
    c = [lo, lo + s, lo + 2 * s, lo + 3 * s, hi]
    return signed_terms(c)


def signed_terms(c):
    return [
        ("NL", "shl", (c[0], c[1])),
        ("NS", "tri", (c[0], c[1], c[2])),
        ("ZO", "tri", (c[1], c[2], c[3])),
        ("PS", "tri", (c[2], c[3], c[4])),
        ("PL", "shr", (c[3], c[4])),
    ]


def magnitude_uniform(hi):
    s = hi / 3
    c = [0.0, s, 2 * s, hi]
    return [
        ("ZO", "shl", (c[0], c[1])),
        ("S", "tri", (c[0], c[1], c[2])),
        ("M", "tri", (c[1], c[2], c[3])),
        ("L", "shr", (c[2], c[3])),
    ]


# supervisory outputs: interior cores at +/-0.25, +/-0.5 and wide flat
# shoulders, so a lone end term defuzzifies inside its own core
INCREMENT = signed_terms([-0.5, -0.25, 0.0, 0.25, 0.5])


def fmt(x):
    x = round(float(x), 9)
    return str(int(x)) if x == int(x) else repr(x)


def clamp_idx(i):
    return max(-2, min(2, i))


def signed(i):
    return SIGNED[clamp_idx(i) + 2]


def write(name, kind, gain, variables, table, comment, out=OUT):
    lines = [f"# {line}" if line else "#" for line in textwrap.dedent(comment).strip().splitlines()]
    lines.append(f"controller {name} {kind}")
    lines.append(f"gain {fmt(gain)}")
    for vname, (lo, hi), unit, terms in variables:
        labels = " ".join(t[0] for t in terms)
        lines.append(f"var {vname} in [{fmt(lo)}, {fmt(hi)}] {unit} terms {labels}")
    for vname, _, _, terms in variables:
        for label, shape, params in terms:
            lines.append(f"term {vname}.{label} {shape} {' '.join(fmt(p) for p in params)}")
    (iname, ilabels), (jname, jlabels) = [(v[0], [t[0] for t in v[3]]) for v in variables[:2]]
    oname = variables[2][0]
    for i, a in enumerate(ilabels):
        for j, b in enumerate(jlabels):
            lines.append(f"rule IF {iname} IS {a} AND {jname} IS {b} THEN {oname} IS {table[i][j]}")
    (Path(out) / f"{name}.fzc").write_text("\n".join(lines) + "\n")


# universe half-widths and breakpoints the tables were tuned with
DEFAULTS = {
    "steer_e": 15.0,
    "steer_e_dot": 800.0,
    "sfc_e_core": 5.0,
    "r_width": 0.25,
    "speed_e": 20.0,
    "speed_e_dot": 120.0,
    "r2_width": 0.5,
    "accel": 8000.0,
}


def main(out=OUT, **overrides):
    P = {**DEFAULTS, **overrides}
    E, ED, C, RW = P["steer_e"], P["steer_e_dot"], P["sfc_e_core"], P["r_width"]
    SE, SED = P["speed_e"], P["speed_e_dot"]
    R2, A = P["r2_width"], P["accel"]
    # steering: u1 index = e index + e_dot index (PD-style, saturating)
    write(
        "bfc_steering", "base", 1.0,
        [
            ("e", (-E, E), "deg", signed_uniform(-E, E)),
            ("e_dot", (-ED, ED), "deg_per_s", signed_uniform(-ED, ED)),
            ("u1", (-1, 1), "servo", signed_uniform(-1, 1)),
        ],
        [[signed(i + j) for j in range(-2, 3)] for i in range(-2, 3)],
        """
        Base steering controller.  e = set angle - accumulated angle, so a
        clockwise turn starts with e > 0 and u1 > 0 (clockwise steering).
        Consequent index = e index + e_dot index, saturated.
        """,
        out,
    )

    # SFC steering: the four hand-written rules form row e=NL; the NS row
    # repeats them, ZO is neutral and the positive rows mirror the negative
    # ones (r1 is a magnitude ratio and does not flip with the turn).
    nl_row = ["PS", "ZO", "NS", "NL", "NL"]
    mirror = {"NL": "PL", "NS": "PS", "ZO": "ZO", "PS": "NS", "PL": "NL"}
    rows = [nl_row, nl_row, ["ZO"] * 5, [mirror[x] for x in nl_row], [mirror[x] for x in nl_row]]
    write(
        "sfc_steering", "supervisory", 0.15,
        [
            ("e", (-90, 90), "deg", signed_terms([-90, -C, 0, C, 90])),
            ("r1", (-RW, RW), "ratio", signed_uniform(-RW, RW)),
            ("u2", (-1, 1), "servo", INCREMENT),
        ],
        rows,
        """
        Supervisory steering controller (radius uniformity).
        Row e=NL holds the four anchor rules:
          NL/NL -> PS, NL/NS -> ZO, NL/ZO -> NS, NL/PS -> NL
        r1 = k1 * |v| / |omega| - 1 (negative: tighter than the average turn).
        Positive u2 steers further clockwise.
        """,
        out,
    )

    # speed: duty grows with |e| and backs off while the heading moves fast
    speed = [
        ["ZO", "ZO", "ZO", "ZO"],
        ["S", "S", "S", "ZO"],
        ["M", "M", "S", "S"],
        ["L", "L", "M", "M"],
    ]
    write(
        "bfc_speed", "base", 1.0,
        [
            ("abs_e", (0, SE), "deg", magnitude_uniform(SE)),
            ("abs_e_dot", (0, SED), "deg_per_s", magnitude_uniform(SED)),
            ("u3", (0, 0.25), "duty", [
                ("ZO", "shl", (0.0, 0.05)),
                ("S", "tri", (0.0, 0.05, 0.1)),
                ("M", "tri", (0.05, 0.1, 0.15)),
                ("L", "shr", (0.1, 0.15)),
            ]),
        ],
        speed,
        """
        Base speed controller: PWM duty from |e| and |e_dot| only.
        The controller applies a terminal duty floor on top of this table.
        """,
        out,
    )

    # SFC speed: u4 index = -(r2 index + a index); the two anchor rules
    # NS/ZO -> PS and NS/PS -> ZO are entries of this table.
    write(
        "sfc_speed", "supervisory", 0.0375,
        [
            ("r2", (-R2, R2), "ratio", signed_uniform(-R2, R2)),
            ("a", (-A, A), "mm_per_s2", signed_uniform(-A, A)),
            ("u4", (-1, 1), "duty", INCREMENT),
        ],
        [[signed(-(i + j)) for j in range(-2, 3)] for i in range(-2, 3)],
        """
        Supervisory speed controller (friction compensation).
        r2 = k2 * |v| / u3 - 1 (negative: more friction than nominal).
        a is the acceleration along the direction of travel.
        Gain 0.0375 = 0.15 of the 0.25-wide duty universe of bfc_speed.
        """,
        out,
    )

    # posture: steer toward the wall when too far or when the nose points away
    write(
        "bfc_posture", "base", 1.0,
        [
            ("x_d", (0, 300), "mm", signed_uniform(0, 300)),
            ("x_e", (-100, 100), "mm", signed_uniform(-100, 100)),
            ("u5", (-1, 1), "servo", signed_uniform(-1, 1)),
        ],
        [[signed(i + j) for j in range(-2, 3)] for i in range(-2, 3)],
        """
        Base posture (wall-following) controller.  x_d is the front-right
        range, nominal at the 150 mm safe distance; x_e = d1 - d2.
        """,
        out,
    )

    # SFC posture: large |x_e| together with a large radius ratio means a
    # long vehicle at a small angle, so part of u5 is taken back.
    posture = [
        ["ZO", "ZO", "ZO", "PS", "PL"],
        ["ZO", "ZO", "ZO", "ZO", "PS"],
        ["ZO", "ZO", "ZO", "ZO", "ZO"],
        ["ZO", "ZO", "ZO", "ZO", "NS"],
        ["ZO", "ZO", "ZO", "NS", "NL"],
    ]
    write(
        "sfc_posture", "supervisory", 0.15,
        [
            ("x_e", (-100, 100), "mm", signed_uniform(-100, 100)),
            ("r3", (-0.5, 0.5), "ratio", signed_uniform(-0.5, 0.5)),
            ("u6", (-1, 1), "servo", INCREMENT),
        ],
        posture,
        """
        Supervisory posture controller (vehicle-length compensation).
        r3 = k3 * |v| / |omega| - 1.  Output opposes u5 when both |x_e| and
        r3 are large.
        """,
        out,
    )


if __name__ == "__main__":
    main()
