#!/usr/bin/env python3
"""Writes ieee34.grid and cigre_mv.grid from public feeder data.

Run from this directory: python3 assemble_benchmarks.py
Every per-unit value in the generated files is derived here; the comments in
the output record the raw inputs line by line.
"""

import math
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent
FT_PER_MILE = 5280.0

# ---------------------------------------------------------------------------
# IEEE 34-node test feeder
# ---------------------------------------------------------------------------

# Phase impedance (ohm/mile, upper triangle 11 12 13 22 23 33) and shunt
# susceptance (uS/mile, same order) of the overhead configurations.
IEEE_CONFIGS = {
    "300": (
        [1.3368 + 1.3343j, 0.2101 + 0.5779j, 0.2130 + 0.5015j, 1.3238 + 1.3569j, 0.2066 + 0.4591j, 1.3294 + 1.3471j],
        [5.3350, -1.5313, -0.9943, 5.0979, -0.6212, 4.8880],
    ),
    "301": (
        [1.9300 + 1.4115j, 0.2327 + 0.6442j, 0.2359 + 0.5691j, 1.9157 + 1.4281j, 0.2288 + 0.5238j, 1.9219 + 1.4209j],
        [5.1207, -1.4364, -0.9402, 4.9055, -0.5951, 4.7154],
    ),
    # single-phase laterals: self impedance and susceptance
    "302": ([2.7995 + 1.4855j], [4.2251]),
    "303": ([2.7995 + 1.4855j], [4.2251]),
    "304": ([1.9217 + 1.4212j], [4.3637]),
}

# Conductor ampacity (A) of each configuration.
IEEE_AMPACITY = {"300": 230.0, "301": 180.0, "302": 140.0, "303": 140.0, "304": 180.0}

# (from, to, length ft, config)
IEEE_SEGMENTS = [
    ("800", "802", 2580, "300"),
    ("802", "806", 1730, "300"),
    ("806", "808", 32230, "300"),
    ("808", "810", 5804, "303"),
    ("808", "812", 37500, "300"),
    ("812", "814", 29730, "300"),
    ("814", "850", 10, "301"),
    ("816", "818", 1710, "302"),
    ("816", "824", 10210, "301"),
    ("818", "820", 48150, "302"),
    ("820", "822", 13740, "302"),
    ("824", "826", 3030, "303"),
    ("824", "828", 840, "301"),
    ("828", "830", 20440, "301"),
    ("830", "854", 520, "301"),
    ("832", "858", 4900, "301"),
    ("832", "888", None, "XFM-1"),
    ("834", "860", 2020, "301"),
    ("834", "842", 280, "301"),
    ("836", "840", 860, "301"),
    ("836", "862", 280, "301"),
    ("842", "844", 1350, "301"),
    ("844", "846", 3640, "301"),
    ("846", "848", 530, "301"),
    ("850", "816", 310, "301"),
    ("852", "832", 10, "301"),
    ("854", "856", 23330, "303"),
    ("854", "852", 36830, "301"),
    ("858", "864", 1620, "303"),
    ("858", "834", 5830, "301"),
    ("860", "836", 2680, "301"),
    ("862", "838", 4860, "304"),
    ("888", "890", 10560, "300"),
]

# Spot loads, total of the three phases (kW, kvar).
IEEE_SPOT = {
    "860": (60, 48),
    "840": (27, 21),
    "844": (405, 315),
    "848": (60, 48),
    "890": (450, 225),
    "830": (45, 20),
}

# Distributed loads (kW, kvar), lumped half at each end of the segment.
IEEE_DISTRIBUTED = {
    ("802", "806"): (55, 29),
    ("808", "810"): (16, 8),
    ("818", "820"): (34, 17),
    ("820", "822"): (135, 70),
    ("816", "824"): (5, 2),
    ("824", "826"): (40, 20),
    ("824", "828"): (4, 2),
    ("828", "830"): (7, 3),
    ("854", "856"): (4, 2),
    ("832", "858"): (15, 7),
    ("858", "864"): (2, 1),
    ("858", "834"): (32, 17),
    ("834", "860"): (146, 73),
    ("860", "836"): (82, 43),
    ("836", "840"): (40, 20),
    ("862", "838"): (28, 14),
    ("842", "844"): (9, 5),
    ("844", "846"): (45, 23),
    ("846", "848"): (23, 11),
}

# Shunt capacitors (kvar, three phases).
IEEE_CAPACITORS = {"844": 300, "848": 450}

# Ampacity of the first line as used for the compression study (A).
IEEE_LINE1_AMPACITY = 104.34


def positive_sequence(values):
    if len(values) == 1:
        return values[0]
    self_avg = (values[0] + values[3] + values[5]) / 3
    mutual_avg = (values[1] + values[2] + values[4]) / 3
    return self_avg - mutual_avg


def fmt(x):
    return repr(float(x))


def ieee34():
    s_base = 5e6
    v_base = 24.9e3
    z_base = v_base**2 / s_base
    i_base = s_base / (math.sqrt(3) * v_base)

    loads = {}
    for node, (p, q) in IEEE_SPOT.items():
        lp, lq = loads.get(node, (0.0, 0.0))
        loads[node] = (lp + p, lq + q)
    for (a, b), (p, q) in IEEE_DISTRIBUTED.items():
        for node in (a, b):
            lp, lq = loads.get(node, (0.0, 0.0))
            loads[node] = (lp + p / 2, lq + q / 2)

    out = []
    w = out.append
    w("# IEEE 34-node test feeder, balanced positive-sequence equivalent.")
    w("#")
    w("# Generated by tools/assemble_benchmarks.py from the feeder's published")
    w("# line segment, configuration, load and capacitor tables.")
    w("# * three-phase configurations 300/301: positive sequence = mean self")
    w("#   impedance minus mean mutual impedance; same rule for the susceptance")
    w("# * single-phase laterals 302/303/304: self impedance and susceptance")
    w("# * shunt b is per end: half the total line susceptance")
    w("# * regulators 814-850 and 852-832 are their 10 ft connecting segments;")
    w("#   taps are not modelled")
    w("# * the whole feeder is one 24.9 kV voltage level: XFM-1 (500 kVA,")
    w("#   24.9/4.16 kV) is an ideal ratio change represented, like the")
    w("#   regulators, by a 10 ft config 300 link (230 A, no shunt), and")
    w("#   segment 888-890 is per-unitized on the 24.9 kV base")
    w("# * distributed loads are lumped half at each end; spot loads are the")
    w("#   sum of the three phases; loads are constant power")
    w("# * capacitors 844 (300 kvar) and 848 (450 kvar) are constant injections")
    w("#   included in q; q_load holds the load alone")
    w("# * ampacity: 300 -> 230 A, 301 -> 180 A, 302/303 -> 140 A, 304 -> 180 A;")
    w(f"#   line 802 (first segment) uses {IEEE_LINE1_AMPACITY} A")
    w(f"# Base 5 MVA, 24.9 kV; three-phase current base {i_base:.4f} A.")
    w("")
    w("[grid]")
    w("name = ieee34")
    w("slack = 800")
    w("v0 = 1.0")
    w(f"v_min = {fmt(0.95**2)}")
    w(f"v_max = {fmt(1.05**2)}")
    w("allow_zero_shunt = true")
    w("check_voltage_band = true")
    w("")
    w("[base]")
    w("s_base = 5e6")
    w("v_base = 24.9e3")
    w("f_base = 60")
    w("current_base = three_phase")

    for a, b, ft, cfg in IEEE_SEGMENTS:
        w("")
        w(f"[line {b}]")
        if cfg == "XFM-1":
            z1 = positive_sequence(IEEE_CONFIGS["300"][0])
            miles = 10 / FT_PER_MILE
            amps = IEEE_AMPACITY["300"]
            w(f"# XFM-1 500 kVA, ideal; 10 ft config 300 link, {amps} A")
            w(f"up = {a}")
            w(f"r = {fmt(z1.real * miles / z_base)}")
            w(f"x = {fmt(z1.imag * miles / z_base)}")
            w("b = 0")
            w(f"i_max_sq = {fmt((amps / i_base) ** 2)}")
            continue
        z_mile, b_mile = IEEE_CONFIGS[cfg]
        z1 = positive_sequence(z_mile)
        b1 = positive_sequence(b_mile) * 1e-6
        miles = ft / FT_PER_MILE
        amps = IEEE_LINE1_AMPACITY if a == "800" else IEEE_AMPACITY[cfg]
        w(f"# {a}-{b}: {ft} ft, config {cfg}, z1 = {z1.real:.5f} + j{z1.imag:.5f} ohm/mile, "
          f"b1 = {b1 * 1e6:.4f} uS/mile, {amps} A")
        w(f"up = {a}")
        w(f"r = {fmt(z1.real * miles / z_base)}")
        w(f"x = {fmt(z1.imag * miles / z_base)}")
        w(f"b = {fmt(b1 * miles / 2 * z_base)}")
        w(f"i_max_sq = {fmt((amps / i_base) ** 2)}")

    nodes = [b for _, b, _, _ in IEEE_SEGMENTS]
    for node in nodes:
        p_kw, q_kvar = loads.get(node, (0.0, 0.0))
        cap = IEEE_CAPACITORS.get(node, 0.0)
        w("")
        w(f"[bus {node}]")
        if cap:
            w(f"# load {p_kw} kW + j{q_kvar} kvar, capacitor {cap} kvar")
        elif p_kw or q_kvar:
            w(f"# load {p_kw} kW + j{q_kvar} kvar")
        w(f"p = {fmt(p_kw * 1e3 / s_base)}")
        w(f"q = {fmt((q_kvar - cap) * 1e3 / s_base)}")
        w(f"p_load = {fmt(p_kw * 1e3 / s_base)}")
        w(f"q_load = {fmt(q_kvar * 1e3 / s_base)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# CIGRE European MV benchmark, feeder 1 with all switches open
# ---------------------------------------------------------------------------

CIGRE_CABLE = {"r": 0.501, "x": 0.716, "c_nf": 151.1749, "amps": 145.0}

# (from, to, km)
CIGRE_LINES = [
    ("1", "2", 2.82),
    ("2", "3", 4.42),
    ("3", "4", 0.61),
    ("4", "5", 0.56),
    ("5", "6", 1.54),
    ("3", "8", 1.30),
    ("8", "7", 1.67),
    ("8", "9", 0.32),
    ("9", "10", 0.77),
    ("10", "11", 0.33),
]

# Apparent power (MVA) of residential (pf 0.97) and commercial (pf 0.85) loads.
CIGRE_RESIDENTIAL = {"3": 0.285, "4": 0.445, "5": 0.750, "6": 0.565, "8": 0.605, "10": 0.490, "11": 0.340}
CIGRE_COMMERCIAL = {"3": 0.265, "7": 0.090, "9": 0.675, "10": 0.080}

# Active power capacity (MW) of PV, wind, fuel cells, CHP and batteries.
CIGRE_DG = {
    "3": [0.02],
    "4": [0.02],
    "5": [0.03, 0.033, 0.6],
    "6": [0.03],
    "7": [1.5],
    "8": [0.03],
    "9": [0.03, 0.31, 0.212],
    "10": [0.04, 0.014, 0.2],
    "11": [0.01],
}

CIGRE_LINE1_AMPACITY = 974.2786


def cigre_mv():
    s_base = 25e6
    v_base = 20e3
    f = 50.0
    z_base = v_base**2 / s_base
    i_base = s_base / (math.sqrt(3) * v_base)
    c = CIGRE_CABLE

    out = []
    w = out.append
    w("# CIGRE European MV benchmark, feeder 1 (buses 1-11), switches open.")
    w("#")
    w("# Generated by tools/assemble_benchmarks.py from the benchmark's")
    w("# published cable, load and DER tables.")
    w(f"# * cable: R = {c['r']} ohm/km, X = {c['x']} ohm/km, C = {c['c_nf']} nF/km,")
    w(f"#   {c['amps']} A, 50 Hz; shunt b is per end")
    w(f"# * line 2 (first segment) uses {CIGRE_LINE1_AMPACITY} A")
    w("# * residential loads at pf 0.97, commercial/industrial at pf 0.85")
    w("# * dg: total active capacity of PV, wind, fuel cells, CHP and")
    w("#   batteries at the bus (3.079 MW in all); the base case has every")
    w("#   unit at full output, so p_min = load - dg")
    w(f"# Base 25 MVA, 20 kV; three-phase current base {i_base:.4f} A.")
    w("")
    w("[grid]")
    w("name = cigre_mv")
    w("slack = 1")
    w("v0 = 1.0")
    w(f"v_min = {fmt(0.95**2)}")
    w(f"v_max = {fmt(1.05**2)}")
    w("")
    w("[base]")
    w("s_base = 25e6")
    w("v_base = 20e3")
    w("f_base = 50")
    w("current_base = three_phase")
    for a, b, km in CIGRE_LINES:
        amps = CIGRE_LINE1_AMPACITY if a == "1" else c["amps"]
        w("")
        w(f"[line {b}]")
        w(f"# {a}-{b}: {km} km cable, {amps} A")
        w(f"up = {a}")
        w(f"r = {fmt(c['r'] * km / z_base)}")
        w(f"x = {fmt(c['x'] * km / z_base)}")
        w(f"b = {fmt(2 * math.pi * f * c['c_nf'] * 1e-9 * km / 2 * z_base)}")
        w(f"i_max_sq = {fmt((amps / i_base) ** 2)}")
    for _, b, _ in CIGRE_LINES:
        p = q = 0.0
        notes = []
        if b in CIGRE_RESIDENTIAL:
            s = CIGRE_RESIDENTIAL[b]
            p += s * 0.97
            q += s * math.sqrt(1 - 0.97**2)
            notes.append(f"residential {s} MVA")
        if b in CIGRE_COMMERCIAL:
            s = CIGRE_COMMERCIAL[b]
            p += s * 0.85
            q += s * math.sqrt(1 - 0.85**2)
            notes.append(f"commercial {s} MVA")
        dg = sum(CIGRE_DG.get(b, []))
        if dg:
            notes.append(f"dg {dg:.3f} MW")
        p_pu = p * 1e6 / s_base
        q_pu = q * 1e6 / s_base
        dg_pu = dg * 1e6 / s_base
        w("")
        w(f"[bus {b}]")
        if notes:
            w("# " + ", ".join(notes))
        w(f"p_min = {fmt(p_pu - dg_pu)}")
        w(f"p_max = {fmt(p_pu)}")
        w(f"q = {fmt(q_pu)}")
        w(f"p_load = {fmt(p_pu)}")
        w(f"q_load = {fmt(q_pu)}")
        w(f"dg = {fmt(dg_pu)}")
    return "\n".join(out) + "\n"


if __name__ == "__main__":
    (OUT / "ieee34.grid").write_text(ieee34())
    (OUT / "cigre_mv.grid").write_text(cigre_mv())
