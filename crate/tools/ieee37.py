"""IEEE 37-bus test feeder, transcribed from the published feeder data.

Nominal 4.8 kV delta, all segments three-phase underground cable. The
substation regulator is treated as holding the source voltage, so 799 is the
substation bus.
"""

KV_LL = 4.8
SOURCE = "799"

# phase impedance matrices, ohm per mile (upper triangle, symmetric)
CONFIGS = {
    "721": [
        [0.2926 + 0.1973j, 0.0673 - 0.0368j, 0.0337 - 0.0417j],
        [0, 0.2646 + 0.1900j, 0.0673 - 0.0368j],
        [0, 0, 0.2926 + 0.1973j],
    ],
    "722": [
        [0.4751 + 0.2973j, 0.1629 - 0.0326j, 0.1234 - 0.0607j],
        [0, 0.4488 + 0.2678j, 0.1629 - 0.0326j],
        [0, 0, 0.4751 + 0.2973j],
    ],
    "723": [
        [1.2936 + 0.6713j, 0.4871 + 0.2111j, 0.4585 + 0.1521j],
        [0, 1.3022 + 0.6326j, 0.4871 + 0.2111j],
        [0, 0, 1.2936 + 0.6713j],
    ],
    "724": [
        [2.0952 + 0.7758j, 0.5204 + 0.2738j, 0.4926 + 0.2123j],
        [0, 2.1068 + 0.7398j, 0.5204 + 0.2738j],
        [0, 0, 2.0952 + 0.7758j],
    ],
}

# 500 kVA 4.8/0.48 kV, R = 0.09 %, X = 1.81 % on its own rating, restated on
# a 1 MVA per phase base
XFM1_PU = (0.0009 + 0.0181j) * 3.0 / 0.5

# (from, to, length ft, config)
SEGMENTS = [
    ("799", "701", 1850, "721"),
    ("701", "702", 960, "722"),
    ("702", "705", 400, "724"),
    ("702", "713", 360, "723"),
    ("702", "703", 1320, "722"),
    ("703", "727", 240, "724"),
    ("703", "730", 600, "723"),
    ("704", "714", 80, "724"),
    ("704", "720", 800, "723"),
    ("705", "742", 320, "724"),
    ("705", "712", 240, "724"),
    ("706", "725", 280, "724"),
    ("707", "724", 760, "724"),
    ("707", "722", 120, "724"),
    ("708", "733", 320, "723"),
    ("708", "732", 320, "724"),
    ("709", "731", 600, "723"),
    ("709", "708", 320, "723"),
    ("710", "735", 200, "724"),
    ("710", "736", 1280, "724"),
    ("711", "741", 400, "723"),
    ("711", "740", 200, "724"),
    ("713", "704", 520, "723"),
    ("714", "718", 520, "724"),
    ("720", "707", 920, "724"),
    ("720", "706", 600, "723"),
    ("727", "744", 280, "723"),
    ("730", "709", 200, "723"),
    ("733", "734", 560, "723"),
    ("734", "737", 640, "723"),
    ("734", "710", 520, "724"),
    ("737", "738", 400, "723"),
    ("738", "711", 400, "723"),
    ("744", "728", 200, "724"),
    ("744", "729", 280, "724"),
    ("709", "775", 0, "XFM-1"),
]

# delta spot loads (kW, kvar) on phases ab, bc, ca
LOADS = {
    "701": [(140, 70), (140, 70), (350, 175)],
    "712": [(0, 0), (0, 0), (85, 40)],
    "713": [(0, 0), (0, 0), (85, 40)],
    "714": [(17, 8), (21, 10), (0, 0)],
    "718": [(85, 40), (0, 0), (0, 0)],
    "720": [(0, 0), (0, 0), (85, 40)],
    "722": [(0, 0), (140, 70), (21, 10)],
    "724": [(0, 0), (42, 21), (0, 0)],
    "725": [(0, 0), (42, 21), (0, 0)],
    "727": [(0, 0), (0, 0), (42, 21)],
    "728": [(42, 21), (42, 21), (42, 21)],
    "729": [(42, 21), (0, 0), (0, 0)],
    "730": [(0, 0), (0, 0), (85, 40)],
    "731": [(0, 0), (85, 40), (0, 0)],
    "732": [(0, 0), (0, 0), (42, 21)],
    "733": [(85, 40), (0, 0), (0, 0)],
    "734": [(0, 0), (0, 0), (42, 21)],
    "735": [(0, 0), (0, 0), (85, 40)],
    "736": [(0, 0), (42, 21), (0, 0)],
    "737": [(140, 70), (0, 0), (0, 0)],
    "738": [(126, 62), (0, 0), (0, 0)],
    "740": [(0, 0), (0, 0), (85, 40)],
    "741": [(0, 0), (0, 0), (42, 21)],
    "742": [(8, 4), (85, 40), (0, 0)],
    "744": [(42, 21), (0, 0), (0, 0)],
}
