#!/usr/bin/env python3
"""Builds data/feeders/*.json from the vendored distopf tables and the
IEEE 37-bus definition in ieee37.py.

Conventions applied while converting:
  * base power 1 MVA per phase, base voltage the feeder's primary
    line-to-neutral voltage; impedances and powers are written in p.u.
  * the source transformer is dropped; its secondary bus is the substation
  * regulators and closed switches are contracted (the downstream bus is
    merged into the upstream one, loads and capacitors are summed)
  * open switches are removed together with anything they isolate
  * loads are constant power at nominal voltage (distopf already splits
    delta loads to wye)

Usage: python3 tools/build_feeders.py [--out data/feeders]
"""

import argparse
import csv
import json
import math
import os
from collections import defaultdict, deque

import ieee37

PHASES = "abc"
S_BASE = 1e6
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SRC = os.path.join(ROOT, "data", "sources", "distopf")


def sort_phases(p):
    return "".join(ph for ph in PHASES if ph in p)


def read(case, name):
    with open(os.path.join(SRC, case, name)) as f:
        return list(csv.DictReader(f))


class Feeder:
    def __init__(self):
        self.bus = {}  # id -> dict(name, phases, p, q, cap)
        self.lines = []  # dict(from, to, phases, z, name)
        self.root = None
        self.vref = None
        self.base_voltage = None

    def add_bus(self, bid, name, phases):
        self.bus[bid] = {
            "name": name,
            "phases": sort_phases(phases),
            "p": defaultdict(float),
            "q": defaultdict(float),
            "cap": defaultdict(float),
        }

    def contract(self, parent, child):
        """Merges child into parent and re-hangs child's lines."""
        pb, cb = self.bus[parent], self.bus.pop(child)
        for k in ("p", "q", "cap"):
            for ph, v in cb[k].items():
                pb[k][ph] += v
        kept = []
        for ln in self.lines:
            if {ln["from"], ln["to"]} == {parent, child}:
                continue
            if ln["from"] == child:
                ln["from"] = parent
            if ln["to"] == child:
                ln["to"] = parent
            kept.append(ln)
        self.lines = kept

    def prune(self):
        """Drops buses not reachable from the root."""
        adj = defaultdict(list)
        for ln in self.lines:
            adj[ln["from"]].append(ln["to"])
            adj[ln["to"]].append(ln["from"])
        seen = {self.root}
        todo = [self.root]
        while todo:
            u = todo.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        dropped = [b for b in self.bus if b not in seen]
        for b in dropped:
            del self.bus[b]
        self.lines = [ln for ln in self.lines if ln["from"] in seen and ln["to"] in seen]
        return dropped

    def document(self, vband=0.05):
        """Breadth-first renumbering from the root, children in ascending
        original id order."""
        adj = defaultdict(list)
        for ln in self.lines:
            adj[ln["from"]].append(ln)
            adj[ln["to"]].append(ln)
        order = {self.root: 0}
        queue = deque([self.root])
        out_lines = []
        while queue:
            u = queue.popleft()
            nbrs = []
            for ln in adj[u]:
                v = ln["to"] if ln["from"] == u else ln["from"]
                if v not in order:
                    nbrs.append((v, ln))
            for v, ln in sorted(nbrs, key=lambda t: t[0]):
                order[v] = len(order)
                queue.append(v)
                out_lines.append((u, v, ln))
        assert len(order) == len(self.bus), "feeder is not connected"
        assert len(out_lines) == len(self.bus) - 1, "feeder is not radial"

        buses = []
        for bid in sorted(order, key=order.get):
            b = self.bus[bid]
            ph = b["phases"]
            doc = {
                "id": order[bid],
                "name": b["name"],
                "phases": ph,
                "vmin": [round(1 - vband, 12)] * len(ph),
                "vmax": [round(1 + vband, 12)] * len(ph),
            }
            if bid == self.root:
                doc["vref"] = [
                    [self.vref * math.cos(a), self.vref * math.sin(a)]
                    for a in (-2 * math.pi / 3 * PHASES.index(x) for x in ph)
                ]
                doc["vmin"] = [self.vref] * len(ph)
                doc["vmax"] = [self.vref] * len(ph)
            else:
                devs = []
                p = [b["p"][x] for x in ph]
                q = [b["q"][x] for x in ph]
                if any(v != 0.0 for v in p + q):
                    devs.append({"type": "load", "p": p, "q": q})
                cap = [b["cap"][x] for x in ph]
                if any(v != 0.0 for v in cap):
                    devs.append({"type": "capacitor", "qmax": cap})
                if devs:
                    doc["devices"] = devs
            buses.append(doc)

        lines = []
        for u, v, ln in out_lines:
            ph = ln["phases"]
            idx = [PHASES.index(x) for x in ph]
            z = [[[ln["z"][i][j].real, ln["z"][i][j].imag] for j in idx] for i in idx]
            lines.append({"from": order[u], "to": order[v], "name": ln["name"], "phases": ph, "z": z})
        return {
            "base_power_va": S_BASE,
            "base_voltage_v": self.base_voltage,
            "per_unit": True,
            "buses": buses,
            "lines": lines,
        }


def full_matrix(row):
    z = [[0j] * 3 for _ in range(3)]
    for i, a in enumerate(PHASES):
        for j, b in enumerate(PHASES):
            key = a + b if i <= j else b + a
            z[i][j] = complex(float(row["r_" + key]), float(row["x_" + key]))
    return z


def from_distopf(case):
    f = Feeder()
    buses = read(case, "bus_data.csv")
    for r in buses:
        bid = int(r["id"])
        f.add_bus(bid, r["name"], r["phases"])
        for ph in PHASES:
            f.bus[bid]["p"][ph] += float(r["pl_" + ph])
            f.bus[bid]["q"][ph] += float(r["ql_" + ph])
        if r["bus_type"] == "SWING":
            swing = bid
            f.vref = float(r["v_a"])
    for r in read(case, "cap_data.csv"):
        for ph in PHASES:
            f.bus[int(r["id"])]["cap"][ph] += float(r["q_" + ph])

    contract = []
    source_secondary = swing
    for r in read(case, "branch_data.csv"):
        fb, tb = int(r["fb"]), int(r["tb"])
        kind, status = r["type"], r["status"].upper()
        if kind == "switch" and status == "OPEN":
            continue
        f.lines.append({"from": fb, "to": tb, "phases": sort_phases(r["phases"]), "z": full_matrix(r), "name": r["name"]})
        if kind == "switch" or (kind == "transformer" and r["name"].startswith("reg")):
            contract.append((fb, tb))
        elif kind == "transformer" and fb == swing:
            contract.append((fb, tb))
            source_secondary = tb
    merged = {}
    for fb, tb in contract:
        # follow earlier merges
        while fb not in f.bus:
            fb = merged[fb]
        merged[tb] = fb
        f.contract(fb, tb)
    f.root = swing
    # the substation takes the name and voltage base of the source secondary
    sec = next(r for r in buses if int(r["id"]) == source_secondary)
    f.bus[swing]["name"] = sec["name"]
    f.base_voltage = float(sec["v_ln_base"])
    dropped = f.prune()
    return f, dropped


def from_ieee37():
    f = Feeder()
    v_ln = ieee37.KV_LL * 1e3 / math.sqrt(3)
    z_base = v_ln**2 / S_BASE
    names = sorted({a for a, _, _, _ in ieee37.SEGMENTS} | {b for _, b, _, _ in ieee37.SEGMENTS}, key=int)
    for n in names:
        f.add_bus(int(n), n, "abc")
    for a, b, feet, cfg in ieee37.SEGMENTS:
        if cfg == "XFM-1":
            z = [[ieee37.XFM1_PU if i == j else 0j for j in range(3)] for i in range(3)]
        else:
            m = ieee37.CONFIGS[cfg]
            z = [[m[min(i, j)][max(i, j)] * feet / 5280.0 / z_base for j in range(3)] for i in range(3)]
        f.lines.append({"from": int(a), "to": int(b), "phases": "abc", "z": z, "name": f"{a}-{b}"})
    # delta load S_xy: phase x takes S/sqrt3 at -30 deg, phase y at +30 deg
    rot = {-1: complex(math.cos(math.pi / 6), -math.sin(math.pi / 6)), 1: complex(math.cos(math.pi / 6), math.sin(math.pi / 6))}
    for bus, loads in ieee37.LOADS.items():
        for (x, y), (kw, kvar) in zip((("a", "b"), ("b", "c"), ("c", "a")), loads):
            s = complex(kw, kvar) * 1e3 / S_BASE / math.sqrt(3)
            for ph, sgn in ((x, -1), (y, 1)):
                w = s * rot[sgn]
                f.bus[int(bus)]["p"][ph] += w.real
                f.bus[int(bus)]["q"][ph] += w.imag
    f.root = int(ieee37.SOURCE)
    f.vref = 1.0
    f.base_voltage = v_ln
    return f, []


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join(ROOT, "data", "feeders"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    builds = [(c, lambda c=c: from_distopf(c)) for c in ("ieee13", "ieee34", "ieee123")]
    builds.append(("ieee37", from_ieee37))
    for name, build in builds:
        f, dropped = build()
        doc = f.document()
        path = os.path.join(args.out, name + ".json")
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        load = sum(sum(d["p"]) for b in doc["buses"] for d in b.get("devices", []) if d["type"] == "load")
        print(f"{name}: {len(doc['buses'])} buses, load {load:.4f} p.u., dropped {dropped}")


if __name__ == "__main__":
    main()
