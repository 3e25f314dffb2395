"""Regenerates campus.osm and T1.trace.jsonl.

Shapes are laid out in local meters (x east, y north) around CENTER and
converted with GeographicLib: a point (x, y) sits hypot(x, y) meters from
CENTER along azimuth atan2(x, y). Coordinates are rounded to 7 decimals.
"""

import json
import math
from pathlib import Path

from geographiclib.geodesic import Geodesic

CENTER = (39.087, 26.554)
HERE = Path(__file__).parent


def geo(x, y):
    if x == 0 and y == 0:
        return CENTER
    g = Geodesic.WGS84.Direct(CENTER[0], CENTER[1], math.degrees(math.atan2(x, y)), math.hypot(x, y))
    return round(g["lat2"], 7), round(g["lon2"], 7)


nodes = {}  # (x, y) -> id


def node(x, y):
    if (x, y) not in nodes:
        nodes[(x, y)] = 1000 + len(nodes) + 1
    return nodes[(x, y)]


ways = [
    (101, "footway", [(-100, -100), (-100, -50), (-100, 0), (-100, 50), (-100, 100)]),  # V1
    (102, "footway", [(0, -100), (0, -50), (0, 0), (8, 50), (0, 100)]),  # V2
    (103, "footway", [(100, -100), (100, -50), (100, 0), (100, 50), (100, 100)]),  # V3
    (104, "residential", [(-100, -100), (-50, -100), (0, -100), (50, -100), (100, -100)]),  # H1
    (105, "residential", [(-100, 0), (-50, 0), (0, 0), (100, 0)]),  # H2
    (106, "residential", [(-100, 100), (-50, 100), (0, 100), (50, 100), (100, 100)]),  # H3
    (107, "residential", [(100, 0), (170, 0), (210, 0), (250, 0)]),  # W7
    (108, "footway", [(0, 100), (0, 180), (0, 220), (0, 260)]),  # W8
    (109, "footway", [(-60, 180), (0, 180), (60, 180)]),  # W9
    (110, "motorway", [(-150, -50), (-150, 50)]),  # W10
    (111, "footway", [(-80, -140), (-50, -150), (-20, -165)]),  # W11
]
building = (112, [(-40, 30), (-20, 30), (-20, 60), (-40, 60)])
pois = [
    ((-95, 5), "pharmacy", "Campus Pharmacy"),
    ((55, 62), "bar", "Corner Bar"),
    ((150, 150), "hospital", "General Hospital"),
]

for _, _, pts in ways:
    for p in pts:
        node(*p)
for p in building[1]:
    node(*p)
poi_ids = [node(*p) for p, _, _ in pois]

lines = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6" generator="make_campus.py">']
tags = {poi_ids[i]: (pois[i][1], pois[i][2]) for i in range(len(pois))}
for (x, y), nid in sorted(nodes.items(), key=lambda kv: kv[1]):
    lat, lon = geo(x, y)
    if nid in tags:
        amenity, name = tags[nid]
        lines.append(f'  <node id="{nid}" lat="{lat:.7f}" lon="{lon:.7f}">')
        lines.append(f'    <tag k="amenity" v="{amenity}"/>')
        lines.append(f'    <tag k="name" v="{name}"/>')
        lines.append("  </node>")
    else:
        lines.append(f'  <node id="{nid}" lat="{lat:.7f}" lon="{lon:.7f}"/>')
for wid, highway, pts in ways:
    lines.append(f'  <way id="{wid}">')
    lines += [f'    <nd ref="{nodes[p]}"/>' for p in pts]
    lines.append(f'    <tag k="highway" v="{highway}"/>')
    lines.append("  </way>")
wid, pts = building
lines.append(f'  <way id="{wid}">')
lines += [f'    <nd ref="{nodes[p]}"/>' for p in pts + [pts[0]]]
lines.append('    <tag k="building" v="yes"/>')
lines.append("  </way>")
lines.append("</osm>")
(HERE / "campus.osm").write_text("\n".join(lines) + "\n")

# T1: east along the central street, across the middle intersection, then
# back. 2 m per second, one fix per second starting at t = 1.
xs = [-29 + 2 * k for k in range(36)] + [41 - 2 * k for k in range(1, 11)]
with open(HERE / "T1.trace.jsonl", "w") as f:
    for k, x in enumerate(xs):
        lat, lon = geo(x, 0)
        f.write(json.dumps({"t": float(k + 1), "lat": lat, "lon": lon}) + "\n")

print(len(nodes), "nodes", len(ways) + 1, "ways", len(pois), "tagged nodes,", len(xs), "fixes")
