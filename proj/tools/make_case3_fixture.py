#!/usr/bin/env python3
"""Generate the Case 3 fracture-network mesh document (data/case3_mesh.json).

The unit square holds ten straight fractures and a horizontal horizon at
y = 0.5. Everything is handed to Triangle as a planar straight-line graph;
afterwards every node on a fracture is duplicated once per sector of
triangles separated by fracture edges, and the copies are tied together
through side_pairs so the loader can rebuild the fracture topology.

Usage: make_case3_fixture.py [--max-area A] [--min-angle Q] [--out PATH]
"""

import argparse
import json
from collections import defaultdict
from pathlib import Path

import triangle

FRACTURES = {
    1: ((0.05, 0.416), (0.22, 0.0624)),
    2: ((0.05, 0.275), (0.25, 0.135)),
    3: ((0.15, 0.63), (0.45, 0.09)),
    4: ((0.15, 0.9167), (0.4, 0.5)),
    5: ((0.65, 0.8333), (0.849723, 0.167625)),
    6: ((0.7, 0.235), (0.849723, 0.167625)),
    7: ((0.6, 0.38), (0.85, 0.2675)),
    8: ((0.35, 0.9714), (0.8, 0.7143)),
    9: ((0.75, 0.9574), (0.95, 0.8155)),
    10: ((0.15, 0.8363), (0.4, 0.9727)),
}
HORIZON_Y = 0.5
HORIZON_MARK = 20
BOUNDARY_MARKS = {31: "ymin", 32: "xmax", 33: "ymax", 34: "xmin"}
TOL = 1e-9


def seg_intersection(p, q, r, s):
    """Parameter pair (t, u) of the crossing of p + t (q - p) and r + u (s - r), or None."""
    d1 = (q[0] - p[0], q[1] - p[1])
    d2 = (s[0] - r[0], s[1] - r[1])
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(den) < 1e-14:
        return None
    w = (r[0] - p[0], r[1] - p[1])
    t = (w[0] * d2[1] - w[1] * d2[0]) / den
    u = (w[0] * d1[1] - w[1] * d1[0]) / den
    if -TOL <= t <= 1 + TOL and -TOL <= u <= 1 + TOL:
        return t, u
    return None


def build_pslg():
    lines = {k: v for k, v in FRACTURES.items()}
    lines[HORIZON_MARK] = ((0.0, HORIZON_Y), (1.0, HORIZON_Y))
    cuts = defaultdict(set)
    keys = sorted(lines)
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            hit = seg_intersection(*lines[a], *lines[b])
            if hit:
                cuts[a].add(min(max(hit[0], 0.0), 1.0))
                cuts[b].add(min(max(hit[1], 0.0), 1.0))

    vertices, index = [], {}

    def vid(pt):
        key = (round(pt[0], 9), round(pt[1], 9))
        if key not in index:
            index[key] = len(vertices)
            vertices.append(pt)
        return index[key]

    segments, markers = [], []
    for k in keys:
        p, q = lines[k]
        ts = sorted({0.0, 1.0} | cuts[k])
        pts = [(p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])) for t in ts]
        for a, b in zip(pts, pts[1:]):
            segments.append((vid(a), vid(b)))
            markers.append(k)
    corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    sides = {31: (0, 1), 32: (1, 2), 33: (2, 3), 34: (3, 0)}
    for mark, (i, j) in sides.items():
        a, b = corners[i], corners[j]
        on = sorted(
            (v for v in vertices if abs((v[0] - a[0]) * (b[1] - a[1]) - (v[1] - a[1]) * (b[0] - a[0])) < TOL),
            key=lambda v: (v[0] - a[0]) * (b[0] - a[0]) + (v[1] - a[1]) * (b[1] - a[1]),
        )
        chain = [a] + [v for v in on if v not in (a, b)] + [b]
        for u, v in zip(chain, chain[1:]):
            segments.append((vid(u), vid(v)))
            markers.append(mark)
    return vertices, segments, markers


def mesh(max_area, min_angle):
    vertices, segments, markers = build_pslg()
    out = triangle.triangulate(
        {"vertices": vertices, "segments": segments, "segment_markers": markers},
        f"pq{min_angle}a{max_area}",
    )
    return out


def split_nodes(coords, tris, frac_edges):
    """Duplicate fracture nodes per sector. Returns new coords, tris and copy lists."""
    incident = defaultdict(list)
    for t, tri in enumerate(tris):
        for n in tri:
            incident[n].append(t)
    frac_nodes = {n for e in frac_edges for n in e}
    coords = [list(c) for c in coords]
    tris = [list(t) for t in tris]
    copies = {}
    for n in sorted(frac_nodes):
        ts = incident[n]
        parent = {t: t for t in ts}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, a in enumerate(ts):
            for b in ts[i + 1:]:
                shared = set(tris[a]) & set(tris[b])
                if len(shared) == 2:
                    e = tuple(sorted(shared))
                    if e not in frac_edges:
                        parent[find(a)] = find(b)
        groups = defaultdict(list)
        for t in ts:
            groups[find(t)].append(t)
        ids = [n]
        for g in list(groups.values())[1:]:
            new = len(coords)
            coords.append(list(coords[n]))
            for t in g:
                tris[t] = [new if x == n else x for x in tris[t]]
            ids.append(new)
        copies[n] = ids
    return coords, tris, copies


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-area", type=float, default=0.0008)
    ap.add_argument("--min-angle", type=float, default=30.0)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "case3_mesh.json"))
    args = ap.parse_args()

    out = mesh(args.max_area, args.min_angle)
    coords = [tuple(v) for v in out["vertices"].tolist()]
    tris = out["triangles"].tolist()
    segs = out["segments"].tolist()
    marks = out["segment_markers"].ravel().tolist()

    frac_edges = set()
    per_fracture = defaultdict(set)
    boundary = defaultdict(list)
    for (a, b), m in zip(segs, marks):
        if m in FRACTURES:
            frac_edges.add(tuple(sorted((a, b))))
            per_fracture[m].update((a, b))
        elif m in BOUNDARY_MARKS:
            boundary[BOUNDARY_MARKS[m]].append((a, b))

    # Counter-clockwise triangles.
    for t in tris:
        (x0, y0), (x1, y1), (x2, y2) = (coords[i] for i in t)
        if (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0) < 0:
            t[1], t[2] = t[2], t[1]
    regions = []
    for t in tris:
        cy = sum(coords[i][1] for i in t) / 3.0
        regions.append(0 if cy < HORIZON_Y else 1)

    new_coords, new_tris, copies = split_nodes(coords, tris, frac_edges)

    polylines, meeting = [], defaultdict(set)
    for fid in sorted(per_fracture):
        (px, py), (qx, qy) = FRACTURES[fid]
        d = (qx - px, qy - py)
        nodes = sorted(per_fracture[fid], key=lambda n: (coords[n][0] - px) * d[0] + (coords[n][1] - py) * d[1])
        for n in nodes:
            meeting[n].add(fid)
        pairs = [[copies[n][0], c] for n in nodes for c in copies[n][1:]]
        polylines.append({"id": fid, "nodes": nodes, "side_pairs": pairs})
    intersections = [
        {"node": n, "branches": sorted(fids)} for n, fids in sorted(meeting.items()) if len(fids) >= 2
    ]

    tags = {name: [list(e) for e in edges] for name, edges in boundary.items()}
    doc = {
        "dim": 2,
        "nodes": [[round(x, 15), round(y, 15)] for x, y in new_coords],
        "cells": new_tris,
        "cell_regions": regions,
        "boundary_tags": tags,
        "fault_polylines": polylines,
        "intersections": intersections,
        "horizon_y": HORIZON_Y,
    }
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(doc, separators=(",", ":")) + "\n")
    nfrac = sum(len(p["nodes"]) - 1 for p in polylines)
    print(
        f"{args.out}: {len(new_tris)} triangles, {nfrac} fracture cells, {len(intersections)} intersections, "
        f"estimated dofs {len(new_tris) + 3 * nfrac + len(intersections) + sum(2 * len(i['branches']) for i in intersections)}"
    )


if __name__ == "__main__":
    main()
