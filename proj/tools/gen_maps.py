#!/usr/bin/env python3
"""Generates the bundled road maps under data/maps/.

sf42.json   42 intersections / 125 directed roads. Contains every intersection
            and road that appears in the example prompts shipped with the LLM
            policy, and keeps each printed route the unique tie-broken
            shortest path, so those transcripts replay against real adjacency.
grid1000.json  a ~1000 m x 1000 m street grid with mixed one-way and two-way
            roads (about 260 intersections).

Run from the repository root:  python3 tools/gen_maps.py
"""

import json
import math
import random
from collections import deque

random.seed(20240611)

# Routes printed in the example prompts (node lists are hop-by-hop).
ROUTES = [
    [65334120, 65314158],
    [1580501206, 65334120, 65314158],
    [65317939, 1580501214],
    [65314156, 6988532585, 386885670, 1271001343, 6988532615, 2936165726,
     65317939, 1580501214],
    [1308305528, 6988532585],
    [552853360, 1308305528, 6988532585],
    [65313133, 65313138, 1578907668, 552853360, 1308305528, 6988532585],
    [65328690, 2936165726, 65317939, 65371286, 65332806, 65313133, 65326742,
     65326744, 65343958],
    [65328690, 2936165726, 3902413693, 552853360, 1308305528, 6988532585,
     65303544, 65303546],
    [6925582021, 65306810],
]

# Nodes whose complete out-edge list is printed in the example system prompt.
FIXED_OUT = {
    65293741: [65293743, 65318282, 1723738829],
    65293743: [65293741, 65306931],
    65303533: [65303538],
    65303538: [6378899319, 1271001348],
}
# Partial out-edge lists (the printed list is truncated after these).
PARTIAL_OUT = {
    65303541: [65303544, 1271001343],
}

KNOWN_COORDS = {
    65293741: (-122.4097034, 37.7817636),
    65293743: (-122.4092587, 37.7814105),
    65303533: (-122.4038718, 37.7898332),
}

EXTRA_NODES = [65300001, 65300017, 65312240, 65320455, 65337702]

TARGET_NODES = 42
TARGET_EDGES = 125


def bfs_to(adj_rev, nodes, target):
    dist = {n: None for n in nodes}
    dist[target] = 0
    q = deque([target])
    while q:
        v = q.popleft()
        for u in adj_rev[v]:
            if dist[u] is None:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def route(adj, nodes, src, dst):
    rev = {n: [] for n in nodes}
    for u in nodes:
        for v in adj[u]:
            rev[v].append(u)
    dist = bfs_to(rev, nodes, dst)
    if dist[src] is None:
        return None
    path = [src]
    cur = src
    while cur != dst:
        cur = min(v for v in adj[cur] if dist[v] is not None and dist[v] == dist[cur] - 1)
        path.append(cur)
    return path


def strongly_connected(adj, nodes):
    start = nodes[0]
    for graph in (adj, reverse(adj, nodes)):
        seen = {start}
        q = deque([start])
        while q:
            v = q.popleft()
            for w in graph[v]:
                if w not in seen:
                    seen.add(w)
                    q.append(w)
        if len(seen) != len(nodes):
            return False
    return True


def reverse(adj, nodes):
    rev = {n: set() for n in nodes}
    for u in nodes:
        for v in adj[u]:
            rev[v].add(u)
    return rev


def routes_hold(adj, nodes):
    for r in ROUTES:
        if route(adj, nodes, r[0], r[-1]) != r:
            return False
    return True


def edge_count(adj):
    return sum(len(v) for v in adj.values())


def build_sf42():
    nodes = set()
    for r in ROUTES:
        nodes.update(r)
    for u, vs in list(FIXED_OUT.items()) + list(PARTIAL_OUT.items()):
        nodes.add(u)
        nodes.update(vs)
    nodes.update(EXTRA_NODES)
    nodes = sorted(nodes)
    assert len(nodes) == TARGET_NODES, len(nodes)

    adj = {n: set() for n in nodes}
    for r in ROUTES:
        for a, b in zip(r, r[1:]):
            adj[a].add(b)
    for u, vs in list(FIXED_OUT.items()) + list(PARTIAL_OUT.items()):
        adj[u].update(vs)
    assert routes_hold(adj, nodes)

    # Lay nodes out on a jittered 7x6 lattice so that "nearby" candidate
    # roads look like real street segments.
    order = nodes[:]
    random.shuffle(order)
    coords = {}
    for idx, n in enumerate(order):
        row, col = divmod(idx, 7)
        lon = -122.4100 + col * 0.00075 + random.uniform(-0.0002, 0.0002)
        lat = 37.7790 + row * 0.00070 + random.uniform(-0.0002, 0.0002)
        coords[n] = (round(lon, 7), round(lat, 7))
    coords.update(KNOWN_COORDS)

    def nearby(u):
        ux, uy = coords[u]
        return sorted((v for v in nodes if v != u),
                      key=lambda v: math.hypot(coords[v][0] - ux, coords[v][1] - uy))[:8]

    fixed = set(FIXED_OUT)

    def reach(src_node):
        seen = {src_node}
        q = deque([src_node])
        while q:
            x = q.popleft()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    q.append(y)
        return seen

    # Grow reachability until strongly connected: cycle-closing edges (v
    # already reaches u) first, then by reachability gain, then by length.
    def dist2(u, v):
        return math.hypot(coords[v][0] - coords[u][0], coords[v][1] - coords[u][1])

    while not strongly_connected(adj, nodes):
        reach_from = {n: reach(n) for n in nodes}
        best = None
        for u in nodes:
            if u in fixed:
                continue
            for v in nodes:
                if v == u or v in adj[u]:
                    continue
                if v not in reach_from[u]:
                    gain = len(reach_from[v] - reach_from[u])
                    key = (0 if u in reach_from[v] else 1, -gain, dist2(u, v))
                    if best is None or key < best[0]:
                        adj[u].add(v)
                        ok = routes_hold(adj, nodes)
                        adj[u].discard(v)
                        if ok:
                            best = (key, u, v)
        if best is None:
            raise SystemExit("cannot make sf42 strongly connected")
        adj[best[1]].add(best[2])

    def nearby(u):
        return sorted((v for v in nodes if v != u), key=lambda v: dist2(u, v))[:8]

    candidates = [(u, v) for u in nodes if u not in fixed for v in nearby(u)
                  if v not in adj[u]]
    random.shuffle(candidates)
    candidates.sort(key=lambda e: 0 if e[0] in adj[e[1]] else 1)

    for u, v in candidates:
        if edge_count(adj) >= TARGET_EDGES:
            break
        adj[u].add(v)
        if not routes_hold(adj, nodes):
            adj[u].discard(v)

    assert edge_count(adj) == TARGET_EDGES, edge_count(adj)
    assert strongly_connected(adj, nodes)
    return nodes, coords, adj


def build_grid():
    # 1000 m square, ~62 m blocks -> 17 x 16 intersections minus a few removed.
    cols, rows = 17, 16
    dlon = 1000.0 / (cols - 1) / (111320.0 * math.cos(math.radians(37.78)))
    dlat = 1000.0 / (rows - 1) / 110540.0
    nodes = []
    coords = {}
    ids = {}
    base = 70000000
    for r in range(rows):
        for c in range(cols):
            nid = base + r * 1000 + c * 7 + random.randint(0, 6)
            ids[(r, c)] = nid
            nodes.append(nid)
            coords[nid] = (round(-122.4200 + c * dlon + random.uniform(-dlon, dlon) * 0.1, 7),
                           round(37.7700 + r * dlat + random.uniform(-dlat, dlat) * 0.1, 7))
    adj = {n: set() for n in nodes}
    # Alternate one-way directions on odd streets, two-way on even ones.
    for r in range(rows):
        for c in range(cols - 1):
            a, b = ids[(r, c)], ids[(r, c + 1)]
            if r % 2 == 0:
                adj[a].add(b)
                adj[b].add(a)
            elif r % 4 == 1:
                adj[a].add(b)
            else:
                adj[b].add(a)
    for c in range(cols):
        for r in range(rows - 1):
            a, b = ids[(r, c)], ids[(r + 1, c)]
            if c % 2 == 0:
                adj[a].add(b)
                adj[b].add(a)
            elif c % 4 == 1:
                adj[a].add(b)
            else:
                adj[b].add(a)
    nodes.sort()
    assert strongly_connected(adj, nodes)
    return nodes, coords, adj


def write(path, nodes, coords, adj):
    doc = {
        "nodes": [{"id": n, "lon": coords[n][0], "lat": coords[n][1]} for n in nodes],
        "edges": [{"from": u, "to": v} for u in nodes for v in sorted(adj[u])],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")
    print(f"{path}: {len(nodes)} nodes, {edge_count(adj)} edges")


if __name__ == "__main__":
    write("data/maps/sf42.json", *build_sf42())
    write("data/maps/grid1000.json", *build_grid())
