"""Hand-built road graphs shared by the routing tests."""
from chargegrid.roadnet import build_graph


def square():
    nodes = [{"id": i, "x": x, "y": y} for i, (x, y) in
             enumerate([(0, 0), (100, 0), (100, 100), (0, 100)])]
    edges = [{"id": f"e{k}", "u": k, "v": (k + 1) % 4, "road_key": f"r{k}"} for k in range(4)]
    return build_graph(nodes, edges, "square")


def grid3(charging_column=1):
    """3x3 lattice, 100 m blocks; each row and column is one road."""
    nodes = [{"id": f"{i}{j}", "x": 100 * i, "y": 100 * j, "zone": "A" if i == 0 else "B"}
             for i in range(3) for j in range(3)]
    edges = []
    for i in range(3):
        for j in range(3):
            if i < 2:
                edges.append({"id": f"h{i}{j}", "u": f"{i}{j}", "v": f"{i + 1}{j}", "road_key": f"row{j}"})
            if j < 2:
                edges.append({"id": f"v{i}{j}", "u": f"{i}{j}", "v": f"{i}{j + 1}", "road_key": f"col{i}"})
    g = build_graph(nodes, edges, "grid3")
    return g, [k == f"col{charging_column}" for k in g.road_keys]


def irregular():
    """Non-lattice graph with a parallel edge and several equal-length routes
    that differ in charged length."""
    nodes = [{"id": n, "x": x, "y": y} for n, x, y in
             [("a", 0, 0), ("b", 60, 0), ("c", 60, 80), ("d", 140, 80), ("e", 0, 80),
              ("f", 140, 0), ("g", 200, 40)]]
    spec = [("a", "b", 60, "ab"), ("b", "c", 80, "bc"), ("a", "e", 80, "ae"), ("e", "c", 60, "ec"),
            ("c", "d", 80, "cd"), ("b", "f", 80, "bf"), ("f", "d", 80, "fd"), ("d", "g", 72, "dg"),
            ("f", "g", 72, "fg"), ("a", "b", 60, "ab2"), ("a", "f", 140, "af")]
    edges = [{"id": f"x{k}", "u": u, "v": v, "length": w, "road_key": key}
             for k, (u, v, w, key) in enumerate(spec)]
    g = build_graph(nodes, edges, "irregular")
    charging = [key in ("ec", "fd", "ab2") for key in g.road_keys]
    return g, charging
