"""OBJ fixture builders for tests."""

from pathlib import Path


def cube_obj(side=1.0, center=(0.0, 0.0, 0.0)):
    """Axis-aligned cube: 8 vertices, 6 quad faces (12 triangles after fanning)."""
    s = side / 2.0
    cx, cy, cz = center
    verts = [
        (cx - s, cy - s, cz - s),
        (cx + s, cy - s, cz - s),
        (cx + s, cy + s, cz - s),
        (cx - s, cy + s, cz - s),
        (cx - s, cy - s, cz + s),
        (cx + s, cy - s, cz + s),
        (cx + s, cy + s, cz + s),
        (cx - s, cy + s, cz + s),
    ]
    faces = [
        (1, 2, 3, 4),  # back  (z = -s)
        (5, 8, 7, 6),  # front (z = +s)
        (1, 5, 6, 2),  # bottom
        (4, 3, 7, 8),  # top
        (1, 4, 8, 5),  # left
        (2, 6, 7, 3),  # right
    ]
    lines = [f"v {x} {y} {z}" for x, y, z in verts]
    lines += ["f " + " ".join(str(i) for i in face) for face in faces]
    return "\n".join(lines) + "\n"


def pyramid_obj(base=1.0, height=1.0):
    """Square base plus apex: 5 vertices, 1 quad + 4 triangles."""
    b = base / 2.0
    verts = [
        (-b, 0.0, -b),
        (b, 0.0, -b),
        (b, 0.0, b),
        (-b, 0.0, b),
        (0.0, height, 0.0),
    ]
    faces = [(1, 4, 3, 2), (1, 2, 5), (2, 3, 5), (3, 4, 5), (4, 1, 5)]
    lines = [f"v {x} {y} {z}" for x, y, z in verts]
    lines += ["f " + " ".join(str(i) for i in face) for face in faces]
    return "\n".join(lines) + "\n"


def wedge_obj(width=1.0, height=0.8, depth=1.2):
    """Triangular prism: 6 vertices, 2 triangles + 3 quads."""
    w, h, d = width / 2.0, height, depth / 2.0
    verts = [
        (-w, 0.0, -d),
        (w, 0.0, -d),
        (0.0, h, -d),
        (-w, 0.0, d),
        (w, 0.0, d),
        (0.0, h, d),
    ]
    faces = [(1, 3, 2), (4, 5, 6), (1, 2, 5, 4), (2, 3, 6, 5), (3, 1, 4, 6)]
    lines = [f"v {x} {y} {z}" for x, y, z in verts]
    lines += ["f " + " ".join(str(i) for i in face) for face in faces]
    return "\n".join(lines) + "\n"


def tetra_obj(scale=1.0):
    s = scale
    verts = [(s, s, s), (s, -s, -s), (-s, s, -s), (-s, -s, s)]
    faces = [(1, 2, 3), (1, 4, 2), (1, 3, 4), (2, 4, 3)]
    lines = [f"v {x} {y} {z}" for x, y, z in verts]
    lines += ["f " + " ".join(str(i) for i in face) for face in faces]
    return "\n".join(lines) + "\n"


def write_obj(directory, name, text):
    path = Path(directory) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
