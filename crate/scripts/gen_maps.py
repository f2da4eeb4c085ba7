#!/usr/bin/env python3
"""Regenerates the substitute benchmark maps under maps/ (deterministic)."""
import random
from collections import deque
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "maps"


def write(name, rows):
    h, w = len(rows), len(rows[0])
    body = "\n".join("".join(r) for r in rows)
    (OUT / f"{name}.map").write_text(f"type octile\nheight {h}\nwidth {w}\nmap\n{body}\n")


def keep_largest_component(rows):
    h, w = len(rows), len(rows[0])
    seen = [[False] * w for _ in range(h)]
    best = []
    for y in range(h):
        for x in range(w):
            if rows[y][x] != "." or seen[y][x]:
                continue
            comp, q = [], deque([(x, y)])
            seen[y][x] = True
            while q:
                cx, cy = q.popleft()
                comp.append((cx, cy))
                for nx, ny in ((cx + 1, cy), (cx - 1, cy), (cx, cy + 1), (cx, cy - 1)):
                    if 0 <= nx < w and 0 <= ny < h and not seen[ny][nx] and rows[ny][nx] == ".":
                        seen[ny][nx] = True
                        q.append((nx, ny))
            if len(comp) > len(best):
                best = comp
    keep = set(best)
    for y in range(h):
        for x in range(w):
            if rows[y][x] == "." and (x, y) not in keep:
                rows[y][x] = "@"
    return rows


def random_map(seed, size, pct):
    rng = random.Random(seed)
    cells = [(x, y) for y in range(size) for x in range(size)]
    blocked = set(rng.sample(cells, round(size * size * pct / 100)))
    rows = [["@" if (x, y) in blocked else "." for x in range(size)] for y in range(size)]
    return keep_largest_component(rows)


def room_map(seed, size, room):
    rng = random.Random(seed)
    rows = [["." for _ in range(size)] for _ in range(size)]
    step = room + 1
    for y in range(size):
        for x in range(size):
            if (x % step == room) or (y % step == room):
                rows[y][x] = "@"
    n = (size + 1) // step
    # spanning tree over rooms, then a few extra doors
    walls = []
    for ry in range(n):
        for rx in range(n):
            if rx + 1 < n:
                walls.append(((rx, ry), (rx + 1, ry)))
            if ry + 1 < n:
                walls.append(((rx, ry), (rx, ry + 1)))
    rng.shuffle(walls)
    parent = {(rx, ry): (rx, ry) for ry in range(n) for rx in range(n)}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def open_door(a, b):
        (ax, ay), (bx, by) = a, b
        if ax != bx:
            x = ax * step + room
            y = ay * step + rng.randrange(room)
        else:
            y = ay * step + room
            x = ax * step + rng.randrange(room)
        if x < size and y < size:
            rows[y][x] = "."

    extra = []
    for a, b in walls:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            open_door(a, b)
        else:
            extra.append((a, b))
    for a, b in extra[: len(extra) // 2]:
        open_door(a, b)
    return keep_largest_component(rows)


def arena_map(seed, size):
    rng = random.Random(seed)
    rows = [["." for _ in range(size)] for _ in range(size)]
    for y in range(size):
        for x in range(size):
            if x in (0, size - 1) or y in (0, size - 1):
                rows[y][x] = "@"
    for _ in range(40):
        w, h = rng.randint(1, 4), rng.randint(1, 4)
        x0, y0 = rng.randint(3, size - 8), rng.randint(3, size - 8)
        for y in range(y0, y0 + h):
            for x in range(x0, x0 + w):
                rows[y][x] = "@"
    return keep_largest_component(rows)


LAB = [
    ".............",
    ".............",
    "..@@@...@@@..",
    "..@@@...@@@..",
    ".............",
    ".............",
    ".@@..@@@..@@.",
    ".............",
    ".............",
    "..@@@...@@@..",
    "..@@@...@@@..",
    ".............",
    ".............",
    ".............",
]

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    write("lab", [list(r) for r in LAB])
    write("random-32-32-20", random_map(20, 32, 20))
    write("room-32-32-4", room_map(4, 32, 3))
    write("arena", arena_map(49, 49))
