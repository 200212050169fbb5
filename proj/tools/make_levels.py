#!/usr/bin/env python3
"""Writes the built-in level set to levels/*.lvl.

Every level is 18 rows tall with a two-row ground at the bottom. Features are
listed per level as (kind, args...) tuples so layouts stay reviewable.
"""
import pathlib
import sys

HEIGHT = 18
GROUND = 16  # first ground row


def build(width, features):
    grid = [["." for _ in range(width)] for _ in range(HEIGHT)]
    for r in (GROUND, GROUND + 1):
        for c in range(width):
            grid[r][c] = "#"
    for f in features:
        kind = f[0]
        if kind == "gap":  # ("gap", first_col, width)
            _, c0, w = f
            for c in range(c0, c0 + w):
                for r in (GROUND, GROUND + 1):
                    grid[r][c] = "_"
        elif kind == "pipe":  # ("pipe", col, height)
            _, c0, h = f
            for c in (c0, c0 + 1):
                for r in range(GROUND - h, GROUND):
                    grid[r][c] = "P"
        elif kind == "block":  # ("block", col, row, width)
            _, c0, r, w = f
            for c in range(c0, c0 + w):
                grid[r][c] = "#"
        elif kind == "platform":  # ("platform", col, row, width)
            _, c0, r, w = f
            for c in range(c0, c0 + w):
                grid[r][c] = "="
        elif kind == "stairs":  # ("stairs", col, steps) rising to the right
            _, c0, n = f
            for i in range(n):
                for r in range(GROUND - 1 - i, GROUND):
                    grid[r][c0 + i] = "#"
        else:
            raise ValueError(kind)
    return grid


def emit(path, level_id, family, width, finish, enemies, features, comment):
    grid = build(width, features)
    for r in range(8, GROUND):
        if grid[r][finish] == ".":
            grid[r][finish] = "|"
    lines = [f"# {comment}", "format_version = 1", f"level_id = {level_id}",
             f"family = {family}", f"finish_x = {finish}", "agent = 2 15"]
    for col, row, motion in enemies:
        lines.append(f"enemy = walker {col} {row} {motion}")
    lines.append("[grid]")
    lines.extend("".join(row) for row in grid)
    path.write_text("\n".join(lines) + "\n")


LEVELS = [
    # The obstacle scenario: a tall pipe with two enemies closing in, then
    # gaps, a raised platform and more enemies.
    ("1-1", "A", 96, 88,
     [(17, 15, "left"), (19, 15, "left"), (40, 15, "left"), (58, 15, "left"), (60, 15, "left"),
      (78, 15, "left")],
     [("pipe", 11, 3), ("gap", 27, 3), ("pipe", 34, 2), ("gap", 47, 2), ("platform", 50, 13, 4),
      ("gap", 52, 3), ("pipe", 66, 3), ("gap", 72, 3)],
     "tall pipe opening with two approaching enemies"),
    ("1-2", "A", 96, 88,
     [(14, 15, "left"), (30, 15, "left"), (44, 11, "left"), (62, 15, "left"), (70, 15, "left")],
     [("gap", 20, 2), ("block", 42, 12, 5), ("gap", 36, 4), ("stairs", 52, 3), ("gap", 55, 3),
      ("pipe", 76, 2)],
     "blocks over a wide gap"),
    ("1-3", "A", 96, 88,
     [(22, 15, "left"), (24, 15, "left"), (48, 15, "left"), (66, 15, "left")],
     [("pipe", 14, 2), ("pipe", 30, 3), ("gap", 38, 3), ("platform", 44, 13, 3), ("gap", 56, 2),
      ("pipe", 60, 2), ("gap", 74, 3)],
     "pipes and short gaps"),
    ("2-1", "A", 96, 88,
     [(18, 15, "left"), (34, 15, "right"), (50, 15, "left"), (52, 15, "left"), (72, 15, "left")],
     [("stairs", 10, 3), ("gap", 13, 2), ("pipe", 26, 2), ("gap", 40, 3), ("stairs", 60, 4),
      ("gap", 64, 3), ("pipe", 80, 3)],
     "staircases in front of gaps"),
    ("2-2", "A", 96, 88,
     [(16, 15, "left"), (28, 11, "static"), (46, 15, "left"), (58, 15, "left"), (74, 15, "left")],
     [("block", 26, 12, 5), ("gap", 22, 2), ("pipe", 36, 3), ("gap", 50, 4), ("platform", 50, 13, 4),
      ("pipe", 66, 2), ("gap", 78, 2)],
     "a guarded block row and a bridged gap"),
    ("3-1", "B", 96, 88,
     [(20, 15, "left"), (36, 15, "left"), (38, 15, "left"), (60, 15, "left")],
     [("pipe", 12, 2), ("gap", 26, 3), ("pipe", 44, 3), ("gap", 52, 2), ("stairs", 68, 3),
      ("gap", 71, 2)],
     "held-out: paired enemies between pipes"),
    ("3-2", "B", 96, 88,
     [(15, 15, "left"), (32, 11, "left"), (54, 15, "left"), (70, 15, "left")],
     [("gap", 18, 3), ("block", 30, 12, 6), ("pipe", 40, 2), ("gap", 46, 3), ("pipe", 60, 3),
      ("gap", 76, 3)],
     "held-out: gaps under a block row"),
    ("3-3", "B", 96, 88,
     [(24, 15, "left"), (42, 15, "right"), (64, 15, "left"), (66, 15, "left")],
     [("stairs", 14, 2), ("gap", 16, 2), ("pipe", 30, 3), ("gap", 36, 4), ("platform", 36, 13, 4),
      ("pipe", 54, 2), ("gap", 72, 2)],
     "held-out: bridged gap and steps"),
    ("4-1", "B", 96, 88,
     [(18, 15, "left"), (20, 15, "left"), (40, 15, "left"), (56, 15, "left"), (76, 15, "left")],
     [("pipe", 10, 2), ("gap", 28, 2), ("pipe", 34, 3), ("gap", 48, 3), ("stairs", 62, 3),
      ("gap", 65, 3)],
     "held-out: dense enemies"),
    ("4-2", "B", 96, 88,
     [(22, 15, "left"), (38, 11, "static"), (58, 15, "left"), (74, 15, "right")],
     [("gap", 14, 3), ("block", 36, 12, 5), ("pipe", 46, 3), ("gap", 54, 3), ("pipe", 68, 2),
      ("gap", 80, 3)],
     "held-out: long gaps"),
]


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).parent.parent / "levels")
    out.mkdir(parents=True, exist_ok=True)
    for level_id, family, width, finish, enemies, features, comment in LEVELS:
        emit(out / f"{level_id}.lvl", level_id, family, width, finish, enemies, features, comment)


if __name__ == "__main__":
    main()
