#!/usr/bin/env python3
# Copyright 2026 The memeforge Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the blank template images and catalog.csv under data/templates.

The images are synthetic stand-ins (gradients plus simple shapes) so the test
fixture is self-contained. Output is deterministic for a given Pillow version;
the checked-in files are the source of truth, rerun only to change the set.
"""
import csv
import hashlib
import pathlib

from PIL import Image, ImageDraw

TEMPLATES = [
    ("181913649", "Drake Hotline Bling", 2),
    ("87743020", "Two Buttons", 2),
    ("112126428", "Distracted Boyfriend", 2),
    ("131087935", "Running Away Balloon", 2),
    ("217743513", "UNO Draw 25 Cards", 2),
    ("124822590", "Left Exit 12 Off Ramp", 2),
    ("222403160", "Bernie I Am Once Again Asking", 2),
    ("129242436", "Change My Mind", 2),
    ("4087833", "Waiting Skeleton", 1),
    ("61579", "One Does Not Simply", 2),
    ("101470", "Ancient Aliens", 2),
    ("438680", "Batman Slapping Robin", 2),
    ("93895088", "Expanding Brain", 2),
    ("188390779", "Woman Yelling At Cat", 2),
    ("97984", "Disaster Girl", 2),
    ("247375501", "Buff Doge vs Cheems", 2),
    ("102156234", "Mocking Spongebob", 2),
    ("61544", "Success Kid", 2),
    ("563423", "That Would Be Great", 2),
    ("61532", "The Most Interesting Man In The World", 2),
    ("101288", "Third World Skeptical Kid", 2),
    ("61520", "Futurama Fry", 2),
    ("8072285", "Doge", 1),
    ("61556", "Grandma Finds The Internet", 2),
    ("135256802", "Epic Handshake", 2),
    ("100777631", "Is This A Pigeon", 2),
    ("61585", "Bad Luck Brian", 2),
    ("61539", "First World Problems", 2),
    ("14371066", "Star Wars Yoda", 2),
    ("61582", "Creepy Condescending Wonka", 2),
]


def slug(name: str) -> str:
    return "".join(c.lower() if c.isalnum() else "_" for c in name).strip("_")


def make_image(name: str, width: int, height: int) -> Image.Image:
    seed = hashlib.sha256(name.encode()).digest()
    top = tuple(seed[0:3])
    bottom = tuple(seed[3:6])
    img = Image.new("RGB", (width, height))
    draw = ImageDraw.Draw(img)
    for y in range(height):
        t = y / max(1, height - 1)
        color = tuple(int(a + (b - a) * t) for a, b in zip(top, bottom))
        draw.line([(0, y), (width, y)], fill=color)
    for i in range(4):
        x0 = seed[6 + i] * width // 256
        y0 = seed[10 + i] * height // 256
        r = 10 + seed[14 + i] % 40
        fill = tuple(seed[18 + i:21 + i])
        draw.ellipse([x0 - r, y0 - r, x0 + r, y0 + r], fill=fill)
    return img


def main() -> None:
    root = pathlib.Path(__file__).resolve().parent.parent / "data" / "templates"
    (root / "images").mkdir(parents=True, exist_ok=True)
    rows = []
    for template_id, name, box_count in TEMPLATES:
        seed = hashlib.sha256(name.encode()).digest()
        width = 320 + (seed[24] % 5) * 16
        height = 280 + (seed[25] % 5) * 16
        rel = f"images/{slug(name)}.png"
        make_image(name, width, height).save(root / rel, optimize=False)
        rows.append((template_id, name, rel, box_count, width, height))
    with open(root / "catalog.csv", "w", newline="", encoding="utf-8") as f:
        f.write("# Fixture catalog: 30 blank templates with local images.\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["template_id", "name", "image_ref", "box_count", "width_px", "height_px"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
