#!/usr/bin/env python3
"""Writes the bundled toy corpus under data/ (deterministic)."""

import argparse
import json
import random
from pathlib import Path

BENCHMARKS = [
    ("chart_numbers", "relaxed_numeric"),
    ("diagram_choice", "multiple_choice"),
    ("ui_grounding", "point_in_box"),
    ("doc_lookup", "exact_match"),
]
WORDS = ["invoice", "total", "river", "orange", "seven", "north", "cable", "window", "ledger", "copper",
         "signal", "harbor", "maple", "quartz", "violet", "button", "menu", "search", "submit", "cancel"]
ELEMENTS = ["search box", "submit button", "settings icon", "back arrow", "profile menu", "close button"]


def numeric(rng, i):
    value = round(rng.uniform(1, 500), rng.choice([0, 1, 2]))
    text = f"{value:g}"
    q = f"<image>\nWhat value does bar {rng.randint(1, 9)} of the chart show?"
    think = f"The axis runs to {rng.randint(5, 10) * 100}. Reading the bar top against the gridlines gives {text}."
    return q, think, text, None


def choice(rng, i):
    letter = rng.choice("ABCD")
    opts = "\n".join(f"({c}) {rng.choice(WORDS)}" for c in "ABCD")
    q = f"<image>\nWhich label belongs to the highlighted part?\n{opts}\nAnswer with the option letter."
    think = f"The highlighted part matches option {letter} after comparing the shapes."
    return q, think, letter, None


def grounding(rng, i):
    w, h = round(rng.uniform(0.05, 0.3), 3), round(rng.uniform(0.03, 0.2), 3)
    x, y = round(rng.uniform(0, 1 - w), 3), round(rng.uniform(0, 1 - h), 3)
    element = rng.choice(ELEMENTS)
    q = f"<image>\nWhere should I click to open the {element}? Give normalized (x, y)."
    final = f"({x + w / 2:.3f}, {y + h / 2:.3f})"
    think = f"The {element} sits near the {'top' if y < 0.5 else 'bottom'} of the screen."
    return q, think, final, [{"kind": "rect", "coords": [x, y, w, h], "label": element}]


def lookup(rng, i):
    word = rng.choice(WORDS)
    q = f"<image>\nWhich word is printed in the header of the document?"
    think = f"The header line reads {word} in bold."
    return q, think, word, None


MAKERS = {"relaxed_numeric": numeric, "multiple_choice": choice, "point_in_box": grounding, "exact_match": lookup}


def make_record(rng, i):
    bench, kind = BENCHMARKS[i % len(BENCHMARKS)]
    q, think, final, annotations = MAKERS[kind](rng, i)
    reason = rng.random() < 0.3
    rec = {
        "id": f"toy-{i:04d}",
        "images": [f"images/toy-{i:04d}.png"],
        "conversations": [{"role": "user", "text": q}],
        "mode": "reason" if reason else "direct",
        "final": final,
        "meta": {"benchmark": bench, "task_kind": kind},
    }
    if reason:
        rec["think"] = think
    if annotations:
        rec["annotations"] = annotations

    defect = rng.random()
    if defect < 0.06:
        # answer stranded inside the reasoning
        rec["mode"] = "reason"
        rec["think"] = think + f" Final answer: {final}"
        rec["final"] = ""
        rec["meta"]["defect"] = "answer_in_think"
    elif defect < 0.10:
        rec["conversations"][0]["text"] = q.replace("<image>", rng.choice(["<imgae>", "<iamge>", "<imag>"]), 1)
        rec["meta"]["defect"] = "misspelled_image_tag"
    elif defect < 0.12 and annotations:
        rec["annotations"][0]["coords"][0] = -0.02
        rec["meta"]["defect"] = "coord_out_of_range"
    rec["conversations"].append({"role": "assistant", "text": rec["final"]})
    return rec


def write_ppm(path, width, height, pixels):
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n255\n".encode())
        f.write(bytes(pixels))


def frame(width, height, box, color):
    px = []
    for y in range(height):
        for x in range(width):
            if box and box[0] <= x < box[2] and box[1] <= y < box[3]:
                px.extend(color)
            else:
                px.extend((20 + x % 8, 30, 40 + y % 8))
    return px


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=20240611)
    ap.add_argument("--records", type=int, default=500)
    args = ap.parse_args()
    out = Path(args.out)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)

    with open(out / "toy_corpus.jsonl", "w") as f:
        for i in range(args.records):
            f.write(json.dumps(make_record(rng, i), separators=(",", ":")) + "\n")

    with open(out / "captions.jsonl", "w") as f:
        for i in range(60):
            caption = f"A {rng.choice(WORDS)} next to a {rng.choice(WORDS)} on a {rng.choice(['grey', 'white', 'blue'])} background."
            f.write(json.dumps({"image": f"images/cap-{i:03d}.png", "caption": caption}) + "\n")

    width, height = 64, 48
    with open(out / "frames.jsonl", "w") as f:
        for s in range(12):
            names = []
            box = None
            for k in range(3):
                if k > 0:
                    x0, y0 = rng.randint(0, width - 12), rng.randint(0, height - 10)
                    box = (x0, y0, x0 + rng.randint(4, 12), y0 + rng.randint(3, 10))
                name = f"frames/seq{s:02d}_{k}.ppm"
                write_ppm(out / name, width, height, frame(width, height, box, (230, 200, 40)))
                names.append(name)
            f.write(json.dumps({"frames": names, "timestamps": [0.0, 1.5, 3.0]}) + "\n")

    (out / "mix.toml").write_text(
        "# math / computer-use ablation, first row\n"
        "default_avg_tokens = 700\n"
        "target_reasoning_share = 0.2\n"
        "reasoning_tolerance = 0.05\n"
        "\n[category.general]\ncount = 1M\n"
        "\n[category.math]\ncount = 150K\nduplication = 1\nreasoning = true\n"
        "\n[category.computer_use]\ncount = 450K\n")


if __name__ == "__main__":
    main()
