"""Synthetic annotation files with prescribed per-column label tallies.

The full-corpus tallies below mirror the published distribution of the
Memotion annotations, so a generated file exercises ingestion and
balancing at the real dataset's scale and skew without shipping any
actual meme content.
"""

import csv
from pathlib import Path

# raw-level counts per physical column, in declared order; every column
# must sum to the same row total (6992 here)
FULL_TALLIES = {
    "humour": (("funny", 4160), ("not_funny", 631), ("very_funny", 2201)),
    "sarcasm": (("sarcastic", 5341), ("not_sarcastic", 1651)),
    "motivational": (("motivational", 2467), ("not_motivational", 4525)),
    "overall_sentiment": (("positive", 1941), ("negative", 5051), ("neutral", 0)),
}

FIXTURE_COLUMNS = ("image_name", "text", "humour", "sarcasm",
                   "motivational", "overall_sentiment")


def level_sequence(tallies) -> list:
    """Expand ((level, count), ...) into count copies of each level, in order."""
    out = []
    for level, count in tallies:
        if count < 0:
            raise ValueError(f"negative count for level {level!r}")
        out.extend([level] * count)
    return out


def write_annotation_fixture(path, tallies: dict = FULL_TALLIES) -> int:
    """Write a CSV whose per-column tallies equal ``tallies`` exactly.

    Labels are assigned sequentially and independently per column, so
    each column's counts land on the nose while the joint distribution
    stays arbitrary. Returns the number of data rows written.
    """
    columns = {name: level_sequence(levels) for name, levels in tallies.items()}
    totals = {name: len(seq) for name, seq in columns.items()}
    if len(set(totals.values())) != 1:
        raise ValueError(f"column totals disagree: {totals}")
    n = next(iter(totals.values()))
    if n == 0:
        raise ValueError("tallies describe an empty file")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIXTURE_COLUMNS)
        for i in range(n):
            writer.writerow([
                f"meme_{i:04d}.jpg",
                f"sample meme text {i}",
                columns["humour"][i],
                columns["sarcasm"][i],
                columns["motivational"][i],
                columns["overall_sentiment"][i],
            ])
    return n
