"""Regenerate the dump fixtures used by the tests and the desk config.

    python3 tests/fixtures/make_fixtures.py

Output is deterministic; rerunning rewrites identical files.
"""

from __future__ import annotations

import calendar
import datetime as dt
import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
DAY = 86_400

OPENERS = [
    "I think", "Honestly", "In my experience", "lol", "Well", "Tbh", "Thanks for asking,", "Oh sure,",
    "Please note that", "Idk but", "However,", "Dude,", "Sorry, but", "Haha", "Seriously,",
]
BODIES = [
    "the frame size matters more than the brand",
    "you should grind finer and pull a shorter shot",
    "that is a common mistake when starting out",
    "check the tire pressure before every long ride",
    "the manual explains it better than any video",
    "a cheap scale made the biggest difference for me",
    "it depends on how often you plan to use it",
    "nobody asked but the old model was better",
    "this is a great question and a helpful thread",
    "you got this, the first month is always rough",
    "that advice is ridiculous and kinda dumb",
    "what a surprise, another upgrade that changes nothing",
    "the joke is that the stock part works fine",
    "I appreciate the detailed write up, it was wonderful",
    "there is a real risk if you skip the maintenance",
]
CLOSERS = [
    "", "", "", " lol", " /s", " Good luck!", " Thank you.", " Regards.", " Just saying.",
    " Would you mind sharing a photo?", " That's hilarious.", " Shut up about it already.",
]
TITLES = [
    "Beginner question about setup", "Is this worth upgrading?", "What am I doing wrong?",
    "Weekly discussion thread", "Finally finished my build", "Need advice before buying",
]


def epoch(y, m, d, h=12):
    return calendar.timegm(dt.datetime(y, m, d, h).timetuple())


def comment_text(rng: random.Random) -> str:
    parts = [rng.choice(OPENERS), rng.choice(BODIES)]
    if rng.random() < 0.5:
        parts.append("and " + rng.choice(BODIES))
    return " ".join(parts) + "." + rng.choice(CLOSERS)


def small_dump() -> list[dict]:
    """10 posts and 40 clean comments in one community."""
    rng = random.Random(7)
    rows = []
    for p in range(10):
        created = epoch(2020, 1 + p, 3)
        rows.append({"id": f"sp{p:02d}", "subreddit": "tinyforum", "author": f"op{p}", "title": rng.choice(TITLES),
                     "selftext": "", "created_utc": created})
        for k in range(4):
            c_created = created + 600 * (k + 1)
            rows.append({
                "id": f"sc{p:02d}{k}", "parent_id": f"t3_sp{p:02d}", "link_id": f"t3_sp{p:02d}",
                "subreddit": "tinyforum", "author": f"user{(p + k) % 6}", "body": comment_text(rng),
                "created_utc": c_created, "retrieved_on": c_created + 3 * DAY, "score": rng.randint(-5, 40),
            })
    return rows


def desk_dump() -> list[dict]:
    """Two communities, 2019-2023, shared authors, plus rows each exclusion rule must drop."""
    rng = random.Random(2024)
    authors = [f"member{k:02d}" for k in range(24)]
    rows = []
    for community in ("bikeshop", "espresso"):
        n = 0
        for year in range(2019, 2024):
            for month in range(1, 13):
                pid = f"{community[:2]}{year}{month:02d}"
                created = epoch(year, month, rng.randint(1, 25), rng.randint(6, 20))
                media = month == 6 and year == 2021
                post = {"id": pid, "subreddit": community, "author": rng.choice(authors), "title": rng.choice(TITLES),
                        "selftext": "", "created_utc": created}
                if media:
                    post["post_hint"] = "image"
                rows.append(post)
                for k in range(5):
                    c_created = created + rng.randint(60, DAY // 2)
                    row = {
                        "id": f"{pid}c{k}", "parent_id": f"t3_{pid}", "link_id": f"t3_{pid}", "subreddit": community,
                        "author": rng.choice(authors), "body": comment_text(rng), "created_utc": c_created,
                        "retrieved_on": c_created + rng.randint(2, 30) * DAY, "score": int(rng.gauss(8, 12)),
                    }
                    n += 1
                    if n % 41 == 0:
                        row["parent_id"] = f"t1_{pid}c0"
                    elif n % 43 == 0:
                        row["body"] = "[deleted]"
                    elif n % 47 == 0:
                        row["edited"] = 1_700_000_000
                    elif n % 53 == 0:
                        row["body"] = "https://example.com/some/link"
                    elif n % 59 == 0:
                        row["created_utc"] = created + 2 * DAY
                        row["retrieved_on"] = created + 10 * DAY
                    rows.append(row)
    rows.append({"note": "not a record"})
    return rows


def write(path: Path, rows: list[dict], extra_lines: list[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
        for line in extra_lines:
            fh.write(line + "\n")


if __name__ == "__main__":
    write(HERE / "small_dump.jsonl", small_dump())
    write(HERE / "desk_dump.jsonl", desk_dump(), ["{broken json"])
