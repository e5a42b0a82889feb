"""Line-delimited JSON verdict reports."""

from __future__ import annotations

import json
from typing import IO, Iterable

from .matcher import Verdict


def verdict_line(v: Verdict) -> str:
    return json.dumps(
        {
            "tx": f"0x{v.tx_hash:064x}",
            "action": v.action,
            "patterns": [{"id": "0x" + pid.hex(), "endpoints": list(seqs)} for pid, seqs in v.matched],
        },
        separators=(",", ":"),
    )


def write_verdicts(verdicts: Iterable[Verdict], fp: IO[str]) -> None:
    for v in verdicts:
        fp.write(verdict_line(v) + "\n")


def read_verdicts(lines: Iterable[str]) -> list[Verdict]:
    out = []
    for line in lines:
        if not line.strip():
            continue
        d = json.loads(line)
        matched = tuple(
            (bytes.fromhex(p["id"][2:]), tuple(p["endpoints"])) for p in d["patterns"]
        )
        out.append(Verdict(int(d["tx"], 16), matched, d["action"]))
    return out
