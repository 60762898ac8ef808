"""Convert third-party execution tables into the canonical history schema.

Public benchmark corpora use their own column names (``workload``,
``instance_type``, ``elapsed`` ...). ``convert_table`` renames columns per a
mapping, lower-cases framework names and drops everything else. The
dropped column names are returned so that the loss is explicit.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

from .evaluator import HISTORY_COLUMNS, OPTIONAL_COLUMNS, HistoryFormatError

CANONICAL = HISTORY_COLUMNS + OPTIONAL_COLUMNS


def parse_mapping(text: str) -> Dict[str, str]:
    """Parse ``canonical=source,...`` into a dict."""
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep or key not in CANONICAL:
            raise ValueError(f"bad mapping entry {item!r}; expected one of {CANONICAL} = source column")
        out[key] = value.strip()
    return out


def convert_table(src: Union[str, Path], dst: Union[str, Path], mapping: Mapping[str, str],
                  defaults: Optional[Mapping[str, str]] = None,
                  runtime_scale: float = 1.0) -> Tuple[int, List[str]]:
    """Write ``src`` as a canonical history CSV to ``dst``.

    ``defaults`` fills canonical columns absent from the source (e.g. a
    framework shared by the whole file). ``runtime_scale`` converts runtime
    units, e.g. 1e-3 for milliseconds. Returns (rows written, dropped columns).
    """
    defaults = dict(defaults or {})
    with Path(src).open(newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        for canon in HISTORY_COLUMNS:
            source = mapping.get(canon, canon)
            if source not in fields and canon not in defaults:
                raise HistoryFormatError(f"{src}: no column for {canon!r} (looked for {source!r})")
        used = {mapping.get(c, c) for c in CANONICAL}
        dropped = [f for f in fields if f not in used]
        rows = list(reader)

    n = 0
    with Path(dst).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CANONICAL)
        for row in rows:
            out = []
            for canon in CANONICAL:
                source = mapping.get(canon, canon)
                value = (row.get(source) or defaults.get(canon, "")).strip()
                if canon == "framework":
                    value = value.lower()
                elif canon == "runtime_seconds" and value:
                    value = repr(float(value) * runtime_scale)
                elif canon == "node_count" and value:
                    value = str(int(float(value)))
                elif canon == "machine_type":
                    value = re.sub(r"\s+", "", value)
                out.append(value)
            writer.writerow(out)
            n += 1
    return n, dropped
