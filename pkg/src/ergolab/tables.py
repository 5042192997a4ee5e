"""Typed result tables with deterministic CSV and JSON encodings.

CSV layout::

    # key=<compact JSON>         (metadata, one line per key, sorted by key)
    name,...,z_re,z_im           (complex columns split into _re/_im)
    rows...                      (floats as shortest round-trip repr)

The column types are stored under the metadata key ``columns`` so a CSV file
decodes back to the same table, and CSV -> JSON -> CSV is byte-identical.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

COLUMN_TYPES = ("real", "complex", "int")


def _fmt_real(v):
    return repr(float(v))


def _parse_real(s):
    return float(s)


def _compact(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


@dataclass
class ResultTable:
    columns: list                   # [(name, type)]
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = [(str(n), str(t)) for n, t in self.columns]
        for n, t in self.columns:
            if t not in COLUMN_TYPES:
                raise ValueError(f"column {n!r} has unknown type {t!r}")
            if "," in n or "\n" in n:
                raise ValueError(f"column name {n!r} may not contain commas or newlines")
        self.rows = [self._coerce(r) for r in self.rows]

    def _coerce(self, row):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        out = []
        for v, (_, t) in zip(row, self.columns):
            if t == "int":
                out.append(int(v))
            elif t == "real":
                out.append(float(v))
            else:
                out.append(complex(v))
        return tuple(out)

    def append(self, row):
        self.rows.append(self._coerce(row))

    def column(self, name):
        j = [n for n, _ in self.columns].index(name)
        return [r[j] for r in self.rows]

    def header(self):
        names = []
        for n, t in self.columns:
            names.extend([f"{n}_re", f"{n}_im"] if t == "complex" else [n])
        return names

    def _full_metadata(self):
        meta = dict(self.metadata)
        meta["columns"] = [[n, t] for n, t in self.columns]
        return meta

    # -- CSV ----------------------------------------------------------------

    def to_csv(self):
        lines = [f"# {k}={_compact(v)}" for k, v in sorted(self._full_metadata().items())]
        lines.append(",".join(self.header()))
        for row in self.rows:
            cells = []
            for v, (_, t) in zip(row, self.columns):
                if t == "int":
                    cells.append(str(v))
                elif t == "real":
                    cells.append(_fmt_real(v))
                else:
                    cells.extend([_fmt_real(v.real), _fmt_real(v.imag)])
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        meta = {}
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        i = 0
        while i < len(lines) and lines[i].startswith("# "):
            key, _, val = lines[i][2:].partition("=")
            meta[key] = json.loads(val)
            i += 1
        columns = [tuple(c) for c in meta.pop("columns")]
        table = cls(columns, [], meta)
        if i >= len(lines) or lines[i].split(",") != table.header():
            raise ValueError("CSV header does not match the declared columns")
        for line in lines[i + 1:]:
            cells = line.split(",")
            row, k = [], 0
            for _, t in columns:
                if t == "int":
                    row.append(int(cells[k]))
                    k += 1
                elif t == "real":
                    row.append(_parse_real(cells[k]))
                    k += 1
                else:
                    row.append(complex(_parse_real(cells[k]), _parse_real(cells[k + 1])))
                    k += 2
            table.rows.append(tuple(row))
        return table

    # -- JSON ---------------------------------------------------------------

    def to_json(self):
        rows = []
        for row in self.rows:
            cells = []
            for v, (_, t) in zip(row, self.columns):
                cells.append([v.real, v.imag] if t == "complex" else v)
            rows.append(cells)
        doc = {"metadata": self.metadata, "columns": [[n, t] for n, t in self.columns],
               "rows": rows}
        return json.dumps(doc, sort_keys=True, indent=1, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        columns = [tuple(c) for c in doc["columns"]]
        rows = []
        for cells in doc["rows"]:
            rows.append(tuple(complex(*v) if t == "complex" else v
                              for v, (_, t) in zip(cells, columns)))
        return cls(columns, rows, doc["metadata"])


def emit(table: ResultTable, prefix, formats=("csv",)):
    """Write ``prefix.csv`` and/or ``prefix.json``; returns the written paths."""
    if not table.rows:
        raise ValueError("refusing to emit an empty table")
    paths = []
    for fmt in formats:
        if fmt == "csv":
            text = table.to_csv()
        elif fmt == "json":
            text = table.to_json()
        else:
            raise ValueError(f"unknown format {fmt!r}")
        path = f"{prefix}.{fmt}"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        paths.append(path)
    return paths

