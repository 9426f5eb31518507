"""Readers and writers for TSPLib (EUC_2D) and Taillard job-shop files."""

from __future__ import annotations

import csv
import os
from importlib import resources
from pathlib import Path

import numpy as np

from ..env.instances import JspInstance, MtspInstance


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


DATA_ENV = "TGASCHED_DATA"


def data_dir() -> Path:
    """Default data directory: ``$TGASCHED_DATA`` if set, else the bundled data."""
    env = os.environ.get(DATA_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("tgasched") / "data"))


# ---------------------------------------------------------------- TSPLib

def parse_tsplib(text: str) -> dict:
    """Parse an EUC_2D node-coordinate file.

    Returns ``{"name", "coords" (n, 2), "ids", "salesmen"}``; ``salesmen`` is
    ``None`` unless the optional ``SALESMEN`` keyword is present.
    """
    header = {}
    coords, ids = [], []
    in_coords = False
    saw_section = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        if in_coords:
            parts = line.split()
            if parts[0].lstrip("+-").isdigit():
                if len(parts) != 3:
                    raise ParseError(f"expected 'id x y', got {line!r}", lineno)
                try:
                    ids.append(int(parts[0]))
                    coords.append((float(parts[1]), float(parts[2])))
                except ValueError:
                    raise ParseError(f"bad coordinate line {line!r}", lineno) from None
                continue
            in_coords = False
        if line.startswith("NODE_COORD_SECTION"):
            in_coords = saw_section = True
            continue
        if ":" in line:
            key, _, val = line.partition(":")
            header[key.strip().upper()] = val.strip()
        elif line.split()[0].isupper():
            header[line.split()[0]] = " ".join(line.split()[1:])
        else:
            raise ParseError(f"unexpected line {line!r}", lineno)
    if not saw_section:
        raise ParseError("missing NODE_COORD_SECTION")
    kind = header.get("EDGE_WEIGHT_TYPE", "EUC_2D")
    if kind != "EUC_2D":
        raise ParseError(f"unsupported EDGE_WEIGHT_TYPE {kind!r}")
    if "DIMENSION" in header:
        try:
            dim = int(header["DIMENSION"])
        except ValueError:
            raise ParseError(f"bad DIMENSION {header['DIMENSION']!r}") from None
        if dim != len(coords):
            raise ParseError(f"DIMENSION {dim} but {len(coords)} coordinate lines")
    if not coords:
        raise ParseError("no coordinates")
    salesmen = int(header["SALESMEN"]) if "SALESMEN" in header else None
    return {"name": header.get("NAME", ""), "coords": np.array(coords), "ids": ids, "salesmen": salesmen}


def tsplib_instance(text: str, num_agents: int | None = None, depot: int = 1) -> MtspInstance:
    """Build an mTSP instance; ``depot`` is the 1-based node id of the depot."""
    d = parse_tsplib(text)
    m = num_agents if num_agents is not None else d["salesmen"]
    if m is None:
        raise ParseError("number of salesmen not given and no SALESMEN keyword in file")
    try:
        k = d["ids"].index(depot)
    except ValueError:
        raise ParseError(f"depot node {depot} not present") from None
    coords = d["coords"]
    return MtspInstance(coords[k], np.delete(coords, k, axis=0), m, d["name"])


def format_tsplib(instance: MtspInstance, name: str | None = None, salesmen: bool = True) -> str:
    """Write the depot as node 1 followed by the cities."""
    pts = np.vstack([instance.depot[None, :], instance.cities])
    lines = [f"NAME : {name or instance.name or 'mtsp'}", "TYPE : TSP", f"DIMENSION : {len(pts)}",
             "EDGE_WEIGHT_TYPE : EUC_2D"]
    if salesmen:
        lines.append(f"SALESMEN : {instance.num_agents}")
    lines.append("NODE_COORD_SECTION")
    lines += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(pts.tolist(), 1)]
    lines.append("EOF")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- Taillard

def parse_taillard(text: str, name: str = "") -> JspInstance:
    """Standard JSP format: ``N m`` then one row of ``machine duration`` pairs per job.

    Lines starting with ``#`` are comments.
    """
    rows = [(i, ln.split()) for i, ln in enumerate(text.splitlines(), 1)
            if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ParseError("empty job-shop file")
    lineno, head = rows[0]
    try:
        n, m = (int(v) for v in head)
    except ValueError:
        raise ParseError(f"header must be 'num_jobs num_machines', got {' '.join(head)!r}", lineno) from None
    if len(rows) - 1 != n:
        raise ParseError(f"header declares {n} jobs but {len(rows) - 1} job rows follow", lineno)
    jobs = []
    for lineno, vals in rows[1:]:
        if len(vals) % 2 or len(vals) == 0:
            raise ParseError("job row must hold (machine, duration) pairs", lineno)
        try:
            nums = [int(v) for v in vals]
        except ValueError:
            raise ParseError("non-integer value in job row", lineno) from None
        route = list(zip(nums[0::2], nums[1::2]))
        for mc, p in route:
            if p <= 0:
                raise ParseError(f"nonpositive duration {p}", lineno)
            if not 0 <= mc < m:
                raise ParseError(f"machine {mc} outside [0, {m})", lineno)
        jobs.append(route)
    return JspInstance(jobs, m, name)


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def format_taillard(instance: JspInstance) -> str:
    lines = [f"{instance.num_jobs} {instance.num_machines}"]
    for route in instance.jobs:
        lines.append(" ".join(f"{mc} {_num(p)}" for mc, p in route))
    return "\n".join(lines) + "\n"


def load_best_known(path=None) -> dict:
    """Map instance name to best-known makespan from a CSV with ``#`` comment lines."""
    path = Path(path) if path is not None else data_dir() / "taillard" / "best_known.csv"
    with open(path) as fh:
        rows = csv.DictReader(ln for ln in fh if not ln.startswith("#"))
        table = {r["instance"]: float(r["makespan"]) for r in rows}
    bad = [k for k, v in table.items() if not v > 0]
    if bad:
        raise ValueError(f"nonpositive best-known makespan for {bad}")
    return table


def load_taillard_set(names=None, directory=None) -> list:
    directory = Path(directory) if directory is not None else data_dir() / "taillard"
    names = names or sorted(p.stem for p in directory.glob("ta*.txt"))
    return [parse_taillard((directory / f"{n}.txt").read_text(), n) for n in names]


def read_instance(path):
    """Load a ``.tsp`` or Taillard ``.txt``/``.jsp`` file by extension."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".tsp":
        return tsplib_instance(text)
    return parse_taillard(text, path.stem)


def write_instance(instance, path):
    path = Path(path)
    text = format_tsplib(instance) if isinstance(instance, MtspInstance) else format_taillard(instance)
    path.write_text(text)
