"""TSPLIB ingestion, seed/optima files and the distance convention.

Only the ``EUC_2D`` subset of TSPLIB is read.  Two distance conventions are
available: ``EUC_2D_ROUNDED`` applies TSPLIB's nearest-integer rule and is
what published best-known optima assume; ``EUC_2D_EXACT`` keeps the raw
Euclidean value and is used wherever geometry matters (uncrossing, clustering).
"""
from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple, TextIO, Union

import numpy as np

log = logging.getLogger(__name__)

TextSource = Union[str, TextIO]


class EdgeWeightType(str, enum.Enum):
    EUC_2D_ROUNDED = "rounded"
    EUC_2D_EXACT = "exact"


class TsplibError(ValueError):
    """Base class for TSPLIB parse failures; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedHeaderError(TsplibError):
    pass


class MissingCoordSectionError(TsplibError):
    pass


class DimensionMismatchError(TsplibError):
    pass


class UnsupportedEdgeWeightError(TsplibError):
    pass


class SeedFileError(ValueError):
    pass


class OptimaFileError(ValueError):
    pass


class City(NamedTuple):
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Instance:
    name: str
    coords: np.ndarray
    edge_weight_type: EdgeWeightType = EdgeWeightType.EUC_2D_ROUNDED
    # raw coordinate tokens, kept so a NODE_COORD_SECTION can be written back verbatim
    coord_text: tuple[tuple[str, str], ...] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError("coords must have shape (n, 2)")
        if coords.shape[0] < 3:
            raise ValueError("an instance needs at least 3 cities")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "edge_weight_type", EdgeWeightType(self.edge_weight_type))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def cities(self) -> list[City]:
        return [City(i, float(x), float(y)) for i, (x, y) in enumerate(self.coords)]

    def with_convention(self, convention: EdgeWeightType | str) -> "Instance":
        return Instance(self.name, self.coords, EdgeWeightType(convention), self.coord_text)

    def distance_matrix(self, convention: EdgeWeightType | str | None = None) -> np.ndarray:
        return distance_matrix(self.coords, convention or self.edge_weight_type)


@dataclass(frozen=True)
class SeedSet:
    instance_name: str
    centroids: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64).reshape(-1, 2)
        if len(c) < 1:
            raise SeedFileError("a seed set needs at least one centroid")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    def __len__(self) -> int:
        return len(self.centroids)


def _read(text: TextSource) -> str:
    return text if isinstance(text, str) else text.read()


def _nint(d):
    # TSPLIB nint: (int)(x + 0.5)
    return np.floor(d + 0.5)


def distance(a, b, convention: EdgeWeightType | str = EdgeWeightType.EUC_2D_ROUNDED) -> float:
    """Distance between two cities (or plain ``(x, y)`` pairs)."""
    ax, ay = (a.x, a.y) if isinstance(a, City) else a
    bx, by = (b.x, b.y) if isinstance(b, City) else b
    d = math.sqrt((ax - bx) ** 2 + (ay - by) ** 2)
    if EdgeWeightType(convention) is EdgeWeightType.EUC_2D_ROUNDED:
        return float(_nint(d))
    return d


def distance_matrix(coords: np.ndarray,
                    convention: EdgeWeightType | str = EdgeWeightType.EUC_2D_ROUNDED) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    diff = coords[:, None, :] - coords[None, :, :]
    d = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2)
    if EdgeWeightType(convention) is EdgeWeightType.EUC_2D_ROUNDED:
        d = _nint(d)
    return d


_HEADER_KEYS = {"NAME", "TYPE", "COMMENT", "DIMENSION", "EDGE_WEIGHT_TYPE",
                "NODE_COORD_TYPE", "DISPLAY_DATA_TYPE"}


def parse_tsplib(text: TextSource,
                 convention: EdgeWeightType | str = EdgeWeightType.EUC_2D_ROUNDED) -> Instance:
    """Parse a TSPLIB ``TYPE: TSP`` / ``EDGE_WEIGHT_TYPE: EUC_2D`` file.

    Node ids in the file are 1-based; the returned instance is indexed from 0
    in file order.
    """
    lines = _read(text).splitlines()
    header: dict[str, str] = {}
    header_line: dict[str, int] = {}
    coord_start = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.upper().startswith("NODE_COORD_SECTION"):
            coord_start = lineno
            break
        if line.upper() == "EOF":
            break
        if ":" not in line:
            raise MalformedHeaderError(f"expected 'KEY: value', got {line!r}", lineno)
        key, value = line.split(":", 1)
        key = key.strip().upper()
        if key not in _HEADER_KEYS:
            raise MalformedHeaderError(f"unknown header key {key!r}", lineno)
        header[key] = value.strip()
        header_line[key] = lineno

    if "TYPE" in header and header["TYPE"].split()[0].upper() != "TSP":
        raise MalformedHeaderError(f"unsupported TYPE {header['TYPE']!r}", header_line["TYPE"])
    ewt = header.get("EDGE_WEIGHT_TYPE")
    if ewt is None:
        raise MalformedHeaderError("missing EDGE_WEIGHT_TYPE")
    if ewt.upper() != "EUC_2D":
        raise UnsupportedEdgeWeightError(f"unsupported EDGE_WEIGHT_TYPE {ewt!r}",
                                         header_line["EDGE_WEIGHT_TYPE"])
    if "DIMENSION" not in header:
        raise MalformedHeaderError("missing DIMENSION")
    try:
        dim = int(header["DIMENSION"])
    except ValueError:
        raise MalformedHeaderError(f"DIMENSION is not an integer: {header['DIMENSION']!r}",
                                   header_line["DIMENSION"]) from None
    if coord_start is None:
        raise MissingCoordSectionError("no NODE_COORD_SECTION")

    ids: list[int] = []
    tokens: list[tuple[str, str]] = []
    last = coord_start
    for lineno in range(coord_start + 1, len(lines) + 1):
        line = lines[lineno - 1].strip()
        if not line:
            continue
        if line.upper() == "EOF":
            break
        parts = line.split()
        if len(parts) != 3:
            raise TsplibError(f"expected 'id x y', got {line!r}", lineno)
        try:
            ids.append(int(parts[0]))
            float(parts[1]), float(parts[2])
        except ValueError:
            raise TsplibError(f"non-numeric coordinate line {line!r}", lineno) from None
        tokens.append((parts[1], parts[2]))
        last = lineno
    if len(tokens) != dim:
        raise DimensionMismatchError(
            f"DIMENSION is {dim} but NODE_COORD_SECTION has {len(tokens)} entries", last)
    if sorted(ids) != list(range(1, dim + 1)):
        raise TsplibError("node ids must be unique and cover 1..DIMENSION", coord_start)
    coords = np.array([[float(x), float(y)] for x, y in tokens])
    return Instance(header.get("NAME", "unnamed"), coords, EdgeWeightType(convention), tuple(tokens))


def load_instance(path: str | Path, convention: EdgeWeightType | str = EdgeWeightType.EUC_2D_ROUNDED) -> Instance:
    """Load a TSPLIB file, or a bundled instance when ``path`` is a bare name like ``ch130``."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and p.parent == Path("."):
        return parse_tsplib(bundled_text("tsplib", f"{p.name.lower()}.tsp"), convention)
    return parse_tsplib(p.read_text(), convention)


def format_node_coord_section(instance: Instance) -> str:
    if instance.coord_text is not None:
        rows = instance.coord_text
    else:
        rows = tuple((repr(float(x)), repr(float(y))) for x, y in instance.coords)
    body = "\n".join(f"{i} {x} {y}" for i, (x, y) in enumerate(rows, start=1))
    return f"NODE_COORD_SECTION\n{body}\n"


def format_tsplib(instance: Instance) -> str:
    return (f"NAME: {instance.name}\nTYPE: TSP\nDIMENSION: {instance.n}\n"
            f"EDGE_WEIGHT_TYPE: EUC_2D\n{format_node_coord_section(instance)}EOF\n")


def load_seeds(text: TextSource, instance_name: str = "") -> SeedSet:
    """Read a centroid seed file.

    Format (``#`` starts a comment)::

        NAME: pr136
        x= 5000 5000 5000 5000 12000 12000 12000 12000
        y= 3000 5000 8000 10000 10000 8000 5000 3000
    """
    xs: list[float] | None = None
    ys: list[float] | None = None
    name = instance_name
    for raw in _read(text).splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        low = line.lower()
        if low.startswith("name"):
            name = line.split(":", 1)[1].strip() if ":" in line else line.split("=", 1)[1].strip()
        elif low.startswith(("x=", "y=")):
            try:
                vals = [float(v) for v in line[2:].split()]
            except ValueError:
                raise SeedFileError(f"non-numeric value in seed line {raw!r}") from None
            if low[0] == "x":
                xs = vals
            else:
                ys = vals
        else:
            raise SeedFileError(f"unrecognized seed line {raw!r}")
    if not xs or not ys:
        raise SeedFileError("seed file needs a non-empty 'x=' row and 'y=' row")
    if len(xs) != len(ys):
        raise SeedFileError(f"x row has {len(xs)} values but y row has {len(ys)}")
    return SeedSet(name, np.column_stack([xs, ys]))


def bundled_seeds(instance_name: str) -> SeedSet | None:
    try:
        text = bundled_text("seeds", f"{instance_name.lower()}.txt")
    except FileNotFoundError:
        return None
    return load_seeds(text, instance_name)


def load_optima(text: TextSource) -> dict[str, float]:
    """Read ``name,value`` rows (an optional ``name,optimum`` header is skipped).

    Names are lower-cased.  A repeated name keeps its last value and logs a warning.
    """
    table: dict[str, float] = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(_read(text))), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if len(row) != 2:
            raise OptimaFileError(f"line {lineno}: expected 'name,value', got {row!r}")
        name, value = row[0].strip().lower(), row[1].strip()
        try:
            opt = float(value)
        except ValueError:
            if lineno == 1:
                continue  # header row
            raise OptimaFileError(f"line {lineno}: non-numeric optimum {value!r}") from None
        if name in table:
            log.warning("duplicate optimum for %s; keeping %s over %s", name, opt, table[name])
        table[name] = opt
    return table


def bundled_optima() -> dict[str, float]:
    return load_optima(bundled_text("optima.csv"))


def bundled_text(*parts: str) -> str:
    node = resources.files("acoslc").joinpath("data")
    for part in parts:
        node = node.joinpath(part)
    if not node.is_file():
        raise FileNotFoundError("/".join(parts))
    return node.read_text()


def bundled_instance_names() -> list[str]:
    root = resources.files("acoslc").joinpath("data").joinpath("tsplib")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".tsp"))


def tour_length(order: Iterable[int], dist: np.ndarray) -> float:
    order = np.asarray(list(order) if not isinstance(order, np.ndarray) else order, dtype=np.int64)
    if len(order) < 2:
        return 0.0
    return float(dist[order, np.roll(order, -1)].sum())
