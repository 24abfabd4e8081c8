"""
Plain-text model descriptions and CSV exports.

Model file format (one directive per line, '#' starts a comment):

    n 4
    bounds 2 4
    graph
    e 1 2
    e 2 3
    ...
    blocks nx 1 nw 1 nz 1
    A d 1
    A c -0.1
    B d 1
    C p 1

A `graph` line opens a new topology; `e i j` adds an undirected edge to the most recent one.
Block lines carry a letter (A-D), a part (d, c, p) and the entries in row-major order.
Blocks that are not listed are zero.
"""

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, TextIO

import numpy as np

from decomposable_model import PARTS, SHAPES, DecomposableMatrices, SwitchedMas
from graphs import Graph, GraphError, GraphFamily, laplacian, spectrum

logger = logging.getLogger(__name__)


class ModelFormatError(ValueError):
    """Raised for unparsable model files; the message starts with path:line."""


@dataclass(frozen=True)
class ModelDescription:
    n_agents: int
    lambda_lo: float
    lambda_hi: float
    graphs: tuple[Graph, ...] = ()
    blocks: Optional[DecomposableMatrices] = None

    @property
    def family(self) -> Optional[GraphFamily]:
        if not self.graphs:
            return None
        return GraphFamily(self.graphs, self.lambda_lo, self.lambda_hi)

    def to_mas(self, p: float, strict: bool = True) -> SwitchedMas:
        if self.blocks is None:
            raise ValueError("Model has no blocks section")
        family = self.family
        if family is None:
            return SwitchedMas.from_bounds(self.n_agents, self.lambda_lo, self.lambda_hi, p, self.blocks)
        return SwitchedMas.from_family(family, p, self.blocks, strict=strict)


def _numbers(tokens, where, kind=float):
    try:
        return [kind(t) for t in tokens]
    except ValueError:
        raise ModelFormatError(f"{where}: expected {kind.__name__} values, got {' '.join(tokens)!r}")


def parse_model(text: str, source: str = "<string>") -> ModelDescription:
    n_agents = None
    bounds = None
    edges: list[list[tuple[int, int]]] = []
    dims = None
    raw_blocks: dict[str, np.ndarray] = {}

    for lineno, line in enumerate(text.splitlines(), start=1):
        where = f"{source}:{lineno}"
        tokens = line.split("#", 1)[0].split()
        if not tokens:
            continue
        head, args = tokens[0], tokens[1:]

        if head == "n":
            if len(args) != 1:
                raise ModelFormatError(f"{where}: 'n' takes one integer")
            (n_agents,) = _numbers(args, where, int)
            if n_agents < 1:
                raise ModelFormatError(f"{where}: agent count must be positive")
        elif head == "bounds":
            if len(args) != 2:
                raise ModelFormatError(f"{where}: 'bounds' takes two numbers")
            bounds = tuple(_numbers(args, where))
        elif head == "graph":
            if args:
                raise ModelFormatError(f"{where}: 'graph' takes no arguments")
            edges.append([])
        elif head == "e":
            if not edges:
                raise ModelFormatError(f"{where}: edge before any 'graph' line")
            if len(args) != 2:
                raise ModelFormatError(f"{where}: 'e' takes two vertex labels")
            i, j = _numbers(args, where, int)
            edges[-1].append((i, j))
        elif head == "blocks":
            if len(args) != 6 or args[0::2] != ["nx", "nw", "nz"]:
                raise ModelFormatError(f"{where}: expected 'blocks nx <a> nw <b> nz <c>'")
            dims = dict(zip(("n_x", "n_w", "n_z"), _numbers(args[1::2], where, int)))
        elif head in SHAPES:
            if dims is None:
                raise ModelFormatError(f"{where}: block line before 'blocks' header")
            if not args or args[0] not in PARTS:
                raise ModelFormatError(f"{where}: block part must be one of {', '.join(PARTS)}")
            key = f"{head}_{args[0]}"
            if key in raw_blocks:
                raise ModelFormatError(f"{where}: block {key} given twice")
            rows, cols = (dims[d] for d in SHAPES[head])
            values = _numbers(args[1:], where)
            if len(values) != rows * cols:
                raise ModelFormatError(
                    f"{where}: block {key} needs {rows * cols} entries, got {len(values)}"
                )
            raw_blocks[key] = np.array(values).reshape(rows, cols)
        else:
            raise ModelFormatError(f"{where}: unknown directive {head!r}")

    if n_agents is None:
        raise ModelFormatError(f"{source}: missing 'n' line")
    if bounds is None:
        raise ModelFormatError(f"{source}: missing 'bounds' line")

    try:
        graphs = tuple(Graph.from_edges(n_agents, g) for g in edges)
        blocks = DecomposableMatrices(blocks=raw_blocks, **dims) if dims is not None else None
        if graphs:
            GraphFamily(graphs, *bounds)
        elif not 0 < bounds[0] <= bounds[1]:
            raise GraphError(f"Need 0 < lo <= hi, got {bounds}")
    except (GraphError, ValueError) as e:
        raise ModelFormatError(f"{source}: {e}")

    logger.debug(f"Parsed {source}: N={n_agents}, {len(graphs)} graphs, blocks={dims}")
    return ModelDescription(n_agents, bounds[0], bounds[1], graphs, blocks)


def load_model(path: str) -> ModelDescription:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ModelFormatError(f"{path}: cannot read model file ({e.strerror})")
    return parse_model(text, source=str(path))


def _format_row(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def dump_model(description: ModelDescription) -> str:
    """Text form that parse_model reads back to an equal description."""
    out = io.StringIO()
    out.write(f"n {description.n_agents}\n")
    out.write(f"bounds {description.lambda_lo!r} {description.lambda_hi!r}\n")
    for g in description.graphs:
        out.write("graph\n")
        for i, j in g.sorted_edges():
            out.write(f"e {i} {j}\n")
    blocks = description.blocks
    if blocks is not None:
        out.write(f"blocks nx {blocks.n_x} nw {blocks.n_w} nz {blocks.n_z}\n")
        for letter in SHAPES:
            for part in PARTS:
                value = blocks.block(letter, part)
                if np.any(value):
                    out.write(f"{letter} {part} {_format_row(value.ravel())}\n")
    return out.getvalue()


def dump_family(family: GraphFamily, blocks: Optional[DecomposableMatrices] = None) -> str:
    return dump_model(ModelDescription(
        family.n_vertices, family.lambda_lo, family.lambda_hi, family.graphs, blocks
    ))


def write_spectra_csv(family: GraphFamily, handle: TextIO) -> None:
    """Rows (graph_index, eig_index, value) with 1-based eigenvalue index in ascending order."""
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["graph_index", "eig_index", "value"])
    for index, g in enumerate(family.graphs):
        for k, value in enumerate(spectrum(laplacian(g)), start=1):
            writer.writerow([index, k, repr(float(value))])
