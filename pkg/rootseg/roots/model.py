"""Root structural models: parsing, validation and geometric augmentation.

Text format, one record per line::

    # comment
    N x y z r      node at (x, y, z) mm with radius r mm (index = order of N lines)
    S i j          segment between node i and node j

Segments must form a connected tree. Node 0 is the top of the root system.
"""

import logging
from pathlib import Path
from typing import List, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.spatial.transform import Rotation

from rootseg.models.domain import RootNode, Transform
from rootseg.services.validators import ValidationError

logger = logging.getLogger(__name__)


class RootModelError(ValidationError):
    """Base exception for root model problems."""
    pass


class RootModelSyntaxError(RootModelError):
    """Raised for a malformed line."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class DanglingReferenceError(RootModelError):
    """Raised when a segment references a node that does not exist."""
    pass


class SelfLoopError(RootModelError):
    """Raised when a segment connects a node to itself."""
    pass


class DisconnectedGraphError(RootModelError):
    """Raised when the segments do not connect all nodes."""
    pass


class CyclicGraphError(RootModelError):
    """Raised when the segments contain a cycle or a duplicate."""
    pass


class NonPositiveRadiusError(RootModelError):
    """Raised for a node radius <= 0."""
    pass


def check_topology(n_nodes: int, segments: List[Tuple[int, int]]) -> None:
    """Ensure the segments form a tree spanning all nodes.

    Raises:
        RootModelError: If there are no nodes
        DanglingReferenceError: If an index is out of range
        SelfLoopError: If a segment joins a node to itself
        DisconnectedGraphError: If some node is unreachable
        CyclicGraphError: If there are more segments than a tree allows
    """
    if n_nodes == 0:
        raise RootModelError("Root model has no nodes")

    graph = nx.Graph()
    graph.add_nodes_from(range(n_nodes))
    for k, (i, j) in enumerate(segments):
        for idx in (i, j):
            if not 0 <= idx < n_nodes:
                raise DanglingReferenceError(
                    f"Segment {k} references node {idx}, model has {n_nodes} nodes"
                )
        if i == j:
            raise SelfLoopError(f"Segment {k} connects node {i} to itself")
        graph.add_edge(i, j)

    if not nx.is_connected(graph):
        parts = nx.number_connected_components(graph)
        raise DisconnectedGraphError(f"Root model splits into {parts} disconnected parts")
    if len(segments) != n_nodes - 1:
        raise CyclicGraphError(
            f"Root model has {len(segments)} segments for {n_nodes} nodes; expected a tree"
        )


class RootSystem(BaseModel):
    """Immutable root geometry: nodes plus tree segments, node 0 on top.

    Attributes:
        nodes: Node positions and radii
        segments: Pairs of node indices
        name: Source name, used in sample metadata
    """
    model_config = ConfigDict(frozen=True)

    nodes: List[RootNode] = Field(..., min_length=1)
    segments: List[Tuple[int, int]] = Field(default_factory=list)
    name: str = ""

    @model_validator(mode='after')
    def segments_form_tree(self) -> "RootSystem":
        check_topology(len(self.nodes), self.segments)
        return self

    def positions(self) -> np.ndarray:
        """Node positions as an (n, 3) float64 array in (x, y, z) order."""
        return np.array([n.position for n in self.nodes], dtype=np.float64)

    def radii(self) -> np.ndarray:
        return np.array([n.radius for n in self.nodes], dtype=np.float64)


def _parse_float(token: str, line_no: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise RootModelSyntaxError(line_no, f"{what} is not a number: {token!r}")
    if not np.isfinite(value):
        raise RootModelSyntaxError(line_no, f"{what} must be finite, got {token!r}")
    return value


def _parse_index(token: str, line_no: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise RootModelSyntaxError(line_no, f"node index is not an integer: {token!r}")


def parse_root_model(text: str, name: str = "") -> RootSystem:
    """Parse the line-oriented root model format.

    Args:
        text: Model source
        name: Optional model name

    Returns:
        Validated RootSystem

    Raises:
        RootModelSyntaxError: For malformed lines (carries ``line_no``)
        NonPositiveRadiusError: For a radius <= 0
        DanglingReferenceError: For segments naming missing nodes
        DisconnectedGraphError: If the graph is not connected
        CyclicGraphError: If the graph contains a cycle
    """
    nodes: List[RootNode] = []
    segments: List[Tuple[int, int]] = []
    segment_lines: List[int] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        tag = tokens[0].upper()

        if tag == "N":
            if len(tokens) != 5:
                raise RootModelSyntaxError(line_no, f"node needs 'N x y z r', got {raw.strip()!r}")
            x, y, z = (_parse_float(t, line_no, "coordinate") for t in tokens[1:4])
            r = _parse_float(tokens[4], line_no, "radius")
            if r <= 0:
                raise NonPositiveRadiusError(f"line {line_no}: radius must be > 0, got {r}")
            nodes.append(RootNode(position=(x, y, z), radius=r))
        elif tag == "S":
            if len(tokens) != 3:
                raise RootModelSyntaxError(line_no, f"segment needs 'S i j', got {raw.strip()!r}")
            segments.append((_parse_index(tokens[1], line_no), _parse_index(tokens[2], line_no)))
            segment_lines.append(line_no)
        else:
            raise RootModelSyntaxError(line_no, f"unknown record type {tokens[0]!r}")

    # Report dangling references against the offending line.
    for (i, j), line_no in zip(segments, segment_lines):
        for idx in (i, j):
            if not 0 <= idx < len(nodes):
                raise DanglingReferenceError(
                    f"line {line_no}: segment references node {idx}, model has {len(nodes)} nodes"
                )

    check_topology(len(nodes), segments)
    rs = RootSystem(nodes=nodes, segments=segments, name=name)
    logger.debug(
        f"Parsed root model {name or '<text>'}: {len(nodes)} nodes, {len(segments)} segments"
    )
    return rs


def load_root_model(path: Union[str, Path]) -> RootSystem:
    """Read and parse a ``.rootm`` file.

    Raises:
        FileNotFoundError: If the file does not exist
        RootModelError: If the content is invalid; the message names the file
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        return parse_root_model(text, name=path.stem)
    except RootModelSyntaxError as e:
        e.args = (f"{path}: {e}",)
        raise
    except RootModelError as e:
        raise type(e)(f"{path}: {e}") from e


def transform_matrix(t: Transform) -> np.ndarray:
    """3x3 linear part of a transform: rotation after mirroring."""
    mirror = np.diag([-1.0 if m else 1.0 for m in t.mirror])
    axis = np.asarray(t.rotation_axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    rotation = Rotation.from_rotvec(axis * np.deg2rad(t.rotation_deg)).as_matrix()
    return rotation @ mirror


def apply_transform(rs: RootSystem, t: Transform) -> RootSystem:
    """Rotate, mirror and translate node positions and scale all radii.

    Positions map as ``R @ M @ (p - pivot) + pivot + translation``. Topology
    is unchanged.
    """
    pivot = np.asarray(t.pivot, dtype=np.float64)
    moved = (rs.positions() - pivot) @ transform_matrix(t).T + pivot + np.asarray(t.translation)
    nodes = [
        RootNode(position=tuple(float(c) for c in p), radius=n.radius * t.thickness_scale)
        for p, n in zip(moved, rs.nodes)
    ]
    return RootSystem(nodes=nodes, segments=list(rs.segments), name=rs.name)
