from dataclasses import dataclass, field
from types import MappingProxyType
from typing import IO, Dict, List, Mapping, Optional, Sequence, Tuple
import csv
import logging

from app.exceptions import DuplicateLeaf, EmptyTaxonomy, KindMismatch, MalformedRow, UnknownPrefix
from app.models import LEVEL_ORDER, CodeKind, Level, Segment, TaxCode, segments_from_digits


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TaxonomyNode:
    """One segment of the prefix tree; children are keyed by segment value, ascending."""

    value: str
    level: Optional[Level]
    description: Optional[str] = None
    children: Mapping[str, "TaxonomyNode"] = field(default_factory=lambda: MappingProxyType({}))

    @property
    def is_leaf(self) -> bool:
        return not self.children


class TaxonomyTrie:
    """Immutable prefix tree whose root-to-leaf paths are exactly the legal codes.

    Only full codes are supplied; internal nodes are inferred from shared
    prefixes. Safe for concurrent reads once built.
    """

    __slots__ = ("_kind", "_root", "_leaf_count")

    def __init__(self, kind: CodeKind, root: TaxonomyNode, leaf_count: int):
        object.__setattr__(self, "_kind", kind)
        object.__setattr__(self, "_root", root)
        object.__setattr__(self, "_leaf_count", leaf_count)

    def __setattr__(self, name, value):
        raise AttributeError("TaxonomyTrie is immutable")

    @property
    def kind(self) -> CodeKind:
        return self._kind

    @property
    def root(self) -> TaxonomyNode:
        return self._root

    @property
    def depth(self) -> int:
        return self._kind.depth

    @property
    def leaf_count(self) -> int:
        return self._leaf_count

    def __len__(self) -> int:
        return self._leaf_count

    def node_at(self, prefix: Sequence[Segment]) -> TaxonomyNode:
        node = self._root
        for position, segment in enumerate(prefix):
            if position >= self.depth or segment.level is not LEVEL_ORDER[position]:
                raise UnknownPrefix(f"{_render(prefix)} is not a path in the {self._kind.value} taxonomy")
            child = node.children.get(segment.value)
            if child is None:
                raise UnknownPrefix(f"{_render(prefix)} is not a path in the {self._kind.value} taxonomy")
            node = child
        return node

    def valid_candidates(self, prefix: Sequence[Segment]) -> List[Segment]:
        node = self.node_at(prefix)
        if node.is_leaf:
            return []
        level = LEVEL_ORDER[len(prefix)]
        return [Segment(value, level) for value in node.children]

    def contains(self, code: TaxCode) -> bool:
        if code.kind is not self._kind:
            raise KindMismatch(f"{code.kind.value} code checked against {self._kind.value} taxonomy")
        node = self._root
        for segment in code.segments:
            node = node.children.get(segment.value)
            if node is None:
                return False
        return node.is_leaf

    def describe(self, code: TaxCode) -> Optional[str]:
        if not self.contains(code):
            return None
        return self.node_at(code.segments).description

    def enumerate_leaves(self) -> List[TaxCode]:
        leaves = []
        stack: List[Tuple[TaxonomyNode, str]] = [(self._root, "")]
        while stack:
            node, digits = stack.pop()
            if node.is_leaf:
                if digits:
                    leaves.append(TaxCode.from_digits(self._kind, digits))
                continue
            # reversed so the pop order stays ascending
            for value in reversed(node.children):
                stack.append((node.children[value], digits + value))
        return leaves

    def level_counts(self) -> Dict[Level, int]:
        values: Dict[Level, set] = {level: set() for level in self._kind.levels}
        frontier = [self._root]
        for level in self._kind.levels:
            next_frontier = []
            for node in frontier:
                values[level].update(node.children)
                next_frontier.extend(node.children.values())
            frontier = next_frontier
        return {level: len(found) for level, found in values.items()}

    def depth_ok(self) -> bool:
        stack = [(self._root, 0)]
        while stack:
            node, depth = stack.pop()
            if node.is_leaf and depth != self.depth:
                return False
            stack.extend((child, depth + 1) for child in node.children.values())
        return True

    @classmethod
    def from_codes(cls, kind: CodeKind, codes: Mapping[str, Optional[str]]) -> "TaxonomyTrie":
        if not codes:
            raise EmptyTaxonomy(f"{kind.value} taxonomy has no codes")
        tree: Dict[str, dict] = {}
        for digits, description in codes.items():
            branch = tree
            for segment in segments_from_digits(digits):
                branch = branch.setdefault(segment.value, {})
            branch[None] = description
        root = _freeze(tree, value="", level=None, depth=0)
        return cls(kind, root, len(codes))


def _freeze(branch: dict, value: str, level: Optional[Level], depth: int) -> TaxonomyNode:
    description = branch.get(None)
    children = {}
    for key in sorted(k for k in branch if k is not None):
        children[key] = _freeze(branch[key], key, LEVEL_ORDER[depth], depth + 1)
    return TaxonomyNode(value, level, description, MappingProxyType(children))


class TaxonomyEngine:
    CSV_COLUMNS = ("kind", "code", "description")

    @staticmethod
    def load_taxonomy(source: IO[str], kind: CodeKind) -> TaxonomyTrie:
        """Build a trie from a ``kind,code,description`` CSV stream."""
        reader = csv.DictReader(source)
        if reader.fieldnames is None:
            raise EmptyTaxonomy(f"{kind.value} taxonomy has no codes")
        missing = [column for column in TaxonomyEngine.CSV_COLUMNS[:2] if column not in reader.fieldnames]
        if missing:
            raise MalformedRow(f"header lacks column(s) {', '.join(missing)}", row=1)

        codes: Dict[str, Optional[str]] = {}
        first_row: Dict[str, int] = {}
        for record in reader:
            row = reader.line_num
            row_kind = (record.get("kind") or "").strip().upper()
            digits = (record.get("code") or "").strip()
            description = record.get("description")
            description = description.strip() if description else None
            description = description or None

            if row_kind not in CodeKind.__members__:
                raise MalformedRow(f"unknown kind {record.get('kind')!r}", row=row)
            if row_kind != kind.value:
                raise KindMismatch(f"{row_kind} row in {kind.value} taxonomy", row=row)
            if len(digits) != kind.digit_count or not (digits.isascii() and digits.isdigit()):
                raise MalformedRow(
                    f"{kind.value} code must be {kind.digit_count} ASCII digits, got {digits!r}", row=row
                )
            if digits in codes:
                if codes[digits] != description:
                    raise DuplicateLeaf(
                        f"code {digits} already listed on row {first_row[digits]} with a different description",
                        row=row,
                    )
                continue
            codes[digits] = description
            first_row[digits] = row

        trie = TaxonomyTrie.from_codes(kind, codes)
        logger.info(f"Loaded {kind.value} taxonomy with {trie.leaf_count} leaves")
        return trie

    @staticmethod
    def valid_candidates(trie: TaxonomyTrie, prefix: Sequence[Segment]) -> List[Segment]:
        return trie.valid_candidates(prefix)

    @staticmethod
    def contains(trie: TaxonomyTrie, code: TaxCode) -> bool:
        return trie.contains(code)


def _render(prefix: Sequence[Segment]) -> str:
    return "[" + ", ".join(segment.value for segment in prefix) + "]"
