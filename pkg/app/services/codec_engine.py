"""Special-token serialization of tax codes.

An HSN code ``12345678`` becomes ``hsn_ch_12 hsn_h_34 hsn_sh_56 hsn_pt_78``;
SAC codes use the ``sac`` prefix and stop after the sub-heading.
"""
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Sequence, Tuple, Union
import re

from app.exceptions import BadLevelOrder, MixedKind, UnknownToken, WrongLength
from app.models import LEVEL_ORDER, CodeKind, Level, Segment, TaxCode
from app.services.taxonomy_engine import TaxonomyTrie


DASH = "<DASH>"
UNK = "<UNK>"
RESERVED_TOKENS = (DASH, UNK)

TOKEN_PATTERN = re.compile(r"^(hsn|sac)_(ch|h|sh|pt)_([0-9]{2})$")
GENERATED_SPLIT = re.compile(r"[\s,\"'\[\]]+|(?=<)|(?<=>)")


@dataclass(frozen=True, order=True)
class SpecialToken:
    text: str

    @classmethod
    def for_segment(cls, kind: CodeKind, segment: Segment) -> "SpecialToken":
        return cls(f"{kind.prefix}_{segment.level.tag}_{segment.value}")

    @property
    def is_reserved(self) -> bool:
        return self.text in RESERVED_TOKENS

    def parse(self) -> Tuple[CodeKind, Level, str]:
        match = TOKEN_PATTERN.match(self.text)
        if match is None:
            raise UnknownToken(f"{self.text!r} is not a code token")
        prefix, tag, value = match.groups()
        return CodeKind(prefix.upper()), Level.from_tag(tag), value

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class TokenSequence:
    tokens: Tuple[SpecialToken, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "TokenSequence":
        return cls(tuple(SpecialToken(text) for text in texts))

    @property
    def texts(self) -> List[str]:
        return [token.text for token in self.tokens]

    def __iter__(self) -> Iterator[SpecialToken]:
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


class CodecEngine:
    @staticmethod
    def encode_code(code: TaxCode) -> TokenSequence:
        return TokenSequence(tuple(SpecialToken.for_segment(code.kind, segment) for segment in code.segments))

    @staticmethod
    def decode_tokens(tokens: Union[TokenSequence, Sequence[Union[SpecialToken, str]]]) -> TaxCode:
        items = [token if isinstance(token, SpecialToken) else SpecialToken(token) for token in tokens]
        if not items:
            raise WrongLength("empty token sequence")

        parsed = []
        for token in items:
            if token.is_reserved:
                raise UnknownToken(f"reserved token {token.text} inside a code sequence")
            parsed.append(token.parse())

        kind = parsed[0][0]
        for token_kind, _, _ in parsed[1:]:
            if token_kind is not kind:
                raise MixedKind(f"sequence mixes {kind.value} and {token_kind.value} tokens")

        if len(parsed) > kind.depth:
            raise WrongLength(f"{kind.value} code needs {kind.depth} tokens, got {len(parsed)}")

        for position, (_, level, _) in enumerate(parsed):
            if level is not LEVEL_ORDER[position]:
                expected = LEVEL_ORDER[position].tag
                raise BadLevelOrder(f"token {position} has level tag {level.tag!r}, expected {expected!r}")

        if len(parsed) != kind.depth:
            raise WrongLength(f"{kind.value} code needs {kind.depth} tokens, got {len(parsed)}")

        return TaxCode(kind, tuple(Segment(value, level) for _, level, value in parsed))

    @staticmethod
    def parse_generated(text: str) -> TaxCode:
        """Reconstruct a code from raw generator output by keeping only the code tokens."""
        pieces = [piece for piece in GENERATED_SPLIT.split(text) if piece]
        kept = [piece.strip("<>") for piece in pieces if piece not in RESERVED_TOKENS]
        return CodecEngine.decode_tokens([piece for piece in kept if TOKEN_PATTERN.match(piece)])

    @staticmethod
    def emit_vocabulary(trie: TaxonomyTrie) -> List[SpecialToken]:
        found = set()
        stack = [trie.root]
        while stack:
            node = stack.pop()
            for child in node.children.values():
                found.add(SpecialToken.for_segment(trie.kind, Segment(child.value, child.level)))
                stack.append(child)
        return sorted(found) + [SpecialToken(text) for text in RESERVED_TOKENS]
