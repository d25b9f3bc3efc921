"""STEP physical-file (ISO 10303-21 subset) tokenizer and parser.

Reads the exchange structure used by IFC models:

  ISO-10303-21;
  HEADER; FILE_DESCRIPTION(...); FILE_NAME(...); FILE_SCHEMA(...); ENDSEC;
  DATA; #1=IFCSOMETHING(...); ... ENDSEC;
  END-ISO-10303-21;

Every ``#id=TYPE(...)`` record is captured, including entity types the rest
of the package never interprets. Values are decoded into plain Python data
(ints, floats, strings, enum literals, entity refs, nested tuples, typed
values, and the unset/inherited markers). ``serialize_spf`` writes a graph
back out in a canonical one-record-per-line form whose reparse is
structurally identical to the original graph.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

# ---------------------------------------------------------------- errors


class StepError(Exception):
    """Base class for scan/parse failures."""


class UnterminatedStringError(StepError):
    def __init__(self, offset: int):
        super().__init__(f"unterminated string starting at offset {offset}")
        self.offset = offset


class IllegalCharacterError(StepError):
    def __init__(self, offset: int, char: str):
        super().__init__(f"illegal character {char!r} at offset {offset}")
        self.offset = offset
        self.char = char


class StepSyntaxError(StepError):
    def __init__(self, offset: int, expected: str):
        super().__init__(f"expected {expected} at offset {offset}")
        self.offset = offset
        self.expected = expected


class MissingDataSectionError(StepError):
    def __init__(self):
        super().__init__("no DATA section in exchange structure")


class DuplicateEntityIdError(StepError):
    def __init__(self, entity_id: int):
        super().__init__(f"entity id #{entity_id} defined more than once")
        self.entity_id = entity_id


class DanglingReferenceError(StepError):
    def __init__(self, entity_id: int):
        super().__init__(f"reference to undefined entity #{entity_id}")
        self.entity_id = entity_id


# ---------------------------------------------------------------- tokens

KEYWORD = "keyword"
ENTITY_REF = "entity_ref"
INTEGER = "integer"
REAL = "real"
STRING = "string"
ENUM = "enum"
LIST_OPEN = "list_open"
LIST_CLOSE = "list_close"
COMMA = "comma"
SEMICOLON = "semicolon"
DOLLAR = "dollar"
STAR = "star"
EQ = "eq"


@dataclass(frozen=True)
class Token:
    kind: str
    lexeme: str
    offset: int


_SKIP_RE = re.compile(r"(?:[ \t\r\n]+|/\*.*?\*/)+", re.DOTALL)

_TOKEN_RE = re.compile(
    r"""
      (?P<entity_ref>\#[0-9]+)
    | (?P<real>[+-]?[0-9]+\.[0-9]*(?:[Ee][+-]?[0-9]+)?
             | [+-]?[0-9]+[Ee][+-]?[0-9]+)
    | (?P<integer>[+-]?[0-9]+)
    | (?P<string>'(?:[^']|'')*')
    | (?P<enum>\.[A-Z0-9_]+\.)
    | (?P<keyword>[A-Z][A-Z0-9_-]*)
    | (?P<list_open>\()
    | (?P<list_close>\))
    | (?P<comma>,)
    | (?P<semicolon>;)
    | (?P<dollar>\$)
    | (?P<star>\*)
    | (?P<eq>=)
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    """Scan the whole exchange structure into a token list.

    The concatenation of skipped whitespace/comments and token lexemes
    reproduces the input byte-for-byte; lexemes are raw source slices
    (strings keep their quotes and doubled-quote escapes).
    """
    tokens: list[Token] = []
    pos = 0
    length = len(text)
    while pos < length:
        skip = _SKIP_RE.match(text, pos)
        if skip:
            pos = skip.end()
            if pos >= length:
                break
        match = _TOKEN_RE.match(text, pos)
        if not match:
            ch = text[pos]
            if ch == "'":
                raise UnterminatedStringError(pos)
            raise IllegalCharacterError(pos, ch)
        kind = match.lastgroup
        assert kind is not None
        tokens.append(Token(kind, match.group(), pos))
        pos = match.end()
    return tokens


# ---------------------------------------------------------------- values

class _Singleton:
    __slots__ = ("_repr",)

    def __init__(self, text: str):
        self._repr = text

    def __repr__(self) -> str:
        return self._repr

    def __deepcopy__(self, memo):
        return self

    def __copy__(self):
        return self


#: Value of an attribute given as ``$`` (explicitly unset).
UNSET = _Singleton("UNSET")
#: Value of an attribute given as ``*`` (derived/inherited upstream).
INHERITED = _Singleton("INHERITED")


@dataclass(frozen=True)
class EnumValue:
    """A ``.LITERAL.`` such as ``.T.`` or ``.LENGTHUNIT.``."""

    name: str


@dataclass(frozen=True)
class Ref:
    """An ``#id`` reference to another entity instance."""

    entity_id: int


@dataclass(frozen=True)
class TypedValue:
    """A wrapped measure such as ``IFCLENGTHMEASURE(2.5)``."""

    type_name: str
    value: "StepValue"


StepValue = Union[
    int, float, str, EnumValue, Ref, TypedValue, _Singleton, tuple
]


@dataclass(frozen=True)
class StepEntity:
    entity_id: int
    type_name: str
    args: tuple


@dataclass(frozen=True)
class FileHeader:
    """Canonical argument text of the three standard header records."""

    file_description: str = ""
    file_name: str = ""
    file_schema: str = ""


@dataclass
class EntityGraph:
    header: FileHeader
    entities: dict[int, StepEntity]
    type_index: dict[str, tuple[int, ...]] = field(default_factory=dict)
    dangling: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.type_index:
            self.type_index = _build_type_index(self.entities)
        if not self.dangling:
            self.dangling = _find_dangling(self.entities)


def _build_type_index(entities: dict[int, StepEntity]) -> dict[str, tuple[int, ...]]:
    buckets: dict[str, list[int]] = {}
    for eid in sorted(entities):
        buckets.setdefault(entities[eid].type_name, []).append(eid)
    return {name: tuple(ids) for name, ids in buckets.items()}


def _iter_refs(value: StepValue) -> Iterator[int]:
    if isinstance(value, Ref):
        yield value.entity_id
    elif isinstance(value, tuple):
        for item in value:
            yield from _iter_refs(item)
    elif isinstance(value, TypedValue):
        yield from _iter_refs(value.value)


def _find_dangling(entities: dict[int, StepEntity]) -> tuple[int, ...]:
    missing: set[int] = set()
    for entity in entities.values():
        for ref_id in _iter_refs(entity.args):
            if ref_id not in entities:
                missing.add(ref_id)
    return tuple(sorted(missing))


def decode_string(lexeme: str) -> str:
    """Decode a raw quoted lexeme; ``''`` unescapes to a single quote."""
    return lexeme[1:-1].replace("''", "'")


def encode_string(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def format_real(value: float) -> str:
    """Shortest-repr real in STEP syntax (mandatory decimal point)."""
    text = repr(float(value))
    if "e" in text or "E" in text:
        mantissa, _, exponent = text.lower().partition("e")
        if "." not in mantissa:
            mantissa += "."
        return f"{mantissa}E{int(exponent)}"
    if "." not in text:
        text += "."
    return text


# ---------------------------------------------------------------- parser


class _Cursor:
    def __init__(self, tokens: list[Token], text_length: int):
        self.tokens = tokens
        self.pos = 0
        self.text_length = text_length

    def peek(self) -> Token | None:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return None

    def next(self) -> Token | None:
        tok = self.peek()
        if tok is not None:
            self.pos += 1
        return tok

    def offset(self) -> int:
        tok = self.peek()
        return tok.offset if tok is not None else self.text_length

    def expect(self, kind: str, lexeme: str | None = None) -> Token:
        tok = self.next()
        want = lexeme if lexeme is not None else kind
        if tok is None or tok.kind != kind or (lexeme is not None and tok.lexeme != lexeme):
            at = tok.offset if tok is not None else self.text_length
            raise StepSyntaxError(at, want)
        return tok


def _parse_value(cur: _Cursor) -> StepValue:
    tok = cur.peek()
    if tok is None:
        raise StepSyntaxError(cur.text_length, "value")
    if tok.kind == INTEGER:
        cur.next()
        return int(tok.lexeme)
    if tok.kind == REAL:
        cur.next()
        return float(tok.lexeme)
    if tok.kind == STRING:
        cur.next()
        return decode_string(tok.lexeme)
    if tok.kind == ENUM:
        cur.next()
        return EnumValue(tok.lexeme[1:-1])
    if tok.kind == ENTITY_REF:
        cur.next()
        return Ref(int(tok.lexeme[1:]))
    if tok.kind == DOLLAR:
        cur.next()
        return UNSET
    if tok.kind == STAR:
        cur.next()
        return INHERITED
    if tok.kind == LIST_OPEN:
        return _parse_list(cur)
    if tok.kind == KEYWORD:
        cur.next()
        inner = _parse_list(cur)
        value = inner[0] if len(inner) == 1 else inner
        return TypedValue(tok.lexeme, value)
    raise StepSyntaxError(tok.offset, "value")


def _parse_list(cur: _Cursor) -> tuple:
    cur.expect(LIST_OPEN, "(")
    items: list[StepValue] = []
    tok = cur.peek()
    if tok is not None and tok.kind == LIST_CLOSE:
        cur.next()
        return tuple(items)
    while True:
        items.append(_parse_value(cur))
        tok = cur.next()
        if tok is None:
            raise StepSyntaxError(cur.text_length, ") or ,")
        if tok.kind == LIST_CLOSE:
            return tuple(items)
        if tok.kind != COMMA:
            raise StepSyntaxError(tok.offset, ") or ,")


def parse_spf(text: str) -> EntityGraph:
    """Parse one exchange structure into an EntityGraph.

    Unknown entity types are retained verbatim; references to undefined
    ids are permitted and recorded in ``graph.dangling``.
    """
    cur = _Cursor(tokenize(text), len(text))
    cur.expect(KEYWORD, "ISO-10303-21")
    cur.expect(SEMICOLON)

    header_fields = {"FILE_DESCRIPTION": "", "FILE_NAME": "", "FILE_SCHEMA": ""}
    entities: dict[int, StepEntity] = {}
    saw_data = False

    while True:
        tok = cur.next()
        if tok is None:
            raise StepSyntaxError(cur.text_length, "END-ISO-10303-21")
        if tok.kind != KEYWORD:
            raise StepSyntaxError(tok.offset, "section keyword")
        if tok.lexeme == "END-ISO-10303-21":
            cur.expect(SEMICOLON)
            break
        if tok.lexeme == "HEADER":
            cur.expect(SEMICOLON)
            _parse_header_section(cur, header_fields)
        elif tok.lexeme == "DATA":
            cur.expect(SEMICOLON)
            saw_data = True
            _parse_data_section(cur, entities)
        else:
            raise StepSyntaxError(tok.offset, "HEADER, DATA or END-ISO-10303-21")

    if not saw_data:
        raise MissingDataSectionError()
    if cur.peek() is not None:
        raise StepSyntaxError(cur.offset(), "end of file")

    header = FileHeader(
        file_description=header_fields["FILE_DESCRIPTION"],
        file_name=header_fields["FILE_NAME"],
        file_schema=header_fields["FILE_SCHEMA"],
    )
    return EntityGraph(header=header, entities=entities)


def _parse_header_section(cur: _Cursor, fields: dict[str, str]) -> None:
    while True:
        tok = cur.next()
        if tok is None:
            raise StepSyntaxError(cur.text_length, "ENDSEC")
        if tok.kind != KEYWORD:
            raise StepSyntaxError(tok.offset, "header record or ENDSEC")
        if tok.lexeme == "ENDSEC":
            cur.expect(SEMICOLON)
            return
        args = _parse_list(cur)
        cur.expect(SEMICOLON)
        if tok.lexeme in fields:
            fields[tok.lexeme] = serialize_args(args)


def _parse_data_section(cur: _Cursor, entities: dict[int, StepEntity]) -> None:
    while True:
        tok = cur.next()
        if tok is None:
            raise StepSyntaxError(cur.text_length, "ENDSEC")
        if tok.kind == KEYWORD and tok.lexeme == "ENDSEC":
            cur.expect(SEMICOLON)
            return
        if tok.kind != ENTITY_REF:
            raise StepSyntaxError(tok.offset, "#id or ENDSEC")
        entity_id = int(tok.lexeme[1:])
        cur.expect(EQ)
        type_tok = cur.expect(KEYWORD)
        args = _parse_list(cur)
        cur.expect(SEMICOLON)
        if entity_id in entities:
            raise DuplicateEntityIdError(entity_id)
        entities[entity_id] = StepEntity(entity_id, type_tok.lexeme, args)


# ---------------------------------------------------------------- output


def serialize_value(value: StepValue) -> str:
    if value is UNSET:
        return "$"
    if value is INHERITED:
        return "*"
    if isinstance(value, bool):
        # bools never occur in graphs we build; guard against surprises
        return ".T." if value else ".F."
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_real(value)
    if isinstance(value, str):
        return encode_string(value)
    if isinstance(value, EnumValue):
        return f".{value.name}."
    if isinstance(value, Ref):
        return f"#{value.entity_id}"
    if isinstance(value, TypedValue):
        inner = value.value
        if isinstance(inner, tuple):
            return f"{value.type_name}({serialize_args(inner)})"
        return f"{value.type_name}({serialize_value(inner)})"
    if isinstance(value, tuple):
        return f"({serialize_args(value)})"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def serialize_args(args: tuple) -> str:
    return ",".join(serialize_value(arg) for arg in args)


def serialize_spf(graph: EntityGraph) -> str:
    """Canonical form: sorted ids, one record per line, no extra spaces."""
    lines = ["ISO-10303-21;", "HEADER;"]
    for name, text in (
        ("FILE_DESCRIPTION", graph.header.file_description),
        ("FILE_NAME", graph.header.file_name),
        ("FILE_SCHEMA", graph.header.file_schema),
    ):
        if text:
            lines.append(f"{name}({text});")
    lines.append("ENDSEC;")
    lines.append("DATA;")
    for eid in sorted(graph.entities):
        entity = graph.entities[eid]
        lines.append(f"#{eid}={entity.type_name}({serialize_args(entity.args)});")
    lines.append("ENDSEC;")
    lines.append("END-ISO-10303-21;")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- lookup


def resolve_ref(graph: EntityGraph, ref: Ref | int) -> StepEntity:
    entity_id = ref.entity_id if isinstance(ref, Ref) else int(ref)
    try:
        return graph.entities[entity_id]
    except KeyError:
        raise DanglingReferenceError(entity_id) from None


def entities_of_type(graph: EntityGraph, type_name: str) -> list[StepEntity]:
    """All instances of one type, ascending by entity id."""
    return [graph.entities[eid] for eid in graph.type_index.get(type_name.upper(), ())]
