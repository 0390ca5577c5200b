"""Reader for parenthesized RST discourse treebank (.dis) files.

The grammar, as produced by the treebank's annotation tools::

    node   := "(" role field* node* ")"
    role   := "Root" | "Nucleus" | "Satellite"
    field  := "(" "span" INT INT ")" | "(" "leaf" INT ")"
            | "(" "rel2par" LABEL ")" | "(" "text" TEXT ")"
    TEXT   := "_!" ... "!_"   (may contain spaces and parentheses)

Leaf text is split on whitespace after unescaping; paragraph markers such
as ``<P>`` are kept as ordinary tokens. Annotation quirks (same-unit and
textual-organization pseudo-relations) are surfaced as warnings rather
than silently repaired.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from rstparse.core import DiscourseError, RawNode

_ROLES = ("Root", "Nucleus", "Satellite")
_PSEUDO_RELATIONS = ("same-unit", "textualorganization")


class DisParseError(DiscourseError):
    """A .dis file failed to parse; carries the 1-based line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


@dataclass
class DisParse:
    """Result of parsing one .dis file."""

    root: RawNode
    edu_texts: dict[int, str]
    warnings: list[str] = field(default_factory=list)


@dataclass
class _Token:
    kind: str  # "(", ")", "atom", "text"
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch.isspace():
            col += 1
            i += 1
        elif ch in "()":
            tokens.append(_Token(ch, ch, line, col))
            col += 1
            i += 1
        elif text.startswith("_!", i):
            start_line, start_col = line, col
            end = text.find("!_", i + 2)
            if end < 0:
                raise DisParseError("unterminated _!...!_ text", start_line, start_col)
            raw = text[i + 2 : end]
            for c in raw:
                if c == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
            tokens.append(_Token("text", raw, start_line, start_col))
            i = end + 2
            col += 4  # the delimiters
        else:
            start_line, start_col = line, col
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            tokens.append(_Token("atom", text[i:j], start_line, start_col))
            col += j - i
            i = j
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], source: str):
        self.tokens = tokens
        self.pos = 0
        self.source = source
        self.warnings: list[str] = []
        self.edu_texts: dict[int, str] = {}

    def _peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _fail_eof(self, what: str):
        if self.tokens:
            last = self.tokens[-1]
            raise DisParseError(f"unexpected end of input, expected {what}",
                                last.line, last.col)
        raise DisParseError(f"empty input, expected {what}", 1, 1)

    def _expect(self, kind: str, what: str) -> _Token:
        tok = self._peek()
        if tok is None:
            self._fail_eof(what)
        if tok.kind != kind:
            raise DisParseError(f"expected {what}, got {tok.value!r}", tok.line, tok.col)
        self.pos += 1
        return tok

    def parse(self) -> RawNode:
        node = self.parse_node(expect_root=True)
        tok = self._peek()
        if tok is not None:
            raise DisParseError(f"trailing input {tok.value!r}", tok.line, tok.col)
        return node

    def parse_node(self, expect_root: bool = False) -> RawNode:
        open_tok = self._expect("(", "'('")
        role_tok = self._expect("atom", "a node tag")
        role = role_tok.value
        if role not in _ROLES:
            raise DisParseError(f"unknown node tag {role!r}", role_tok.line, role_tok.col)
        if expect_root and role != "Root":
            raise DisParseError(f"expected Root node, got {role!r}",
                                role_tok.line, role_tok.col)

        declared_span: tuple[int, int] | None = None
        leaf_index: int | None = None
        rel2par: str | None = None
        leaf_text: str | None = None
        children: list[RawNode] = []

        while True:
            tok = self._peek()
            if tok is None:
                self._fail_eof("')'")
            if tok.kind == ")":
                self.pos += 1
                break
            if tok.kind != "(":
                raise DisParseError(f"expected '(' or ')', got {tok.value!r}",
                                    tok.line, tok.col)
            # Look ahead one atom to distinguish fields from child nodes.
            nxt = self.tokens[self.pos + 1] if self.pos + 1 < len(self.tokens) else None
            if nxt is not None and nxt.kind == "atom" and nxt.value in _ROLES:
                children.append(self.parse_node())
                continue
            self.pos += 1  # consume "("
            if nxt is None:
                self._fail_eof("a field name")
            name_tok = self._expect("atom", "a field name")
            name = name_tok.value
            if name == "span":
                lo = self._int_atom("span start")
                hi = self._int_atom("span end")
                declared_span = (lo, hi)
            elif name == "leaf":
                leaf_index = self._int_atom("leaf index")
            elif name == "rel2par":
                rel_tok = self._expect("atom", "a relation label")
                rel2par = rel_tok.value
            elif name == "text":
                text_tok = self._expect("text", "_!...!_ text")
                leaf_text = text_tok.value
            else:
                raise DisParseError(f"unknown node tag {name!r}",
                                    name_tok.line, name_tok.col)
            self._expect(")", "')'")

        if role != "Root" and rel2par is None:
            raise DisParseError(f"{role} node missing rel2par",
                                open_tok.line, open_tok.col)
        if rel2par is not None and rel2par.lower() in _PSEUDO_RELATIONS:
            self.warnings.append(
                f"{self.source}: pseudo-relation {rel2par!r} at "
                f"line {open_tok.line}"
            )

        if leaf_index is not None:
            if children:
                raise DisParseError("leaf node must not have children",
                                    open_tok.line, open_tok.col)
            if leaf_text is None:
                raise DisParseError(f"leaf {leaf_index} missing text",
                                    open_tok.line, open_tok.col)
            self.edu_texts[leaf_index] = leaf_text
            return RawNode(role=role, relation=rel2par, edu=leaf_index, text=leaf_text)

        if not children:
            raise DisParseError("internal node has neither leaf nor children",
                                open_tok.line, open_tok.col)
        spans = [_node_span(c) for c in children]
        for (a, b), (c, d) in zip(spans, spans[1:]):
            if c != b + 1:
                raise DisParseError(
                    f"non-contiguous child spans [{a},{b}] and [{c},{d}]",
                    open_tok.line, open_tok.col)
        covered = (spans[0][0], spans[-1][1])
        if declared_span is not None and declared_span != covered:
            raise DisParseError(
                f"declared span {list(declared_span)} does not match children "
                f"coverage {list(covered)}", open_tok.line, open_tok.col)
        return RawNode(role=role, relation=rel2par, children=tuple(children))

    def _int_atom(self, what: str) -> int:
        tok = self._expect("atom", what)
        try:
            return int(tok.value)
        except ValueError:
            raise DisParseError(f"expected an integer {what}, got {tok.value!r}",
                                tok.line, tok.col) from None


def _node_span(node: RawNode) -> tuple[int, int]:
    if node.is_leaf:
        return node.edu, node.edu
    first = node.children[0]
    last = node.children[-1]
    return _node_span(first)[0], _node_span(last)[1]


def _check_balance(text: str) -> None:
    depth = 0
    line, col = 1, 1
    opens: list[tuple[int, int]] = []
    i = 0
    while i < len(text):
        if text.startswith("_!", i):
            end = text.find("!_", i + 2)
            if end < 0:
                break  # reported by the tokenizer
            for c in text[i : end + 2]:
                if c == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
            i = end + 2
            continue
        ch = text[i]
        if ch == "(":
            depth += 1
            opens.append((line, col))
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise DisParseError("unbalanced ')'", line, col)
            opens.pop()
        if ch == "\n":
            line += 1
            col = 1
        else:
            col += 1
        i += 1
    if depth != 0:
        at = opens[-1]
        raise DisParseError("unbalanced '(', never closed", at[0], at[1])


def parse_dis(text: str, source: str = "<dis>") -> DisParse:
    """Parse .dis text into a raw constituency plus per-EDU texts."""
    _check_balance(text)
    tokens = _tokenize(text)
    parser = _Parser(tokens, source)
    root = parser.parse()
    edus = sorted(parser.edu_texts)
    if edus != list(range(1, len(edus) + 1)):
        raise DisParseError(f"leaf indices {edus} are not contiguous from 1", 1, 1)
    return DisParse(root=root, edu_texts=parser.edu_texts, warnings=parser.warnings)
