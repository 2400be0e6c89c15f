"""CoNLL-U reading and writing with CorefUD `Entity` annotation.

The parser keeps every input line verbatim, so serializing an unmodified
document reproduces the input byte for byte.  Only tokens whose `Entity`
attribute was rewritten (by transforms or baselines) are re-assembled, and
even then all other columns and MISC attributes stay untouched.

Entity values are sequences of brackets over entity ids, e.g.
``(e5-person-1-`` opens mention of entity e5 (extra fields: type, head
index, ...), ``e5)`` closes it, ``(e9)`` is a single-node mention and
``(e7[1/2]`` opens the first of two parts of a discontinuous mention.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

from .errors import ConlluParseError, SerializationError

log = logging.getLogger("corefeval")

# Bracket kinds
OPEN = "open"
CLOSE = "close"
OPEN_CLOSE = "open_close"

_EID_STOP = frozenset("-([)]")
_FIELD_STOP = frozenset("-()]")
_CLOSE_STOP = frozenset("[()]")


@dataclass(frozen=True, slots=True)
class EntityBracket:
    """One bracket token of an `Entity` value."""

    kind: str  # OPEN | CLOSE | OPEN_CLOSE
    eid: str
    part: tuple[int, int] | None = None  # (i, n) from "[i/n]"
    extra_fields: tuple[str, ...] = ()  # opening fields after the eid, verbatim

    def __str__(self) -> str:
        part = f"[{self.part[0]}/{self.part[1]}]" if self.part else ""
        if self.kind == CLOSE:
            return f"{self.eid}{part})"
        fields = "".join("-" + f for f in self.extra_fields)
        tail = ")" if self.kind == OPEN_CLOSE else ""
        return f"({self.eid}{part}{fields}{tail}"


def tokenize_entity(value: str) -> list[EntityBracket]:
    """Split an `Entity` attribute value into its bracket sequence."""
    brackets: list[EntityBracket] = []
    i, n = 0, len(value)
    if not value:
        raise ConlluParseError("empty Entity value")
    while i < n:
        if value[i] == "(":
            i += 1
            start = i
            while i < n and value[i] not in _EID_STOP:
                i += 1
            eid = value[start:i]
            if not eid:
                raise ConlluParseError(f"missing entity id in Entity value {value!r}")
            part, i = _parse_part(value, i)
            fields: list[str] = []
            while i < n and value[i] == "-":
                i += 1
                start = i
                while i < n and value[i] not in _FIELD_STOP:
                    i += 1
                fields.append(value[start:i])
            if i < n and value[i] == ")":
                brackets.append(EntityBracket(OPEN_CLOSE, eid, part, tuple(fields)))
                i += 1
            elif i == n or value[i] == "(":
                brackets.append(EntityBracket(OPEN, eid, part, tuple(fields)))
            else:
                raise ConlluParseError(f"cannot parse Entity value {value!r} at offset {i}")
        else:
            start = i
            while i < n and value[i] not in _CLOSE_STOP:
                i += 1
            eid = value[start:i]
            part, i = _parse_part(value, i)
            if not eid or i >= n or value[i] != ")":
                raise ConlluParseError(f"cannot parse Entity value {value!r} at offset {i}")
            brackets.append(EntityBracket(CLOSE, eid, part))
            i += 1
    return brackets


def _parse_part(value: str, i: int) -> tuple[tuple[int, int] | None, int]:
    if i >= len(value) or value[i] != "[":
        return None, i
    end = value.find("]", i)
    body = value[i + 1 : end] if end != -1 else ""
    lo, sep, hi = body.partition("/")
    if not sep or not lo.isdigit() or not hi.isdigit():
        raise ConlluParseError(f"malformed part index in Entity value {value!r}")
    part = (int(lo), int(hi))
    if not (1 <= part[0] <= part[1]) or part[1] < 2:
        raise ConlluParseError(f"part index out of range in Entity value {value!r}")
    return part, end + 1


def serialize_brackets(brackets: Iterable[EntityBracket]) -> str:
    return "".join(str(b) for b in brackets)


class Token:
    """One token line.  `raw` is the verbatim input line; `entity` the
    current Entity value (None = no annotation); `dirty` marks tokens whose
    Entity no longer matches `raw`."""

    __slots__ = ("raw", "entity", "dirty")

    def __init__(self, raw: str, entity: str | None = None, dirty: bool = False):
        self.raw = raw
        self.entity = entity
        self.dirty = dirty

    def fields(self) -> list[str]:
        return self.raw.split("\t")

    @property
    def id(self) -> str:
        return self.raw[: _id_end(self.raw)]

    def line(self) -> str:
        """Current text of the line, rebuilding MISC when Entity changed.
        The Entity attribute keeps its position among the MISC attributes
        (new ones go first)."""
        if not self.dirty:
            return self.raw
        cols = self.raw.split("\t")
        attrs = [] if cols[9] == "_" else cols[9].split("|")
        out = []
        placed = False
        for attr in attrs:
            if attr.startswith("Entity="):
                if self.entity is not None and not placed:
                    out.append("Entity=" + self.entity)
                    placed = True
            else:
                out.append(attr)
        if self.entity is not None and not placed:
            out.insert(0, "Entity=" + self.entity)
        cols[9] = "|".join(out) if out else "_"
        return "\t".join(cols)

    def copy(self) -> "Token":
        return Token(self.raw, self.entity, self.dirty)

    def __repr__(self) -> str:
        return f"Token({self.id!r})"


def _id_end(raw: str) -> int:
    i = raw.find("\t")
    return len(raw) if i == -1 else i


class Sentence:
    __slots__ = ("comments", "tokens")

    def __init__(self, comments: list[str], tokens: list[Token]):
        self.comments = comments
        self.tokens = tokens

    @property
    def sent_id(self) -> str | None:
        for c in self.comments:
            if c.startswith("# sent_id"):
                return c.split("=", 1)[1].strip() if "=" in c else None
        return None

    def copy(self) -> "Sentence":
        return Sentence(list(self.comments), [t.copy() for t in self.tokens])


class Document:
    """One `# newdoc` section: ordered sentences of verbatim lines."""

    __slots__ = ("doc_id", "sentences")

    def __init__(self, doc_id: str | None, sentences: list[Sentence]):
        self.doc_id = doc_id
        self.sentences = sentences

    def copy(self) -> "Document":
        return Document(self.doc_id, [s.copy() for s in self.sentences])

    def __repr__(self) -> str:
        return f"Document({self.doc_id!r}, {len(self.sentences)} sentences)"


# ---------------------------------------------------------------------------
# Parsing

_NEWDOC = "# newdoc"


def parse_file(source: str | Path | BinaryIO) -> list[Document]:
    """Parse a CoNLL-U file (path or binary stream) into documents."""
    if hasattr(source, "read"):
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
        path = getattr(source, "name", "<stream>")
    else:
        path = str(source)
        text = Path(source).read_text(encoding="utf-8")
    return parse_text(text, path=path)


def parse_text(text: str, path: str = "<string>") -> list[Document]:
    docs: list[Document] = []
    for doc_id, first_line, block in _split_blocks(text, path):
        docs.append(_parse_document(doc_id, block, path, first_line))
    if not docs:
        raise ConlluParseError("no content found", path=path)
    return docs


def _split_blocks(text: str, path: str) -> Iterator[tuple[str | None, int, list[str]]]:
    """Yield (doc_id, first_line_number, lines) per document.

    A document starts at the sentence block containing its `# newdoc`
    comment; anything before the first marker forms an id-less document.
    Trailing blank separator lines are stripped from each chunk.
    """
    if text and not text.endswith("\n"):
        log.warning("%s: file does not end with a newline", path)
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # artifact of the final newline

    cur: list[str] = []
    cur_id: str | None = None
    cur_first = 1
    block_start: int | None = None  # index into cur of the current sentence block

    for lineno, line in enumerate(lines, start=1):
        if line == "":
            block_start = None
            cur.append(line)
            continue
        if block_start is None:
            block_start = len(cur)
        if line.startswith(_NEWDOC):
            carried = cur[block_start:]  # comments of this block precede the marker
            head = cur[:block_start]
            if any(l != "" for l in head):
                yield cur_id, cur_first, _strip_trailing_blank(head)
            cur_id = line.split("=", 1)[1].strip() if "=" in line else None
            cur = carried
            cur_first = lineno - len(carried)
            block_start = 0
        cur.append(line)
    if any(l != "" for l in cur):
        yield cur_id, cur_first, _strip_trailing_blank(cur)


def _strip_trailing_blank(lines: list[str]) -> list[str]:
    while lines and lines[-1] == "":
        lines.pop()
    return lines


def _parse_document(
    doc_id: str | None, lines: list[str], path: str, first_line: int
) -> Document:
    sentences: list[Sentence] = []
    comments: list[str] = []
    tokens: list[Token] = []
    open_brackets: dict[tuple[str, tuple[int, int] | None], int] = {}
    last_surface = 0
    last_empty = 0.0
    pending_range: tuple[int, int] | None = None

    def err(msg: str, lineno: int) -> ConlluParseError:
        return ConlluParseError(msg, path=path, line=lineno)

    def close_sentence(lineno: int) -> None:
        nonlocal comments, tokens, last_surface, last_empty, pending_range
        if not comments and not tokens:
            raise err("empty sentence (consecutive blank lines)", lineno)
        if pending_range is not None and pending_range[1] > last_surface:
            raise err(f"token range {pending_range[0]}-{pending_range[1]} exceeds sentence", lineno)
        if open_brackets:
            eids = sorted({eid for eid, _ in open_brackets})
            log.warning(
                "%s: mention of %s crosses a sentence boundary in document %s",
                path, ", ".join(eids), doc_id,
            )
        sentences.append(Sentence(comments, tokens))
        comments, tokens = [], []
        last_surface, last_empty, pending_range = 0, 0.0, None

    lineno = first_line - 1
    for lineno, line in enumerate(lines, start=first_line):
        if line == "":
            close_sentence(lineno)
            continue
        if line[0] == "#":
            if tokens:
                raise err("comment after token lines within a sentence", lineno)
            comments.append(line)
            continue

        tab = line.find("\t")
        tid = line[:tab] if tab != -1 else line
        if line.count("\t") != 9:
            raise err(f"expected 10 tab-separated columns, got {line.count(chr(9)) + 1}", lineno)

        entity = _extract_entity(line)
        if "." in tid:
            word, _, sub = tid.partition(".")
            if not word.isdigit() or not sub.isdigit() or int(sub) < 1:
                raise err(f"unknown token id syntax {tid!r}", lineno)
            order = int(word) + int(sub) / 1e9
            if int(word) != last_surface:
                raise err(f"empty node {tid} does not follow word {word}", lineno)
            if order <= last_empty:
                raise err(f"empty node ids not strictly increasing at {tid}", lineno)
            last_empty = order
        elif "-" in tid:
            lo, _, hi = tid.partition("-")
            if not lo.isdigit() or not hi.isdigit() or int(hi) < int(lo):
                raise err(f"unknown token id syntax {tid!r}", lineno)
            if entity is not None:
                raise err(f"Entity annotation on multiword range line {tid}", lineno)
            if int(lo) != last_surface + 1:
                raise err(f"token range {tid} does not start at next word id", lineno)
            if pending_range is not None and pending_range[1] > last_surface:
                raise err(f"overlapping token ranges at {tid}", lineno)
            pending_range = (int(lo), int(hi))
        elif tid.isdigit() and tid[0] != "0":
            if int(tid) != last_surface + 1:
                raise err(f"surface word ids not consecutive at {tid}", lineno)
            last_surface = int(tid)
            last_empty = float(last_surface)
        else:
            raise err(f"unknown token id syntax {tid!r}", lineno)

        if entity is not None:
            _track_brackets(entity, open_brackets, err, lineno, doc_id, tid)
        tokens.append(Token(line, entity))

    if comments or tokens:
        close_sentence(lineno + 1)
    if open_brackets:
        eid, part = next(iter(sorted(open_brackets)))
        raise ConlluParseError(
            f"unclosed Entity bracket for {eid!r}"
            + (f" part {part[0]}/{part[1]}" if part else "")
            + f" at end of document {doc_id}",
            path=path,
        )
    return Document(doc_id, sentences)


def _extract_entity(line: str) -> str | None:
    if "Entity=" not in line:
        return None
    misc = line[line.rfind("\t") + 1 :]
    for attr in misc.split("|"):
        if attr.startswith("Entity="):
            return attr[7:]
    return None


def _track_brackets(
    value: str,
    open_brackets: dict[tuple[str, tuple[int, int] | None], int],
    err,
    lineno: int,
    doc_id: str | None,
    tid: str,
) -> None:
    try:
        brackets = tokenize_entity(value)
    except ConlluParseError as exc:
        raise err(str(exc), lineno) from None
    for b in brackets:
        key = (b.eid, b.part)
        if b.kind == OPEN:
            if open_brackets.get(key):
                raise err(
                    f"entity {b.eid!r} opened twice without distinct part indices"
                    f" (document {doc_id}, node {tid})",
                    lineno,
                )
            open_brackets[key] = 1
        elif b.kind == CLOSE:
            if not open_brackets.get(key):
                raise err(
                    f"unbalanced Entity bracket: close of {b.eid!r} without open"
                    f" (document {doc_id}, node {tid})",
                    lineno,
                )
            del open_brackets[key]


# ---------------------------------------------------------------------------
# Serialization

def document_lines(doc: Document) -> Iterator[str]:
    for sentence in doc.sentences:
        _check_serializable(sentence)
        yield from sentence.comments
        for token in sentence.tokens:
            yield token.line()
        yield ""


def _check_serializable(sentence: Sentence) -> None:
    for token in sentence.tokens:
        if token.dirty and token.entity == "":
            raise SerializationError("empty Entity value cannot be serialized")


def docs_to_text(docs: Iterable[Document]) -> str:
    lines: list[str] = []
    for doc in docs:
        lines.extend(document_lines(doc))
    if not lines:
        return ""
    return "\n".join(lines) + "\n"


def doc_to_text(doc: Document) -> str:
    return docs_to_text([doc])


def write_file(docs: Iterable[Document], target: str | Path | BinaryIO) -> None:
    """Serialize documents; inverse of parse_file on valid input."""
    text = docs_to_text(docs)
    if hasattr(target, "write"):
        target.write(text.encode("utf-8"))
    else:
        Path(target).write_bytes(text.encode("utf-8"))


# ---------------------------------------------------------------------------
# Lightweight document splitting (for parallel scoring)

def split_document_texts(text: str, path: str = "<string>") -> list[tuple[str | None, int, str]]:
    """Split file text into (doc_id, first_line, text) chunks without full
    parsing.  Each chunk is a valid standalone CoNLL-U snippet; parsing it
    yields the same document as parsing the whole file."""
    return [
        (doc_id, first, "\n".join(lines) + "\n\n")
        for doc_id, first, lines in _split_blocks(text, path)
    ]


_NEWDOC_RE = re.compile(rb"^# newdoc", re.MULTILINE)


def scan_document_spans(data: bytes) -> list[tuple[str | None, int, int]]:
    """Fast (doc_id, byte_start, byte_end) splitter for large files.

    A document starts at the beginning of the sentence block whose comments
    contain the `# newdoc` marker; equivalent to `split_document_texts` on
    canonical files, but scans the raw bytes instead of iterating lines.
    """
    starts: list[tuple[int, str | None]] = []
    for match in _NEWDOC_RE.finditer(data):
        at = data.rfind(b"\n\n", 0, match.start())
        start = 0 if at == -1 else at + 2
        line_end = data.find(b"\n", match.start())
        line = data[match.start():line_end if line_end != -1 else len(data)]
        doc_id = (line.split(b"=", 1)[1].strip().decode("utf-8")
                  if b"=" in line else None)
        if starts and starts[-1][0] == start:
            # two newdoc comments in one block: the later one wins, like
            # the line-based splitter
            starts[-1] = (start, doc_id)
            continue
        starts.append((start, doc_id))
    spans: list[tuple[str | None, int, int]] = []
    if not starts or starts[0][0] > 0:
        end = starts[0][0] if starts else len(data)
        if data[:end].strip():
            spans.append((None, 0, end))
    for i, (start, doc_id) in enumerate(starts):
        end = starts[i + 1][0] if i + 1 < len(starts) else len(data)
        spans.append((doc_id, start, end))
    return spans


def scan_documents(text: str) -> list[tuple[str | None, str]]:
    """(doc_id, chunk text) view of `scan_document_spans`."""
    data = text.encode("utf-8")
    return [(doc_id, data[start:end].decode("utf-8"))
            for doc_id, start, end in scan_document_spans(data)]
