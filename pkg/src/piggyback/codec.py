"""Archival message formats: X-headers, base64 bodies, news articles, MIME email.

Every message carries the record wrapped in a synthesized OAI-PMH GetRecord
response (the "envelope"), base64-encoded. A news article puts the encoded
envelope in its body; an email carries it as one BASE64 attachment next to
the untouched carrier text. Both shapes serialize to plain text and parse
back bit-exactly.

Header values longer than the line limit are split into numbered
continuation headers (``X-sourceURL``, ``X-sourceURL-1``, ...), which the
parsers rejoin.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from email.message import Message
from email.utils import format_datetime
from urllib.parse import urlparse
from xml.sax.saxutils import escape, quoteattr

from .core import Record

BODY_LINE_LENGTH = 76
HEADER_LINE_LENGTH = 72

XHEADER_FIELDS = (
    ("X-Harvest_Time", "harvest_time"),
    ("X-baseURL", "base_url"),
    ("X-OAI-PMH_verb", "verb"),
    ("X-OAI-PMH_metadataPrefix", "metadata_prefix"),
    ("X-OAI-PMH_Identifier", "identifier"),
    ("X-sourceURL", "source_url"),
    ("X-HTTP-Header", "http_header"),
)
XHEADER_NAMES = tuple(name for name, _ in XHEADER_FIELDS)
_FIELD_BY_NAME = dict(XHEADER_FIELDS)

ARCHIVE_CONTENT_TYPE = "x-application/myxml"
_NEWSGROUP_RE = re.compile(r"^[a-z0-9+_-]+(\.[a-z0-9+_-]+)+$")
_CONTINUATION_RE = re.compile(r"^(.+)-(\d+)$")


class CodecError(ValueError):
    pass


class EncodingError(CodecError):
    pass


class DecodeError(CodecError):
    pass


class FormatError(CodecError):
    pass


class OversizeError(CodecError):
    pass


class DoubleAttachError(CodecError):
    pass


# --------------------------------------------------------------------------
# base64 bodies


def encoded_size(n: int) -> int:
    """Exact base64 size of ``n`` bytes, excluding line separators."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return 4 * (-(-n // 3))


def encode_base64_body(data: bytes, line_length: int = BODY_LINE_LENGTH) -> str:
    encoded = base64.b64encode(data).decode("ascii")
    return "\n".join(
        encoded[i : i + line_length] for i in range(0, len(encoded), line_length)
    )


def decode_base64_body(text: str, where: str = "body") -> bytes:
    compact = "".join(text.split())
    try:
        return base64.b64decode(compact, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise DecodeError(f"{where}: invalid base64 ({exc})") from None


# --------------------------------------------------------------------------
# headers


def split_long_header(name: str, value: str, limit: int = HEADER_LINE_LENGTH) -> list[tuple[str, str]]:
    """Split ``value`` so every rendered ``name: value`` line fits in ``limit``.

    The first piece keeps ``name``; later pieces are named ``name-1``,
    ``name-2``, ... Concatenating the values in order gives back ``value``.
    """
    if limit <= len(name) + 2:
        raise ValueError(f"limit {limit} too small for header {name!r}")
    if len(name) + 2 + len(value) <= limit:
        return [(name, value)]
    pieces = []
    pos = 0
    k = 0
    while pos < len(value) or k == 0:
        piece_name = name if k == 0 else f"{name}-{k}"
        room = limit - len(piece_name) - 2
        if room < 1:
            raise ValueError(f"limit {limit} too small for continuation header {piece_name!r}")
        pieces.append((piece_name, value[pos : pos + room]))
        pos += room
        k += 1
    return pieces


def join_headers(pairs: list[tuple[str, str]]) -> list[tuple[str, str]]:
    """Inverse of :func:`split_long_header` over a whole header list."""
    out: list[tuple[str, str]] = []
    chain = 0
    for name, value in pairs:
        m = _CONTINUATION_RE.match(name)
        if out and m and m.group(1) == out[-1][0] and int(m.group(2)) == chain + 1:
            out[-1] = (out[-1][0], out[-1][1] + value)
            chain += 1
        else:
            out.append((name, value))
            chain = 0
    return out


def render_header_lines(pairs: list[tuple[str, str]], limit: int = HEADER_LINE_LENGTH) -> list[str]:
    """Render headers one per line; long X-headers become continuation headers.

    Standard headers are never split: a ``Content-Type-1`` would be
    meaningless to mail and news software.
    """
    lines = []
    for name, value in pairs:
        if "\n" in value or "\r" in value:
            raise FormatError(f"header {name} contains a line break")
        if name.startswith("X-"):
            lines.extend(f"{n}: {v}" for n, v in split_long_header(name, value, limit))
        else:
            lines.append(f"{name}: {value}")
    return lines


def parse_header_lines(lines: list[str]) -> list[tuple[str, str]]:
    """Parse ``Name: value`` lines (RFC folding accepted) and rejoin continuations."""
    unfolded: list[str] = []
    for line in lines:
        if line[:1] in (" ", "\t") and unfolded:
            unfolded[-1] += line
        elif line:
            unfolded.append(line)
    pairs = []
    for line in unfolded:
        name, sep, value = line.partition(":")
        if not sep:
            raise FormatError(f"malformed header line: {line[:60]!r}")
        if value.startswith(" "):
            value = value[1:]
        pairs.append((name.strip(), value))
    return join_headers(pairs)


def _header(pairs: list[tuple[str, str]], name: str) -> str | None:
    lname = name.lower()
    for n, v in pairs:
        if n.lower() == lname:
            return v
    return None


# --------------------------------------------------------------------------
# X-headers


def format_harvest_time(when: datetime | str) -> str:
    """UTC timestamp in the prototype's unpadded style, e.g. ``2006-2-15T18:34:51Z``."""
    if isinstance(when, str):
        return when
    if when.tzinfo is not None:
        when = when.astimezone(timezone.utc)
    return f"{when.year}-{when.month}-{when.day}T{when.hour}:{when.minute}:{when.second}Z"


@dataclass(frozen=True)
class XHeaderSet:
    harvest_time: str
    base_url: str
    verb: str
    metadata_prefix: str
    identifier: str
    source_url: str
    http_header: str = "HTTP/1.1 200 OK"

    def pairs(self) -> list[tuple[str, str]]:
        return [(name, getattr(self, attr)) for name, attr in XHEADER_FIELDS]

    def render(self, limit: int = HEADER_LINE_LENGTH) -> str:
        return "\n".join(render_header_lines(self.pairs(), limit))

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str, str]]) -> XHeaderSet:
        values = {}
        for name, value in join_headers(pairs):
            if name in _FIELD_BY_NAME:
                values[_FIELD_BY_NAME[name]] = value
        missing = [n for n, a in XHEADER_FIELDS if a not in values]
        if missing:
            raise FormatError(f"missing X-headers: {', '.join(missing)}")
        return cls(**values)

    @classmethod
    def parse(cls, text: str) -> XHeaderSet:
        return cls.from_pairs(parse_header_lines(text.splitlines()))


def _check_url(url: str, what: str) -> None:
    if not url:
        raise ValueError(f"{what} must be non-empty")
    try:
        url.encode("ascii")
    except UnicodeEncodeError:
        raise EncodingError(f"{what} is not ASCII: {url!r}") from None
    parsed = urlparse(url)
    if not parsed.scheme or not parsed.netloc:
        raise ValueError(f"{what} is not an absolute URL: {url!r}")


def build_xheaders(
    record: Record,
    base_url: str,
    harvest_time: datetime | str,
    verb: str = "GetRecord",
    metadata_prefix: str = "oai_didl",
    http_header: str = "HTTP/1.1 200 OK",
) -> XHeaderSet:
    _check_url(base_url, "base_url")
    _check_url(record.identifier, "record identifier")
    source = f"{base_url}?verb={verb}&identifier={record.identifier}&metadataPrefix={metadata_prefix}"
    return XHeaderSet(
        harvest_time=format_harvest_time(harvest_time),
        base_url=base_url,
        verb=verb,
        metadata_prefix=metadata_prefix,
        identifier=record.identifier,
        source_url=source,
        http_header=http_header,
    )


# --------------------------------------------------------------------------
# GetRecord envelope

_OAI_NS = "http://www.openarchives.org/OAI/2.0/"
_DIDL_NS = "urn:mpeg:mpeg21:2002:02-DIDL-NS"

_ENVELOPE = """<?xml version="1.0" encoding="UTF-8"?>
<OAI-PMH xmlns="{oai}" xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" \
xsi:schemaLocation="{oai} http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd">
<responseDate>{date}</responseDate>
<request verb="GetRecord" identifier={ident_attr} metadataPrefix="oai_didl">{base}</request>
<GetRecord><record><header><identifier>{ident}</identifier><datestamp>{date}</datestamp></header>
<metadata><didl:DIDL xmlns:didl="{didl}"><didl:Item><didl:Component>
<didl:Resource mimeType="application/octet-stream" encoding="base64">
{data}
</didl:Resource></didl:Component></didl:Item></didl:DIDL></metadata></record></GetRecord>
</OAI-PMH>
"""


@dataclass(frozen=True)
class Payload:
    identifier: str
    data: bytes
    wrapper: str = field(default="", compare=False, repr=False)


def wrap_payload(identifier: str, data: bytes, response_date: str, base_url: str = "") -> bytes:
    """Return the GetRecord envelope (UTF-8 XML) carrying ``data``."""
    xml = _ENVELOPE.format(
        oai=_OAI_NS,
        didl=_DIDL_NS,
        date=escape(response_date),
        ident=escape(identifier),
        ident_attr=quoteattr(identifier),
        base=escape(base_url),
        data=encode_base64_body(data),
    )
    return xml.encode("utf-8")


def unwrap_payload(envelope: bytes, where: str = "payload") -> Payload:
    try:
        root = ET.fromstring(envelope)
    except ET.ParseError as exc:
        raise DecodeError(f"{where}: envelope is not well-formed XML ({exc})") from None
    ident = root.find(f".//{{{_OAI_NS}}}header/{{{_OAI_NS}}}identifier")
    res = root.find(f".//{{{_DIDL_NS}}}Resource")
    if ident is None or res is None:
        raise DecodeError(f"{where}: envelope lacks identifier or resource")
    return Payload(
        identifier=ident.text or "",
        data=decode_base64_body(res.text or "", where),
        wrapper=envelope.decode("utf-8"),
    )


# --------------------------------------------------------------------------
# news articles


def _fmt_date(date: datetime | str) -> str:
    return date if isinstance(date, str) else format_datetime(date)


@dataclass
class NewsArticle:
    """A news post: standard headers, X-headers, and a base64 body.

    ``headers`` holds the standard headers in output order; ``Lines`` is
    computed from the body at render time.
    """

    headers: list[tuple[str, str]]
    xheaders: XHeaderSet | None
    body: str = ""

    @property
    def newsgroup(self) -> str | None:
        return _header(self.headers, "Newsgroups")

    @property
    def subject(self) -> str | None:
        return _header(self.headers, "Subject")

    @property
    def lines(self) -> int:
        return len(self.body.split("\n")) if self.body else 0

    def to_text(self, header_limit: int = HEADER_LINE_LENGTH) -> str:
        pairs = [(n, v) for n, v in self.headers if n.lower() != "lines"]
        pairs.append(("Lines", str(self.lines)))
        if self.xheaders is not None:
            pairs += self.xheaders.pairs()
        head = "\n".join(render_header_lines(pairs, header_limit))
        return f"{head}\n\n{self.body}\n" if self.body else f"{head}\n\n"

    @classmethod
    def from_text(cls, text: str) -> NewsArticle:
        text = text.replace("\r\n", "\n")
        head, _, body = text.partition("\n\n")
        pairs = parse_header_lines(head.split("\n"))
        body = body[:-1] if body.endswith("\n") else body
        xh = None
        if any(n in _FIELD_BY_NAME for n, _ in pairs):
            xh = XHeaderSet.from_pairs(pairs)
        headers = [(n, v) for n, v in pairs if n not in _FIELD_BY_NAME]
        article = cls(headers, xh, body)
        declared = _header(headers, "Lines")
        if declared is not None and int(declared) != article.lines:
            raise FormatError(f"Lines header says {declared}, body has {article.lines} lines")
        return article


def encode_news_article(
    record: Record,
    newsgroup: str,
    xh: XHeaderSet,
    *,
    date: datetime | str,
    message_id: str,
    sender: str = "DigLib Mgr <dlmgr@localhost>",
    organization: str | None = None,
    max_article_size: int | None = None,
    by_reference: bool = False,
) -> NewsArticle:
    """Build the news post for ``record``.

    With ``by_reference`` the body is left empty and only the X-headers
    travel. Raises :class:`OversizeError` when the rendered article is larger
    than ``max_article_size`` bytes.
    """
    if not _NEWSGROUP_RE.match(newsgroup):
        raise ValueError(f"newsgroup {newsgroup!r} is not a dotted group name")
    headers = [
        ("From", sender),
        ("Newsgroups", newsgroup),
        ("Subject", record.identifier),
        ("Date", _fmt_date(date)),
        ("Message-ID", message_id),
    ]
    if organization:
        headers.append(("Organization", organization))
    body = ""
    if not by_reference and record.size:
        envelope = wrap_payload(record.identifier, record.content, xh.harvest_time, xh.base_url)
        body = encode_base64_body(envelope)
    article = NewsArticle(headers, xh, body)
    if max_article_size is not None:
        size = len(article.to_text().encode("ascii"))
        if size > max_article_size:
            raise OversizeError(f"article for {record.identifier} is {size} bytes > {max_article_size}")
    return article


# --------------------------------------------------------------------------
# email


@dataclass
class MimePart:
    headers: list[tuple[str, str]]
    body: str
    raw_headers: str | None = field(default=None, repr=False)

    @property
    def content_type(self) -> str:
        return _header(self.headers, "Content-Type") or "text/plain"

    @property
    def disposition(self) -> str | None:
        return _header(self.headers, "Content-Disposition")

    @property
    def is_archive(self) -> bool:
        cte = (_header(self.headers, "Content-Transfer-Encoding") or "").lower()
        return cte == "base64" and self.content_type.lower().startswith(ARCHIVE_CONTENT_TYPE)

    def to_text(self) -> str:
        head = self.raw_headers
        if head is None:
            head = "\n".join(f"{n}: {v}" for n, v in self.headers)
        return f"{head}\n\n{self.body}"


def _param(header_value: str | None, name: str) -> str | None:
    if header_value is None:
        return None
    msg = Message()
    msg["Content-Type"] = header_value
    value = msg.get_param(name)
    return value if isinstance(value, str) else None


@dataclass
class EmailMessage:
    """An RFC 822 message, single-part or multipart/mixed.

    Single-part messages keep their text in ``body`` and have no ``parts``.
    ``headers`` excludes the archival X-headers, which live in ``xheaders``.
    """

    headers: list[tuple[str, str]]
    body: str = ""
    parts: list[MimePart] = field(default_factory=list)
    boundary: str | None = None
    preamble: str = ""
    epilogue: str = ""
    xheaders: XHeaderSet | None = None

    @property
    def is_multipart(self) -> bool:
        return self.boundary is not None

    def archive_part(self) -> MimePart | None:
        found = [p for p in self.parts if p.is_archive]
        if len(found) > 1:
            raise FormatError("message carries more than one archive attachment")
        return found[0] if found else None

    def to_text(self, header_limit: int = HEADER_LINE_LENGTH) -> str:
        pairs = list(self.headers)
        if self.xheaders is not None:
            pairs += self.xheaders.pairs()
        head = "\n".join(render_header_lines(pairs, header_limit))
        if not self.is_multipart:
            return f"{head}\n\n{self.body}"
        delim = f"--{self.boundary}"
        chunks = [self.preamble] if self.preamble else []
        for part in self.parts:
            chunks.append(f"{delim}\n{part.to_text()}")
        chunks.append(f"{delim}--")
        text = "\n".join(chunks)
        if self.epilogue:
            text += "\n" + self.epilogue
        return f"{head}\n\n{text}"

    @classmethod
    def from_text(cls, text: str) -> EmailMessage:
        text = text.replace("\r\n", "\n")
        head, _, body = text.partition("\n\n")
        pairs = parse_header_lines(head.split("\n"))
        xh = None
        if any(n in _FIELD_BY_NAME for n, _ in pairs):
            xh = XHeaderSet.from_pairs(pairs)
        headers = [(n, v) for n, v in pairs if n not in _FIELD_BY_NAME]
        ctype = _header(headers, "Content-Type")
        boundary = None
        if ctype and ctype.lower().startswith("multipart/"):
            boundary = _param(ctype, "boundary")
            if not boundary:
                raise FormatError("multipart message without boundary")
        if boundary is None:
            return cls(headers, body=body, xheaders=xh)

        segments = ("\n" + body).split(f"\n--{boundary}")
        preamble = segments[0][1:]
        parts = []
        epilogue = ""
        closed = False
        for seg in segments[1:]:
            if seg.startswith("--"):
                epilogue = seg[2:].removeprefix("\n")
                closed = True
                break
            _, _, part_text = seg.partition("\n")
            raw_head, sep, part_body = part_text.partition("\n\n")
            if not sep:
                raw_head, part_body = raw_head.rstrip("\n"), ""
            parts.append(MimePart(parse_header_lines(raw_head.split("\n")), part_body, raw_head))
        if not closed:
            raise FormatError("multipart message is missing its closing boundary")
        return cls(headers, "", parts, boundary, preamble, epilogue, xh)


def _make_boundary(carrier: EmailMessage, envelope: bytes) -> str:
    digest = hashlib.sha1(carrier.to_text().encode("utf-8", "surrogateescape") + envelope)
    return f"=_piggyback_{digest.hexdigest()[:24]}"


def encode_email_attachment(
    carrier: EmailMessage,
    record: Record,
    xh: XHeaderSet,
    *,
    by_reference: bool = False,
) -> EmailMessage:
    """Return ``carrier`` with X-headers and one BASE64 archive attachment.

    The carrier's own parts (or its single text body) are carried over
    unchanged. ``by_reference`` adds only the X-headers.
    """
    if carrier.xheaders is not None or carrier.archive_part() is not None:
        raise DoubleAttachError("carrier already holds an archive attachment")
    if by_reference:
        return replace(carrier, headers=list(carrier.headers), xheaders=xh)

    envelope = wrap_payload(record.identifier, record.content, xh.harvest_time, xh.base_url)
    filename = hashlib.md5(envelope).hexdigest() + ".xml"
    attachment = MimePart(
        [
            ("Content-Type", f'{ARCHIVE_CONTENT_TYPE}; charset=US-ASCII; name="{record.identifier}"'),
            ("Content-Transfer-Encoding", "BASE64"),
            ("Content-Description", "application/xml"),
            ("Content-Disposition", f'attachment; filename="{filename}"'),
        ],
        encode_base64_body(envelope) + "\n",
    )

    if carrier.is_multipart:
        return replace(
            carrier, headers=list(carrier.headers), parts=[*carrier.parts, attachment], xheaders=xh
        )

    moved = ("content-type", "content-transfer-encoding")
    text_headers = [(n, v) for n, v in carrier.headers if n.lower() in moved]
    if not any(n.lower() == "content-type" for n, _ in text_headers):
        text_headers.insert(0, ("Content-Type", "TEXT/PLAIN; charset=US-ASCII"))
    boundary = _make_boundary(carrier, envelope)
    while f"--{boundary}" in carrier.body:
        boundary = "=" + boundary
    headers = [(n, v) for n, v in carrier.headers if n.lower() not in moved]
    if _header(headers, "MIME-Version") is None:
        headers.append(("MIME-Version", "1.0"))
    headers.append(("Content-Type", f'MULTIPART/MIXED; BOUNDARY="{boundary}"'))
    return EmailMessage(
        headers=headers,
        parts=[MimePart(text_headers, carrier.body), attachment],
        boundary=boundary,
        xheaders=xh,
    )


# --------------------------------------------------------------------------
# extraction


def parse_message(text: str) -> NewsArticle | EmailMessage:
    """Parse a serialized message, telling news from email by its headers."""
    head = text.replace("\r\n", "\n").partition("\n\n")[0]
    if re.search(r"^Newsgroups:", head, re.MULTILINE | re.IGNORECASE):
        return NewsArticle.from_text(text)
    return EmailMessage.from_text(text)


def extract_record(message: NewsArticle | EmailMessage | str) -> tuple[XHeaderSet, Payload]:
    """Recover the X-headers and exact record bytes from an archival message.

    Messages sent by reference (X-headers only) yield an empty payload.
    """
    if isinstance(message, str):
        message = parse_message(message)
    if message.xheaders is None:
        raise FormatError("message has no archival X-headers")
    xh = message.xheaders

    if isinstance(message, NewsArticle):
        if not message.body:
            return xh, Payload(xh.identifier, b"")
        envelope = decode_base64_body(message.body, "news body")
        payload = unwrap_payload(envelope, "news body")
    else:
        part = message.archive_part()
        if part is None:
            return xh, Payload(xh.identifier, b"")
        where = f"part {message.parts.index(part) + 1}"
        envelope = decode_base64_body(part.body, where)
        filename = _param(part.disposition, "filename")
        if filename and filename.endswith(".xml"):
            if hashlib.md5(envelope).hexdigest() != filename[:-4]:
                raise DecodeError(f"{where}: content does not match attachment hash {filename}")
        payload = unwrap_payload(envelope, where)

    if payload.identifier != xh.identifier:
        raise FormatError(
            f"payload identifier {payload.identifier!r} != X-header {xh.identifier!r}"
        )
    return xh, payload
