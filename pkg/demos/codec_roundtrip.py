"""
Packing a record into a news article and an email
=================================================

Archived records travel as ordinary messages. The record is wrapped in an
OAI-PMH GetRecord response, base64 encoded, and its provenance goes in
``X-`` headers that a person can read in any mail or news client.
"""

from piggyback.codec import (
    EmailMessage,
    build_xheaders,
    encode_email_attachment,
    encode_news_article,
    encoded_size,
    extract_record,
)
from piggyback.core import Record

record = Record.from_bytes("http://archive.example.org/oai/papers/tr-2006-17.pdf", b"%PDF-1.4\n" + bytes(300))
xh = build_xheaders(record, "http://archive.example.org/oai/", "2006-08-10T14:20:24Z")

###############################################################################
# As a news article. Long X-header values are split across numbered
# continuation headers (``X-sourceURL-1``, ``X-sourceURL-2`` ...).

article = encode_news_article(
    record, "repository.example.archive", xh,
    date="Thu, 10 Aug 2006 14:03:45 +0000", message_id="<tr-2006-17@archive.example.org>",
)
text = article.to_text()
print("\n".join(text.splitlines()[:16]))
print("...")

###############################################################################
# As an attachment to a message someone was sending anyway.

carrier = EmailMessage(
    headers=[("From", "librarian@example.org"), ("To", "colleague@example.net"), ("Subject", "minutes")],
    body="Minutes from today attached to nothing in particular.\n",
)
mail = encode_email_attachment(carrier, record, xh)
part = mail.archive_part()
print(f"\narchive part: {part.content_type}, {part.disposition}")

###############################################################################
# Either message gives back the exact bytes and the provenance headers.

for name, msg in (("news", text), ("email", mail.to_text())):
    got_xh, payload = extract_record(msg)
    print(f"{name:>5}: intact={payload.data == record.content} identifier={payload.identifier}")
print(f"\nbase64 of {record.size} bytes takes {encoded_size(record.size)} characters")
