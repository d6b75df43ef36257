//! Table XML output and its parser.
//!
//! The document layout is bit-exact so golden files stay stable across
//! platforms; coordinates use the shortest decimal form that parses back to
//! the same `f64`:
//!
//! ```xml
//! <?xml version="1.0" encoding="UTF-8"?>
//! <table>
//!   <cell start-row="0" end-row="0" start-col="0" end-col="0">
//!     <bounding-box x1="1" y1="2" x2="3" y2="4"/>
//!     <content>a</content>
//!   </cell>
//! </table>
//! ```
//!
//! Cells appear ordered by (start-row, start-col, y1, x1). Content text is
//! preserved exactly, including surrounding whitespace; ids are positional
//! (document order) on read, so a round trip is the identity for tables whose
//! ids already follow that canonical order — which everything this toolkit
//! produces does.

use std::fs;
use std::path::Path;

use quick_xml::events::Event;
use quick_xml::Reader;

use crate::error::{Error, Result};
use crate::model::{validate_table, BBox, CellBox, SpanIndices, TableAnnotation};

fn escape_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for ch in raw.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            // Carriage returns would be normalized away by any conforming
            // XML parser; keep them byte-exact via a character reference.
            '\r' => out.push_str("&#13;"),
            _ => out.push(ch),
        }
    }
    out
}

/// Serializes a spanned table to the XML text above.
pub fn xml_string(table: &TableAnnotation) -> Result<String> {
    if let Some(id) = table.first_unspanned() {
        return Err(Error::MissingSpans(id));
    }
    let mut order: Vec<&CellBox> = table.cells.iter().collect();
    order.sort_by(|a, b| {
        let (sa, sb) = (a.spans.unwrap(), b.spans.unwrap());
        sa.sr
            .cmp(&sb.sr)
            .then(sa.sc.cmp(&sb.sc))
            .then(a.bbox.y1.total_cmp(&b.bbox.y1))
            .then(a.bbox.x1.total_cmp(&b.bbox.x1))
    });

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<table>\n");
    for cell in order {
        let s = cell.spans.unwrap();
        let b = &cell.bbox;
        out.push_str(&format!(
            "  <cell start-row=\"{}\" end-row=\"{}\" start-col=\"{}\" end-col=\"{}\">\n",
            s.sr, s.er, s.sc, s.ec
        ));
        out.push_str(&format!(
            "    <bounding-box x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>\n",
            b.x1, b.y1, b.x2, b.y2
        ));
        out.push_str(&format!(
            "    <content>{}</content>\n",
            escape_text(&cell.content)
        ));
        out.push_str("  </cell>\n");
    }
    out.push_str("</table>\n");
    Ok(out)
}

pub fn write_xml(path: impl AsRef<Path>, table: &TableAnnotation) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, xml_string(table)?).map_err(|e| Error::io(path, e))
}

fn line_of(text: &str, byte_offset: usize) -> usize {
    let upto = byte_offset.min(text.len());
    1 + text.as_bytes()[..upto]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
}

struct Parser<'a> {
    text: &'a str,
    origin: &'a str,
    reader: Reader<&'a [u8]>,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        let line = line_of(self.text, self.reader.buffer_position() as usize);
        Error::parse(format!("{}:{line}", self.origin), message)
    }

    fn next_event(&mut self) -> Result<Event<'a>> {
        self.reader
            .read_event()
            .map_err(|e| self.err(e.to_string()))
    }

    /// Next event after skipping inter-element whitespace and comments.
    fn next_structural(&mut self) -> Result<Event<'a>> {
        loop {
            match self.next_event()? {
                Event::Text(t) if t.iter().all(|b| b.is_ascii_whitespace()) => continue,
                Event::Comment(_) | Event::Decl(_) | Event::PI(_) => continue,
                other => return Ok(other),
            }
        }
    }
}

fn attr_map(
    parser: &Parser<'_>,
    start: &quick_xml::events::BytesStart<'_>,
) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| parser.err(e.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|e| parser.err(e.to_string()))?
            .into_owned();
        out.push((key, value));
    }
    Ok(out)
}

fn required<'v>(
    parser: &Parser<'_>,
    attrs: &'v [(String, String)],
    element: &str,
    key: &str,
) -> Result<&'v str> {
    attrs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| parser.err(format!("<{element}> is missing attribute {key}")))
}

fn parse_num<T: std::str::FromStr>(
    parser: &Parser<'_>,
    element: &str,
    key: &str,
    raw: &str,
) -> Result<T> {
    raw.parse().map_err(|_| {
        parser.err(format!(
            "<{element}> attribute {key}={raw:?} is not a valid number"
        ))
    })
}

/// Parses the XML schema produced by [`xml_string`]. Ids are assigned in
/// document order, invariants are validated, and content whitespace is kept
/// exactly as written.
pub fn parse_xml(text: &str, origin: &str) -> Result<TableAnnotation> {
    let mut reader = Reader::from_reader(text.as_bytes());
    reader.config_mut().trim_text(false);
    let mut parser = Parser {
        text,
        origin,
        reader,
    };

    match parser.next_structural()? {
        Event::Start(e) if e.name().as_ref() == b"table" => {}
        Event::Eof => return Err(parser.err("empty document, expected <table>")),
        other => {
            return Err(parser.err(format!("expected <table> at document root, got {other:?}")))
        }
    }

    let mut cells = Vec::new();
    loop {
        match parser.next_structural()? {
            Event::Start(e) if e.name().as_ref() == b"cell" => {
                let attrs = attr_map(&parser, &e)?;
                let sr = parse_num(
                    &parser,
                    "cell",
                    "start-row",
                    required(&parser, &attrs, "cell", "start-row")?,
                )?;
                let er = parse_num(
                    &parser,
                    "cell",
                    "end-row",
                    required(&parser, &attrs, "cell", "end-row")?,
                )?;
                let sc = parse_num(
                    &parser,
                    "cell",
                    "start-col",
                    required(&parser, &attrs, "cell", "start-col")?,
                )?;
                let ec = parse_num(
                    &parser,
                    "cell",
                    "end-col",
                    required(&parser, &attrs, "cell", "end-col")?,
                )?;
                let (bbox, content) = parse_cell_body(&mut parser)?;
                cells.push(CellBox {
                    id: cells.len() as u32,
                    bbox,
                    spans: Some(SpanIndices::new(sr, er, sc, ec)),
                    content,
                });
            }
            Event::End(e) if e.name().as_ref() == b"table" => break,
            Event::Eof => return Err(parser.err("unexpected end of file inside <table>")),
            other => return Err(parser.err(format!("unexpected content in <table>: {other:?}"))),
        }
    }

    let table = TableAnnotation::new(cells);
    let violations = validate_table(&table);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvariantViolation(format!(
            "{origin}: {}",
            list.join("; ")
        )));
    }
    Ok(table)
}

/// Both `<bounding-box .../>` and `<bounding-box ...></bounding-box>` are
/// accepted, as is a self-closing `<content/>`; hand-authored ground truth
/// uses either form.
fn parse_cell_body(parser: &mut Parser<'_>) -> Result<(BBox, String)> {
    let mut bbox = None;
    let mut content = None;
    loop {
        match parser.next_structural()? {
            Event::Empty(e) if e.name().as_ref() == b"bounding-box" => {
                bbox = Some(parse_bbox_attrs(parser, &e)?);
            }
            Event::Start(e) if e.name().as_ref() == b"bounding-box" => {
                bbox = Some(parse_bbox_attrs(parser, &e)?);
                match parser.next_structural()? {
                    Event::End(end) if end.name().as_ref() == b"bounding-box" => {}
                    other => {
                        return Err(
                            parser.err(format!("expected </bounding-box>, got {other:?}"))
                        )
                    }
                }
            }
            Event::Start(e) if e.name().as_ref() == b"content" => {
                content = Some(parse_content_text(parser)?);
            }
            Event::Empty(e) if e.name().as_ref() == b"content" => {
                content = Some(String::new());
            }
            Event::End(e) if e.name().as_ref() == b"cell" => break,
            Event::Eof => return Err(parser.err("unexpected end of file inside <cell>")),
            other => return Err(parser.err(format!("unexpected content in <cell>: {other:?}"))),
        }
    }
    let bbox = bbox.ok_or_else(|| parser.err("<cell> is missing <bounding-box>"))?;
    let content = content.ok_or_else(|| parser.err("<cell> is missing <content>"))?;
    Ok((bbox, content))
}

fn parse_bbox_attrs(
    parser: &Parser<'_>,
    start: &quick_xml::events::BytesStart<'_>,
) -> Result<BBox> {
    let attrs = attr_map(parser, start)?;
    let coord = |key: &str| -> Result<f64> {
        parse_num(
            parser,
            "bounding-box",
            key,
            required(parser, &attrs, "bounding-box", key)?,
        )
    };
    Ok(BBox::new(coord("x1")?, coord("y1")?, coord("x2")?, coord("y2")?))
}

fn parse_content_text(parser: &mut Parser<'_>) -> Result<String> {
    let mut out = String::new();
    loop {
        match parser.next_event()? {
            Event::Text(t) => {
                out.push_str(&t.unescape().map_err(|e| parser.err(e.to_string()))?);
            }
            Event::CData(t) => {
                out.push_str(
                    std::str::from_utf8(&t).map_err(|e| parser.err(e.to_string()))?,
                );
            }
            Event::End(e) if e.name().as_ref() == b"content" => return Ok(out),
            Event::Eof => return Err(parser.err("unexpected end of file inside <content>")),
            other => return Err(parser.err(format!("unexpected content in <content>: {other:?}"))),
        }
    }
}

pub fn read_xml(path: impl AsRef<Path>) -> Result<TableAnnotation> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xml(&text, &path.display().to_string())
}
