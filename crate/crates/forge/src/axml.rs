//! Android binary XML decoding: turn the compiled `AndroidManifest.xml`
//! chunk stream back into readable XML text.
//!
//! The output format is deliberately plain: four-space indentation,
//! attributes in stored order, namespace declarations on the element that
//! follows them, self-closing tags for childless elements.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AxmlError {
    #[error("BadMagic: not a binary XML document")]
    BadMagic,
    #[error("TruncatedChunk: chunk type {0:#06x} exceeds the document")]
    TruncatedChunk(u16),
    #[error("MissingStringPool: element chunk arrived before any string pool")]
    MissingStringPool,
    #[error("StringIndexOutOfRange: index {index}")]
    StringIndexOutOfRange { index: u32 },
    #[error("UnbalancedElements: {0}")]
    UnbalancedElements(String),
}

/// Decoded document text plus non-fatal observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxmlDocument {
    pub text: String,
    pub warnings: Vec<String>,
}

/// The document text as bytes (UTF-8, no byte-order mark) for plotting.
pub fn manifest_text_bytes(doc: &AxmlDocument) -> Vec<u8> {
    doc.text.as_bytes().to_vec()
}

const CHUNK_STRING_POOL: u16 = 0x0001;
const CHUNK_XML: u16 = 0x0003;
const CHUNK_START_NAMESPACE: u16 = 0x0100;
const CHUNK_END_NAMESPACE: u16 = 0x0101;
const CHUNK_START_ELEMENT: u16 = 0x0102;
const CHUNK_END_ELEMENT: u16 = 0x0103;
const CHUNK_CDATA: u16 = 0x0104;
const CHUNK_RESOURCE_MAP: u16 = 0x0180;

const NO_INDEX: u32 = 0xFFFF_FFFF;
const UTF8_FLAG: u32 = 1 << 8;

fn le16(buf: &[u8], off: usize) -> Option<u16> {
    buf.get(off..off + 2).map(|s| u16::from_le_bytes([s[0], s[1]]))
}

fn le32(buf: &[u8], off: usize) -> Option<u32> {
    buf.get(off..off + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
}

struct StringPool {
    strings: Vec<String>,
}

impl StringPool {
    fn get(&self, index: u32) -> Result<&str, AxmlError> {
        self.strings
            .get(index as usize)
            .map(|s| s.as_str())
            .ok_or(AxmlError::StringIndexOutOfRange { index })
    }
}

fn parse_string_pool(chunk: &[u8]) -> Result<StringPool, AxmlError> {
    let fail = || AxmlError::TruncatedChunk(CHUNK_STRING_POOL);
    let header_size = le16(chunk, 2).ok_or_else(fail)? as usize;
    let count = le32(chunk, 8).ok_or_else(fail)? as usize;
    let flags = le32(chunk, 16).ok_or_else(fail)?;
    let strings_start = le32(chunk, 20).ok_or_else(fail)? as usize;
    let utf8 = flags & UTF8_FLAG != 0;

    let mut strings = Vec::with_capacity(count.min(4096));
    for i in 0..count {
        let rel = le32(chunk, header_size + i * 4).ok_or_else(fail)? as usize;
        let at = strings_start.checked_add(rel).ok_or_else(fail)?;
        let s = if utf8 {
            read_utf8_string(chunk, at).ok_or_else(fail)?
        } else {
            read_utf16_string(chunk, at).ok_or_else(fail)?
        };
        strings.push(s);
    }
    Ok(StringPool { strings })
}

/// UTF-8 pool entry: varint UTF-16 length, varint byte length, bytes.
fn read_utf8_string(chunk: &[u8], mut at: usize) -> Option<String> {
    let mut read_len = |chunk: &[u8]| -> Option<usize> {
        let b0 = *chunk.get(at)? as usize;
        at += 1;
        if b0 & 0x80 != 0 {
            let b1 = *chunk.get(at)? as usize;
            at += 1;
            Some(((b0 & 0x7F) << 8) | b1)
        } else {
            Some(b0)
        }
    };
    let _utf16_len = read_len(chunk)?;
    let byte_len = read_len(chunk)?;
    let bytes = chunk.get(at..at.checked_add(byte_len)?)?;
    Some(String::from_utf8_lossy(bytes).into_owned())
}

/// UTF-16 pool entry: u16 length (with high-bit extension), UTF-16LE data.
fn read_utf16_string(chunk: &[u8], mut at: usize) -> Option<String> {
    let first = le16(chunk, at)? as usize;
    at += 2;
    let char_len = if first & 0x8000 != 0 {
        let second = le16(chunk, at)? as usize;
        at += 2;
        ((first & 0x7FFF) << 16) | second
    } else {
        first
    };
    let mut units = Vec::with_capacity(char_len.min(4096));
    for i in 0..char_len {
        units.push(le16(chunk, at + i * 2)?);
    }
    Some(
        char::decode_utf16(units)
            .map(|r| r.unwrap_or('\u{FFFD}'))
            .collect(),
    )
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn render_typed(dtype: u8, data: u32, pool: &StringPool) -> Result<String, AxmlError> {
    Ok(match dtype {
        0x00 => String::new(),
        0x01 => format!("@0x{data:08x}"),
        0x02 => format!("?0x{data:08x}"),
        0x03 => escape(pool.get(data)?),
        0x04 => format!("{}", f32::from_bits(data)),
        0x10 => format!("{}", data as i32),
        0x11 => format!("0x{data:x}"),
        0x12 => {
            if data != 0 {
                "true".into()
            } else {
                "false".into()
            }
        }
        0x1C..=0x1F => format!("#{data:08x}"),
        _ => format!("0x{data:x}"),
    })
}

enum Event {
    Open {
        name: String,
        attrs: Vec<(String, String)>,
    },
    Close {
        name: String,
    },
    Text(String),
}

/// Decode a compiled Android XML document.
pub fn decode_axml(bytes: &[u8]) -> Result<AxmlDocument, AxmlError> {
    if le16(bytes, 0) != Some(CHUNK_XML) {
        return Err(AxmlError::BadMagic);
    }
    let file_header = le16(bytes, 2).ok_or(AxmlError::BadMagic)? as usize;
    if file_header < 8 || bytes.len() < file_header {
        return Err(AxmlError::BadMagic);
    }

    let mut warnings = Vec::new();
    let mut pool: Option<StringPool> = None;
    // Active namespaces, innermost last: (prefix idx, uri idx).
    let mut ns_stack: Vec<(u32, u32)> = Vec::new();
    // Namespaces declared but not yet attached to an element.
    let mut pending_ns: Vec<(u32, u32)> = Vec::new();
    // Open element name indices, for balance checking.
    let mut open: Vec<u32> = Vec::new();
    let mut events: Vec<Event> = Vec::new();

    let mut pos = file_header;
    while pos + 8 <= bytes.len() {
        let ctype = le16(bytes, pos).unwrap();
        let hsize = le16(bytes, pos + 2).unwrap() as usize;
        let csize = le32(bytes, pos + 4).unwrap() as usize;
        if csize < 8 || hsize < 8 || hsize > csize || pos + csize > bytes.len() {
            return Err(AxmlError::TruncatedChunk(ctype));
        }
        let chunk = &bytes[pos..pos + csize];
        let body = hsize; // chunk-relative offset where the body starts

        match ctype {
            CHUNK_STRING_POOL => {
                pool = Some(parse_string_pool(chunk)?);
            }
            CHUNK_RESOURCE_MAP => {} // attribute resource ids; not needed
            CHUNK_START_NAMESPACE => {
                let fail = || AxmlError::TruncatedChunk(ctype);
                let prefix = le32(chunk, body).ok_or_else(fail)?;
                let uri = le32(chunk, body + 4).ok_or_else(fail)?;
                ns_stack.push((prefix, uri));
                pending_ns.push((prefix, uri));
            }
            CHUNK_END_NAMESPACE => {
                ns_stack.pop();
            }
            CHUNK_START_ELEMENT => {
                let pool = pool.as_ref().ok_or(AxmlError::MissingStringPool)?;
                let fail = || AxmlError::TruncatedChunk(ctype);
                let ns = le32(chunk, body).ok_or_else(fail)?;
                let name_idx = le32(chunk, body + 4).ok_or_else(fail)?;
                let attr_start = le16(chunk, body + 8).ok_or_else(fail)? as usize;
                let attr_size = le16(chunk, body + 10).ok_or_else(fail)? as usize;
                let attr_count = le16(chunk, body + 12).ok_or_else(fail)? as usize;
                if attr_size < 20 {
                    return Err(fail());
                }

                let mut attrs: Vec<(String, String)> = Vec::with_capacity(attr_count + 1);
                for (prefix, uri) in pending_ns.drain(..) {
                    attrs.push((
                        format!("xmlns:{}", pool.get(prefix)?),
                        escape(pool.get(uri)?),
                    ));
                }
                for a in 0..attr_count {
                    let at = body + attr_start + a * attr_size;
                    let a_ns = le32(chunk, at).ok_or_else(fail)?;
                    let a_name = le32(chunk, at + 4).ok_or_else(fail)?;
                    let dtype = *chunk.get(at + 15).ok_or_else(fail)?;
                    let data = le32(chunk, at + 16).ok_or_else(fail)?;
                    let qualified = qualify(pool, &ns_stack, a_ns, a_name, &mut warnings)?;
                    attrs.push((qualified, render_typed(dtype, data, pool)?));
                }
                let name = qualify(pool, &ns_stack, ns, name_idx, &mut warnings)?;
                open.push(name_idx);
                events.push(Event::Open { name, attrs });
            }
            CHUNK_END_ELEMENT => {
                let pool = pool.as_ref().ok_or(AxmlError::MissingStringPool)?;
                let fail = || AxmlError::TruncatedChunk(ctype);
                let ns = le32(chunk, body).ok_or_else(fail)?;
                let name_idx = le32(chunk, body + 4).ok_or_else(fail)?;
                let name = qualify(pool, &ns_stack, ns, name_idx, &mut warnings)?;
                match open.pop() {
                    Some(top) if top == name_idx => {}
                    Some(top) => {
                        let top_name = pool.get(top).unwrap_or("?");
                        return Err(AxmlError::UnbalancedElements(format!(
                            "</{name}> closes <{top_name}>"
                        )));
                    }
                    None => {
                        return Err(AxmlError::UnbalancedElements(format!(
                            "</{name}> with nothing open"
                        )));
                    }
                }
                events.push(Event::Close { name });
            }
            CHUNK_CDATA => {
                let pool = pool.as_ref().ok_or(AxmlError::MissingStringPool)?;
                let fail = || AxmlError::TruncatedChunk(ctype);
                let data = le32(chunk, body).ok_or_else(fail)?;
                events.push(Event::Text(escape(pool.get(data)?)));
            }
            other => {
                warnings.push(format!("UnknownChunk: type {other:#06x} skipped"));
            }
        }
        pos += csize;
    }

    if let Some(idx) = open.pop() {
        let name = pool
            .as_ref()
            .and_then(|p| p.get(idx).ok())
            .unwrap_or("?")
            .to_string();
        return Err(AxmlError::UnbalancedElements(format!(
            "<{name}> never closed"
        )));
    }

    Ok(AxmlDocument {
        text: render(&events),
        warnings,
    })
}

/// Resolve `ns`/`name` indices into a prefixed name like `android:label`.
fn qualify(
    pool: &StringPool,
    ns_stack: &[(u32, u32)],
    ns: u32,
    name: u32,
    warnings: &mut Vec<String>,
) -> Result<String, AxmlError> {
    let name = pool.get(name)?;
    if ns == NO_INDEX {
        return Ok(name.to_string());
    }
    let uri = pool.get(ns)?;
    for &(prefix_idx, uri_idx) in ns_stack.iter().rev() {
        if pool.get(uri_idx)? == uri {
            return Ok(format!("{}:{}", pool.get(prefix_idx)?, name));
        }
    }
    warnings.push(format!("UnknownNamespace: no prefix bound for '{uri}'"));
    Ok(name.to_string())
}

fn render(events: &[Event]) -> String {
    let mut out = String::new();
    let mut depth = 0usize;
    let mut i = 0;
    while i < events.len() {
        match &events[i] {
            Event::Open { name, attrs } => {
                let pad = "    ".repeat(depth);
                let mut line = format!("{pad}<{name}");
                for (k, v) in attrs {
                    line.push_str(&format!(" {k}=\"{v}\""));
                }
                let self_close =
                    matches!(events.get(i + 1), Some(Event::Close { name: n }) if n == name);
                if self_close {
                    line.push_str("/>\n");
                    i += 1; // also consumes the close event
                } else {
                    line.push_str(">\n");
                    depth += 1;
                }
                out.push_str(&line);
            }
            Event::Close { name } => {
                depth = depth.saturating_sub(1);
                out.push_str(&format!("{}</{}>\n", "    ".repeat(depth), name));
            }
            Event::Text(text) => {
                out.push_str(&format!("{}{}\n", "    ".repeat(depth), text));
            }
        }
        i += 1;
    }
    out
}
