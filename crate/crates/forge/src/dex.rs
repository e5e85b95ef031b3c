//! DEX parsing: just enough of the format to list referenced methods and
//! walk bytecode for invoke instructions.
//!
//! The parser never trusts a length or offset it has not bounds-checked, so
//! arbitrary bytes produce a typed error rather than a panic. Damage inside
//! code items is non-fatal: the API scan falls back to the method-reference
//! table with a warning.

use crate::mutf8;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DexError {
    #[error("BadMagic: not a DEX file")]
    BadMagic,
    #[error("TruncatedDex: {0}")]
    Truncated(String),
    #[error("MalformedDex: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtoId {
    pub shorty_idx: u32,
    pub return_type_idx: u32,
    pub parameters_off: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodId {
    pub class_idx: u16,
    pub proto_idx: u16,
    pub name_idx: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassDef {
    pub class_idx: u32,
    pub class_data_off: u32,
}

/// The identifier tables of one DEX file.
#[derive(Debug, Clone, Default)]
pub struct DexTables {
    pub strings: Vec<String>,
    /// Per type: index into `strings` holding the descriptor.
    pub type_descriptor_ids: Vec<u32>,
    pub protos: Vec<ProtoId>,
    pub methods: Vec<MethodId>,
    pub class_defs: Vec<ClassDef>,
    pub warnings: Vec<String>,
}

impl DexTables {
    fn string(&self, idx: u32) -> Option<&str> {
        self.strings.get(idx as usize).map(|s| s.as_str())
    }

    fn type_descriptor(&self, idx: u32) -> Option<&str> {
        self.string(*self.type_descriptor_ids.get(idx as usize)?)
    }

    /// Render one method reference as `Lpkg/Class;->name(SHORTY)`.
    pub fn render_method(&self, method_idx: u32) -> Option<String> {
        let m = self.methods.get(method_idx as usize)?;
        let class = self.type_descriptor(m.class_idx as u32)?;
        let name = self.string(m.name_idx)?;
        let proto = self.protos.get(m.proto_idx as usize)?;
        let shorty = self.string(proto.shorty_idx)?;
        Some(format!("{class}->{name}({shorty})"))
    }
}

fn le16(buf: &[u8], off: usize) -> Option<u16> {
    buf.get(off..off + 2).map(|s| u16::from_le_bytes([s[0], s[1]]))
}

fn le32(buf: &[u8], off: usize) -> Option<u32> {
    buf.get(off..off + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
}

fn read_uleb128(buf: &[u8], pos: &mut usize) -> Option<u32> {
    let mut result: u32 = 0;
    for shift in 0..5 {
        let b = *buf.get(*pos)?;
        *pos += 1;
        result |= ((b & 0x7F) as u32) << (shift * 7);
        if b & 0x80 == 0 {
            return Some(result);
        }
    }
    None
}

/// Offsets of the id tables inside the 0x70-byte header.
const STRING_IDS: usize = 0x38;
const TYPE_IDS: usize = 0x40;
const PROTO_IDS: usize = 0x48;
const METHOD_IDS: usize = 0x58;
const CLASS_DEFS: usize = 0x60;

fn table_bounds(
    bytes: &[u8],
    header_off: usize,
    entry_width: usize,
    what: &str,
) -> Result<(usize, usize), DexError> {
    let size = le32(bytes, header_off).unwrap() as usize;
    let off = le32(bytes, header_off + 4).unwrap() as usize;
    let end = size
        .checked_mul(entry_width)
        .and_then(|w| off.checked_add(w))
        .ok_or_else(|| DexError::Malformed(format!("{what} table overflows")))?;
    if size > 0 && end > bytes.len() {
        return Err(DexError::Truncated(format!("{what} table out of bounds")));
    }
    Ok((size, off))
}

/// Parse the header and identifier tables of a DEX file.
pub fn parse_dex(bytes: &[u8]) -> Result<DexTables, DexError> {
    if bytes.len() < 0x70 {
        return Err(DexError::Truncated("header shorter than 0x70 bytes".into()));
    }
    if &bytes[0..4] != b"dex\n"
        || bytes[7] != 0
        || !bytes[4..7].iter().all(|b| b.is_ascii_digit())
    {
        return Err(DexError::BadMagic);
    }

    let mut tables = DexTables::default();

    let (str_count, str_off) = table_bounds(bytes, STRING_IDS, 4, "string_ids")?;
    for i in 0..str_count {
        let data_off = le32(bytes, str_off + i * 4).unwrap() as usize;
        let mut pos = data_off;
        if read_uleb128(bytes, &mut pos).is_none() {
            return Err(DexError::Truncated(format!("string_data {i} header")));
        }
        let rest = bytes
            .get(pos..)
            .ok_or_else(|| DexError::Truncated(format!("string_data {i} body")))?;
        let nul = rest
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| DexError::Truncated(format!("string_data {i} missing terminator")))?;
        let (text, irregular) = mutf8::decode(&rest[..nul]);
        if irregular {
            tables
                .warnings
                .push(format!("IrregularMutf8: string {i} contains replaced sequences"));
        }
        tables.strings.push(text);
    }

    let (type_count, type_off) = table_bounds(bytes, TYPE_IDS, 4, "type_ids")?;
    for i in 0..type_count {
        tables
            .type_descriptor_ids
            .push(le32(bytes, type_off + i * 4).unwrap());
    }

    let (proto_count, proto_off) = table_bounds(bytes, PROTO_IDS, 12, "proto_ids")?;
    for i in 0..proto_count {
        let base = proto_off + i * 12;
        tables.protos.push(ProtoId {
            shorty_idx: le32(bytes, base).unwrap(),
            return_type_idx: le32(bytes, base + 4).unwrap(),
            parameters_off: le32(bytes, base + 8).unwrap(),
        });
    }

    let (method_count, method_off) = table_bounds(bytes, METHOD_IDS, 8, "method_ids")?;
    for i in 0..method_count {
        let base = method_off + i * 8;
        tables.methods.push(MethodId {
            class_idx: le16(bytes, base).unwrap(),
            proto_idx: le16(bytes, base + 2).unwrap(),
            name_idx: le32(bytes, base + 4).unwrap(),
        });
    }

    let (class_count, class_off) = table_bounds(bytes, CLASS_DEFS, 32, "class_defs")?;
    for i in 0..class_count {
        let base = class_off + i * 32;
        tables.class_defs.push(ClassDef {
            class_idx: le32(bytes, base).unwrap(),
            class_data_off: le32(bytes, base + 24).unwrap(),
        });
    }

    Ok(tables)
}

/// How an API call list was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApiSource {
    /// Walking invoke instructions in every reachable code item.
    BytecodeScan,
    /// Code items were unparseable; the full method-reference table was used.
    MethodTableFallback,
}

#[derive(Debug, Clone)]
pub struct ApiCallReport {
    /// Rendered call signatures, sorted and de-duplicated.
    pub calls: Vec<String>,
    pub source: ApiSource,
    pub warnings: Vec<String>,
}

/// Class prefixes treated as platform API surface.
pub const PLATFORM_PREFIXES: [&str; 6] = [
    "Landroid/",
    "Ljava/",
    "Ljavax/",
    "Lorg/apache/",
    "Lorg/json/",
    "Ldalvik/",
];

fn matches_whitelist(call: &str, whitelist: &[String]) -> bool {
    whitelist.iter().any(|p| call.starts_with(p.as_str()))
}

/// The default whitelist as owned strings, for configs.
pub fn default_api_whitelist() -> Vec<String> {
    PLATFORM_PREFIXES.iter().map(|p| p.to_string()).collect()
}

/// Units occupied by the instruction starting with `opcode`, excluding the
/// variable-length NOP payloads which the walker sizes separately. `None`
/// marks opcodes that do not exist in the format.
fn insn_units(opcode: u8) -> Option<usize> {
    Some(match opcode {
        0x00..=0x01 => 1,
        0x02 => 2,
        0x03 => 3,
        0x04 => 1,
        0x05 => 2,
        0x06 => 3,
        0x07 => 1,
        0x08 => 2,
        0x09 => 3,
        0x0a..=0x12 => 1,
        0x13 => 2,
        0x14 => 3,
        0x15..=0x16 => 2,
        0x17 => 3,
        0x18 => 5,
        0x19..=0x1a => 2,
        0x1b => 3,
        0x1c => 2,
        0x1d..=0x1e => 1,
        0x1f..=0x20 => 2,
        0x21 => 1,
        0x22..=0x23 => 2,
        0x24..=0x26 => 3,
        0x27..=0x28 => 1,
        0x29 => 2,
        0x2a..=0x2c => 3,
        0x2d..=0x3d => 2,
        0x3e..=0x43 => return None,
        0x44..=0x6d => 2,
        0x6e..=0x72 => 3,
        0x73 => return None,
        0x74..=0x78 => 3,
        0x79..=0x7a => return None,
        0x7b..=0x8f => 1,
        0x90..=0xaf => 2,
        0xb0..=0xcf => 1,
        0xd0..=0xe2 => 2,
        0xe3..=0xf9 => return None,
        0xfa..=0xfb => 4,
        0xfc..=0xfd => 3,
        0xfe..=0xff => 2,
    })
}

/// Walk one code item's instructions, recording invoked method indices.
/// Returns `None` if anything does not parse.
fn walk_code_item(bytes: &[u8], code_off: usize, sink: &mut BTreeSet<u32>) -> Option<()> {
    let insns_size = le32(bytes, code_off.checked_add(12)?)? as usize;
    let insns_off = code_off + 16;
    let end_bytes = insns_off.checked_add(insns_size.checked_mul(2)?)?;
    if end_bytes > bytes.len() {
        return None;
    }
    let unit = |i: usize| -> Option<u16> { le16(bytes, insns_off + i * 2) };

    let mut i = 0usize;
    while i < insns_size {
        let first = unit(i)?;
        let opcode = (first & 0xFF) as u8;
        let len = if opcode == 0x00 {
            match first >> 8 {
                0x00 => 1,
                // packed-switch-payload: ident, size, first_key, size targets.
                0x01 => {
                    let size = unit(i + 1)? as usize;
                    size.checked_mul(2)?.checked_add(4)?
                }
                // sparse-switch-payload: ident, size, size keys, size targets.
                0x02 => {
                    let size = unit(i + 1)? as usize;
                    size.checked_mul(4)?.checked_add(2)?
                }
                // fill-array-data-payload: ident, element_width, size u32, data.
                0x03 => {
                    let width = unit(i + 1)? as usize;
                    let size = le32(bytes, insns_off + (i + 2) * 2)? as usize;
                    let data_bytes = size.checked_mul(width)?;
                    data_bytes.checked_add(1)?.checked_div(2)?.checked_add(4)?
                }
                _ => return None,
            }
        } else {
            insn_units(opcode)?
        };
        if (0x6e..=0x72).contains(&opcode) || (0x74..=0x78).contains(&opcode) {
            sink.insert(unit(i + 1)? as u32);
        }
        i = i.checked_add(len)?;
        if i > insns_size {
            return None;
        }
    }
    Some(())
}

/// Collect every code offset reachable through the class_data records.
/// Returns `None` when class data itself is unparseable.
fn collect_code_offsets(bytes: &[u8], tables: &DexTables) -> Option<Vec<usize>> {
    let mut offs = Vec::new();
    for def in &tables.class_defs {
        if def.class_data_off == 0 {
            continue;
        }
        let mut pos = def.class_data_off as usize;
        let static_fields = read_uleb128(bytes, &mut pos)?;
        let instance_fields = read_uleb128(bytes, &mut pos)?;
        let direct_methods = read_uleb128(bytes, &mut pos)?;
        let virtual_methods = read_uleb128(bytes, &mut pos)?;
        for _ in 0..static_fields.checked_add(instance_fields)? {
            read_uleb128(bytes, &mut pos)?;
            read_uleb128(bytes, &mut pos)?;
        }
        for _ in 0..direct_methods.checked_add(virtual_methods)? {
            read_uleb128(bytes, &mut pos)?; // method_idx_diff
            read_uleb128(bytes, &mut pos)?; // access_flags
            let code_off = read_uleb128(bytes, &mut pos)?;
            if code_off != 0 {
                offs.push(code_off as usize);
            }
        }
    }
    Some(offs)
}

/// Extract the platform API calls referenced by a DEX file.
///
/// The primary path walks bytecode and reports only methods actually invoked.
/// If any code item fails to parse the whole scan degrades to listing the
/// method-reference table, which over-approximates but never under-reports.
pub fn scan_invokes(bytes: &[u8], tables: &DexTables, include_third_party: bool) -> ApiCallReport {
    scan_invokes_with(bytes, tables, include_third_party, &default_api_whitelist())
}

/// [`scan_invokes`] with a caller-supplied prefix whitelist.
pub fn scan_invokes_with(
    bytes: &[u8],
    tables: &DexTables,
    include_third_party: bool,
    whitelist: &[String],
) -> ApiCallReport {
    let mut warnings = Vec::new();
    let scanned: Option<BTreeSet<u32>> = (|| {
        let mut sink = BTreeSet::new();
        for off in collect_code_offsets(bytes, tables)? {
            walk_code_item(bytes, off, &mut sink)?;
        }
        Some(sink)
    })();

    let (indices, source): (Vec<u32>, ApiSource) = match scanned {
        Some(set) => (set.into_iter().collect(), ApiSource::BytecodeScan),
        None => {
            warnings.push(
                "UnparseableCode: bytecode scan failed; using method-reference table".to_string(),
            );
            (
                (0..tables.methods.len() as u32).collect(),
                ApiSource::MethodTableFallback,
            )
        }
    };

    let mut calls = BTreeSet::new();
    for idx in indices {
        match tables.render_method(idx) {
            Some(call) => {
                if include_third_party || matches_whitelist(&call, whitelist) {
                    calls.insert(call);
                }
            }
            None => warnings.push(format!("BadMethodIndex: {idx} skipped")),
        }
    }
    ApiCallReport {
        calls: calls.into_iter().collect(),
        source,
        warnings,
    }
}

/// One call per line, newline-terminated; empty report serializes to nothing.
pub fn serialize_api_text(report: &ApiCallReport) -> Vec<u8> {
    let mut out = Vec::new();
    for call in &report.calls {
        out.extend_from_slice(call.as_bytes());
        out.push(b'\n');
    }
    out
}
