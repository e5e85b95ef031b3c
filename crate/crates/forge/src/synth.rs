//! Synthetic artifact builders: in-memory ZIP archives, DEX files and binary
//! XML documents, plus a labelled two-class corpus generator.
//!
//! These exist so tests and demos can manufacture inputs with known ground
//! truth instead of shipping real application packages.

use crate::apk::crc32;
use crate::mutf8;
use std::collections::BTreeMap;
use std::io::Write;

/// Deterministic ZIP archive builder (no timestamps, fixed metadata).
pub struct ZipBuilder {
    buf: Vec<u8>,
    central: Vec<CentralEntry>,
}

struct CentralEntry {
    name: Vec<u8>,
    method: u16,
    flags: u16,
    crc: u32,
    comp_size: u32,
    uncomp_size: u32,
    local_offset: u32,
}

// Fixed DOS date 1980-01-01, time 00:00 keeps archives byte-stable.
const DOS_DATE: u16 = 0x0021;
const DOS_TIME: u16 = 0;

fn push_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

impl Default for ZipBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ZipBuilder {
    pub fn new() -> Self {
        Self {
            buf: Vec::new(),
            central: Vec::new(),
        }
    }

    /// Add an uncompressed (stored) member.
    pub fn add_stored(&mut self, name: &str, data: &[u8]) -> &mut Self {
        self.add_member(name, 0, 0, data, data, crc32(data));
        self
    }

    /// Add a deflate-compressed member.
    pub fn add_deflated(&mut self, name: &str, data: &[u8]) -> &mut Self {
        let mut enc =
            flate2::write::DeflateEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(data).expect("in-memory deflate");
        let comp = enc.finish().expect("in-memory deflate");
        self.add_member(name, 8, 0, data, &comp, crc32(data));
        self
    }

    /// Add a member with caller-controlled metadata. This is the escape hatch
    /// for crafting hostile archives: wrong CRCs, unknown compression
    /// methods, encryption flags.
    pub fn add_raw(
        &mut self,
        name: &str,
        method: u16,
        flags: u16,
        stored_bytes: &[u8],
        claimed_uncomp_size: u32,
        claimed_crc: u32,
    ) -> &mut Self {
        let entry = CentralEntry {
            name: name.as_bytes().to_vec(),
            method,
            flags,
            crc: claimed_crc,
            comp_size: stored_bytes.len() as u32,
            uncomp_size: claimed_uncomp_size,
            local_offset: self.buf.len() as u32,
        };
        self.write_local(&entry, stored_bytes);
        self.central.push(entry);
        self
    }

    fn add_member(
        &mut self,
        name: &str,
        method: u16,
        flags: u16,
        data: &[u8],
        stored: &[u8],
        crc: u32,
    ) {
        let entry = CentralEntry {
            name: name.as_bytes().to_vec(),
            method,
            flags,
            crc,
            comp_size: stored.len() as u32,
            uncomp_size: data.len() as u32,
            local_offset: self.buf.len() as u32,
        };
        self.write_local(&entry, stored);
        self.central.push(entry);
    }

    fn write_local(&mut self, e: &CentralEntry, stored: &[u8]) {
        push_u32(&mut self.buf, 0x04034b50);
        push_u16(&mut self.buf, 20); // version needed
        push_u16(&mut self.buf, e.flags);
        push_u16(&mut self.buf, e.method);
        push_u16(&mut self.buf, DOS_TIME);
        push_u16(&mut self.buf, DOS_DATE);
        push_u32(&mut self.buf, e.crc);
        push_u32(&mut self.buf, e.comp_size);
        push_u32(&mut self.buf, e.uncomp_size);
        push_u16(&mut self.buf, e.name.len() as u16);
        push_u16(&mut self.buf, 0); // extra len
        self.buf.extend_from_slice(&e.name);
        self.buf.extend_from_slice(stored);
    }

    /// Write the central directory and end record; returns the archive.
    pub fn finish(&mut self) -> Vec<u8> {
        let mut out = std::mem::take(&mut self.buf);
        let cd_offset = out.len() as u32;
        for e in &self.central {
            push_u32(&mut out, 0x02014b50);
            push_u16(&mut out, 20); // version made by
            push_u16(&mut out, 20); // version needed
            push_u16(&mut out, e.flags);
            push_u16(&mut out, e.method);
            push_u16(&mut out, DOS_TIME);
            push_u16(&mut out, DOS_DATE);
            push_u32(&mut out, e.crc);
            push_u32(&mut out, e.comp_size);
            push_u32(&mut out, e.uncomp_size);
            push_u16(&mut out, e.name.len() as u16);
            push_u16(&mut out, 0); // extra
            push_u16(&mut out, 0); // comment
            push_u16(&mut out, 0); // disk number start
            push_u16(&mut out, 0); // internal attrs
            push_u32(&mut out, 0); // external attrs
            push_u32(&mut out, e.local_offset);
            out.extend_from_slice(&e.name);
        }
        let cd_size = out.len() as u32 - cd_offset;
        push_u32(&mut out, 0x06054b50);
        push_u16(&mut out, 0); // this disk
        push_u16(&mut out, 0); // cd disk
        push_u16(&mut out, self.central.len() as u16);
        push_u16(&mut out, self.central.len() as u16);
        push_u32(&mut out, cd_size);
        push_u32(&mut out, cd_offset);
        push_u16(&mut out, 0); // comment len
        self.central.clear();
        out
    }
}

/// What kind of bytecode the synthetic DEX's single method carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CodeMode {
    /// Invokes plus a return.
    #[default]
    Normal,
    /// Adds wide constants, switch and array payload pseudo-instructions.
    WithPayloads,
    /// Plants an opcode that does not exist, so bytecode walking must fail.
    Unparseable,
    /// Emits no class definitions at all.
    NoClasses,
}

/// Builds a small, structurally valid DEX file around one container class
/// with one method. Invoked methods appear as real `invoke-virtual` sites;
/// referenced methods only enter the method-id table.
#[derive(Debug, Default)]
pub struct DexBuilder {
    invoked: Vec<(String, String, String)>,
    referenced: Vec<(String, String, String)>,
    mode: CodeMode,
    filler: Vec<u8>,
}

const NO_INDEX: u32 = 0xFFFF_FFFF;

fn adler32(bytes: &[u8]) -> u32 {
    let (mut a, mut b) = (1u32, 0u32);
    for &byte in bytes {
        a = (a + byte as u32) % 65521;
        b = (b + a) % 65521;
    }
    (b << 16) | a
}

fn push_uleb128(buf: &mut Vec<u8>, mut v: u32) {
    loop {
        let byte = (v & 0x7F) as u8;
        v >>= 7;
        if v == 0 {
            buf.push(byte);
            break;
        }
        buf.push(byte | 0x80);
    }
}

fn shorty_return_descriptor(shorty: &str) -> &'static str {
    match shorty.as_bytes().first() {
        Some(b'V') => "V",
        Some(b'Z') => "Z",
        Some(b'B') => "B",
        Some(b'S') => "S",
        Some(b'C') => "C",
        Some(b'I') => "I",
        Some(b'J') => "J",
        Some(b'F') => "F",
        Some(b'D') => "D",
        _ => "Ljava/lang/Object;",
    }
}

impl DexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a method and emit an invoke-virtual call site for it.
    pub fn invoke(&mut self, class: &str, name: &str, shorty: &str) -> &mut Self {
        self.invoked
            .push((class.into(), name.into(), shorty.into()));
        self
    }

    /// Register a method in the id table without any call site.
    pub fn reference(&mut self, class: &str, name: &str, shorty: &str) -> &mut Self {
        self.referenced
            .push((class.into(), name.into(), shorty.into()));
        self
    }

    pub fn code_mode(&mut self, mode: CodeMode) -> &mut Self {
        self.mode = mode;
        self
    }

    /// Append opaque bytes to the data section, to give the file bulk and
    /// texture without changing its meaning.
    pub fn filler(&mut self, bytes: &[u8]) -> &mut Self {
        self.filler.extend_from_slice(bytes);
        self
    }

    pub fn build(&self) -> Vec<u8> {
        const CONTAINER: (&str, &str, &str) = ("LMain;", "run", "V");

        // Assemble the identifier pools.
        let mut specs: Vec<(String, String, String)> = Vec::new();
        specs.extend(self.invoked.iter().cloned());
        specs.extend(self.referenced.iter().cloned());
        specs.push((CONTAINER.0.into(), CONTAINER.1.into(), CONTAINER.2.into()));

        let mut strings: Vec<String> = Vec::new();
        for (class, name, shorty) in &specs {
            strings.push(class.clone());
            strings.push(name.clone());
            strings.push(shorty.clone());
            strings.push(shorty_return_descriptor(shorty).to_string());
        }
        strings.sort();
        strings.dedup();
        let str_idx: BTreeMap<&str, u32> = strings
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();

        let mut types: Vec<&str> = specs
            .iter()
            .flat_map(|(class, _, shorty)| [class.as_str(), shorty_return_descriptor(shorty)])
            .collect();
        types.sort();
        types.dedup();
        let type_idx: BTreeMap<&str, u32> = types
            .iter()
            .enumerate()
            .map(|(i, t)| (*t, i as u32))
            .collect();

        let mut protos: Vec<(&str, &str)> = specs
            .iter()
            .map(|(_, _, shorty)| (shorty.as_str(), shorty_return_descriptor(shorty)))
            .collect();
        protos.sort();
        protos.dedup();
        let proto_idx: BTreeMap<(&str, &str), u32> = protos
            .iter()
            .enumerate()
            .map(|(i, p)| (*p, i as u32))
            .collect();

        let mut methods: Vec<(u32, u32, u32)> = specs
            .iter()
            .map(|(class, name, shorty)| {
                (
                    type_idx[class.as_str()],
                    str_idx[name.as_str()],
                    proto_idx[&(shorty.as_str(), shorty_return_descriptor(shorty))],
                )
            })
            .collect();
        methods.sort();
        methods.dedup();
        let method_idx = |class: &str, name: &str, shorty: &str| -> u32 {
            let key = (
                type_idx[class],
                str_idx[name],
                proto_idx[&(shorty, shorty_return_descriptor(shorty))],
            );
            methods.iter().position(|m| *m == key).unwrap() as u32
        };

        let n_class_defs = if self.mode == CodeMode::NoClasses { 0 } else { 1 };
        let string_ids_off = 0x70usize;
        let type_ids_off = string_ids_off + 4 * strings.len();
        let proto_ids_off = type_ids_off + 4 * types.len();
        let method_ids_off = proto_ids_off + 12 * protos.len();
        let class_defs_off = method_ids_off + 8 * methods.len();
        let data_off = class_defs_off + 32 * n_class_defs;

        // Data section, tracking every offset we must reference back to.
        let mut data: Vec<u8> = Vec::new();
        let mut string_data_offs = Vec::with_capacity(strings.len());
        for s in &strings {
            string_data_offs.push((data_off + data.len()) as u32);
            let utf16_len: usize = s.chars().map(char::len_utf16).sum();
            push_uleb128(&mut data, utf16_len as u32);
            data.extend_from_slice(&mutf8::encode(s));
            data.push(0);
        }

        let (code_off, class_data_off) = if self.mode == CodeMode::NoClasses {
            (0u32, 0u32)
        } else {
            while !(data_off + data.len()).is_multiple_of(4) {
                data.push(0);
            }
            let code_off = (data_off + data.len()) as u32;
            let mut insns: Vec<u16> = Vec::new();
            if self.mode == CodeMode::WithPayloads {
                insns.extend_from_slice(&[0x0018, 0, 0, 0, 0]); // const-wide v0
                insns.extend_from_slice(&[0x0013, 0x002A]); // const/16 v0, 42
            }
            for (class, name, shorty) in &self.invoked {
                insns.push(0x106E); // invoke-virtual, one arg
                insns.push(method_idx(class, name, shorty) as u16);
                insns.push(0x0000);
            }
            if self.mode == CodeMode::Unparseable {
                insns.push(0x003E); // opcode 0x3e does not exist
            }
            insns.push(0x000E); // return-void
            if self.mode == CodeMode::WithPayloads {
                if !insns.len().is_multiple_of(2) {
                    insns.push(0x0000); // align payloads to 4 bytes
                }
                // packed-switch payload, 2 targets.
                insns.extend_from_slice(&[0x0100, 2, 0, 0, 5, 0, 9, 0]);
                // fill-array payload: width 3, 3 elements, 9 data bytes.
                insns.extend_from_slice(&[0x0300, 3, 3, 0]);
                insns.extend_from_slice(&[0x0201, 0x0403, 0x0605, 0x0807, 0x0009]);
            }
            data.extend_from_slice(&8u16.to_le_bytes()); // registers_size
            data.extend_from_slice(&0u16.to_le_bytes()); // ins_size
            data.extend_from_slice(&8u16.to_le_bytes()); // outs_size
            data.extend_from_slice(&0u16.to_le_bytes()); // tries_size
            data.extend_from_slice(&0u32.to_le_bytes()); // debug_info_off
            data.extend_from_slice(&(insns.len() as u32).to_le_bytes());
            for unit in &insns {
                data.extend_from_slice(&unit.to_le_bytes());
            }

            let class_data_off = (data_off + data.len()) as u32;
            push_uleb128(&mut data, 0); // static fields
            push_uleb128(&mut data, 0); // instance fields
            push_uleb128(&mut data, 1); // direct methods
            push_uleb128(&mut data, 0); // virtual methods
            push_uleb128(&mut data, method_idx(CONTAINER.0, CONTAINER.1, CONTAINER.2));
            push_uleb128(&mut data, 1); // access flags
            push_uleb128(&mut data, code_off);
            (code_off, class_data_off)
        };
        data.extend_from_slice(&self.filler);

        // Now lay the whole file down.
        let file_size = data_off + data.len();
        let mut out: Vec<u8> = Vec::with_capacity(file_size);
        out.extend_from_slice(b"dex\n035\0");
        push_u32(&mut out, 0); // checksum, patched below
        out.extend_from_slice(&[0u8; 20]); // signature left zero
        push_u32(&mut out, file_size as u32);
        push_u32(&mut out, 0x70); // header_size
        push_u32(&mut out, 0x1234_5678); // endian tag
        push_u32(&mut out, 0); // link_size
        push_u32(&mut out, 0); // link_off
        push_u32(&mut out, 0); // map_off
        push_u32(&mut out, strings.len() as u32);
        push_u32(&mut out, string_ids_off as u32);
        push_u32(&mut out, types.len() as u32);
        push_u32(&mut out, type_ids_off as u32);
        push_u32(&mut out, protos.len() as u32);
        push_u32(&mut out, proto_ids_off as u32);
        push_u32(&mut out, 0); // field_ids size
        push_u32(&mut out, 0); // field_ids off
        push_u32(&mut out, methods.len() as u32);
        push_u32(&mut out, method_ids_off as u32);
        push_u32(&mut out, n_class_defs as u32);
        push_u32(&mut out, if n_class_defs == 0 { 0 } else { class_defs_off as u32 });
        push_u32(&mut out, data.len() as u32);
        push_u32(&mut out, data_off as u32);
        debug_assert_eq!(out.len(), 0x70);

        for off in &string_data_offs {
            push_u32(&mut out, *off);
        }
        for t in &types {
            push_u32(&mut out, str_idx[*t]);
        }
        for (shorty, ret) in &protos {
            push_u32(&mut out, str_idx[*shorty]);
            push_u32(&mut out, type_idx[*ret]);
            push_u32(&mut out, 0); // parameters_off
        }
        for (class_t, name_s, proto_i) in &methods {
            out.extend_from_slice(&(*class_t as u16).to_le_bytes());
            out.extend_from_slice(&(*proto_i as u16).to_le_bytes());
            push_u32(&mut out, *name_s);
        }
        if n_class_defs == 1 {
            push_u32(&mut out, type_idx["LMain;"]);
            push_u32(&mut out, 1); // access_flags
            push_u32(&mut out, NO_INDEX); // superclass
            push_u32(&mut out, 0); // interfaces_off
            push_u32(&mut out, NO_INDEX); // source_file_idx
            push_u32(&mut out, 0); // annotations_off
            push_u32(&mut out, class_data_off);
            push_u32(&mut out, 0); // static_values_off
        }
        out.extend_from_slice(&data);
        debug_assert_eq!(out.len(), file_size);
        let _ = code_off;

        let checksum = adler32(&out[12..]);
        out[8..12].copy_from_slice(&checksum.to_le_bytes());
        out
    }
}

/// The namespace URI bound to the `android:` prefix in real manifests.
pub const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

/// Attribute value for [`AxmlBuilder`], mapping onto the typed-value wire
/// encodings a compiled manifest uses.
#[derive(Debug, Clone, PartialEq)]
pub enum AxmlValue {
    Str(String),
    Int(i32),
    Bool(bool),
    Hex(u32),
    Ref(u32),
    Float(f32),
    Color(u32),
}

impl AxmlValue {
    fn encode(&self, pool: &mut PoolInterner) -> (u32 /* raw */, u8 /* type */, u32 /* data */) {
        match self {
            AxmlValue::Str(s) => {
                let idx = pool.intern(s);
                (idx, 0x03, idx)
            }
            AxmlValue::Int(i) => (AXML_NO_INDEX, 0x10, *i as u32),
            AxmlValue::Bool(true) => (AXML_NO_INDEX, 0x12, 0xFFFF_FFFF),
            AxmlValue::Bool(false) => (AXML_NO_INDEX, 0x12, 0),
            AxmlValue::Hex(h) => (AXML_NO_INDEX, 0x11, *h),
            AxmlValue::Ref(r) => (AXML_NO_INDEX, 0x01, *r),
            AxmlValue::Float(f) => (AXML_NO_INDEX, 0x04, f.to_bits()),
            AxmlValue::Color(c) => (AXML_NO_INDEX, 0x1C, *c),
        }
    }
}

const AXML_NO_INDEX: u32 = 0xFFFF_FFFF;

#[derive(Debug, Clone)]
enum AxmlEvent {
    StartNs(String, String),
    EndNs,
    Start(String, Vec<(Option<String>, String, AxmlValue)>),
    End,
    CloseAs(String),
    Text(String),
    Raw(u16, Vec<u8>),
}

#[derive(Default)]
struct PoolInterner {
    strings: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl PoolInterner {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.strings.len() as u32;
        self.strings.push(s.to_string());
        self.index.insert(s.to_string(), i);
        i
    }
}

/// Builds compiled Android XML documents event by event.
pub struct AxmlBuilder {
    utf8_pool: bool,
    events: Vec<AxmlEvent>,
}

impl AxmlBuilder {
    pub fn new(utf8_pool: bool) -> Self {
        Self {
            utf8_pool,
            events: Vec::new(),
        }
    }

    pub fn start_ns(&mut self, prefix: &str, uri: &str) -> &mut Self {
        self.events
            .push(AxmlEvent::StartNs(prefix.into(), uri.into()));
        self
    }

    pub fn end_ns(&mut self) -> &mut Self {
        self.events.push(AxmlEvent::EndNs);
        self
    }

    pub fn start(&mut self, name: &str) -> &mut Self {
        self.events.push(AxmlEvent::Start(name.into(), Vec::new()));
        self
    }

    /// Attach an attribute to the most recently started element.
    pub fn attr(&mut self, ns_uri: Option<&str>, name: &str, value: AxmlValue) -> &mut Self {
        match self.events.iter_mut().rev().find_map(|e| match e {
            AxmlEvent::Start(_, attrs) => Some(attrs),
            _ => None,
        }) {
            Some(attrs) => attrs.push((ns_uri.map(String::from), name.into(), value)),
            None => panic!("attr() before start()"),
        }
        self
    }

    pub fn text(&mut self, s: &str) -> &mut Self {
        self.events.push(AxmlEvent::Text(s.into()));
        self
    }

    pub fn end(&mut self) -> &mut Self {
        self.events.push(AxmlEvent::End);
        self
    }

    /// Emit an end-element chunk naming `name` regardless of what is open.
    /// Only useful for manufacturing malformed documents.
    pub fn close_as(&mut self, name: &str) -> &mut Self {
        self.events.push(AxmlEvent::CloseAs(name.into()));
        self
    }

    /// Append an arbitrary chunk (type + opaque body) verbatim.
    pub fn raw_chunk(&mut self, ctype: u16, body: &[u8]) -> &mut Self {
        self.events.push(AxmlEvent::Raw(ctype, body.to_vec()));
        self
    }

    pub fn build(&self) -> Vec<u8> {
        // Pass 1: intern every string the chunks will reference.
        let mut pool = PoolInterner::default();
        let mut interned_events: Vec<IEvent> = Vec::new();
        let mut open: Vec<u32> = Vec::new();
        let mut ns_open: Vec<(u32, u32)> = Vec::new();
        for ev in &self.events {
            match ev {
                AxmlEvent::StartNs(prefix, uri) => {
                    let p = pool.intern(prefix);
                    let u = pool.intern(uri);
                    ns_open.push((p, u));
                    interned_events.push(IEvent::StartNs(p, u));
                }
                AxmlEvent::EndNs => {
                    let (p, u) = ns_open.pop().unwrap_or((0, 0));
                    interned_events.push(IEvent::EndNs(p, u));
                }
                AxmlEvent::Start(name, attrs) => {
                    let n = pool.intern(name);
                    let encoded: Vec<(u32, u32, u32, u8, u32)> = attrs
                        .iter()
                        .map(|(ns, aname, value)| {
                            let ns_idx = ns
                                .as_deref()
                                .map(|u| pool.intern(u))
                                .unwrap_or(AXML_NO_INDEX);
                            let an = pool.intern(aname);
                            let (raw, dtype, data) = value.encode(&mut pool);
                            (ns_idx, an, raw, dtype, data)
                        })
                        .collect();
                    open.push(n);
                    interned_events.push(IEvent::Start(n, encoded));
                }
                AxmlEvent::End => {
                    let n = open.pop().expect("end() without start()");
                    interned_events.push(IEvent::End(n));
                }
                AxmlEvent::CloseAs(name) => {
                    let n = pool.intern(name);
                    open.pop();
                    interned_events.push(IEvent::End(n));
                }
                AxmlEvent::Text(s) => {
                    let t = pool.intern(s);
                    interned_events.push(IEvent::Text(t));
                }
                AxmlEvent::Raw(ctype, body) => {
                    interned_events.push(IEvent::Raw(*ctype, body.clone()));
                }
            }
        }

        // Pass 2: serialize pool + chunks.
        let mut chunks: Vec<u8> = Vec::new();
        chunks.extend_from_slice(&encode_string_pool(&pool.strings, self.utf8_pool));
        for ev in &interned_events {
            match ev {
                IEvent::StartNs(p, u) => {
                    let mut body = Vec::new();
                    push_u32(&mut body, *p);
                    push_u32(&mut body, *u);
                    chunks.extend_from_slice(&element_chunk(0x0100, &body));
                }
                IEvent::EndNs(p, u) => {
                    let mut body = Vec::new();
                    push_u32(&mut body, *p);
                    push_u32(&mut body, *u);
                    chunks.extend_from_slice(&element_chunk(0x0101, &body));
                }
                IEvent::Start(name, attrs) => {
                    let mut body = Vec::new();
                    push_u32(&mut body, AXML_NO_INDEX); // element namespace
                    push_u32(&mut body, *name);
                    push_u16(&mut body, 20); // attr_start
                    push_u16(&mut body, 20); // attr_size
                    push_u16(&mut body, attrs.len() as u16);
                    push_u16(&mut body, 0); // id_index
                    push_u16(&mut body, 0); // class_index
                    push_u16(&mut body, 0); // style_index
                    for (ns, aname, raw, dtype, data) in attrs {
                        push_u32(&mut body, *ns);
                        push_u32(&mut body, *aname);
                        push_u32(&mut body, *raw);
                        push_u16(&mut body, 8); // typed value size
                        body.push(0); // res0
                        body.push(*dtype);
                        push_u32(&mut body, *data);
                    }
                    chunks.extend_from_slice(&element_chunk(0x0102, &body));
                }
                IEvent::End(name) => {
                    let mut body = Vec::new();
                    push_u32(&mut body, AXML_NO_INDEX);
                    push_u32(&mut body, *name);
                    chunks.extend_from_slice(&element_chunk(0x0103, &body));
                }
                IEvent::Text(idx) => {
                    let mut body = Vec::new();
                    push_u32(&mut body, *idx);
                    push_u16(&mut body, 8);
                    body.push(0);
                    body.push(0x03);
                    push_u32(&mut body, *idx);
                    chunks.extend_from_slice(&element_chunk(0x0104, &body));
                }
                IEvent::Raw(ctype, body) => {
                    let mut c = Vec::new();
                    push_u16(&mut c, *ctype);
                    push_u16(&mut c, 8);
                    push_u32(&mut c, (8 + body.len()) as u32);
                    c.extend_from_slice(body);
                    chunks.extend_from_slice(&c);
                }
            }
        }

        let mut out = Vec::with_capacity(8 + chunks.len());
        push_u16(&mut out, 0x0003); // XML document
        push_u16(&mut out, 8);
        push_u32(&mut out, (8 + chunks.len()) as u32);
        out.extend_from_slice(&chunks);
        out
    }
}

enum IEvent {
    StartNs(u32, u32),
    EndNs(u32, u32),
    Start(u32, Vec<(u32, u32, u32, u8, u32)>),
    End(u32),
    Text(u32),
    Raw(u16, Vec<u8>),
}

/// Element-family chunk: 16-byte header (line number, comment) + body.
fn element_chunk(ctype: u16, body: &[u8]) -> Vec<u8> {
    let mut c = Vec::with_capacity(16 + body.len());
    push_u16(&mut c, ctype);
    push_u16(&mut c, 16);
    push_u32(&mut c, (16 + body.len()) as u32);
    push_u32(&mut c, 1); // line number
    push_u32(&mut c, AXML_NO_INDEX); // comment
    c.extend_from_slice(body);
    c
}

fn axml_varint(out: &mut Vec<u8>, v: usize) {
    if v < 0x80 {
        out.push(v as u8);
    } else {
        out.push((0x80 | (v >> 8)) as u8);
        out.push((v & 0xFF) as u8);
    }
}

fn encode_string_pool(strings: &[String], utf8: bool) -> Vec<u8> {
    let mut offsets = Vec::with_capacity(strings.len());
    let mut data: Vec<u8> = Vec::new();
    for s in strings {
        offsets.push(data.len() as u32);
        if utf8 {
            let utf16_len: usize = s.chars().map(char::len_utf16).sum();
            axml_varint(&mut data, utf16_len);
            axml_varint(&mut data, s.len());
            data.extend_from_slice(s.as_bytes());
            data.push(0);
        } else {
            let units: Vec<u16> = s.encode_utf16().collect();
            assert!(units.len() < 0x8000, "string too long for the short form");
            push_u16(&mut data, units.len() as u16);
            for u in units {
                push_u16(&mut data, u);
            }
            push_u16(&mut data, 0);
        }
    }
    let header = 28usize;
    let strings_start = header + 4 * strings.len();
    let mut size = strings_start + data.len();
    let pad = (4 - size % 4) % 4;
    size += pad;

    let mut out = Vec::with_capacity(size);
    push_u16(&mut out, 0x0001);
    push_u16(&mut out, header as u16);
    push_u32(&mut out, size as u32);
    push_u32(&mut out, strings.len() as u32);
    push_u32(&mut out, 0); // style count
    push_u32(&mut out, if utf8 { 1 << 8 } else { 0 });
    push_u32(&mut out, strings_start as u32);
    push_u32(&mut out, 0); // styles start
    for off in offsets {
        push_u32(&mut out, off);
    }
    out.extend_from_slice(&data);
    out.extend_from_slice(&vec![0u8; pad]);
    out
}

/// A small but complete binary manifest: package declaration, one
/// permission, one application element. With `sms` the permission is
/// `SEND_SMS`, otherwise `INTERNET`.
pub fn manifest_axml(utf8_pool: bool, package: &str, sms: bool) -> Vec<u8> {
    let permission = if sms {
        "android.permission.SEND_SMS"
    } else {
        "android.permission.INTERNET"
    };
    let mut b = AxmlBuilder::new(utf8_pool);
    b.start_ns("android", ANDROID_NS);
    b.start("manifest");
    b.attr(None, "package", AxmlValue::Str(package.into()));
    b.attr(Some(ANDROID_NS), "versionCode", AxmlValue::Int(7));
    b.start("uses-permission");
    b.attr(Some(ANDROID_NS), "name", AxmlValue::Str(permission.into()));
    b.end();
    b.start("application");
    b.attr(Some(ANDROID_NS), "debuggable", AxmlValue::Bool(true));
    b.attr(Some(ANDROID_NS), "label", AxmlValue::Ref(0x7F04_0001));
    b.end();
    b.end();
    b.end_ns();
    b.build()
}

/// The fixed test manifest used across parser tests and examples.
pub fn sample_manifest_axml(utf8_pool: bool) -> Vec<u8> {
    manifest_axml(utf8_pool, "com.example.app", true)
}

/// Splittable deterministic byte stream (SplitMix64), so the corpus
/// generator needs no RNG dependency here.
struct ByteStream {
    state: u64,
}

impl ByteStream {
    fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn next_byte(&mut self) -> u8 {
        (self.next_u64() >> 56) as u8
    }
}

/// One synthetic package of the two-class corpus. Class "sms" carries a
/// striped byte motif plus telephony API calls and the SEND_SMS permission;
/// class "benign" a smooth-ramp motif with disjoint APIs and permissions.
/// `index` individualizes the package, `seed` the whole corpus.
pub fn corpus_apk(sms: bool, index: usize, seed: u64) -> Vec<u8> {
    let mut stream = ByteStream::new(
        seed ^ (index as u64).wrapping_mul(0x0123_4567_89AB_CDEF) ^ if sms { 0xA5A5 } else { 0 },
    );

    // ~20 KiB of motif bytes with sparse noise: every file in a class shares
    // the dominant texture but no two files are identical.
    let len = 20 * 1024 + (stream.next_u64() % 2048) as usize;
    let mut filler = Vec::with_capacity(len);
    for i in 0..len {
        let motif = if sms {
            // Hard 8-byte stripes: strong, regular edges for the Canny plane.
            if (i / 8) % 2 == 0 {
                0x00
            } else {
                0xFF
            }
        } else {
            // Slow ramp: almost no edge response.
            ((i / 64) % 256) as u8
        };
        filler.push(if i % 97 == 0 {
            stream.next_byte()
        } else {
            motif
        });
    }

    let mut dex = DexBuilder::new();
    if sms {
        dex.invoke("Landroid/telephony/SmsManager;", "sendTextMessage", "V")
            .invoke("Landroid/telephony/SmsManager;", "getDefault", "L")
            .invoke("Landroid/telephony/TelephonyManager;", "getDeviceId", "L")
            .invoke("Ljava/lang/String;", "valueOf", "L");
    } else {
        dex.invoke("Landroid/app/Activity;", "onCreate", "V")
            .invoke("Landroid/util/Log;", "d", "I")
            .invoke("Ljava/io/File;", "exists", "Z")
            .invoke("Ljava/lang/StringBuilder;", "append", "L");
    }
    dex.filler(&filler);

    let class_tag = if sms { "sms" } else { "benign" };
    let package = format!("com.corpus.{class_tag}.app{index:03}");
    let manifest = manifest_axml(index.is_multiple_of(2), &package, sms);

    let mut extra = vec![0u8; 256];
    for b in &mut extra {
        *b = stream.next_byte();
    }

    let mut zip = ZipBuilder::new();
    zip.add_deflated("classes.dex", &dex.build());
    zip.add_deflated("AndroidManifest.xml", &manifest);
    zip.add_stored("res/raw/blob.bin", &extra);
    zip.finish()
}

/// Write `per_class` packages per class into `dir/sms/` and `dir/benign/`.
pub fn write_two_class_corpus(
    dir: &std::path::Path,
    per_class: usize,
    seed: u64,
) -> std::io::Result<()> {
    for (sms, sub) in [(true, "sms"), (false, "benign")] {
        let class_dir = dir.join(sub);
        std::fs::create_dir_all(&class_dir)?;
        for i in 0..per_class {
            let apk = corpus_apk(sms, i, seed);
            std::fs::write(class_dir.join(format!("app{i:03}.apk")), apk)?;
        }
    }
    Ok(())
}
