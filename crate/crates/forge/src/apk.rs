//! APK (ZIP) container parsing: central-directory walk, member extraction
//! and selection of the artifacts the feature pipeline needs.
//!
//! The walker trusts the central directory, not the local headers, and is
//! deliberately tolerant: odd members produce warnings and are skipped, and
//! only structural damage is fatal.

use std::io::Read;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ApkError {
    #[error("MalformedZip: {0}")]
    MalformedZip(String),
    #[error("CrcMismatch: '{name}' expected {expected:#010x} got {actual:#010x}")]
    CrcMismatch {
        name: String,
        expected: u32,
        actual: u32,
    },
    #[error("MissingDex: archive holds no usable .dex member")]
    MissingDex,
    #[error("MissingManifest: archive holds no usable AndroidManifest.xml")]
    MissingManifest,
}

/// One central-directory record, resolved enough to extract the member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZipEntryMeta {
    pub name: String,
    pub method: u16,
    pub crc32: u32,
    pub comp_size: u32,
    pub uncomp_size: u32,
    pub local_offset: u32,
    pub encrypted: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ZipListing {
    /// Entries in central-directory order, duplicates included.
    pub entries: Vec<ZipEntryMeta>,
    pub warnings: Vec<String>,
}

impl ZipListing {
    /// Entries with duplicate names collapsed; the last occurrence wins.
    pub fn deduped(&self) -> Vec<&ZipEntryMeta> {
        let mut keep: Vec<&ZipEntryMeta> = Vec::new();
        for e in &self.entries {
            if let Some(slot) = keep.iter_mut().find(|k| k.name == e.name) {
                *slot = e;
            } else {
                keep.push(e);
            }
        }
        keep
    }
}

/// CRC-32 (IEEE, reflected polynomial 0xEDB88320).
pub fn crc32(bytes: &[u8]) -> u32 {
    static TABLE: std::sync::OnceLock<[u32; 256]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [0u32; 256];
        for (i, slot) in t.iter_mut().enumerate() {
            let mut c = i as u32;
            for _ in 0..8 {
                c = if c & 1 != 0 {
                    0xEDB8_8320 ^ (c >> 1)
                } else {
                    c >> 1
                };
            }
            *slot = c;
        }
        t
    });
    let mut c = 0xFFFF_FFFFu32;
    for &b in bytes {
        c = table[((c ^ b as u32) & 0xFF) as usize] ^ (c >> 8);
    }
    !c
}

fn le16(buf: &[u8], off: usize) -> Option<u16> {
    buf.get(off..off + 2).map(|s| u16::from_le_bytes([s[0], s[1]]))
}

fn le32(buf: &[u8], off: usize) -> Option<u32> {
    buf.get(off..off + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
}

const EOCD_SIG: u32 = 0x0605_4b50;
const CD_SIG: u32 = 0x0201_4b50;
const LOCAL_SIG: u32 = 0x0403_4b50;

/// Locate the end-of-central-directory record, scanning backwards through
/// the maximum comment window.
fn find_eocd(bytes: &[u8]) -> Option<usize> {
    if bytes.len() < 22 {
        return None;
    }
    let floor = bytes.len().saturating_sub(22 + 65535);
    let mut pos = bytes.len() - 22;
    loop {
        if le32(bytes, pos) == Some(EOCD_SIG) {
            // Sanity: the directory this record points at must sit before it.
            let cd_size = le32(bytes, pos + 12).unwrap_or(u32::MAX) as usize;
            let cd_off = le32(bytes, pos + 16).unwrap_or(u32::MAX) as usize;
            if cd_off == 0xFFFF_FFFF || cd_off.checked_add(cd_size).is_some_and(|end| end <= pos) {
                return Some(pos);
            }
        }
        if pos == floor {
            return None;
        }
        pos -= 1;
    }
}

/// Parse the central directory of a ZIP archive.
pub fn list_entries(bytes: &[u8]) -> Result<ZipListing, ApkError> {
    let eocd =
        find_eocd(bytes).ok_or_else(|| ApkError::MalformedZip("no end of central directory".into()))?;
    let total = le16(bytes, eocd + 10).unwrap() as usize;
    let cd_size = le32(bytes, eocd + 12).unwrap();
    let cd_off = le32(bytes, eocd + 16).unwrap();
    if total == 0xFFFF || cd_size == 0xFFFF_FFFF || cd_off == 0xFFFF_FFFF {
        return Err(ApkError::MalformedZip("zip64 unsupported".into()));
    }

    let mut listing = ZipListing::default();
    let mut pos = cd_off as usize;
    for _ in 0..total {
        if le32(bytes, pos) != Some(CD_SIG) {
            return Err(ApkError::MalformedZip(format!(
                "bad central directory signature at {pos:#x}"
            )));
        }
        let flags = le16(bytes, pos + 8)
            .ok_or_else(|| ApkError::MalformedZip("truncated central directory".into()))?;
        let method = le16(bytes, pos + 10).unwrap();
        let crc = le32(bytes, pos + 16).unwrap();
        let comp_size = le32(bytes, pos + 20).unwrap();
        let uncomp_size = le32(bytes, pos + 24).unwrap();
        let name_len = le16(bytes, pos + 28).unwrap() as usize;
        let extra_len = le16(bytes, pos + 30)
            .ok_or_else(|| ApkError::MalformedZip("truncated central directory".into()))?
            as usize;
        let comment_len = le16(bytes, pos + 32)
            .ok_or_else(|| ApkError::MalformedZip("truncated central directory".into()))?
            as usize;
        let local_offset = le32(bytes, pos + 42)
            .ok_or_else(|| ApkError::MalformedZip("truncated central directory".into()))?;
        let name_bytes = bytes
            .get(pos + 46..pos + 46 + name_len)
            .ok_or_else(|| ApkError::MalformedZip("truncated entry name".into()))?;
        let name = String::from_utf8_lossy(name_bytes).into_owned();
        if listing.entries.iter().any(|e| e.name == name) {
            listing
                .warnings
                .push(format!("DuplicateEntry: '{name}' appears again; last wins"));
        }
        listing.entries.push(ZipEntryMeta {
            name,
            method,
            crc32: crc,
            comp_size,
            uncomp_size,
            local_offset,
            encrypted: flags & 1 != 0,
        });
        pos += 46 + name_len + extra_len + comment_len;
    }
    Ok(listing)
}

/// Extract and verify one member's payload.
pub fn extract_entry(bytes: &[u8], meta: &ZipEntryMeta) -> Result<Vec<u8>, ApkError> {
    if meta.encrypted {
        return Err(ApkError::MalformedZip(format!(
            "entry '{}' is encrypted",
            meta.name
        )));
    }
    let off = meta.local_offset as usize;
    if le32(bytes, off) != Some(LOCAL_SIG) {
        return Err(ApkError::MalformedZip(format!(
            "bad local header for '{}'",
            meta.name
        )));
    }
    let name_len = le16(bytes, off + 26)
        .ok_or_else(|| ApkError::MalformedZip("truncated local header".into()))? as usize;
    let extra_len = le16(bytes, off + 28)
        .ok_or_else(|| ApkError::MalformedZip("truncated local header".into()))? as usize;
    let data_off = off + 30 + name_len + extra_len;
    let stored = bytes
        .get(data_off..data_off + meta.comp_size as usize)
        .ok_or_else(|| ApkError::MalformedZip(format!("truncated payload for '{}'", meta.name)))?;

    let raw = match meta.method {
        0 => stored.to_vec(),
        8 => {
            let mut out = Vec::with_capacity(meta.uncomp_size as usize);
            let mut dec = flate2::read::DeflateDecoder::new(stored);
            // One extra byte so an over-long stream is detected, not truncated.
            dec.by_ref()
                .take(meta.uncomp_size as u64 + 1)
                .read_to_end(&mut out)
                .map_err(|e| {
                    ApkError::MalformedZip(format!("deflate error in '{}': {e}", meta.name))
                })?;
            out
        }
        m => {
            return Err(ApkError::MalformedZip(format!(
                "unsupported compression method {m} for '{}'",
                meta.name
            )))
        }
    };
    if raw.len() != meta.uncomp_size as usize {
        return Err(ApkError::MalformedZip(format!(
            "size mismatch in '{}': expected {} got {}",
            meta.name,
            meta.uncomp_size,
            raw.len()
        )));
    }
    let actual = crc32(&raw);
    if actual != meta.crc32 {
        return Err(ApkError::CrcMismatch {
            name: meta.name.clone(),
            expected: meta.crc32,
            actual,
        });
    }
    Ok(raw)
}

/// Which DEX members feed the code-image channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DexMode {
    /// Every `.dex` member, concatenated in name order.
    #[default]
    ConcatAll,
    /// Only the primary `classes.dex`.
    ClassesOnly,
}

/// The members the pipeline needs from one package.
#[derive(Debug, Clone)]
pub struct ApkArtifacts {
    /// `.dex` payloads sorted by member name.
    pub dexes: Vec<(String, Vec<u8>)>,
    /// Raw binary `AndroidManifest.xml` payload.
    pub manifest: Vec<u8>,
    pub warnings: Vec<String>,
}

impl ApkArtifacts {
    /// All selected DEX payloads concatenated in name order.
    pub fn dex_concat(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (_, bytes) in &self.dexes {
            out.extend_from_slice(bytes);
        }
        out
    }
}

const MANIFEST_NAME: &str = "AndroidManifest.xml";

fn wants_dex(name: &str, mode: DexMode) -> bool {
    match mode {
        DexMode::ConcatAll => name.ends_with(".dex"),
        DexMode::ClassesOnly => name == "classes.dex",
    }
}

/// Pull the manifest and DEX members out of an archive.
///
/// Encrypted or unsupported members are skipped with a warning; the archive
/// only fails if, after skipping, no DEX or no manifest remains.
pub fn extract_artifacts(bytes: &[u8], mode: DexMode) -> Result<ApkArtifacts, ApkError> {
    let listing = list_entries(bytes)?;
    let mut warnings = listing.warnings.clone();
    let mut dexes: Vec<(String, Vec<u8>)> = Vec::new();
    let mut manifest: Option<Vec<u8>> = None;

    for meta in listing.deduped() {
        let interesting = wants_dex(&meta.name, mode) || meta.name == MANIFEST_NAME;
        if !interesting {
            continue;
        }
        if meta.encrypted {
            warnings.push(format!("EncryptedEntry: '{}' skipped", meta.name));
            continue;
        }
        if meta.method != 0 && meta.method != 8 {
            warnings.push(format!(
                "UnsupportedCompression: method {} on '{}'; entry skipped",
                meta.method, meta.name
            ));
            continue;
        }
        let payload = extract_entry(bytes, meta)?;
        if meta.name == MANIFEST_NAME {
            manifest = Some(payload);
        } else {
            dexes.push((meta.name.clone(), payload));
        }
    }

    if dexes.is_empty() {
        return Err(ApkError::MissingDex);
    }
    let manifest = manifest.ok_or(ApkError::MissingManifest)?;
    dexes.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(ApkArtifacts {
        dexes,
        manifest,
        warnings,
    })
}
