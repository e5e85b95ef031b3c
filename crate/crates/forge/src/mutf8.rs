//! Modified UTF-8 decoding as used inside DEX string data: U+0000 is encoded
//! as C0 80 and supplementary characters as CESU-8 surrogate pairs.
//!
//! Decoding never fails; irregular byte sequences become U+FFFD and are
//! flagged so callers can surface a warning.

/// Decode a NUL-free MUTF-8 byte run. Returns the text plus whether any
/// irregular sequences were replaced.
pub fn decode(bytes: &[u8]) -> (String, bool) {
    let mut out = String::with_capacity(bytes.len());
    let mut irregular = false;
    let mut i = 0;
    while i < bytes.len() {
        let b0 = bytes[i];
        match b0 {
            0x01..=0x7F => {
                out.push(b0 as char);
                i += 1;
            }
            0xC0..=0xDF => {
                let Some(&b1) = bytes.get(i + 1) else {
                    out.push('\u{FFFD}');
                    irregular = true;
                    break;
                };
                if b1 & 0xC0 != 0x80 {
                    out.push('\u{FFFD}');
                    irregular = true;
                    i += 1;
                    continue;
                }
                let cp = ((b0 as u32 & 0x1F) << 6) | (b1 as u32 & 0x3F);
                if cp == 0 {
                    // C0 80: the MUTF-8 spelling of U+0000.
                    out.push('\0');
                } else if cp < 0x80 {
                    out.push('\u{FFFD}');
                    irregular = true;
                } else {
                    out.push(char::from_u32(cp).unwrap());
                }
                i += 2;
            }
            0xE0..=0xEF => {
                let (b1, b2) = match (bytes.get(i + 1), bytes.get(i + 2)) {
                    (Some(&b1), Some(&b2)) if b1 & 0xC0 == 0x80 && b2 & 0xC0 == 0x80 => (b1, b2),
                    _ => {
                        out.push('\u{FFFD}');
                        irregular = true;
                        i += 1;
                        continue;
                    }
                };
                let cp = ((b0 as u32 & 0x0F) << 12) | ((b1 as u32 & 0x3F) << 6) | (b2 as u32 & 0x3F);
                i += 3;
                if (0xD800..=0xDBFF).contains(&cp) {
                    // High surrogate: a CESU-8 pair needs a low surrogate next.
                    if let Some(lo) = read_low_surrogate(bytes, i) {
                        let combined = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
                        out.push(char::from_u32(combined).expect("valid supplementary"));
                        i += 3;
                    } else {
                        out.push('\u{FFFD}');
                        irregular = true;
                    }
                } else if (0xDC00..=0xDFFF).contains(&cp) || cp < 0x800 {
                    out.push('\u{FFFD}');
                    irregular = true;
                } else {
                    out.push(char::from_u32(cp).expect("checked non-surrogate"));
                }
            }
            _ => {
                // Lone continuation bytes, four-byte UTF-8 starters and 0x00
                // are all irregular in MUTF-8.
                out.push('\u{FFFD}');
                irregular = true;
                i += 1;
                // Swallow this sequence's continuation bytes.
                while i < bytes.len() && bytes[i] & 0xC0 == 0x80 {
                    i += 1;
                }
            }
        }
    }
    (out, irregular)
}

fn read_low_surrogate(bytes: &[u8], i: usize) -> Option<u32> {
    let b0 = *bytes.get(i)?;
    let b1 = *bytes.get(i + 1)?;
    let b2 = *bytes.get(i + 2)?;
    if b0 & 0xF0 != 0xE0 || b1 & 0xC0 != 0x80 || b2 & 0xC0 != 0x80 {
        return None;
    }
    let cp = ((b0 as u32 & 0x0F) << 12) | ((b1 as u32 & 0x3F) << 6) | (b2 as u32 & 0x3F);
    (0xDC00..=0xDFFF).contains(&cp).then_some(cp)
}

/// Encode text as MUTF-8.
pub fn encode(s: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.len());
    for c in s.chars() {
        let cp = c as u32;
        match cp {
            0 => out.extend_from_slice(&[0xC0, 0x80]),
            0x01..=0x7F => out.push(cp as u8),
            0x80..=0x7FF => {
                out.push(0xC0 | (cp >> 6) as u8);
                out.push(0x80 | (cp & 0x3F) as u8);
            }
            0x800..=0xFFFF => {
                out.push(0xE0 | (cp >> 12) as u8);
                out.push(0x80 | ((cp >> 6) & 0x3F) as u8);
                out.push(0x80 | (cp & 0x3F) as u8);
            }
            _ => {
                // Supplementary plane: CESU-8 surrogate pair.
                let v = cp - 0x10000;
                for half in [0xD800 + (v >> 10), 0xDC00 + (v & 0x3FF)] {
                    out.push(0xE0 | (half >> 12) as u8);
                    out.push(0x80 | ((half >> 6) & 0x3F) as u8);
                    out.push(0x80 | (half & 0x3F) as u8);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ascii_passes_through() {
        let (s, bad) = decode(b"Landroid/telephony/SmsManager;");
        assert_eq!(s, "Landroid/telephony/SmsManager;");
        assert!(!bad);
    }

    #[test]
    fn embedded_nul_uses_two_bytes() {
        let (s, bad) = decode(&[b'a', 0xC0, 0x80, b'b']);
        assert_eq!(s, "a\0b");
        assert!(!bad);
    }

    #[test]
    fn surrogate_pair_combines() {
        // U+1F600 as CESU-8: D83D DE00.
        let bytes = [0xED, 0xA0, 0xBD, 0xED, 0xB8, 0x80];
        let (s, bad) = decode(&bytes);
        assert_eq!(s, "\u{1F600}");
        assert!(!bad);
    }

    #[test]
    fn unpaired_surrogate_is_replaced() {
        let (s, bad) = decode(&[0xED, 0xA0, 0xBD, b'x']);
        assert_eq!(s, "\u{FFFD}x");
        assert!(bad);
    }

    #[test]
    fn truncated_and_stray_bytes_are_replaced() {
        assert_eq!(decode(&[0xC3]), ("\u{FFFD}".into(), true));
        assert_eq!(decode(&[0x85, b'y']), ("\u{FFFD}y".into(), true));
        // Plain four-byte UTF-8 is not MUTF-8.
        assert_eq!(decode("\u{1F600}".as_bytes()), ("\u{FFFD}".into(), true));
    }

    #[test]
    fn overlong_two_byte_is_replaced() {
        // C1 81 would be 'A' overlong; only C0 80 may be overlong.
        assert_eq!(decode(&[0xC1, 0x81]), ("\u{FFFD}".into(), true));
    }

    proptest! {
        #[test]
        fn encode_decode_round_trips(s in "\\PC{0,40}") {
            let (back, bad) = decode(&encode(&s));
            prop_assert_eq!(back, s);
            prop_assert!(!bad);
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..96)) {
            let _ = decode(&bytes);
        }
    }
}
