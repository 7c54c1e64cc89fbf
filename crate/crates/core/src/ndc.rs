//! National Drug Code normalization to the hyphenless 11-digit 5-4-2 form.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed NDC {0:?}")]
pub struct MalformedNdc(pub String);

const SEGMENT_WIDTHS: [usize; 3] = [5, 4, 2];

/// Normalizes an NDC.
///
/// Hyphenated codes must have three digit segments, each left-padded to the
/// 5-4-2 layout. Hyphenless input is accepted only when it already has 11
/// digits; a bare 10-digit code is ambiguous and rejected.
pub fn normalize_ndc(raw: &str) -> Result<String, MalformedNdc> {
    let raw_trim = raw.trim();
    let bad = || MalformedNdc(raw.into());
    if raw_trim.is_empty() {
        return Err(bad());
    }
    if !raw_trim.contains('-') {
        return if raw_trim.len() == 11 && raw_trim.bytes().all(|b| b.is_ascii_digit()) {
            Ok(raw_trim.into())
        } else {
            Err(bad())
        };
    }
    let segments: Vec<&str> = raw_trim.split('-').collect();
    if segments.len() != SEGMENT_WIDTHS.len() {
        return Err(bad());
    }
    let mut out = String::with_capacity(11);
    for (seg, width) in segments.iter().zip(SEGMENT_WIDTHS) {
        if seg.is_empty() || seg.len() > width || !seg.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        for _ in seg.len()..width {
            out.push('0');
        }
        out.push_str(seg);
    }
    Ok(out)
}

pub fn is_normalized_ndc(s: &str) -> bool {
    s.len() == 11 && s.bytes().all(|b| b.is_ascii_digit())
}
