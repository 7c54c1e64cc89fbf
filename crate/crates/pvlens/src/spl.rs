//! Reader for the structured product label XML subset.
//!
//! Documented in `docs/spl-subset.md`. Only identifiers, the effective date,
//! package NDCs and the configured sections are read; everything else in the
//! document is ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use pvlens_core::ndc::normalize_ndc;
use pvlens_core::{Date, LabelSection, SectionCategory, SplDocument};
use roxmltree::{Document, Node};

/// OID of the NDC code system in product data elements.
pub const NDC_CODE_SYSTEM: &str = "2.16.840.1.113883.6.69";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("document has no set id")]
    MissingSetId,
    #[error("two sections map to {0}")]
    DuplicateSection(SectionCategory),
}

#[derive(Debug, thiserror::Error)]
pub enum SectionMapError {
    #[error("cannot read section map {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("section map line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Section-type code to category table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionMap {
    codes: BTreeMap<String, SectionCategory>,
}

/// LOINC section codes for indications & usage, adverse reactions and
/// boxed warning.
pub const DEFAULT_SECTION_CODES: &[(&str, SectionCategory)] = &[
    ("34067-9", SectionCategory::Indication),
    ("34084-4", SectionCategory::AdverseEvent),
    ("34066-1", SectionCategory::BoxedWarning),
];

impl Default for SectionMap {
    fn default() -> Self {
        Self::new(DEFAULT_SECTION_CODES.iter().map(|&(c, k)| (c.to_string(), k)))
    }
}

impl SectionMap {
    pub fn new(entries: impl IntoIterator<Item = (String, SectionCategory)>) -> Self {
        SectionMap {
            codes: entries.into_iter().collect(),
        }
    }

    pub fn get(&self, code: &str) -> Option<SectionCategory> {
        self.codes.get(code).copied()
    }

    /// Parses `code<TAB>category` lines. Blank lines and `#` comments are
    /// skipped.
    pub fn parse(src: &str) -> Result<Self, SectionMapError> {
        let mut codes = BTreeMap::new();
        for (i, raw) in src.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: String| SectionMapError::Malformed { line: i + 1, reason };
            let (code, cat) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected code<TAB>category".into()))?;
            let category: SectionCategory = cat.trim().parse().map_err(|e| malformed(format!("{e}")))?;
            codes.insert(code.trim().to_string(), category);
        }
        Ok(SectionMap { codes })
    }

    pub fn load(path: &Path) -> Result<Self, SectionMapError> {
        let src = fs::read_to_string(path).map_err(|source| SectionMapError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&src)
    }
}

/// Parses one label.
pub fn parse_spl(xml: &[u8], section_map: &SectionMap) -> Result<SplDocument, SplError> {
    let xml = xml.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(xml);
    let text = std::str::from_utf8(xml).map_err(|e| SplError::MalformedXml(format!("not UTF-8: {e}")))?;
    check_declared_encoding(text)?;
    let doc = Document::parse(text).map_err(|e| SplError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();

    let set_id = header_value(root, "setId", &["root", "value"])
        .filter(|s| !s.is_empty())
        .ok_or(SplError::MissingSetId)?;

    let doc_version = match header_value(root, "versionNumber", &["value"]) {
        None => 1,
        Some(v) => v
            .parse::<u32>()
            .ok()
            .filter(|&v| v >= 1)
            .ok_or_else(|| SplError::MalformedXml(format!("invalid versionNumber {v:?}")))?,
    };

    let effective = header_value(root, "effectiveTime", &["value"])
        .ok_or_else(|| SplError::MalformedXml("missing effectiveTime".into()))?;
    let effective_date = parse_hl7_date(&effective)
        .ok_or_else(|| SplError::MalformedXml(format!("invalid effectiveTime {effective:?}")))?;

    let ndc_codes = package_ndcs(root);

    let mut sections = Vec::new();
    let mut seen = BTreeSet::new();
    collect_sections(root, section_map, &mut sections, &mut seen)?;

    Ok(SplDocument {
        set_id,
        doc_version,
        effective_date,
        ndc_codes,
        sections,
    })
}

fn check_declared_encoding(text: &str) -> Result<(), SplError> {
    let Some(rest) = text.strip_prefix("<?xml") else {
        return Ok(());
    };
    let decl = &rest[..rest.find("?>").unwrap_or(rest.len())];
    let Some(pos) = decl.find("encoding") else {
        return Ok(());
    };
    let value = decl[pos + "encoding".len()..]
        .trim_start()
        .trim_start_matches('=')
        .trim_start();
    let quote = value.chars().next().unwrap_or('"');
    let enc: String = value.chars().skip(1).take_while(|&c| c != quote).collect();
    if enc.eq_ignore_ascii_case("utf-8") || enc.eq_ignore_ascii_case("utf8") {
        Ok(())
    } else {
        Err(SplError::MalformedXml(format!("unsupported encoding {enc:?}")))
    }
}

/// Reads a header field from a direct child element (attribute first, then
/// text) or, failing that, from a same-named attribute on the root.
fn header_value(root: Node, name: &str, attrs: &[&str]) -> Option<String> {
    if let Some(el) = root.children().find(|n| n.is_element() && n.tag_name().name() == name) {
        let from_attr = attrs.iter().find_map(|a| el.attribute(*a));
        let value = from_attr.map(str::to_string).or_else(|| el.text().map(str::to_string));
        return value.map(|v| v.trim().to_string());
    }
    root.attribute(name).map(|v| v.trim().to_string())
}

fn parse_hl7_date(v: &str) -> Option<Date> {
    let digits = v.get(..8)?;
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Date::parse_from_str(digits, "%Y%m%d").ok()
}

fn package_ndcs(root: Node) -> BTreeSet<String> {
    root.descendants()
        .filter(|n| n.is_element() && matches!(n.tag_name().name(), "package" | "containerPackagedProduct"))
        .flat_map(|pkg| {
            pkg.children()
                .filter(|n| n.is_element() && n.tag_name().name() == "code")
                .filter(|n| n.attribute("codeSystem") == Some(NDC_CODE_SYSTEM))
                .filter_map(|n| n.attribute("code"))
                .filter_map(|c| normalize_ndc(c).ok())
        })
        .collect()
}

fn section_code<'a>(section: Node<'a, '_>) -> Option<&'a str> {
    section.attribute("code").or_else(|| {
        section
            .children()
            .find(|n| n.is_element() && n.tag_name().name() == "code")
            .and_then(|n| n.attribute("code"))
    })
}

fn collect_sections(
    node: Node,
    map: &SectionMap,
    out: &mut Vec<LabelSection>,
    seen: &mut BTreeSet<SectionCategory>,
) -> Result<(), SplError> {
    for child in node.children().filter(Node::is_element) {
        if child.tag_name().name() == "section" {
            if let Some((code, category)) = section_code(child).and_then(|c| map.get(c).map(|k| (c, k))) {
                let text = strip_markup(child);
                if text.is_empty() {
                    continue;
                }
                if !seen.insert(category) {
                    return Err(SplError::DuplicateSection(category));
                }
                out.push(LabelSection {
                    category,
                    source_code: code.to_string(),
                    text,
                });
                continue;
            }
        }
        collect_sections(child, map, out, seen)?;
    }
    Ok(())
}

/// Elements whose text flows into the surrounding text without a break.
const INLINE_ELEMENTS: &[&str] = &[
    "content", "emphasis", "sub", "sup", "b", "i", "u", "em", "strong", "span", "linkHtml", "a",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Break {
    None,
    Space,
    Item,
}

struct TextBuilder {
    out: String,
    pending: Break,
}

impl TextBuilder {
    fn request(&mut self, b: Break) {
        self.pending = self.pending.max(b);
    }

    fn push_text(&mut self, s: &str) {
        if s.starts_with(char::is_whitespace) {
            self.request(Break::Space);
        }
        for word in s.split_whitespace() {
            if !self.out.is_empty() {
                match self.pending {
                    Break::Item => self.out.push_str("; "),
                    Break::Space => self.out.push(' '),
                    Break::None => {}
                }
            }
            self.pending = Break::None;
            self.out.push_str(word);
            self.pending = Break::Space;
        }
        if !s.ends_with(char::is_whitespace) && !s.trim().is_empty() {
            self.pending = Break::None;
        }
    }
}

/// Flattens an element to text: descendant text in document order,
/// whitespace collapsed, block elements and table cells separated by a
/// space, consecutive list items separated by `"; "`.
pub fn strip_markup(node: Node) -> String {
    let mut b = TextBuilder {
        out: String::new(),
        pending: Break::None,
    };
    walk(node, &mut b);
    b.out
}

fn walk(node: Node, b: &mut TextBuilder) {
    let mut seen_item = false;
    for child in node.children() {
        if child.is_text() {
            b.push_text(child.text().unwrap_or(""));
            continue;
        }
        if !child.is_element() {
            continue;
        }
        let name = child.tag_name().name();
        let inline = INLINE_ELEMENTS.contains(&name);
        if name == "item" {
            b.request(if seen_item { Break::Item } else { Break::Space });
            seen_item = true;
        } else if !inline {
            b.request(Break::Space);
        }
        walk(child, b);
        if !inline {
            b.request(Break::Space);
        }
    }
}
