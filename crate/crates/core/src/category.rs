use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// The three labeled sections the pipeline extracts terms from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SectionCategory {
    Indication,
    AdverseEvent,
    BoxedWarning,
}

impl SectionCategory {
    pub const ALL: [SectionCategory; 3] = [
        SectionCategory::Indication,
        SectionCategory::AdverseEvent,
        SectionCategory::BoxedWarning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionCategory::Indication => "Indication",
            SectionCategory::AdverseEvent => "AdverseEvent",
            SectionCategory::BoxedWarning => "BoxedWarning",
        }
    }
}

impl fmt::Display for SectionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown section category {0:?}")]
pub struct UnknownCategory(pub alloc::string::String);

impl FromStr for SectionCategory {
    type Err = UnknownCategory;

    /// Accepts the canonical names plus the snake_case and table-header
    /// spellings used in section map files.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: alloc::string::String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "indication" | "indications" => Ok(SectionCategory::Indication),
            "adverseevent" | "adverseevents" | "ae" => Ok(SectionCategory::AdverseEvent),
            "boxedwarning" | "blackboxwarning" | "bbw" => Ok(SectionCategory::BoxedWarning),
            _ => Err(UnknownCategory(s.into())),
        }
    }
}
