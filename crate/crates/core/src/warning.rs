use serde::Serialize;

/// A non-fatal condition worth recording: a skipped region, batch or category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Warning {
    pub kind: String,
    pub detail: String,
}

impl Warning {
    pub fn new(kind: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            detail: detail.into(),
        }
    }
}
