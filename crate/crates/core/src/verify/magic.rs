//! Validation report for the magic unitaries over a range of `m`.

use serde::Serialize;

use super::VerifyError;
use crate::qstate::{build_magic, MagicUnitarySpec};

#[derive(Debug, Clone, Serialize)]
pub struct MagicReport {
    pub rows: Vec<MagicUnitarySpec>,
}

impl MagicReport {
    pub fn all_even_supported(&self) -> bool {
        self.rows.iter().filter(|r| r.m % 2 == 0).all(|r| r.supported)
    }

    pub fn odd_unsupported(&self) -> Vec<u32> {
        self.rows
            .iter()
            .filter(|r| r.m % 2 == 1 && !r.supported)
            .map(|r| r.m)
            .collect()
    }

    pub fn row(&self, m: u32) -> Option<&MagicUnitarySpec> {
        self.rows.iter().find(|r| r.m == m)
    }
}

/// Builds and validates every `m` in `range`. The range must be non-empty
/// and start at 2 or above.
pub fn validate_magic(range: std::ops::RangeInclusive<u32>) -> Result<MagicReport, VerifyError> {
    if range.is_empty() || *range.start() < 2 {
        return Err(VerifyError::BadRange(format!(
            "{}..{}",
            range.start(),
            range.end()
        )));
    }
    let rows = range
        .map(build_magic)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| VerifyError::BadRange(e.to_string()))?;
    Ok(MagicReport { rows })
}
