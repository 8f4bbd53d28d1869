use super::SchedError;
use crate::units::linear_to_db;

/// Spectral efficiency of the continuous envelope per `log2(1 + SINR)`.
///
/// Every table entry sits on or below `ENVELOPE * log2(1 + SINR)` at its
/// SINR threshold, so the staircase never exceeds the concave rate curve fed
/// to the power allocator.
pub const ENVELOPE: f64 = 0.75;

/// Spectral efficiencies (bits/s/Hz) of the 256QAM CQI table, CQI 1..=15.
pub const CQI_TABLE2_EFFICIENCY: [f64; 15] = [
    0.1523, 0.3770, 0.8770, 1.4766, 1.9141, 2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152,
    5.5547, 6.2266, 6.9141, 7.4063,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsEntry {
    pub index: usize,
    pub efficiency: f64,
    pub min_sinr_db: f64,
    min_sinr: f64,
}

impl McsEntry {
    /// Minimum SINR as a linear ratio.
    #[inline]
    pub fn min_sinr(&self) -> f64 {
        self.min_sinr
    }
}

/// Ordered MCS table; positions are 0-based, `index` keeps the table's own
/// numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

impl McsTable {
    /// Builds a table from `(efficiency, min_sinr_linear)` pairs, which must
    /// be strictly increasing in both.
    pub fn new(rows: &[(f64, f64)]) -> Result<Self, SchedError> {
        if rows.is_empty() {
            return Err(SchedError::McsTable("table is empty".into()));
        }
        for (i, w) in rows.windows(2).enumerate() {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(SchedError::McsTable(format!(
                    "entries {} and {} are not strictly increasing",
                    i + 1,
                    i + 2
                )));
            }
        }
        if !(rows[0].0 > 0.0 && rows[0].1 > 0.0) {
            return Err(SchedError::McsTable("first entry must be positive".into()));
        }
        let entries = rows
            .iter()
            .enumerate()
            .map(|(i, &(efficiency, min_sinr))| McsEntry {
                index: i + 1,
                efficiency,
                min_sinr_db: linear_to_db(min_sinr),
                min_sinr,
            })
            .collect();
        Ok(Self { entries })
    }

    /// The 256QAM CQI table with thresholds placed on the envelope:
    /// `min_sinr = 2^(efficiency / ENVELOPE) - 1`.
    pub fn cqi_table2() -> Self {
        let rows: Vec<(f64, f64)> = CQI_TABLE2_EFFICIENCY
            .iter()
            .map(|&se| (se, (se / ENVELOPE).exp2() - 1.0))
            .collect();
        Self::new(&rows).expect("bundled table is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    #[inline]
    pub fn efficiency(&self, m: usize) -> f64 {
        self.entries[m].efficiency
    }

    #[inline]
    pub fn min_sinr(&self, m: usize) -> f64 {
        self.entries[m].min_sinr
    }

    /// Highest entry whose threshold does not exceed `sinr` (linear).
    pub fn select(&self, sinr: f64) -> Option<usize> {
        let n = self.entries.partition_point(|e| e.min_sinr <= sinr);
        n.checked_sub(1)
    }

    /// Envelope efficiency `ENVELOPE * log2(1 + sinr)`.
    pub fn envelope(&self, sinr: f64) -> f64 {
        ENVELOPE * sinr.ln_1p() / std::f64::consts::LN_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_monotone_and_below_envelope() {
        let t = McsTable::cqi_table2();
        assert_eq!(t.len(), 15);
        for (m, e) in t.entries().iter().enumerate() {
            assert_eq!(t.select(e.min_sinr()), Some(m));
            assert!(e.efficiency <= t.envelope(e.min_sinr()) * (1.0 + 1e-12));
        }
        assert_eq!(t.select(0.0), None);
        assert_eq!(t.select(1e9), Some(14));
    }

    #[test]
    fn lowest_threshold_is_near_minus_eight_db() {
        let t = McsTable::cqi_table2();
        assert!((t.entries()[0].min_sinr_db + 8.2).abs() < 0.1);
    }

    #[test]
    fn rejects_non_monotone_rows() {
        assert!(McsTable::new(&[(1.0, 1.0), (0.5, 2.0)]).is_err());
        assert!(McsTable::new(&[]).is_err());
    }
}
