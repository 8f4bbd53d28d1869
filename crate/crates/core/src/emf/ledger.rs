use std::io::Write;

use super::EmfError;

/// Header of the ledger CSV export.
pub const TRACE_HEADER: &str = "period,slot,segment_id,consumption_watts,budget_watts";

/// One exported slot: `slot` is 1-based within the period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord {
    pub period: usize,
    pub slot: usize,
    pub consumption: f64,
    pub budget: f64,
}

/// Consumption history of a single segment.
///
/// Segments never share state, so a `&mut SegmentLedger` can be handed to a
/// separate worker per segment.
#[derive(Debug, Clone)]
pub struct SegmentLedger {
    segment_id: usize,
    period_slots: usize,
    current: Vec<f64>,
    current_budgets: Vec<f64>,
    period_sums: Vec<f64>,
    history: Option<Vec<SlotRecord>>,
}

impl SegmentLedger {
    fn new(segment_id: usize, period_slots: usize, retain_history: bool) -> Self {
        Self {
            segment_id,
            period_slots,
            current: Vec::with_capacity(period_slots),
            current_budgets: Vec::with_capacity(period_slots),
            period_sums: Vec::new(),
            history: retain_history.then(Vec::new),
        }
    }

    pub fn segment_id(&self) -> usize {
        self.segment_id
    }

    /// Appends the consumption of the next slot.
    pub fn record_slot(&mut self, consumption: f64) -> Result<(), EmfError> {
        self.record_slot_with_budget(consumption, f64::INFINITY)
    }

    /// Appends a slot consumption together with the budget it was held to
    /// (exported only).
    pub fn record_slot_with_budget(&mut self, consumption: f64, budget: f64) -> Result<(), EmfError> {
        if !(consumption.is_finite() && consumption >= 0.0) {
            return Err(EmfError::InvalidConsumption(consumption));
        }
        if self.current.len() == self.period_slots {
            return Err(EmfError::PeriodOverflow {
                segment: self.segment_id,
                expected: self.period_slots,
            });
        }
        self.current.push(consumption);
        self.current_budgets.push(budget);
        Ok(())
    }

    /// Per-slot consumptions recorded so far in the open period.
    pub fn current_slots(&self) -> &[f64] {
        &self.current
    }

    /// Completed period sums `c^t`, oldest first.
    pub fn period_sums(&self) -> &[f64] {
        &self.period_sums
    }

    fn check_complete(&self) -> Result<(), EmfError> {
        if self.current.len() != self.period_slots {
            return Err(EmfError::PeriodIncomplete {
                segment: self.segment_id,
                recorded: self.current.len(),
                expected: self.period_slots,
            });
        }
        Ok(())
    }

    /// Folds the open period into its sum. Slots are added in recording
    /// order, left to right, starting from zero.
    fn fold_period(&mut self) -> f64 {
        let sum = self.current.iter().fold(0.0, |acc, &c| acc + c);
        let period = self.period_sums.len();
        if let Some(h) = self.history.as_mut() {
            for (k, (&c, &b)) in self.current.iter().zip(&self.current_budgets).enumerate() {
                h.push(SlotRecord {
                    period,
                    slot: k + 1,
                    consumption: c,
                    budget: b,
                });
            }
        }
        self.period_sums.push(sum);
        self.current.clear();
        self.current_budgets.clear();
        sum
    }

    /// Sum of the most recent `count` completed periods, oldest first.
    pub fn recent_sum(&self, count: usize) -> f64 {
        let n = self.period_sums.len();
        self.period_sums[n.saturating_sub(count)..]
            .iter()
            .fold(0.0, |acc, &c| acc + c)
    }

    /// Sum over the window ending at completed period `t` (0-based), oldest
    /// first. Periods before the first count as zero.
    pub fn window_sum(&self, t: usize, window_periods: usize) -> Result<f64, EmfError> {
        if t >= self.period_sums.len() {
            return Err(EmfError::UnknownPeriod(t));
        }
        let lo = (t + 1).saturating_sub(window_periods);
        Ok(self.period_sums[lo..=t].iter().fold(0.0, |acc, &c| acc + c))
    }

    pub fn history(&self) -> Option<&[SlotRecord]> {
        self.history.as_deref()
    }
}

/// Per-segment EIRP consumption history for one sector.
#[derive(Debug, Clone)]
pub struct EirpLedger {
    period_slots: usize,
    window_periods: usize,
    segments: Vec<SegmentLedger>,
}

impl EirpLedger {
    pub fn new(
        num_segments: usize,
        period_slots: usize,
        window_periods: usize,
        retain_history: bool,
    ) -> Result<Self, EmfError> {
        if period_slots == 0 || window_periods == 0 {
            return Err(EmfError::InvalidLedger {
                period_slots,
                window_periods,
            });
        }
        Ok(Self {
            period_slots,
            window_periods,
            segments: (0..num_segments)
                .map(|s| SegmentLedger::new(s, period_slots, retain_history))
                .collect(),
        })
    }

    pub fn period_slots(&self) -> usize {
        self.period_slots
    }

    pub fn window_periods(&self) -> usize {
        self.window_periods
    }

    pub fn completed_periods(&self) -> usize {
        self.segments.first().map_or(0, |s| s.period_sums.len())
    }

    pub fn segment(&self, segment: usize) -> Result<&SegmentLedger, EmfError> {
        self.segments
            .get(segment)
            .ok_or(EmfError::UnknownSegment(segment))
    }

    pub fn segments_mut(&mut self) -> &mut [SegmentLedger] {
        &mut self.segments
    }

    pub fn segments(&self) -> &[SegmentLedger] {
        &self.segments
    }

    pub fn record_slot(&mut self, segment: usize, consumption: f64) -> Result<(), EmfError> {
        self.segment_mut(segment)?.record_slot(consumption)
    }

    pub fn record_slot_with_budget(
        &mut self,
        segment: usize,
        consumption: f64,
        budget: f64,
    ) -> Result<(), EmfError> {
        self.segment_mut(segment)?
            .record_slot_with_budget(consumption, budget)
    }

    fn segment_mut(&mut self, segment: usize) -> Result<&mut SegmentLedger, EmfError> {
        self.segments
            .get_mut(segment)
            .ok_or(EmfError::UnknownSegment(segment))
    }

    /// Closes the current period in every segment and returns the sums `c^t`.
    ///
    /// Fails without modifying anything unless every segment holds exactly
    /// `K` slots.
    pub fn close_period(&mut self) -> Result<Vec<f64>, EmfError> {
        for s in &self.segments {
            s.check_complete()?;
        }
        Ok(self.segments.iter_mut().map(|s| s.fold_period()).collect())
    }

    /// Sliding-window per-slot average EIRP at completed period `t`:
    /// `(1/W) * sum_{i<W} c^{t-i} / K`, with periods before the first
    /// counting as zero.
    pub fn actual_eirp(&self, segment: usize, t: usize) -> Result<f64, EmfError> {
        let sum = self.segment(segment)?.window_sum(t, self.window_periods)?;
        Ok(sum / self.window_slots())
    }

    /// `W * K` as a float.
    pub fn window_slots(&self) -> f64 {
        (self.window_periods * self.period_slots) as f64
    }

    /// Writes every retained slot as `period,slot,segment_id,consumption,budget`,
    /// ordered by period, then slot, then segment. Segment ids are shifted by
    /// `segment_offset`.
    pub fn write_csv<W: Write>(
        &self,
        out: &mut W,
        segment_offset: usize,
        header: bool,
    ) -> Result<(), EmfError> {
        let io = |e: std::io::Error| EmfError::Io(e.to_string());
        if header {
            writeln!(out, "{TRACE_HEADER}").map_err(io)?;
        }
        let histories = self
            .segments
            .iter()
            .map(|s| s.history().ok_or(EmfError::NoHistory))
            .collect::<Result<Vec<_>, _>>()?;
        let rows = histories.first().map_or(0, |h| h.len());
        for i in 0..rows {
            for (s, h) in histories.iter().enumerate() {
                let r = h[i];
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.period,
                    r.slot,
                    s + segment_offset,
                    r.consumption,
                    r.budget
                )
                .map_err(io)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger(k: usize, w: usize) -> EirpLedger {
        EirpLedger::new(1, k, w, true).unwrap()
    }

    #[test]
    fn zeros_sum_to_zero() {
        let mut l = ledger(4, 2);
        for _ in 0..4 {
            l.record_slot(0, 0.0).unwrap();
        }
        assert_eq!(l.close_period().unwrap(), vec![0.0]);
        assert_eq!(l.actual_eirp(0, 0).unwrap(), 0.0);
    }

    #[test]
    fn unit_slots_sum_to_k() {
        let mut l = ledger(7, 1);
        for _ in 0..7 {
            l.record_slot(0, 1.0).unwrap();
        }
        assert_eq!(l.close_period().unwrap(), vec![7.0]);
    }

    #[test]
    fn mixed_values_sum() {
        let mut l = ledger(3, 1);
        for c in [0.5, 2.25, 1.0] {
            l.record_slot(0, c).unwrap();
        }
        assert_eq!(l.close_period().unwrap(), vec![3.75]);
    }

    #[test]
    fn closing_short_period_fails() {
        let mut l = ledger(3, 1);
        l.record_slot(0, 1.0).unwrap();
        assert_eq!(
            l.close_period(),
            Err(EmfError::PeriodIncomplete {
                segment: 0,
                recorded: 1,
                expected: 3
            })
        );
        // still open with its slot
        assert_eq!(l.segment(0).unwrap().current_slots(), &[1.0]);
    }

    #[test]
    fn overflow_and_negative_rejected() {
        let mut l = ledger(1, 1);
        assert!(l.record_slot(0, -1.0).is_err());
        l.record_slot(0, 1.0).unwrap();
        assert!(matches!(
            l.record_slot(0, 1.0),
            Err(EmfError::PeriodOverflow { .. })
        ));
    }

    #[test]
    fn window_average_of_equal_periods() {
        let (k, w) = (5, 3);
        let mut l = ledger(k, w);
        for _ in 0..w {
            for _ in 0..k {
                l.record_slot(0, 2.5).unwrap();
            }
            l.close_period().unwrap();
        }
        assert_eq!(l.actual_eirp(0, w - 1).unwrap(), 2.5);
    }

    #[test]
    fn window_average_two_periods() {
        let k = 4;
        let mut l = ledger(k, 2);
        for c in [1.0, 3.0] {
            for _ in 0..k {
                l.record_slot(0, c).unwrap();
            }
            l.close_period().unwrap();
        }
        assert_eq!(l.actual_eirp(0, 1).unwrap(), 2.0);
        // cold start: the missing period before the first counts as zero
        assert_eq!(l.actual_eirp(0, 0).unwrap(), 0.5);
    }

    #[test]
    fn unknown_period() {
        let l = ledger(2, 2);
        assert_eq!(l.actual_eirp(0, 0), Err(EmfError::UnknownPeriod(0)));
    }

    #[test]
    fn csv_export() {
        let mut l = EirpLedger::new(2, 2, 1, true).unwrap();
        l.record_slot_with_budget(0, 1.0, 4.0).unwrap();
        l.record_slot_with_budget(1, 0.0, 4.0).unwrap();
        l.record_slot_with_budget(0, 0.5, 3.0).unwrap();
        l.record_slot_with_budget(1, 2.0, 4.0).unwrap();
        l.close_period().unwrap();
        let mut buf = Vec::new();
        l.write_csv(&mut buf, 10, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "period,slot,segment_id,consumption_watts,budget_watts\n\
             0,1,10,1,4\n0,1,11,0,4\n0,2,10,0.5,3\n0,2,11,2,4\n"
        );
    }

    #[test]
    fn segments_update_in_parallel() {
        let k = 100;
        let mut l = EirpLedger::new(4, k, 1, false).unwrap();
        std::thread::scope(|scope| {
            for seg in l.segments_mut() {
                scope.spawn(move || {
                    let id = seg.segment_id() as f64;
                    for _ in 0..k {
                        seg.record_slot(id).unwrap();
                    }
                });
            }
        });
        let sums = l.close_period().unwrap();
        assert_eq!(sums, vec![0.0, 100.0, 200.0, 300.0]);
    }
}
