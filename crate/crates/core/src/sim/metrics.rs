use std::io::{self, Write};

use crate::emf::EirpLedger;
use crate::scheduler::StrategyKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeMetrics {
    pub ue_id: usize,
    pub cell: usize,
    pub beam: usize,
    pub segment: usize,
    pub received_bits: f64,
    /// Time with data pending, in seconds.
    pub reception_seconds: f64,
    pub packets_completed: usize,
    pub scheduled_slots: usize,
    pub mean_sinr_db: f64,
}

impl UeMetrics {
    /// Received bits over reception time; `None` for a UE that never had
    /// data.
    pub fn throughput_bps(&self) -> Option<f64> {
        (self.reception_seconds > 0.0).then(|| self.received_bits / self.reception_seconds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    pub cell: usize,
    pub carried_bits: f64,
    pub throughput_bps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentCompliance {
    pub cell: usize,
    pub segment: usize,
    pub threshold: f64,
    pub max_actual_eirp: f64,
    /// Periods whose window average exceeded the threshold.
    pub violations: usize,
    pub periods: usize,
}

impl SegmentCompliance {
    pub fn compliant(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodRow {
    pub cell: usize,
    pub segment: usize,
    pub period: usize,
    pub gamma: f64,
    pub consumption: f64,
    pub actual_eirp: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct RunStats {
    pub dropped: usize,
    pub solver_calls: usize,
    pub continuous_bits: f64,
    pub discrete_bits: f64,
}

pub const UE_HEADER: &str =
    "ue_id,cell,beam,segment,received_bits,reception_s,throughput_bps,packets_completed,scheduled_slots,mean_sinr_db";
pub const PERIOD_TRACE_HEADER: &str =
    "period,cell,segment_id,gamma_watt_slots,consumption_watt_slots,actual_eirp_watts,threshold_watts";

#[derive(Debug, Clone)]
pub struct Metrics {
    pub strategy: StrategyKind,
    pub ues: Vec<UeMetrics>,
    pub cells: Vec<CellMetrics>,
    pub compliance: Vec<SegmentCompliance>,
    pub periods: Vec<PeriodRow>,
    /// Per-cell ledgers with slot history, when slot traces were requested.
    pub ledgers: Option<Vec<EirpLedger>>,
    pub sim_seconds: f64,
    /// Mean over cells of carried bits per second.
    pub cell_throughput_bps: f64,
    /// Mean over UEs that had data of received bits per reception time.
    pub ue_throughput_bps: f64,
    /// Relative rate lost to the MCS staircase against the continuous curve
    /// at the scheduled powers.
    pub mcs_rate_loss: f64,
    pub dropped_grants: usize,
    pub solver_calls: usize,
}

impl Metrics {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        ues: Vec<UeMetrics>,
        cells: Vec<CellMetrics>,
        compliance: Vec<SegmentCompliance>,
        periods: Vec<PeriodRow>,
        ledgers: Option<Vec<EirpLedger>>,
        sim_seconds: f64,
        stats: RunStats,
        strategy: StrategyKind,
    ) -> Self {
        let cell_throughput_bps = if cells.is_empty() {
            0.0
        } else {
            cells.iter().map(|c| c.throughput_bps).sum::<f64>() / cells.len() as f64
        };
        let tputs: Vec<f64> = ues.iter().filter_map(UeMetrics::throughput_bps).collect();
        let ue_throughput_bps = if tputs.is_empty() {
            0.0
        } else {
            tputs.iter().sum::<f64>() / tputs.len() as f64
        };
        let mcs_rate_loss = if stats.continuous_bits > 0.0 {
            1.0 - stats.discrete_bits / stats.continuous_bits
        } else {
            0.0
        };
        Self {
            strategy,
            ues,
            cells,
            compliance,
            periods,
            ledgers,
            sim_seconds,
            cell_throughput_bps,
            ue_throughput_bps,
            mcs_rate_loss,
            dropped_grants: stats.dropped,
            solver_calls: stats.solver_calls,
        }
    }

    /// True when no segment's window average ever exceeded its threshold.
    pub fn compliant(&self) -> bool {
        self.compliance.iter().all(SegmentCompliance::compliant)
    }

    pub fn total_ue_bits(&self) -> f64 {
        self.ues.iter().map(|u| u.received_bits).sum()
    }

    pub fn total_cell_bits(&self) -> f64 {
        self.cells.iter().map(|c| c.carried_bits).sum()
    }

    pub fn write_ue_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{UE_HEADER}")?;
        for u in &self.ues {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                u.ue_id,
                u.cell,
                u.beam,
                u.segment,
                u.received_bits,
                u.reception_seconds,
                u.throughput_bps().unwrap_or(0.0),
                u.packets_completed,
                u.scheduled_slots,
                u.mean_sinr_db
            )?;
        }
        Ok(())
    }

    /// Per-period trace when no slot history was retained, else the slot
    /// ledger export with segment ids `cell * segments + segment`.
    pub fn write_eirp_trace<W: Write>(&self, out: &mut W) -> io::Result<()> {
        if let Some(ledgers) = &self.ledgers {
            for (c, l) in ledgers.iter().enumerate() {
                let n = l.segments().len();
                l.write_csv(out, c * n, c == 0)
                    .map_err(|e| io::Error::other(e.to_string()))?;
            }
            return Ok(());
        }
        writeln!(out, "{PERIOD_TRACE_HEADER}")?;
        for r in &self.periods {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.period, r.cell, r.segment, r.gamma, r.consumption, r.actual_eirp, r.threshold
            )?;
        }
        Ok(())
    }

    pub fn write_compliance<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "strategy: {}", self.strategy)?;
        writeln!(out, "cell,segment,threshold_watts,max_actual_eirp_watts,violations,periods,status")?;
        for c in &self.compliance {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.cell,
                c.segment,
                c.threshold,
                c.max_actual_eirp,
                c.violations,
                c.periods,
                if c.compliant() { "PASS" } else { "FAIL" }
            )?;
        }
        let failed = self.compliance.iter().filter(|c| !c.compliant()).count();
        if failed == 0 {
            writeln!(out, "compliance: PASS all segments")
        } else {
            writeln!(out, "compliance: FAIL {failed} of {} segments", self.compliance.len())
        }
    }
}
