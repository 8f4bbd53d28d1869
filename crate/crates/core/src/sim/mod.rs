//! Desk-scale downlink system simulator.
//!
//! Sites sit on a hexagonal grid with three sectors each. Every sector (cell)
//! has its own planar array, DFT codebook, segment set, budgets and EIRP
//! ledger. UEs follow an FTP-style traffic model: a packet of `Q` bits, then
//! a fixed reading time after each completed download.
//!
//! Each downlink slot, every cell selects UEs by proportional fairness,
//! pre-allocates MCS and power, applies the EIRP strategy per segment with
//! that segment's slot budget, places PRBs, delivers bits at the scheduled
//! MCS and records the measured segment consumption. SINRs use the
//! interference of the most recent downlink slot, so cells are independent
//! within a slot.

mod channel;
mod metrics;
mod topology;

pub use channel::{ChannelModel, GainTable};
pub use metrics::{CellMetrics, Metrics, PeriodRow, SegmentCompliance, UeMetrics, PERIOD_TRACE_HEADER, UE_HEADER};
pub use topology::{build_topology, wrap_angle, Cell, Site, Topology, UeDrop};

use std::sync::Arc;

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::budget::{outer_loop_cap, BudgetError, BudgetPolicy, SegmentBudgeter};
use crate::emf::{AngleRange, BeamCodebook, EirpLedger, EmfError, PlanarArray, Segment, SegmentSet};
use crate::scheduler::{
    allocate_prbs, downgrade_mcs_power, full_power_grants, grants_load, limit_segment, select_ues, Grant, LinkParams,
    McsTable, SchedError, SchedStrategy, StrategyKind, UeSchedState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Emf(#[from] EmfError),
    #[error(transparent)]
    Sched(#[from] SchedError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub num_sites: usize,
    pub sectors_per_site: usize,
    pub inter_site_distance: f64,
    pub num_ues: usize,
    pub packet_bits: f64,
    pub reading_time_s: f64,
    pub sim_slots: usize,
    pub seed: u64,
    pub min_distance: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            num_sites: 3,
            sectors_per_site: 3,
            inter_site_distance: 500.0,
            num_ues: 90,
            packet_bits: 2e6,
            reading_time_s: 0.05,
            sim_slots: 20000,
            seed: 1,
            min_distance: 35.0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: &str| Err(SimError::Config(m.to_string()));
        if self.num_sites == 0 {
            return err("scenario.num_sites must be positive");
        }
        if self.sectors_per_site == 0 {
            return err("scenario.sectors_per_site must be positive");
        }
        if !(self.inter_site_distance > 0.0) {
            return err("scenario.inter_site_distance must be positive");
        }
        if !(self.packet_bits >= 1.0 && self.packet_bits.is_finite()) {
            return err("traffic.packet_bits must be positive");
        }
        if !(self.reading_time_s > 0.0) {
            return err("traffic.reading_time_ms must be positive");
        }
        if self.sim_slots == 0 {
            return err("scenario.sim_slots must be positive");
        }
        if !(self.min_distance >= 0.0 && self.min_distance < self.inter_site_distance / 2.0) {
            return err("scenario.min_distance in [0, isd/2)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntennaConfig {
    pub array: PlanarArray,
    pub az_beams: usize,
    pub oversampling: usize,
    pub el_beams: usize,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self {
            array: PlanarArray::default_macro(),
            az_beams: 15,
            oversampling: 2,
            el_beams: 5,
        }
    }
}

/// Uniform segment partition of the front half-space of each sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentLayout {
    pub az_segments: usize,
    pub el_segments: usize,
    /// Direction-grid resolution in radians.
    pub resolution: f64,
}

impl Default for SegmentLayout {
    fn default() -> Self {
        Self {
            az_segments: 1,
            el_segments: 1,
            resolution: crate::emf::DEFAULT_GRID_RESOLUTION,
        }
    }
}

impl SegmentLayout {
    pub fn build(&self) -> Result<SegmentSet, EmfError> {
        let (az, el): (AngleRange, AngleRange) = SegmentSet::front_half_space();
        SegmentSet::uniform(az, el, self.az_segments, self.el_segments)
    }

    pub fn len(&self) -> usize {
        self.az_segments * self.el_segments
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarrierConfig {
    pub total_prbs: u32,
    /// `P-bar`, watts per PRB.
    pub max_power: f64,
    pub slot_seconds: f64,
    /// One entry per slot of the repeating TDD pattern, `true` for downlink.
    pub tdd_pattern: Vec<bool>,
}

impl Default for CarrierConfig {
    fn default() -> Self {
        Self {
            total_prbs: 273,
            max_power: crate::units::dbm_to_watts(53.0) / 273.0,
            slot_seconds: 5e-4,
            tdd_pattern: vec![true, true, true, true, false],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerConfig {
    pub strategy: SchedStrategy,
    pub max_ues_per_slot: usize,
    /// PF averaging time constant in slots.
    pub pf_time_constant: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            strategy: SchedStrategy::new(StrategyKind::PlR),
            max_ues_per_slot: 8,
            pf_time_constant: 100.0,
        }
    }
}

/// Detail of the exported EIRP trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceLevel {
    None,
    Period,
    Slot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub channel: ChannelModel,
    pub antenna: AntennaConfig,
    pub segments: SegmentLayout,
    pub carrier: CarrierConfig,
    pub scheduler: SchedulerConfig,
    pub budget: BudgetPolicy,
    /// Threshold of every segment as a fraction of its maximum EIRP.
    pub limit_rho: f64,
    pub trace: TraceLevel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            channel: ChannelModel::default(),
            antenna: AntennaConfig::default(),
            segments: SegmentLayout::default(),
            carrier: CarrierConfig::default(),
            scheduler: SchedulerConfig::default(),
            budget: BudgetPolicy::default(),
            limit_rho: 0.25,
            trace: TraceLevel::Period,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.scenario.validate()?;
        self.channel.validate()?;
        self.budget.validate()?;
        let err = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.limit_rho > 0.0 && self.limit_rho <= 1.0) {
            return err("budget.rho_db must be <= 0 dB");
        }
        if self.carrier.total_prbs == 0 || !(self.carrier.max_power > 0.0) {
            return err("carrier needs PRBs and positive power");
        }
        if !(self.carrier.slot_seconds > 0.0) {
            return err("carrier.slot_ms must be positive");
        }
        if !self.carrier.tdd_pattern.iter().any(|&d| d) {
            return err("carrier.tdd_pattern needs at least one D slot");
        }
        if self.scheduler.max_ues_per_slot == 0 {
            return err("scheduler.max_ues_per_slot must be positive");
        }
        if !(self.scheduler.pf_time_constant >= 1.0) {
            return err("scheduler.pf_time_constant must be >= 1");
        }
        let alpha = self.scheduler.strategy.alpha;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return err("scheduler.alpha must be >= 0");
        }
        if self.antenna.az_beams == 0 || self.antenna.el_beams == 0 {
            return err("antenna needs at least one beam");
        }
        if self.segments.is_empty() || !(self.segments.resolution > 0.0) {
            return err("segments need a positive count and resolution");
        }
        Ok(())
    }

    pub fn link(&self) -> LinkParams {
        LinkParams {
            total_prbs: self.carrier.total_prbs,
            max_power: self.carrier.max_power,
            bits_per_efficiency: 168.0 * (1.0 - self.channel.overhead) * self.channel.rank,
            slot_seconds: self.carrier.slot_seconds,
        }
    }
}

/// Codebook of one sector over its segment layout.
pub fn build_codebook(antenna: &AntennaConfig, layout: &SegmentLayout) -> Result<BeamCodebook, SimError> {
    Ok(BeamCodebook::dft(
        Arc::new(antenna.array.clone()),
        antenna.az_beams,
        antenna.oversampling,
        antenna.el_beams,
        layout.build()?,
        layout.resolution,
    )?)
}

const STREAM_TOPOLOGY: u64 = 1;
const STREAM_SHADOWING: u64 = 2;
const STREAM_TRAFFIC: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Radio environment shared by all strategies of one scenario and seed.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub topology: Topology,
    pub gains: GainTable,
    pub noise: f64,
    /// Serving `(cell, beam)` of each UE.
    pub serving: Vec<(usize, usize)>,
}

impl Deployment {
    pub fn new(cfg: &SimConfig, codebook: &BeamCodebook) -> Result<Self, SimError> {
        let s = &cfg.scenario;
        let topology = build_topology(s, &mut rng(s.seed, STREAM_TOPOLOGY));
        let pl0 = cfg.channel.intercept_db(
            s.inter_site_distance,
            cfg.carrier.max_power,
            cfg.antenna.array.element_gain,
        );
        let gains = GainTable::build(
            &topology,
            &cfg.channel,
            codebook,
            pl0,
            &mut rng(s.seed, STREAM_SHADOWING),
        )?;
        let serving = (0..topology.ues.len()).map(|u| gains.best_server(u)).collect();
        Ok(Self {
            topology,
            gains,
            noise: cfg.channel.noise_per_prb(),
            serving,
        })
    }

    /// SINR of `ue` on its serving beam at power `p` per PRB, with
    /// interference `interference` (W per PRB at the receiver).
    pub fn sinr(&self, ue: usize, p: f64, interference: f64) -> f64 {
        let (c, b) = self.serving[ue];
        p * self.gains.get(ue, c, b) / (self.noise + interference)
    }

    /// Wideband interference at `ue` from the transmissions of other cells:
    /// each entry `(beam, A P / total_prbs)` of cell `v`.
    pub fn interference(&self, ue: usize, tx: &[Vec<(usize, f64)>]) -> f64 {
        let own = self.serving[ue].0;
        let mut i = 0.0;
        for (v, list) in tx.iter().enumerate() {
            if v == own {
                continue;
            }
            let g = self.gains.beams(ue, v);
            for &(b, x) in list {
                i += x * g[b];
            }
        }
        i
    }
}

#[derive(Debug, Clone, Copy)]
struct UeState {
    buffer: f64,
    next_arrival: Option<usize>,
    avg: f64,
    received: f64,
    reception_slots: usize,
    packets: usize,
    scheduled_slots: usize,
    sinr_db_sum: f64,
}

/// Runs one simulation, building the codebook and deployment.
pub fn run(cfg: &SimConfig) -> Result<Metrics, SimError> {
    cfg.validate()?;
    let codebook = build_codebook(&cfg.antenna, &cfg.segments)?;
    let deployment = Deployment::new(cfg, &codebook)?;
    run_with(cfg, &codebook, &deployment)
}

/// Runs one simulation on a prepared codebook and deployment, which must
/// have been built from `cfg`'s antenna, segment and scenario settings.
pub fn run_with(
    cfg: &SimConfig,
    codebook: &BeamCodebook,
    dep: &Deployment,
) -> Result<Metrics, SimError> {
    cfg.validate()?;
    let s = &cfg.scenario;
    let link = cfg.link();
    let mcs = McsTable::cqi_table2();
    let strategy = cfg.scheduler.strategy;
    let k_slots = cfg.budget.period_slots;
    let n_cells = dep.topology.cells.len();
    let n_ues = dep.topology.ues.len();
    let n_seg = codebook.segments().len();
    let slot_s = cfg.carrier.slot_seconds;
    let reading_slots = ((s.reading_time_s / slot_s).round() as usize).max(1);

    // segment limits from the codebook's per-segment peak gain
    let full = link.total_prbs as f64 * link.max_power;
    let segments: Vec<Segment> = codebook
        .segments()
        .iter()
        .map(|seg| {
            let cstar = full * codebook.peak_gain_in_segment(seg.id);
            seg.clone().with_limits(cfg.limit_rho * cstar, cstar)
        })
        .collect::<Result<_, _>>()?;

    let ue_beam: Vec<usize> = dep.serving.iter().map(|&(_, b)| b).collect();
    let ue_seg: Vec<usize> = ue_beam
        .iter()
        .map(|&b| codebook.main_lobe_segment(b))
        .collect::<Result<_, _>>()?;
    let ue_ghat: Vec<f64> = (0..n_ues)
        .map(|u| codebook.max_gain(ue_beam[u], ue_seg[u]))
        .collect::<Result<_, _>>()?;
    let serving_gain: Vec<f64> = (0..n_ues)
        .map(|u| dep.gains.get(u, dep.serving[u].0, ue_beam[u]))
        .collect();
    let mut cell_ues: Vec<Vec<usize>> = vec![Vec::new(); n_cells];
    for u in 0..n_ues {
        cell_ues[dep.serving[u].0].push(u);
    }

    let mut traffic = rng(s.seed, STREAM_TRAFFIC);
    let mut ues: Vec<UeState> = (0..n_ues)
        .map(|_| UeState {
            buffer: 0.0,
            next_arrival: Some(traffic.gen_range(0..reading_slots)),
            avg: 1.0,
            received: 0.0,
            reception_slots: 0,
            packets: 0,
            scheduled_slots: 0,
            sinr_db_sum: 0.0,
        })
        .collect();

    let keep_slots = cfg.trace == TraceLevel::Slot;
    let mut ledgers: Vec<EirpLedger> = (0..n_cells)
        .map(|_| EirpLedger::new(n_seg, k_slots, cfg.budget.window_periods, keep_slots))
        .collect::<Result<_, _>>()?;
    let refinement = strategy.kind.refinement();
    let mut budgeters: Vec<Vec<SegmentBudgeter>> = ledgers
        .iter()
        .map(|l| {
            segments
                .iter()
                .map(|seg| {
                    let gamma = outer_loop_cap(l, seg, cfg.budget.mode);
                    SegmentBudgeter::new(cfg.budget, refinement, seg.max_eirp, gamma)
                })
                .collect()
        })
        .collect();

    let mut compliance: Vec<SegmentCompliance> = (0..n_cells)
        .flat_map(|c| {
            segments.iter().map(move |seg| SegmentCompliance {
                cell: c,
                segment: seg.id,
                threshold: seg.threshold,
                max_actual_eirp: 0.0,
                violations: 0,
                periods: 0,
            })
        })
        .collect();
    let mut periods: Vec<PeriodRow> = Vec::new();
    let mut carried = vec![0.0; n_cells];
    let mut cursors = vec![0u32; n_cells];
    let mut last_tx: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_cells];
    let mut next_tx: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_cells];
    let mut stats = metrics::RunStats::default();
    let pf_keep = 1.0 - 1.0 / cfg.scheduler.pf_time_constant;
    let pf_gain = 1.0 / cfg.scheduler.pf_time_constant;
    let w = link.rate_scale();
    let mut period_gamma: Vec<Vec<f64>> = budgeters
        .iter()
        .map(|bs| bs.iter().map(|b| b.period().gamma).collect())
        .collect();

    for n in 0..s.sim_slots {
        for st in ues.iter_mut() {
            if st.next_arrival == Some(n) {
                st.buffer += s.packet_bits;
                st.next_arrival = None;
            }
        }
        let pending: Vec<bool> = ues.iter().map(|st| st.buffer > 0.0).collect();
        let downlink = cfg.carrier.tdd_pattern[n % cfg.carrier.tdd_pattern.len()];

        if downlink {
            for c in 0..n_cells {
                let mut cands: Vec<UeSchedState> = Vec::new();
                for &u in &cell_ues[c] {
                    if ues[u].buffer <= 0.0 {
                        continue;
                    }
                    let i = dep.interference(u, &last_tx);
                    cands.push(UeSchedState {
                        ue_id: u,
                        buffer_bits: ues[u].buffer,
                        avg_throughput: ues[u].avg,
                        noise: (dep.noise + i) / serving_gain[u],
                        beam_id: ue_beam[u],
                        segment: ue_seg[u],
                        max_gain: ue_ghat[u],
                        pf_priority: 0.0,
                    });
                }
                let selected = select_ues(&cands, cfg.scheduler.max_ues_per_slot, &mcs, &link);
                let pre = downgrade_mcs_power(&selected, &mcs, &link);
                let full = if strategy.kind == StrategyKind::Rl {
                    full_power_grants(&selected, &mcs, &link)
                } else {
                    Vec::new()
                };
                let mut cell_grants: Vec<Grant> = Vec::with_capacity(pre.len());
                for seg in 0..n_seg {
                    let in_seg: Vec<Grant> = pre.iter().filter(|g| g.segment == seg).copied().collect();
                    let full_seg: Vec<Grant> = full.iter().filter(|g| g.segment == seg).copied().collect();
                    let (budget, out) = if strategy.kind.controlled() {
                        let b = budgeters[c][seg].slot_budget();
                        let out = limit_segment(&strategy, &in_seg, &full_seg, b.effective, codebook, seg, &mcs, &link);
                        (b.effective, out)
                    } else {
                        let out = limit_segment(&strategy, &in_seg, &full_seg, f64::INFINITY, codebook, seg, &mcs, &link);
                        (f64::INFINITY, out)
                    };
                    stats.dropped += out.dropped;
                    stats.solver_calls += out.solved as usize;
                    let consumption = codebook.consumption(seg, &grants_load(&out.grants));
                    ledgers[c].record_slot_with_budget(seg, consumption, budget)?;
                    budgeters[c][seg].charge(consumption);
                    cell_grants.extend(out.grants);
                }
                allocate_prbs(&cell_grants, link.total_prbs, &mut cursors[c])?;
                let tx = &mut next_tx[c];
                tx.clear();
                let mut served: Vec<(usize, f64)> = Vec::with_capacity(cell_grants.len());
                for g in &cell_grants {
                    let bits = g.bits(&mcs, &link);
                    let st = &mut ues[g.ue_id];
                    st.buffer -= bits;
                    if st.buffer < 0.5 {
                        st.buffer = 0.0;
                    }
                    st.received += bits;
                    st.scheduled_slots += 1;
                    st.sinr_db_sum += 10.0 * g.sinr().log10();
                    carried[c] += bits;
                    let a = g.num_prbs as f64;
                    stats.continuous_bits += a * w * g.sinr().ln_1p();
                    stats.discrete_bits += a * link.bits_per_prb(&mcs, g.mcs);
                    tx.push((g.beam_id, g.radiated_power() / link.total_prbs as f64));
                    served.push((g.ue_id, bits));
                }
                for &u in &cell_ues[c] {
                    ues[u].avg *= pf_keep;
                }
                for (u, bits) in served {
                    ues[u].avg += pf_gain * bits / slot_s;
                }
                for &u in &cell_ues[c] {
                    ues[u].avg = ues[u].avg.max(1.0);
                }
            }
            std::mem::swap(&mut last_tx, &mut next_tx);
        } else {
            for (c, l) in ledgers.iter_mut().enumerate() {
                for seg in 0..n_seg {
                    let b = if strategy.kind.controlled() {
                        budgeters[c][seg].slot_budget().effective
                    } else {
                        f64::INFINITY
                    };
                    l.record_slot_with_budget(seg, 0.0, b)?;
                    budgeters[c][seg].charge(0.0);
                }
            }
        }

        for (u, st) in ues.iter_mut().enumerate() {
            if pending[u] {
                st.reception_slots += 1;
                if st.buffer <= 0.0 {
                    st.packets += 1;
                    st.next_arrival = Some(n + reading_slots);
                }
            }
        }

        if (n + 1) % k_slots == 0 {
            for c in 0..n_cells {
                let sums = ledgers[c].close_period()?;
                let t = ledgers[c].completed_periods() - 1;
                for (seg, segment) in segments.iter().enumerate() {
                    let actual = ledgers[c].actual_eirp(seg, t)?;
                    let entry = &mut compliance[c * n_seg + seg];
                    entry.periods += 1;
                    entry.max_actual_eirp = entry.max_actual_eirp.max(actual);
                    if actual > segment.threshold {
                        entry.violations += 1;
                    }
                    if cfg.trace != TraceLevel::None {
                        periods.push(PeriodRow {
                            cell: c,
                            segment: seg,
                            period: t,
                            gamma: period_gamma[c][seg],
                            consumption: sums[seg],
                            actual_eirp: actual,
                            threshold: segment.threshold,
                        });
                    }
                    let gamma = outer_loop_cap(&ledgers[c], segment, cfg.budget.mode);
                    budgeters[c][seg].start_period(gamma);
                    period_gamma[c][seg] = gamma;
                }
            }
        }
    }

    let sim_seconds = s.sim_slots as f64 * slot_s;
    let ue_metrics: Vec<UeMetrics> = ues
        .iter()
        .enumerate()
        .map(|(u, st)| UeMetrics {
            ue_id: u,
            cell: dep.serving[u].0,
            beam: ue_beam[u],
            segment: ue_seg[u],
            received_bits: st.received,
            reception_seconds: st.reception_slots as f64 * slot_s,
            packets_completed: st.packets,
            scheduled_slots: st.scheduled_slots,
            mean_sinr_db: if st.scheduled_slots > 0 {
                st.sinr_db_sum / st.scheduled_slots as f64
            } else {
                f64::NAN
            },
        })
        .collect();
    let cells = carried
        .iter()
        .enumerate()
        .map(|(c, &bits)| CellMetrics {
            cell: c,
            carried_bits: bits,
            throughput_bps: bits / sim_seconds,
        })
        .collect();
    Ok(Metrics::new(
        ue_metrics,
        cells,
        compliance,
        periods,
        keep_slots.then_some(ledgers),
        sim_seconds,
        stats,
        strategy.kind,
    ))
}
