//! Per-slot MAC pipeline: UE selection, MCS/power downgrade, EIRP limiting
//! by resources (RL) or by power (PL, PL-R), and PRB placement.
//!
//! Powers are per PRB in watts. A UE's channel is summarized by its noise
//! density `N_u` referred to the transmitter: the SINR at power `P` is
//! `P / N_u`.

mod limit;
mod mcs;
mod prb;

pub use limit::{
    apply_pl, apply_rl, downgrade_mcs_power, full_power_grants, grants_bound, grants_load, limit_segment, PlOutcome,
};
pub use mcs::{McsEntry, McsTable, CQI_TABLE2_EFFICIENCY, ENVELOPE};
pub use prb::{allocate_prbs, PrbSpan};

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::emf::UeAllocation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedError {
    #[error("invalid MCS table: {0}")]
    McsTable(String),
    #[error("PRB over-subscription: {requested} requested, {total} available")]
    OverSubscribed { requested: u64, total: u32 },
    #[error("unknown strategy {0:?} (expected NoControl, RL, PL or PL-R)")]
    UnknownStrategy(String),
}

/// EIRP control strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    NoControl,
    Rl,
    Pl,
    PlR,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [Self::NoControl, Self::Rl, Self::Pl, Self::PlR];

    pub fn label(self) -> &'static str {
        match self {
            Self::NoControl => "NoControl",
            Self::Rl => "RL",
            Self::Pl => "PL",
            Self::PlR => "PL-R",
        }
    }

    /// PL-R budgets go through the guard-threshold refinement.
    pub fn refinement(self) -> bool {
        self == Self::PlR
    }

    /// Whether the strategy enforces the slot budget.
    pub fn controlled(self) -> bool {
        self != Self::NoControl
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StrategyKind {
    type Err = SchedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nocontrol" | "none" => Ok(Self::NoControl),
            "rl" => Ok(Self::Rl),
            "pl" => Ok(Self::Pl),
            "pl-r" | "plr" => Ok(Self::PlR),
            _ => Err(SchedError::UnknownStrategy(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedStrategy {
    pub kind: StrategyKind,
    pub alpha: f64,
}

impl SchedStrategy {
    pub fn new(kind: StrategyKind) -> Self {
        Self { kind, alpha: 1.0 }
    }
}

/// Carrier and link-abstraction constants shared by all UEs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub total_prbs: u32,
    /// Maximum power per PRB, `P-bar`, in watts.
    pub max_power: f64,
    /// Bits carried by one PRB in one slot per bit/s/Hz of efficiency.
    pub bits_per_efficiency: f64,
    pub slot_seconds: f64,
}

impl LinkParams {
    /// Bits per PRB per slot at MCS `m`.
    #[inline]
    pub fn bits_per_prb(&self, mcs: &McsTable, m: usize) -> f64 {
        mcs.efficiency(m) * self.bits_per_efficiency
    }

    /// Scale `w` of the continuous rate curve `w ln(1 + SINR)`, in bits per
    /// PRB per slot.
    pub fn rate_scale(&self) -> f64 {
        self.bits_per_efficiency * ENVELOPE / std::f64::consts::LN_2
    }
}

/// Scheduler view of one UE with pending data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeSchedState {
    pub ue_id: usize,
    pub buffer_bits: f64,
    /// Smoothed served throughput in bits/s.
    pub avg_throughput: f64,
    /// Noise-plus-interference density referred to the transmitter (W/PRB).
    pub noise: f64,
    pub beam_id: usize,
    /// Segment holding the serving beam's main lobe.
    pub segment: usize,
    /// Maximum gain of the serving beam over that segment.
    pub max_gain: f64,
    /// PF metric, set by [`select_ues`].
    pub pf_priority: f64,
}

impl UeSchedState {
    #[inline]
    pub fn sinr_at(&self, power: f64) -> f64 {
        power / self.noise
    }
}

/// Up to `max_n` UEs with data, ordered by decreasing PF metric
/// `instantaneous rate / avg_throughput` (ties by ascending `ue_id`).
///
/// The instantaneous rate is the full-band rate at `P-bar` and the highest
/// supported MCS. UEs that support no MCS at full power are skipped.
pub fn select_ues(
    active: &[UeSchedState],
    max_n: usize,
    mcs: &McsTable,
    link: &LinkParams,
) -> Vec<UeSchedState> {
    let mut out: Vec<UeSchedState> = active
        .iter()
        .filter(|u| u.buffer_bits > 0.0)
        .filter_map(|u| {
            let m = mcs.select(u.sinr_at(link.max_power))?;
            let rate = link.bits_per_prb(mcs, m) * link.total_prbs as f64 / link.slot_seconds;
            let mut s = *u;
            s.pf_priority = rate / u.avg_throughput;
            Some(s)
        })
        .collect();
    out.sort_by(|a, b| {
        b.pf_priority
            .partial_cmp(&a.pf_priority)
            .unwrap_or(Ordering::Equal)
            .then(a.ue_id.cmp(&b.ue_id))
    });
    out.truncate(max_n);
    out
}

/// Per-UE grant for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grant {
    pub ue_id: usize,
    pub beam_id: usize,
    pub segment: usize,
    pub num_prbs: u32,
    /// 0-based position in the MCS table.
    pub mcs: usize,
    /// Power per PRB in watts.
    pub power: f64,
    pub noise: f64,
    pub max_gain: f64,
    pub buffer_bits: f64,
}

impl Grant {
    #[inline]
    pub fn radiated_power(&self) -> f64 {
        self.num_prbs as f64 * self.power
    }

    /// Bits delivered this slot.
    pub fn bits(&self, mcs: &McsTable, link: &LinkParams) -> f64 {
        (self.num_prbs as f64 * link.bits_per_prb(mcs, self.mcs)).min(self.buffer_bits)
    }

    pub fn sinr(&self) -> f64 {
        self.power / self.noise
    }

    pub fn to_allocation(&self, mcs: &McsTable, link: &LinkParams) -> UeAllocation {
        UeAllocation {
            ue_id: self.ue_id,
            num_prbs: self.num_prbs,
            power_per_prb: self.power,
            beam_id: self.beam_id,
            rate_per_prb: link.bits_per_prb(mcs, self.mcs) / link.slot_seconds,
        }
    }
}
