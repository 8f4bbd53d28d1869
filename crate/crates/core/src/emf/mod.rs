//! EIRP model: directions, segments, beam gains and consumption accounting.
//!
//! The EIRP radiated towards a direction is the sum over scheduled users of
//! `A_u * P_u * G_u(d)`. The consumption of a segment in a slot is the maximum
//! of that quantity over the segment, evaluated on a regular direction grid.
//! Consumptions are accumulated per period in an [`EirpLedger`], which also
//! answers the sliding-window average used for compliance.

mod beam;
mod geometry;
mod ledger;

pub use beam::{BeamCodebook, BeamGain, BeamLoad, DftBeam, GainPattern, PlanarArray};
pub use geometry::{segment_grid, AngleRange, Direction, Segment, SegmentSet};
pub use ledger::{EirpLedger, SegmentLedger, SlotRecord, TRACE_HEADER};

use thiserror::Error;

/// Default direction-grid resolution (1 degree).
pub const DEFAULT_GRID_RESOLUTION: f64 = std::f64::consts::PI / 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmfError {
    #[error("direction out of range: azimuth {azimuth} rad, elevation {elevation} rad")]
    InvalidDirection { azimuth: f64, elevation: f64 },
    #[error("empty angular range [{start}, {end})")]
    EmptyRange { start: f64, end: f64 },
    #[error("unknown beam id {0}")]
    UnknownBeam(usize),
    #[error("unknown segment id {0}")]
    UnknownSegment(usize),
    #[error("segments do not partition the domain: {0}")]
    NotAPartition(String),
    #[error("segment limits must be positive (threshold {threshold}, max EIRP {max_eirp})")]
    InvalidLimits { threshold: f64, max_eirp: f64 },
    #[error("grid resolution must be positive, got {0}")]
    InvalidResolution(f64),
    #[error("consumption must be finite and non-negative, got {0}")]
    InvalidConsumption(f64),
    #[error("segment {segment} already holds {expected} slots for this period")]
    PeriodOverflow { segment: usize, expected: usize },
    #[error("segment {segment} recorded {recorded} slots, period needs {expected}")]
    PeriodIncomplete {
        segment: usize,
        recorded: usize,
        expected: usize,
    },
    #[error("period {0} has not been completed")]
    UnknownPeriod(usize),
    #[error("ledger needs K >= 1 and W >= 1 (K = {period_slots}, W = {window_periods})")]
    InvalidLedger {
        period_slots: usize,
        window_periods: usize,
    },
    #[error("slot history was not retained")]
    NoHistory,
    #[error("io error: {0}")]
    Io(String),
}

/// Per-user allocation as seen by the EIRP model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeAllocation {
    pub ue_id: usize,
    pub num_prbs: u32,
    /// Transmit power per PRB in watts.
    pub power_per_prb: f64,
    pub beam_id: usize,
    /// Rate per PRB in bits/s, informational only.
    pub rate_per_prb: f64,
}

impl UeAllocation {
    pub fn new(ue_id: usize, num_prbs: u32, power_per_prb: f64, beam_id: usize) -> Self {
        Self {
            ue_id,
            num_prbs,
            power_per_prb,
            beam_id,
            rate_per_prb: 0.0,
        }
    }

    /// Total radiated power `A * P` before beamforming gain.
    #[inline]
    pub fn radiated_power(&self) -> f64 {
        self.num_prbs as f64 * self.power_per_prb
    }
}

/// EIRP towards `d`: `sum_u A_u * P_u * G_u(d)`.
pub fn eirp_at(
    allocs: &[UeAllocation],
    codebook: &BeamCodebook,
    d: Direction,
) -> Result<f64, EmfError> {
    let mut total = 0.0;
    for a in allocs {
        let beam = codebook.beam(a.beam_id)?;
        total += a.radiated_power() * beam.gain(d);
    }
    Ok(total)
}

/// Consumption of `segment`: the maximum of [`eirp_at`] over a regular grid
/// of directions covering it.
///
/// This is the direct evaluation, one pattern call per user and grid point.
/// The simulator uses [`BeamCodebook::consumption`], which gives the same
/// maximum from precomputed gain tables.
pub fn segment_consumption(
    allocs: &[UeAllocation],
    codebook: &BeamCodebook,
    segment: &Segment,
    grid_resolution: f64,
) -> Result<f64, EmfError> {
    let grid = segment_grid(segment, grid_resolution)?;
    let beams = allocs
        .iter()
        .map(|a| codebook.beam(a.beam_id).map(|b| (a.radiated_power(), b)))
        .collect::<Result<Vec<_>, _>>()?;
    if beams.is_empty() {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    for d in grid.points {
        let mut v = 0.0;
        for (w, b) in &beams {
            v += w * b.gain(d);
        }
        best = best.max(v);
    }
    Ok(best)
}

/// Upper bound `sum_u A_u * P_u * Ghat_u` on the consumption of segment
/// `segment_id` caused by `users`, where `Ghat_u` is the maximum gain of the
/// user's beam over the segment grid.
///
/// Summation runs in slice order, matching [`segment_consumption`], so the
/// bound holds exactly in floating point.
pub fn consumption_upper_bound(
    users: &[UeAllocation],
    codebook: &BeamCodebook,
    segment_id: usize,
) -> Result<f64, EmfError> {
    let mut total = 0.0;
    for u in users {
        total += u.radiated_power() * codebook.max_gain(u.beam_id, segment_id)?;
    }
    Ok(total)
}

/// Segment holding the grid argmax of the beam's gain (its main lobe).
pub fn assign_segment(beam_id: usize, codebook: &BeamCodebook) -> Result<usize, EmfError> {
    codebook.main_lobe_segment(beam_id)
}
