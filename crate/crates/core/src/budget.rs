//! Per-period EIRP caps and per-slot budgets.
//!
//! A period of `K` slots receives a cap `gamma` on the summed consumption.
//! The slot budget injects a share `1 - epsilon` of the cap up front and
//! spreads the rest evenly:
//!
//! ```text
//! b_k = max((1 - epsilon * (K - k) / K) * gamma - sum_{i<k} c_i, 0)
//! ```
//!
//! raised to the floor `rho* c*`. The optional refinement replaces `b_k` with
//! `c* * exp(ln(rho*) * max(1 - b_k / b*, 0))`, curbing emission only once the
//! budget falls below the guard `b*`.

use thiserror::Error;

use crate::emf::{EirpLedger, Segment};
use crate::units::next_down;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BudgetError {
    #[error("epsilon in [0,1], got {0}")]
    Epsilon(f64),
    #[error("rho_star in (0,1), got {0}")]
    RhoStar(f64),
    #[error("guard_bstar must be positive, got {0}")]
    Guard(f64),
    #[error("period_slots must be at least 1")]
    PeriodSlots,
    #[error("power reduction factor rho in (0,1], got {0}")]
    Rho(f64),
    #[error("floor rho_star * c* = {floor} must lie strictly between 0 and gamma / K = {per_slot}")]
    FloorAboveCap { floor: f64, per_slot: f64 },
}

/// How the per-period cap `gamma` is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetMode {
    /// `gamma = rho * c* * K`, never above the sliding-window headroom.
    Fixed { rho: f64 },
    /// `gamma = max(0, W K C - sum of the previous W - 1 periods)`.
    Sliding,
}

/// What happens when the `rho* c*` floor exceeds what is left of `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloorMode {
    /// The floor may push the period total above `gamma` (by at most
    /// `K rho* c*`).
    AllowOvershoot,
    /// Every slot budget is capped by the remaining `gamma`, so the period
    /// total never exceeds it.
    Strict,
}

/// Resolved slot-budget parameters for one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetConfig {
    pub epsilon: f64,
    pub rho_star: f64,
    /// Guard threshold `b*` in watts.
    pub guard_bstar: f64,
    pub period_slots: usize,
    pub refinement_enabled: bool,
    pub floor_mode: FloorMode,
}

impl BudgetConfig {
    /// Checks the parameter ranges that do not depend on `gamma`.
    pub fn validate(&self) -> Result<(), BudgetError> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(BudgetError::Epsilon(self.epsilon));
        }
        if !(self.rho_star > 0.0 && self.rho_star < 1.0) {
            return Err(BudgetError::RhoStar(self.rho_star));
        }
        if !(self.guard_bstar > 0.0) {
            return Err(BudgetError::Guard(self.guard_bstar));
        }
        if self.period_slots == 0 {
            return Err(BudgetError::PeriodSlots);
        }
        Ok(())
    }

    /// Checks `0 < rho* c* < gamma / K` for the active cap.
    pub fn check_floor(&self, gamma: f64, cstar: f64) -> Result<(), BudgetError> {
        let floor = self.rho_star * cstar;
        let per_slot = gamma / self.period_slots as f64;
        if floor > 0.0 && floor < per_slot {
            Ok(())
        } else {
            Err(BudgetError::FloorAboveCap { floor, per_slot })
        }
    }

    fn floor_applies(&self, gamma: f64, cstar: f64) -> bool {
        self.check_floor(gamma, cstar).is_ok()
    }
}

/// The refined-budget configuration:
/// `rho* = 0.1`, `b* = gamma / 10`, `epsilon = 0.9`.
pub fn pl_r_defaults(gamma: f64, period_slots: usize) -> BudgetConfig {
    BudgetConfig {
        epsilon: 0.9,
        rho_star: 0.1,
        guard_bstar: gamma / 10.0,
        period_slots,
        refinement_enabled: true,
        floor_mode: FloorMode::Strict,
    }
}

/// State of one segment's budget within a period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodBudget {
    pub gamma: f64,
    pub consumed_so_far: f64,
    /// Upcoming slot, 1-based.
    pub slot: usize,
}

impl PeriodBudget {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            consumed_so_far: 0.0,
            slot: 1,
        }
    }

    /// Books a slot's measured consumption and advances to the next slot.
    ///
    /// Consumptions are added left to right from zero, the same order the
    /// ledger uses for its period sums.
    pub fn charge(&mut self, consumption: f64) {
        self.consumed_so_far += consumption;
        self.slot += 1;
    }

    /// Largest `h` with `consumed_so_far + h <= gamma` in floating point.
    pub fn headroom(&self) -> f64 {
        let mut h = self.gamma - self.consumed_so_far;
        if !(h > 0.0) {
            return 0.0;
        }
        while self.consumed_so_far + h > self.gamma {
            h = next_down(h);
        }
        h.max(0.0)
    }
}

/// Slot budget before refinement: the spreading rule, clipped at zero, then
/// raised to the floor `rho* c*` when the floor is admissible for this
/// period's `gamma`.
///
/// # Panics
///
/// Panics if `pb.slot` is outside `1..=K`.
pub fn slot_budget(pb: &PeriodBudget, cfg: &BudgetConfig, cstar: f64) -> f64 {
    let k = pb.slot;
    let big_k = cfg.period_slots;
    assert!((1..=big_k).contains(&k), "slot {k} outside 1..={big_k}");
    let share = 1.0 - cfg.epsilon * (big_k - k) as f64 / big_k as f64;
    let base = (share * pb.gamma - pb.consumed_so_far).max(0.0);
    if cfg.floor_applies(pb.gamma, cstar) {
        base.max(cfg.rho_star * cstar)
    } else {
        base
    }
}

/// Guard-threshold refinement `c* * exp(ln(rho*) * max(1 - b / b*, 0))`.
pub fn refined_slot_budget(b: f64, cstar: f64, cfg: &BudgetConfig) -> f64 {
    let deficit = if cfg.guard_bstar > 0.0 {
        (1.0 - b / cfg.guard_bstar).max(0.0)
    } else if b > 0.0 {
        0.0
    } else {
        1.0
    };
    cstar * (cfg.rho_star.ln() * deficit).exp()
}

/// Budgets computed for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotBudget {
    /// Spreading rule with floor.
    pub base: f64,
    /// Guard refinement of `base`, when enabled.
    pub refined: Option<f64>,
    /// Budget the scheduler must respect.
    pub effective: f64,
}

/// Base, refined and effective budget for the upcoming slot. In strict floor
/// mode the effective budget never exceeds [`PeriodBudget::headroom`].
pub fn effective_slot_budget(pb: &PeriodBudget, cfg: &BudgetConfig, cstar: f64) -> SlotBudget {
    let base = slot_budget(pb, cfg, cstar);
    let refined = cfg
        .refinement_enabled
        .then(|| refined_slot_budget(base, cstar, cfg));
    let mut effective = refined.unwrap_or(base);
    if cfg.floor_mode == FloorMode::Strict {
        effective = effective.min(pb.headroom());
    }
    SlotBudget {
        base,
        refined,
        effective,
    }
}

/// Largest `cap <= W K C` whose per-slot average `cap / (W K)` does not
/// exceed the threshold in floating point.
pub fn window_cap(threshold: f64, window_slots: f64) -> f64 {
    if !threshold.is_finite() {
        return f64::INFINITY;
    }
    let mut cap = window_slots * threshold;
    while cap > 0.0 && cap / window_slots > threshold {
        cap = next_down(cap);
    }
    cap
}

/// Period cap from the consumption history (stand-in for a smooth outer
/// loop controller).
///
/// Both modes keep `past + gamma` within the window cap, where `past` is the
/// sum of the previous `W - 1` periods, so a period that consumes at most
/// `gamma` keeps the sliding-window average at or below the threshold.
pub fn outer_loop_cap(ledger: &EirpLedger, segment: &Segment, mode: BudgetMode) -> f64 {
    let w = ledger.window_periods();
    let k = ledger.period_slots();
    let cap = window_cap(segment.threshold, ledger.window_slots());
    let past = ledger
        .segment(segment.id)
        .map(|s| s.recent_sum(w - 1))
        .unwrap_or(0.0);
    let headroom = if cap.is_infinite() {
        f64::INFINITY
    } else {
        let mut g = cap - past;
        if !(g > 0.0) {
            0.0
        } else {
            while past + g > cap {
                g = next_down(g);
            }
            g
        }
    };
    match mode {
        BudgetMode::Fixed { rho } => (rho * segment.max_eirp * k as f64).min(headroom),
        BudgetMode::Sliding => headroom,
    }
}

/// Budget policy for a run: how caps and slot budgets are derived each
/// period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetPolicy {
    pub mode: BudgetMode,
    pub epsilon: f64,
    pub rho_star: f64,
    /// `b* = guard_fraction * gamma`.
    pub guard_fraction: f64,
    pub period_slots: usize,
    pub window_periods: usize,
    pub floor_mode: FloorMode,
}

impl Default for BudgetPolicy {
    fn default() -> Self {
        Self {
            mode: BudgetMode::Fixed { rho: 0.25 },
            epsilon: 0.9,
            rho_star: 0.1,
            guard_fraction: 0.1,
            period_slots: 200,
            window_periods: 10,
            floor_mode: FloorMode::Strict,
        }
    }
}

impl BudgetPolicy {
    pub fn validate(&self) -> Result<(), BudgetError> {
        if let BudgetMode::Fixed { rho } = self.mode {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(BudgetError::Rho(rho));
            }
        }
        if !(self.guard_fraction > 0.0) {
            return Err(BudgetError::Guard(self.guard_fraction));
        }
        self.config_for(1.0, false).validate()
    }

    /// Configuration for a period with cap `gamma`. The guard is
    /// `guard_fraction * gamma`; a zero cap keeps the guard at zero.
    pub fn config_for(&self, gamma: f64, refinement_enabled: bool) -> BudgetConfig {
        BudgetConfig {
            epsilon: self.epsilon,
            rho_star: self.rho_star,
            guard_bstar: self.guard_fraction * gamma,
            period_slots: self.period_slots,
            refinement_enabled,
            floor_mode: self.floor_mode,
        }
    }
}

/// Budget state machine of one segment across periods.
#[derive(Debug, Clone)]
pub struct SegmentBudgeter {
    policy: BudgetPolicy,
    refinement: bool,
    cstar: f64,
    cfg: BudgetConfig,
    period: PeriodBudget,
}

impl SegmentBudgeter {
    pub fn new(policy: BudgetPolicy, refinement: bool, cstar: f64, gamma: f64) -> Self {
        Self {
            policy,
            refinement,
            cstar,
            cfg: policy.config_for(gamma, refinement),
            period: PeriodBudget::new(gamma),
        }
    }

    pub fn start_period(&mut self, gamma: f64) {
        self.cfg = self.policy.config_for(gamma, self.refinement);
        self.period = PeriodBudget::new(gamma);
    }

    pub fn slot_budget(&self) -> SlotBudget {
        effective_slot_budget(&self.period, &self.cfg, self.cstar)
    }

    pub fn charge(&mut self, consumption: f64) {
        self.period.charge(consumption);
    }

    pub fn period(&self) -> &PeriodBudget {
        &self.period
    }

    pub fn config(&self) -> &BudgetConfig {
        &self.cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emf::{AngleRange, Segment};

    fn cfg(epsilon: f64, k: usize) -> BudgetConfig {
        BudgetConfig {
            epsilon,
            rho_star: 0.1,
            guard_bstar: 1.0,
            period_slots: k,
            refinement_enabled: false,
            floor_mode: FloorMode::AllowOvershoot,
        }
    }

    // cstar small enough that the floor never binds in these cases
    const TINY_CSTAR: f64 = 1e-9;

    #[test]
    fn epsilon_zero_injects_everything() {
        let pb = PeriodBudget::new(100.0);
        assert_eq!(slot_budget(&pb, &cfg(0.0, 10), TINY_CSTAR), 100.0);
    }

    #[test]
    fn epsilon_one_spreads_evenly() {
        let pb = PeriodBudget::new(100.0);
        assert!((slot_budget(&pb, &cfg(1.0, 10), TINY_CSTAR) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_half() {
        let pb = PeriodBudget::new(100.0);
        assert!((slot_budget(&pb, &cfg(0.5, 10), TINY_CSTAR) - 55.0).abs() < 1e-12);
    }

    #[test]
    fn floor_lifts_depleted_budget() {
        let mut pb = PeriodBudget::new(100.0);
        pb.charge(100.0);
        let c = cfg(0.5, 10);
        // 0.1 * 50 = 5 < 100/10
        assert_eq!(slot_budget(&pb, &c, 50.0), 5.0);
        // floor not admissible: 0.1 * 200 = 20 >= 10
        assert_eq!(slot_budget(&pb, &c, 200.0), 0.0);
    }

    #[test]
    fn refinement_shape() {
        let c = BudgetConfig {
            guard_bstar: 10.0,
            ..cfg(0.9, 10)
        };
        assert_eq!(refined_slot_budget(10.0, 3.0, &c), 3.0);
        assert_eq!(refined_slot_budget(25.0, 3.0, &c), 3.0);
        assert!((refined_slot_budget(0.0, 3.0, &c) - 0.3).abs() < 1e-15);
        let half = refined_slot_budget(5.0, 1.0, &c);
        assert!((half - 0.1f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pl_r_default_values() {
        let c = pl_r_defaults(100.0, 200);
        assert_eq!((c.rho_star, c.guard_bstar, c.epsilon), (0.1, 10.0, 0.9));
        assert_eq!(pl_r_defaults(10.0, 200).guard_bstar, 1.0);
        assert!(c.refinement_enabled);
    }

    #[test]
    fn validation() {
        assert_eq!(
            BudgetConfig {
                epsilon: 1.5,
                ..cfg(0.0, 1)
            }
            .validate(),
            Err(BudgetError::Epsilon(1.5))
        );
        assert!(BudgetError::Epsilon(1.5).to_string().contains("epsilon in [0,1]"));
        assert!(cfg(0.5, 10).check_floor(100.0, 50.0).is_ok());
        assert!(cfg(0.5, 10).check_floor(100.0, 100.0).is_err());
    }

    #[test]
    fn strict_mode_caps_by_headroom() {
        let c = BudgetConfig {
            floor_mode: FloorMode::Strict,
            ..cfg(0.0, 4)
        };
        let mut pb = PeriodBudget::new(10.0);
        pb.charge(9.5);
        // floor 0.1 * 20 = 2 > remaining 0.5
        let b = effective_slot_budget(&pb, &c, 20.0);
        assert_eq!(b.base, 2.0);
        assert!(b.effective <= 0.5 && b.effective > 0.49);
        assert!(pb.consumed_so_far + b.effective <= pb.gamma);
    }

    #[test]
    fn headroom_never_overshoots() {
        let mut pb = PeriodBudget::new(1.0);
        for _ in 0..10 {
            pb.charge(0.1);
        }
        let h = pb.headroom();
        assert!(pb.consumed_so_far + h <= 1.0);
    }

    fn segment(threshold: f64, cstar: f64) -> Segment {
        let r = AngleRange::new(-1.0, 1.0).unwrap();
        Segment::new(0, r, r).with_limits(threshold, cstar).unwrap()
    }

    #[test]
    fn fixed_cap() {
        let ledger = EirpLedger::new(1, 50, 4, false).unwrap();
        let seg = segment(25.0, 100.0);
        let g = outer_loop_cap(&ledger, &seg, BudgetMode::Fixed { rho: 0.25 });
        assert_eq!(g, 0.25 * 100.0 * 50.0);
    }

    #[test]
    fn sliding_cap_cold_start_and_saturated() {
        let (k, w) = (10, 3);
        let mut ledger = EirpLedger::new(1, k, w, false).unwrap();
        let seg = segment(2.0, 10.0);
        let full = (w * k) as f64 * 2.0;
        assert_eq!(outer_loop_cap(&ledger, &seg, BudgetMode::Sliding), full);
        // one period consuming the whole window allowance
        for _ in 0..k {
            ledger.record_slot(0, full / k as f64).unwrap();
        }
        ledger.close_period().unwrap();
        assert_eq!(outer_loop_cap(&ledger, &seg, BudgetMode::Sliding), 0.0);
    }

    #[test]
    fn window_cap_respects_threshold() {
        for &t in &[0.1, 1.0 / 3.0, 7.77, 1e5 / 7.0] {
            for &n in &[1.0, 3.0, 2000.0, 7000.0] {
                let cap = window_cap(t, n);
                assert!(cap / n <= t);
            }
        }
    }
}
