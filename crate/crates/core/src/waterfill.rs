//! Alpha-fair power allocation under a per-slot EIRP budget.
//!
//! Each user `u` occupies `A_u` PRBs, is seen by the segment with maximum gain
//! `Ghat_u`, and has the rate curve `r_u(P) = w * ln(1 + P / N_u)` per PRB.
//! The allocator solves
//!
//! ```text
//! maximize   sum_u f_alpha(A_u * r_u(P_u))
//! subject to sum_u A_u * Ghat_u * P_u <= b,  p_min_u <= P_u <= p_max_u
//! ```
//!
//! through its water-filling form: every user sits where its marginal
//! utility per unit of EIRP equals a common level `nu`, clipped to its power
//! bounds, and `nu` is the smallest level whose spend fits the budget.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaterfillError {
    #[error("no users to allocate")]
    Empty,
    #[error("budget {budget} W is below the minimum spend {min_spend} W")]
    Infeasible { budget: f64, min_spend: f64 },
    #[error("fairness is defined for x > 0, got {0}")]
    Domain(f64),
    #[error("alpha must be finite and non-negative, got {0}")]
    Alpha(f64),
    #[error("invalid user {ue_id}: {reason}")]
    InvalidUser { ue_id: usize, reason: &'static str },
    #[error("budget must be finite and non-negative, got {0}")]
    Budget(f64),
}

/// Continuous rate curve `w * ln(1 + P / N)` of one PRB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCurve {
    pub bandwidth_scale: f64,
    /// Noise-plus-interference density referred to the transmitter, in
    /// watts per PRB: the SINR at power `P` is `P / noise`.
    pub noise: f64,
}

impl RateCurve {
    pub fn new(bandwidth_scale: f64, noise: f64) -> Self {
        Self {
            bandwidth_scale,
            noise,
        }
    }

    #[inline]
    pub fn rate(&self, p: f64) -> f64 {
        self.bandwidth_scale * (p / self.noise).ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerUser {
    pub ue_id: usize,
    pub num_prbs: u32,
    pub max_gain: f64,
    pub rate: RateCurve,
    pub p_min: f64,
    pub p_max: f64,
}

impl PowerUser {
    pub fn validate(&self) -> Result<(), WaterfillError> {
        let bad = |reason| {
            Err(WaterfillError::InvalidUser {
                ue_id: self.ue_id,
                reason,
            })
        };
        if self.num_prbs == 0 {
            return bad("num_prbs must be at least 1");
        }
        if !(self.max_gain > 0.0 && self.max_gain.is_finite()) {
            return bad("max_gain must be positive");
        }
        if !(self.rate.bandwidth_scale > 0.0 && self.rate.bandwidth_scale.is_finite()) {
            return bad("rate scale must be positive");
        }
        if !(self.rate.noise > 0.0 && self.rate.noise.is_finite()) {
            return bad("noise must be positive");
        }
        if !(self.p_min > 0.0 && self.p_min <= self.p_max && self.p_max.is_finite()) {
            return bad("power bounds need 0 < p_min <= p_max");
        }
        Ok(())
    }

    /// EIRP cost per watt of per-PRB power, `A * Ghat`.
    #[inline]
    pub fn cost(&self) -> f64 {
        self.num_prbs as f64 * self.max_gain
    }
}

/// `x^(1 - alpha) / (1 - alpha)`, or `ln x` for `alpha = 1`.
pub fn fairness(x: f64, alpha: f64) -> Result<f64, WaterfillError> {
    if !(x > 0.0) {
        return Err(WaterfillError::Domain(x));
    }
    check_alpha(alpha)?;
    Ok(fairness_unchecked(x, alpha))
}

#[inline]
fn fairness_unchecked(x: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        x.ln()
    } else {
        x.powf(1.0 - alpha) / (1.0 - alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<(), WaterfillError> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(WaterfillError::Alpha(alpha))
    }
}

/// `d/dP f_alpha(A r(P)) / (A Ghat)`, the utility gained per unit of EIRP.
pub fn marginal(u: &PowerUser, p: f64, alpha: f64) -> f64 {
    let w = u.rate.bandwidth_scale;
    let x = u.num_prbs as f64 * u.rate.rate(p);
    x.powf(-alpha) * w / (u.max_gain * (u.rate.noise + p))
}

/// Per-user constants of the level equation, in `L = ln(1 + P / N)`.
///
/// `ln marginal = k - alpha * ln L - L`.
#[derive(Debug, Clone, Copy)]
struct Prepared {
    k: f64,
    alpha: f64,
    noise: f64,
    l_min: f64,
    l_max: f64,
    ln_marg_min: f64,
    ln_marg_max: f64,
    p_min: f64,
    p_max: f64,
    cost: f64,
}

impl Prepared {
    fn new(u: &PowerUser, alpha: f64) -> Self {
        let w = u.rate.bandwidth_scale;
        let n = u.rate.noise;
        let aw = u.num_prbs as f64 * w;
        let k = w.ln() - alpha * aw.ln() - u.max_gain.ln() - n.ln();
        let l_min = (u.p_min / n).ln_1p();
        let l_max = (u.p_max / n).ln_1p();
        let ln_marg = |l: f64| k - alpha * l.ln() - l;
        Self {
            k,
            alpha,
            noise: n,
            l_min,
            l_max,
            ln_marg_min: ln_marg(l_min),
            ln_marg_max: ln_marg(l_max),
            p_min: u.p_min,
            p_max: u.p_max,
            cost: u.cost(),
        }
    }

    /// Power at log-level `t = ln nu`.
    fn power(&self, t: f64) -> f64 {
        if self.ln_marg_max >= t {
            return self.p_max;
        }
        if self.ln_marg_min <= t {
            return self.p_min;
        }
        // g(L) = k - t - alpha ln L - L is convex and decreasing, and
        // g(l_min) > 0, so Newton from the left bracket increases
        // monotonically to the root.
        let c = self.k - t;
        let mut l = self.l_min;
        for _ in 0..100 {
            let g = c - self.alpha * l.ln() - l;
            let dg = -self.alpha / l - 1.0;
            let next = l - g / dg;
            if !(next > l) {
                break;
            }
            let done = next - l <= 1e-14 * next;
            l = next;
            if done {
                break;
            }
        }
        let l = l.min(self.l_max);
        (self.noise * l.exp_m1()).clamp(self.p_min, self.p_max)
    }
}

/// Power of `u` at water level `nu`: `p_max` when even full power keeps the
/// marginal above `nu`, `p_min` when the marginal at minimum power is already
/// below it, else the root of `marginal(u, P) = nu`.
pub fn power_for_level(u: &PowerUser, nu: f64, alpha: f64) -> f64 {
    Prepared::new(u, alpha).power(nu.ln())
}

/// Solution of one allocation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Water level `nu*`.
    pub level: f64,
    /// Powers in watts per PRB, aligned with the input users.
    pub powers: Vec<f64>,
    /// `sum_u A_u Ghat_u P_u`.
    pub spend: f64,
    /// True when every user is at `p_max` within the budget.
    pub unconstrained: bool,
}

impl Allocation {
    pub fn power_of(&self, users: &[PowerUser], ue_id: usize) -> Option<f64> {
        users
            .iter()
            .position(|u| u.ue_id == ue_id)
            .map(|i| self.powers[i])
    }
}

fn spend_of(prep: &[Prepared], t: f64, out: &mut [f64]) -> f64 {
    let mut s = 0.0;
    for (p, o) in prep.iter().zip(out.iter_mut()) {
        *o = p.power(t);
        s += p.cost * *o;
    }
    s
}

const MAX_ITERATIONS: usize = 200;
const SPEND_TOLERANCE: f64 = 1e-9;

fn validate(users: &[PowerUser], budget: f64, alpha: f64) -> Result<(), WaterfillError> {
    if users.is_empty() {
        return Err(WaterfillError::Empty);
    }
    check_alpha(alpha)?;
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(WaterfillError::Budget(budget));
    }
    users.iter().try_for_each(PowerUser::validate)
}

/// Water-filling allocation of `budget` among `users`.
///
/// The level is found by bisection in `ln nu` over the bracket
/// `[min_u marginal(p_max) / 2, 2 max_u marginal(p_min)]`, with false-position
/// steps to speed it up. The returned spend never exceeds the budget and is
/// within `1e-9` of it (relative) unless every user is at `p_max`.
pub fn allocate(users: &[PowerUser], budget: f64, alpha: f64) -> Result<Allocation, WaterfillError> {
    validate(users, budget, alpha)?;
    let prep: Vec<Prepared> = users.iter().map(|u| Prepared::new(u, alpha)).collect();
    let max_spend: f64 = prep.iter().map(|p| p.cost * p.p_max).sum();
    let min_spend: f64 = prep.iter().map(|p| p.cost * p.p_min).sum();
    let ln2 = std::f64::consts::LN_2;
    let mut t_lo = prep.iter().map(|p| p.ln_marg_max).fold(f64::INFINITY, f64::min) - ln2;
    let mut t_hi = prep.iter().map(|p| p.ln_marg_min).fold(f64::NEG_INFINITY, f64::max) + ln2;

    if max_spend <= budget {
        return Ok(Allocation {
            level: t_lo.exp(),
            powers: users.iter().map(|u| u.p_max).collect(),
            spend: max_spend,
            unconstrained: true,
        });
    }
    if min_spend > budget {
        return Err(WaterfillError::Infeasible {
            budget,
            min_spend,
        });
    }

    let mut powers = vec![0.0; users.len()];
    let mut best = users.iter().map(|u| u.p_min).collect::<Vec<_>>();
    let mut f_lo = max_spend - budget;
    let mut f_hi = min_spend - budget;
    let mut best_spend = min_spend;
    // Illinois side memory: -1 low side kept twice, +1 high side.
    let mut side = 0i8;
    for _ in 0..MAX_ITERATIONS {
        if budget - best_spend <= SPEND_TOLERANCE * budget {
            break;
        }
        let mut t = t_hi - f_hi * (t_hi - t_lo) / (f_hi - f_lo);
        if !(t > t_lo && t < t_hi) {
            t = 0.5 * (t_lo + t_hi);
        }
        if t <= t_lo || t >= t_hi {
            break;
        }
        let s = spend_of(&prep, t, &mut powers);
        let f = s - budget;
        if f <= 0.0 {
            t_hi = t;
            f_hi = f;
            best.copy_from_slice(&powers);
            best_spend = s;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        } else {
            t_lo = t;
            f_lo = f;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        }
    }
    Ok(Allocation {
        level: t_hi.exp(),
        powers: best,
        spend: best_spend,
        unconstrained: false,
    })
}

/// Water level `nu*` of [`allocate`].
pub fn water_level(users: &[PowerUser], budget: f64, alpha: f64) -> Result<f64, WaterfillError> {
    allocate(users, budget, alpha).map(|a| a.level)
}

/// `sum_u f_alpha(A_u r_u(P_u))`.
pub fn objective(users: &[PowerUser], powers: &[f64], alpha: f64) -> f64 {
    users
        .iter()
        .zip(powers)
        .map(|(u, &p)| fairness_unchecked(u.num_prbs as f64 * u.rate.rate(p), alpha))
        .sum()
}
