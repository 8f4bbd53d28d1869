//! Brute-force reference implementations used only by tests.
//!
//! Nothing here shares code with `eirp-core`; each oracle restates its
//! problem from scratch and solves it by enumeration or search.

/// One user of the power allocation problem.
#[derive(Debug, Clone, Copy)]
pub struct OracleUser {
    pub prbs: f64,
    pub gain: f64,
    pub w: f64,
    pub noise: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl OracleUser {
    fn utility(&self, p: f64, alpha: f64) -> f64 {
        let x = self.prbs * self.w * (1.0 + p / self.noise).ln();
        if alpha == 1.0 {
            x.ln()
        } else {
            x.powf(1.0 - alpha) / (1.0 - alpha)
        }
    }

    fn cost(&self) -> f64 {
        self.prbs * self.gain
    }
}

/// Sum of per-user utilities.
pub fn fair_objective(users: &[OracleUser], powers: &[f64], alpha: f64) -> f64 {
    users
        .iter()
        .zip(powers)
        .map(|(u, &p)| u.utility(p, alpha))
        .sum()
}

const GRID: usize = 256;

/// Maximizes a concave function on `[lo, hi]`: grid scan, then golden
/// section around the best grid cell.
fn maximize_1d(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    if !(hi > lo) {
        return lo;
    }
    let step = (hi - lo) / GRID as f64;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=GRID {
        let v = f(lo + step * i as f64);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if b - a <= 1e-15 * b.abs().max(1e-300) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    let candidates = [lo + step * best_i as f64, x1, x2];
    candidates
        .into_iter()
        .fold((lo, f64::NEG_INFINITY), |(bx, bv), x| {
            let v = f(x);
            if v > bv {
                (x, v)
            } else {
                (bx, bv)
            }
        })
        .0
}

/// Maximizes the fair objective under `sum A G P <= budget` with box
/// bounds, by repeated pairwise budget exchanges.
///
/// The utilities are increasing, so the budget is spent entirely unless all
/// users can sit at `p_max`. Starting from a tight feasible point, each sweep
/// visits every pair and re-splits their joint spend by a 1-D search; for a
/// separable concave objective with one coupling constraint, a point no pair
/// can improve is optimal. Returns `None` when even `p_min` overspends.
pub fn pairwise_exchange_optimum(users: &[OracleUser], budget: f64, alpha: f64) -> Option<Vec<f64>> {
    let min: f64 = users.iter().map(|u| u.cost() * u.p_min).sum();
    let max: f64 = users.iter().map(|u| u.cost() * u.p_max).sum();
    if min > budget {
        return None;
    }
    if max <= budget {
        return Some(users.iter().map(|u| u.p_max).collect());
    }
    let frac = (budget - min) / (max - min);
    let mut p: Vec<f64> = users
        .iter()
        .map(|u| u.p_min + frac * (u.p_max - u.p_min))
        .collect();
    let n = users.len();
    let mut value = fair_objective(users, &p, alpha);
    for _ in 0..400 {
        let before = value;
        for i in 0..n {
            for j in (i + 1)..n {
                let (ui, uj) = (users[i], users[j]);
                let joint = ui.cost() * p[i] + uj.cost() * p[j];
                // p_i range keeping p_j inside its box
                let lo = ui.p_min.max((joint - uj.cost() * uj.p_max) / ui.cost());
                let hi = ui.p_max.min((joint - uj.cost() * uj.p_min) / ui.cost());
                if !(hi >= lo) {
                    continue;
                }
                let pj = |x: f64| ((joint - ui.cost() * x) / uj.cost()).clamp(uj.p_min, uj.p_max);
                let h = |x: f64| ui.utility(x, alpha) + uj.utility(pj(x), alpha);
                let x = maximize_1d(lo, hi, h);
                if h(x) > ui.utility(p[i], alpha) + uj.utility(p[j], alpha) {
                    p[i] = x;
                    p[j] = pj(x);
                }
            }
        }
        value = fair_objective(users, &p, alpha);
        if (value - before).abs() <= 1e-15 * value.abs().max(1e-300) {
            break;
        }
    }
    Some(p)
}

/// Lowest-threshold MCS not above `nominal` whose PRB demand for
/// `buffer_bits` fits in `total_prbs`, by walking the whole table.
///
/// `efficiency[m]` is bits per PRB at MCS `m`. Returns `(mcs, prbs)`.
pub fn table_walk_downgrade(
    buffer_bits: f64,
    efficiency: &[f64],
    nominal: usize,
    total_prbs: u32,
) -> Option<(usize, u32)> {
    (0..=nominal)
        .map(|m| (m, (buffer_bits / efficiency[m]).ceil() as u32))
        .filter(|&(_, a)| a <= total_prbs)
        .min_by_key(|&(m, _)| m)
}

/// True when no PRB index is used twice by the `(start, len)` spans on a
/// cyclic band of `total` PRBs.
pub fn spans_disjoint(spans: &[(u32, u32)], total: u32) -> bool {
    let mut used = vec![false; total as usize];
    for &(start, len) in spans {
        for i in 0..len {
            let k = ((start + i) % total) as usize;
            if used[k] {
                return false;
            }
            used[k] = true;
        }
    }
    true
}
