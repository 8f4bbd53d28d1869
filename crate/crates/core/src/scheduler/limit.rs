use super::{Grant, LinkParams, McsTable, SchedStrategy, StrategyKind, UeSchedState};
use crate::emf::{BeamCodebook, BeamLoad};
use crate::units::{next_down, next_up};
use crate::waterfill::{self, PowerUser, RateCurve, WaterfillError};

/// Beam load of `grants`, accumulated in slice order.
///
/// The simulator builds the load it measures with this same function, so the
/// budget check and the bound on the measured consumption agree bit for bit.
pub fn grants_load(grants: &[Grant]) -> BeamLoad {
    let mut load = BeamLoad::default();
    for g in grants {
        load.add(g.beam_id, g.radiated_power());
    }
    load
}

/// Consumption upper bound `sum A P Ghat` of `grants` in `segment`.
pub fn grants_bound(grants: &[Grant], codebook: &BeamCodebook, segment: usize) -> f64 {
    codebook.bound(segment, &grants_load(grants))
}

fn prbs_for(bits: f64, per_prb: f64) -> u64 {
    (bits / per_prb).ceil().max(1.0) as u64
}

/// Lowest power supporting MCS `m`, at most `cap`.
fn power_for_mcs(noise: f64, threshold: f64, scaled: f64, cap: f64) -> f64 {
    let mut p = scaled.min(cap);
    while p / noise < threshold && p < cap {
        p = next_up(p).min(cap);
    }
    p
}

/// Fills `total` PRBs in priority order: each entry takes its whole demand
/// while PRBs remain.
fn priority_fill(demand: &[u64], total: u32) -> Vec<u32> {
    let mut left = total as u64;
    demand
        .iter()
        .map(|&d| {
            let a = d.min(left);
            left -= a;
            a as u32
        })
        .collect()
}

fn nominal(ues: &[UeSchedState], mcs: &McsTable, link: &LinkParams) -> Vec<(UeSchedState, usize, usize)> {
    ues.iter()
        .filter(|u| u.buffer_bits > 0.0)
        .filter_map(|u| mcs.select(u.sinr_at(link.max_power)).map(|m| (*u, m, m)))
        .collect()
}

fn grant(u: &UeSchedState, m: usize, power: f64, a: u32) -> Grant {
    Grant {
        ue_id: u.ue_id,
        beam_id: u.beam_id,
        segment: u.segment,
        num_prbs: a,
        mcs: m,
        power,
        noise: u.noise,
        max_gain: u.max_gain,
        buffer_bits: u.buffer_bits,
    }
}

/// Full-power pre-allocation: nominal MCS at `P-bar`, buffer-draining PRB
/// demands granted in priority order.
pub fn full_power_grants(ues: &[UeSchedState], mcs: &McsTable, link: &LinkParams) -> Vec<Grant> {
    let chosen = nominal(ues, mcs, link);
    let demand: Vec<u64> = chosen
        .iter()
        .map(|(u, m, _)| prbs_for(u.buffer_bits, link.bits_per_prb(mcs, *m)))
        .collect();
    chosen
        .iter()
        .zip(priority_fill(&demand, link.total_prbs))
        .filter(|(_, a)| *a > 0)
        .map(|((u, m, _), a)| grant(u, *m, link.max_power, a))
        .collect()
}

/// MCS and power pre-allocation.
///
/// Each UE starts at the highest MCS supported at `P-bar` with just enough
/// PRBs to drain its buffer. When these demands fill the carrier, the UEs keep
/// that MCS at full power and take PRBs in priority order. Otherwise spare
/// PRBs are spent by walking UEs in priority order, one MCS step at a time,
/// while the enlarged demand still fits; power drops by the ratio of SINR
/// thresholds between the chosen and the nominal MCS.
pub fn downgrade_mcs_power(ues: &[UeSchedState], mcs: &McsTable, link: &LinkParams) -> Vec<Grant> {
    let p_bar = link.max_power;
    let mut chosen = nominal(ues, mcs, link);
    let demand = |u: &UeSchedState, m: usize| prbs_for(u.buffer_bits, link.bits_per_prb(mcs, m));
    let mut prbs: Vec<u64> = chosen.iter().map(|(u, m, _)| demand(u, *m)).collect();
    let total: u64 = prbs.iter().sum();
    if total >= link.total_prbs as u64 {
        return full_power_grants(ues, mcs, link);
    }

    let mut used = total;
    loop {
        let mut changed = false;
        for (i, (u, m, _)) in chosen.iter_mut().enumerate() {
            if *m == 0 {
                continue;
            }
            let a = demand(u, *m - 1);
            if used - prbs[i] + a <= link.total_prbs as u64 {
                used = used - prbs[i] + a;
                prbs[i] = a;
                *m -= 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    chosen
        .iter()
        .zip(&prbs)
        .map(|((u, m, m0), &a)| {
            let power = if m == m0 {
                p_bar
            } else {
                let scaled = p_bar * mcs.min_sinr(*m) / mcs.min_sinr(*m0);
                power_for_mcs(u.noise, mcs.min_sinr(*m), scaled, p_bar)
            };
            grant(u, *m, power, a as u32)
        })
        .collect()
}

/// Resource limiting over full-power `grants`: they are admitted in order
/// while the running consumption bound fits `budget`. The
/// first UE that does not fit receives the largest PRB count that does; the
/// rest receive nothing.
pub fn apply_rl(
    grants: &[Grant],
    budget: f64,
    codebook: &BeamCodebook,
    segment: usize,
) -> Vec<Grant> {
    let mut out: Vec<Grant> = Vec::with_capacity(grants.len());
    for g in grants {
        out.push(*g);
        if grants_bound(&out, codebook, segment) <= budget {
            continue;
        }
        // largest a < A with bound <= budget; a = 0 always fits
        let (mut lo, mut hi) = (0u32, g.num_prbs);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            out.last_mut().unwrap().num_prbs = mid;
            if grants_bound(&out, codebook, segment) <= budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo == 0 {
            out.pop();
        } else {
            out.last_mut().unwrap().num_prbs = lo;
        }
        break;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlOutcome {
    pub grants: Vec<Grant>,
    /// UEs removed because the budget could not carry them at minimum power.
    pub dropped: usize,
    /// True when the water-filling solver ran.
    pub solved: bool,
}

/// Power limiting: when the pre-allocation exceeds `budget`, powers are
/// water-filled between the most robust MCS threshold and the pre-allocated
/// power, dropping the lowest-priority UE while the problem is infeasible.
/// The MCS is then re-selected at the new SINR, never above the
/// pre-allocated one.
pub fn apply_pl(
    grants: &[Grant],
    budget: f64,
    alpha: f64,
    codebook: &BeamCodebook,
    segment: usize,
    mcs: &McsTable,
    link: &LinkParams,
) -> PlOutcome {
    if grants.is_empty() || grants_bound(grants, codebook, segment) <= budget {
        return PlOutcome {
            grants: grants.to_vec(),
            dropped: 0,
            solved: false,
        };
    }
    let w = link.rate_scale();
    let floor = mcs.min_sinr(0);
    let users: Vec<PowerUser> = grants
        .iter()
        .map(|g| {
            let p_max = g.power;
            let mut p_min = g.noise * floor;
            while p_min / g.noise < floor {
                p_min = next_up(p_min);
            }
            PowerUser {
                ue_id: g.ue_id,
                num_prbs: g.num_prbs,
                max_gain: g.max_gain,
                rate: RateCurve::new(w, g.noise),
                p_min: p_min.min(p_max),
                p_max,
            }
        })
        .collect();

    let mut n = users.len();
    let powers = loop {
        if n == 0 {
            break Vec::new();
        }
        match waterfill::allocate(&users[..n], budget, alpha) {
            Ok(a) => break a.powers,
            Err(WaterfillError::Infeasible { .. }) => n -= 1,
            Err(e) => panic!("water-filling rejected scheduler input: {e}"),
        }
    };
    let mut out: Vec<Grant> = grants[..n]
        .iter()
        .zip(&powers)
        .map(|(g, &p)| Grant { power: p, ..*g })
        .collect();
    // the solver's spend and the per-beam bound round differently
    loop {
        let bound = grants_bound(&out, codebook, segment);
        if bound <= budget {
            break;
        }
        let f = next_down(budget / bound);
        for g in &mut out {
            g.power *= f;
        }
    }
    let before = out.len();
    out.retain_mut(|g| match mcs.select(g.sinr()) {
        Some(m) => {
            g.mcs = m.min(g.mcs);
            true
        }
        None => false,
    });
    PlOutcome {
        dropped: grants.len() - n + before - out.len(),
        grants: out,
        solved: true,
    }
}

/// Applies `strategy` to the pre-allocated `grants` of one segment. RL falls
/// back to truncating `full_power`, the same segment's full-power grants,
/// when the pre-allocation does not fit.
#[allow(clippy::too_many_arguments)]
pub fn limit_segment(
    strategy: &SchedStrategy,
    grants: &[Grant],
    full_power: &[Grant],
    budget: f64,
    codebook: &BeamCodebook,
    segment: usize,
    mcs: &McsTable,
    link: &LinkParams,
) -> PlOutcome {
    match strategy.kind {
        StrategyKind::NoControl => PlOutcome {
            grants: grants.to_vec(),
            dropped: 0,
            solved: false,
        },
        StrategyKind::Rl if grants_bound(grants, codebook, segment) <= budget => PlOutcome {
            grants: grants.to_vec(),
            dropped: 0,
            solved: false,
        },
        StrategyKind::Rl => {
            let out = apply_rl(full_power, budget, codebook, segment);
            PlOutcome {
                dropped: full_power.len() - out.len(),
                grants: out,
                solved: false,
            }
        }
        StrategyKind::Pl | StrategyKind::PlR => {
            apply_pl(grants, budget, strategy.alpha, codebook, segment, mcs, link)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::link;
    use super::*;
    use crate::emf::{AngleRange, Direction, GainPattern, SegmentSet};
    use std::sync::Arc;

    struct Flat;
    impl GainPattern for Flat {
        fn gain(&self, _d: Direction) -> f64 {
            2.0
        }
    }

    fn codebook() -> BeamCodebook {
        let r = AngleRange::from_degrees(-90.0, 90.0).unwrap();
        let set = SegmentSet::single(r, r).unwrap();
        let p: Vec<Arc<dyn GainPattern>> = vec![Arc::new(Flat), Arc::new(Flat), Arc::new(Flat)];
        BeamCodebook::new(p, set, 30f64.to_radians()).unwrap()
    }

    fn ue(id: usize, buffer: f64, sinr_full: f64) -> UeSchedState {
        UeSchedState {
            ue_id: id,
            buffer_bits: buffer,
            avg_throughput: 1e6,
            noise: 0.73 / sinr_full,
            beam_id: id % 3,
            segment: 0,
            max_gain: 2.0,
            pf_priority: 0.0,
        }
    }

    #[test]
    fn downgrade_single_small_buffer_walks_to_lowest_fit() {
        let mcs = McsTable::cqi_table2();
        let l = link();
        let u = ue(0, 5_000.0, 1000.0);
        let g = downgrade_mcs_power(&[u], &mcs, &l);
        let eff: Vec<f64> = (0..mcs.len()).map(|m| l.bits_per_prb(&mcs, m)).collect();
        let nominal = mcs.select(1000.0).unwrap();
        let (m, a) = eirp_oracles::table_walk_downgrade(5_000.0, &eff, nominal, 273).unwrap();
        assert_eq!((g[0].mcs, g[0].num_prbs), (m, a));
        let expect = 0.73 * mcs.min_sinr(m) / mcs.min_sinr(nominal);
        assert!((g[0].power - expect).abs() <= 1e-12 * expect);
        assert!(g[0].sinr() >= mcs.min_sinr(m));
    }

    #[test]
    fn downgrade_full_load_keeps_nominal() {
        let mcs = McsTable::cqi_table2();
        let l = link();
        let us = [ue(0, 1e8, 100.0), ue(1, 1e8, 10.0)];
        let g = downgrade_mcs_power(&us, &mcs, &l);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].num_prbs, 273);
        assert_eq!(g[0].power, 0.73);
        assert_eq!(Some(g[0].mcs), mcs.select(us[0].sinr_at(0.73)));
        let us = [ue(0, 50_000.0, 100.0), ue(1, 1e8, 10.0)];
        let g = downgrade_mcs_power(&us, &mcs, &l);
        assert_eq!(g.iter().map(|g| g.num_prbs).sum::<u32>(), 273);
        assert!(g.iter().all(|g| g.power == 0.73));
    }

    #[test]
    fn downgrade_excludes_empty_buffers() {
        let mcs = McsTable::cqi_table2();
        let g = downgrade_mcs_power(&[ue(0, 0.0, 10.0)], &mcs, &link());
        assert!(g.is_empty());
    }

    #[test]
    fn priority_fill_order() {
        assert_eq!(priority_fill(&[10, 500, 500], 273), vec![10, 263, 0]);
        assert_eq!(priority_fill(&[100, 173], 273), vec![100, 173]);
    }

    fn grants(n: usize, a: u32) -> Vec<Grant> {
        (0..n)
            .map(|i| Grant {
                ue_id: i,
                beam_id: i % 3,
                segment: 0,
                num_prbs: a,
                mcs: 10,
                power: 0.5,
                noise: 0.5 / 1000.0,
                max_gain: 2.0,
                buffer_bits: 1e9,
            })
            .collect()
    }

    #[test]
    fn rl_hand_walk() {
        let cb = codebook();
        let gs = grants(3, 40);
        let per_ue = 40.0 * 0.5 * 2.0;
        assert_eq!(apply_rl(&gs, 1e9, &cb, 0), gs);
        assert!(apply_rl(&gs, 0.0, &cb, 0).is_empty());
        let out = apply_rl(&gs, 1.5 * per_ue, &cb, 0);
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].num_prbs, out[1].num_prbs), (40, 20));
    }

    #[test]
    fn pl_slack_is_identity_and_tight_is_symmetric() {
        let cb = codebook();
        let mcs = McsTable::cqi_table2();
        let l = link();
        let gs = grants(2, 40);
        let slack = apply_pl(&gs, 1e9, 1.0, &cb, 0, &mcs, &l);
        assert_eq!(slack.grants, gs);
        assert!(!slack.solved);
        let tight = apply_pl(&gs, 40.0, 1.0, &cb, 0, &mcs, &l);
        assert!(tight.solved);
        assert_eq!(tight.grants.len(), 2);
        assert_eq!(tight.grants[0].power, tight.grants[1].power);
        assert!(grants_bound(&tight.grants, &cb, 0) <= 40.0);
        for g in &tight.grants {
            assert!(g.mcs <= 10 && g.sinr() >= mcs.min_sinr(g.mcs));
        }
    }

    #[test]
    fn pl_drops_lowest_priority_when_infeasible() {
        let cb = codebook();
        let mcs = McsTable::cqi_table2();
        let l = link();
        let gs = grants(3, 40);
        let p_min = gs[0].noise * mcs.min_sinr(0);
        let one = 40.0 * 2.0 * p_min;
        let out = apply_pl(&gs, 1.5 * one, 1.0, &cb, 0, &mcs, &l);
        assert_eq!(out.grants.len(), 1);
        assert_eq!(out.grants[0].ue_id, 0);
        assert_eq!(out.dropped, 2);
        let none = apply_pl(&gs, 0.0, 1.0, &cb, 0, &mcs, &l);
        assert!(none.grants.is_empty());
    }
}
