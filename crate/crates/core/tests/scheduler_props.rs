use std::sync::OnceLock;

use eirp_core::emf::BeamCodebook;
use eirp_core::scheduler::{
    allocate_prbs, downgrade_mcs_power, full_power_grants, grants_bound, limit_segment, select_ues, Grant,
    LinkParams, McsTable, SchedStrategy, StrategyKind, UeSchedState,
};
use eirp_core::sim::{build_codebook, AntennaConfig, SegmentLayout, SimConfig};
use eirp_oracles::{spans_disjoint, table_walk_downgrade};
use proptest::prelude::*;

fn codebook() -> &'static BeamCodebook {
    static CB: OnceLock<BeamCodebook> = OnceLock::new();
    CB.get_or_init(|| {
        let layout = SegmentLayout {
            az_segments: 2,
            el_segments: 1,
            resolution: 2f64.to_radians(),
        };
        build_codebook(&AntennaConfig::default(), &layout).unwrap()
    })
}

fn link() -> LinkParams {
    SimConfig::default().link()
}

fn arb_ue(id: usize) -> impl Strategy<Value = UeSchedState> {
    let nb = codebook().len();
    (0..nb, -5.0..30.0f64, 3.0..7.0f64, 1e5..1e8f64).prop_map(move |(beam, snr_db, log_buf, avg)| {
        let cb = codebook();
        let seg = cb.main_lobe_segment(beam).unwrap();
        UeSchedState {
            ue_id: id,
            buffer_bits: 10f64.powf(log_buf),
            avg_throughput: avg,
            noise: link().max_power / 10f64.powf(snr_db / 10.0),
            beam_id: beam,
            segment: seg,
            max_gain: cb.max_gain(beam, seg).unwrap(),
            pf_priority: 0.0,
        }
    })
}

fn arb_ues() -> impl Strategy<Value = Vec<UeSchedState>> {
    (1usize..=12).prop_flat_map(|n| (0..n).map(arb_ue).collect::<Vec<_>>())
}

/// Runs the slot pipeline for `kind` with each segment's budget set to
/// `frac` times its pre-allocation bound.
fn pipeline(ues: &[UeSchedState], kind: StrategyKind, frac: f64) -> Vec<(f64, Vec<Grant>)> {
    let (cb, mcs, link) = (codebook(), McsTable::cqi_table2(), link());
    let sel = select_ues(ues, 8, &mcs, &link);
    let pre = downgrade_mcs_power(&sel, &mcs, &link);
    let full = full_power_grants(&sel, &mcs, &link);
    (0..cb.segments().len())
        .map(|s| {
            let in_seg: Vec<Grant> = pre.iter().filter(|g| g.segment == s).copied().collect();
            let full_seg: Vec<Grant> = full.iter().filter(|g| g.segment == s).copied().collect();
            let b = frac * grants_bound(&in_seg, cb, s);
            let out = limit_segment(&SchedStrategy::new(kind), &in_seg, &full_seg, b, cb, s, &mcs, &link);
            (b, out.grants)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn limited_slots_respect_the_budget(ues in arb_ues(), frac in 0.0..1.2f64) {
        let cb = codebook();
        for kind in [StrategyKind::Rl, StrategyKind::Pl, StrategyKind::PlR] {
            for (s, (b, grants)) in pipeline(&ues, kind, frac).iter().enumerate() {
                prop_assert!(grants_bound(grants, cb, s) <= b * (1.0 + 1e-9), "{kind}: over budget {b}");
            }
        }
    }

    #[test]
    fn prbs_disjoint_and_within_carrier(ues in arb_ues(), frac in 0.0..1.2f64, cursor in 0u32..273) {
        for kind in StrategyKind::ALL {
            let grants: Vec<Grant> = pipeline(&ues, kind, frac).into_iter().flat_map(|(_, g)| g).collect();
            let total: u32 = grants.iter().map(|g| g.num_prbs).sum();
            prop_assert!(total <= 273);
            let mut c = cursor;
            let spans = allocate_prbs(&grants, 273, &mut c).unwrap();
            let pairs: Vec<(u32, u32)> = spans.iter().map(|s| (s.start, s.len)).collect();
            prop_assert!(spans_disjoint(&pairs, 273));
        }
    }

    #[test]
    fn granted_mcs_is_supported_and_below_envelope(ues in arb_ues(), frac in 0.0..1.2f64) {
        let (mcs, link) = (McsTable::cqi_table2(), link());
        let w = link.rate_scale();
        for kind in StrategyKind::ALL {
            for (_, grants) in pipeline(&ues, kind, frac) {
                for g in grants {
                    prop_assert!(g.sinr() >= mcs.min_sinr(g.mcs));
                    prop_assert!(link.bits_per_prb(&mcs, g.mcs) <= w * g.sinr().ln_1p());
                    prop_assert!(g.power <= link.max_power);
                }
            }
        }
    }

    #[test]
    fn all_strategies_agree_with_slack_budget(ues in arb_ues()) {
        let grants = |kind, frac| -> Vec<Vec<Grant>> {
            pipeline(&ues, kind, frac).into_iter().map(|(_, g)| g).collect()
        };
        let base = grants(StrategyKind::NoControl, f64::INFINITY);
        for kind in [StrategyKind::Rl, StrategyKind::Pl, StrategyKind::PlR] {
            prop_assert_eq!(&grants(kind, 1.0), &base);
        }
    }

    #[test]
    fn single_ue_downgrade_matches_table_walk(ue in arb_ue(0)) {
        let (mcs, link) = (McsTable::cqi_table2(), link());
        let got = downgrade_mcs_power(&[ue], &mcs, &link);
        let Some(nominal) = mcs.select(ue.sinr_at(link.max_power)) else {
            prop_assert!(got.is_empty());
            return Ok(());
        };
        let eff: Vec<f64> = (0..mcs.len()).map(|m| link.bits_per_prb(&mcs, m)).collect();
        match table_walk_downgrade(ue.buffer_bits, &eff, nominal, 273) {
            Some((m, a)) => {
                prop_assert_eq!((got[0].mcs, got[0].num_prbs), (m, a));
                if m < nominal {
                    prop_assert!(got[0].power < link.max_power);
                }
            }
            None => {
                prop_assert_eq!((got[0].mcs, got[0].num_prbs, got[0].power), (nominal, 273, link.max_power));
            }
        }
    }
}

#[test]
fn identical_ues_get_equal_rates_under_pl() {
    let (cb, mcs, link) = (codebook(), McsTable::cqi_table2(), link());
    let seg = cb.main_lobe_segment(0).unwrap();
    let grants: Vec<Grant> = (0..4)
        .map(|id| Grant {
            ue_id: id,
            beam_id: 0,
            segment: seg,
            num_prbs: 60,
            mcs: 20,
            power: link.max_power,
            noise: link.max_power / 300.0,
            max_gain: cb.max_gain(0, seg).unwrap(),
            buffer_bits: 1e6,
        })
        .collect();
    let b = 0.6 * grants_bound(&grants, cb, seg);
    let out = limit_segment(&SchedStrategy::new(StrategyKind::Pl), &grants, &[], b, cb, seg, &mcs, &link);
    assert_eq!(out.grants.len(), 4);
    assert!(out.solved);
    let w = link.rate_scale();
    let rates: Vec<f64> = out.grants.iter().map(|g| g.num_prbs as f64 * w * g.sinr().ln_1p()).collect();
    for r in &rates {
        assert!((r - rates[0]).abs() <= 1e-9 * rates[0], "{rates:?}");
    }
    assert!(out.grants.iter().all(|g| g.mcs == out.grants[0].mcs));
}

#[test]
fn select_orders_by_average_when_rates_tie() {
    let (mcs, link) = (McsTable::cqi_table2(), link());
    let ue = |id, avg| UeSchedState {
        ue_id: id,
        buffer_bits: 1e5,
        avg_throughput: avg,
        noise: 1e-3,
        beam_id: 0,
        segment: 0,
        max_gain: 1.0,
        pf_priority: 0.0,
    };
    let sel = select_ues(&[ue(0, 3e6), ue(1, 1e6), ue(2, 2e6)], 8, &mcs, &link);
    let ids: Vec<usize> = sel.iter().map(|u| u.ue_id).collect();
    assert_eq!(ids, vec![1, 2, 0]);
    assert!(select_ues(&[], 8, &mcs, &link).is_empty());
}
