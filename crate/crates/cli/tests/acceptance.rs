//! Acceptance criteria, one PASS/FAIL line each.
//!
//! The process exits 0 after printing every line, so a failing criterion is
//! reported rather than hidden behind a panic. Set `ACCEPTANCE_STRICT=1` to
//! exit 1 when any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use eirp_cli::bench::{bench_users, random_instance};
use eirp_cli::config::ModeKey;
use eirp_cli::sweep::SweepOutcome;
use eirp_cli::{run_sweep, Config};
use eirp_core::budget::{
    effective_slot_budget, pl_r_defaults, refined_slot_budget, slot_budget, BudgetConfig, FloorMode, PeriodBudget,
};
use eirp_core::emf::{consumption_upper_bound, segment_consumption, UeAllocation};
use eirp_core::scheduler::StrategyKind;
use eirp_core::sim::{build_codebook, run_with, Deployment, SegmentLayout};
use eirp_core::waterfill::{allocate, objective, PowerUser};
use eirp_oracles::{fair_objective, pairwise_exchange_optimum, OracleUser};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: &'static str, pass: bool, detail: String) -> Verdict {
    println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    Verdict { id, pass, detail }
}

fn to_oracle(u: &PowerUser) -> OracleUser {
    OracleUser {
        prbs: u.num_prbs as f64,
        gain: u.max_gain,
        w: u.rate.bandwidth_scale,
        noise: u.rate.noise,
        p_min: u.p_min,
        p_max: u.p_max,
    }
}

fn c1_waterfill_optimality() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let (mut worst, mut over) = (0.0f64, 0);
    for i in 0..500 {
        let alpha = [0.5, 1.0, 2.0][i % 3];
        let n = rng.gen_range(2..=5);
        let (users, b) = random_instance(n, &mut rng);
        let got = allocate(&users, b, alpha).expect("feasible instance");
        let spend: f64 = users.iter().zip(&got.powers).map(|(u, p)| u.cost() * p).sum();
        if spend > b {
            over += 1;
        }
        let ou: Vec<OracleUser> = users.iter().map(to_oracle).collect();
        let best = pairwise_exchange_optimum(&ou, b, alpha).unwrap();
        let f_best = fair_objective(&ou, &best, alpha);
        let f_got = objective(&users, &got.powers, alpha);
        worst = worst.max((f_got - f_best).abs() / f_best.abs());
    }
    let t = start.elapsed();
    verdict(
        "C1 water-filling optimality",
        worst <= 1e-6 && over == 0 && t <= Duration::from_secs(60),
        format!("500 instances, worst rel. objective gap {worst:.2e} (tol 1e-6), {over} budget violations, {:.1} s (limit 60 s)", t.as_secs_f64()),
    )
}

fn c2_budget_conservation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let (mut strict_bad, mut overshoot_bad, mut worst_ratio) = (0, 0, 0.0f64);
    for trace in 0..10_000 {
        let k = rng.gen_range(1..=200);
        let gamma = rng.gen_range(1.0..1e4);
        let cstar = rng.gen_range(1.0..1e3) * gamma / k as f64;
        // floor condition 0 < rho* c* < gamma / K
        let rho_star = rng.gen_range(0.01..0.99) * gamma / k as f64 / cstar;
        let floor_mode = if trace % 2 == 0 { FloorMode::Strict } else { FloorMode::AllowOvershoot };
        let cfg = BudgetConfig {
            epsilon: rng.gen_range(0.0..=1.0),
            rho_star,
            guard_bstar: rng.gen_range(0.01..0.5) * gamma,
            period_slots: k,
            // the overshoot bound covers the floor alone; refined budgets can
            // reach c* on their own, so they only enter the strict traces
            refinement_enabled: floor_mode == FloorMode::Strict && rng.gen_bool(0.5),
            floor_mode,
        };
        let mut pb = PeriodBudget::new(gamma);
        for _ in 0..k {
            let b = effective_slot_budget(&pb, &cfg, cstar).effective;
            let c = if rng.gen_bool(0.3) { b } else { rng.gen_range(0.0..=1.0) * b };
            pb.charge(c);
        }
        let used = pb.consumed_so_far;
        match floor_mode {
            FloorMode::Strict => strict_bad += (used > gamma) as usize,
            FloorMode::AllowOvershoot => {
                let bound = k as f64 * rho_star * cstar;
                overshoot_bad += (used - gamma > bound) as usize;
                if used > gamma {
                    worst_ratio = worst_ratio.max((used - gamma) / bound);
                }
            }
        }
    }
    verdict(
        "C2 budget conservation",
        strict_bad == 0 && overshoot_bad == 0,
        format!(
            "10000 traces: strict periods above gamma {strict_bad}; allow-overshoot periods beyond K rho* c* {overshoot_bad} (worst overshoot {:.3} of bound)",
            worst_ratio
        ),
    )
}

fn c3_sliding_compliance() -> Verdict {
    let mut base = Config::default();
    base.budget.budget_mode = ModeKey::Sliding;
    let sim = base.base_sim_config();
    let codebook = build_codebook(&sim.antenna, &sim.segments).unwrap();
    let dep = Deployment::new(&sim, &codebook).unwrap();
    let (mut runs, mut bad, mut worst) = (0, 0, 0.0f64);
    for rho_db in [-3.0, -6.0, -9.0] {
        for q in [1.0, 16.0] {
            for strategy in [StrategyKind::Rl, StrategyKind::Pl, StrategyKind::PlR] {
                let mut c = base.clone();
                c.budget.rho_db = rho_db;
                c.traffic.packet_mbits = q;
                c.scheduler.strategy = strategy;
                let m = run_with(&c.base_sim_config(), &codebook, &dep).unwrap();
                runs += 1;
                let breach = m.periods.iter().any(|p| p.actual_eirp > p.threshold);
                if breach || !m.compliant() {
                    bad += 1;
                }
                for p in &m.periods {
                    worst = worst.max(p.actual_eirp / p.threshold);
                }
            }
        }
    }
    verdict(
        "C3 sliding-window compliance",
        bad == 0,
        format!("{runs} desk runs (RL, PL, PL-R x rho -3/-6/-9 dB x Q 1/16 Mbit): {bad} with a breach; max actual/threshold {worst:.4}"),
    )
}

fn desk_sweep_config() -> Config {
    let mut c = Config::default();
    c.sweep.strategies = Some(vec![StrategyKind::NoControl, StrategyKind::Rl, StrategyKind::PlR]);
    c.sweep.rho_db = Some(vec![-3.0, -6.0, -9.0]);
    c.sweep.packet_mbits = Some(vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0]);
    c.sweep.seeds = Some(vec![1, 2, 3]);
    c
}

/// (Q, strategy, rho) -> (mean cell, mean UE) throughput over seeds.
type Means = BTreeMap<(u64, StrategyKind, i64), (f64, f64)>;

fn means(out: &SweepOutcome) -> Means {
    let mut acc: BTreeMap<(u64, StrategyKind, i64), (f64, f64, usize)> = BTreeMap::new();
    for r in &out.results {
        let s = r.outcome.as_ref().expect("sweep run failed");
        let p = &r.point;
        let e = acc
            .entry(((p.packet_mbits * 1e3) as u64, p.strategy, p.rho_db as i64))
            .or_insert((0.0, 0.0, 0));
        e.0 += s.cell_tput_bps;
        e.1 += s.ue_tput_bps;
        e.2 += 1;
    }
    acc.into_iter().map(|(k, (c, u, n))| (k, (c / n as f64, u / n as f64))).collect()
}

fn c4_fig2_trend(m: &Means, qs: &[u64], wall: Duration) -> Verdict {
    let q_sat = *qs.last().unwrap();
    let cell = |k| m[&(q_sat, k, -6)].0;
    let (nc, rl, plr) = (cell(StrategyKind::NoControl), cell(StrategyKind::Rl), cell(StrategyKind::PlR));
    let gain = plr / rl - 1.0;
    let (loss_rl, loss_plr) = (1.0 - rl / nc, 1.0 - plr / nc);
    let a = gain >= 0.20;
    let b = loss_plr <= 0.5 * loss_rl;
    let fast = wall <= Duration::from_secs(600);
    verdict(
        "C4 cell throughput trend at -6 dB",
        a && b && fast,
        format!(
            "Q={} Mbit: NoControl {:.1}, RL {:.1}, PL-R {:.1} Mbit/s; (a) PL-R over RL {:+.1}% (need >= +20%) {}; (b) loss PL-R {:.1}% vs RL {:.1}% (need <= half) {}; sweep {:.0} s (limit 600 s)",
            q_sat as f64 / 1e3,
            nc / 1e6,
            rl / 1e6,
            plr / 1e6,
            100.0 * gain,
            if a { "ok" } else { "FAIL" },
            100.0 * loss_plr,
            100.0 * loss_rl,
            if b { "ok" } else { "FAIL" },
            wall.as_secs_f64()
        ),
    )
}

fn c5_fig3_trend(m: &Means, qs: &[u64]) -> Verdict {
    // mid load: the packet size whose NoControl cell throughput is nearest
    // half of the largest NoControl cell throughput at -3 dB
    let nc = |q| m[&(q, StrategyKind::NoControl, -3)];
    let peak = qs.iter().map(|&q| nc(q).0).fold(0.0, f64::max);
    let q_mid = *qs
        .iter()
        .min_by(|&&a, &&b| (nc(a).0 - peak / 2.0).abs().total_cmp(&(nc(b).0 - peak / 2.0).abs()))
        .unwrap();
    let (ue_nc, ue_plr) = (nc(q_mid).1, m[&(q_mid, StrategyKind::PlR, -3)].1);
    let mid_loss = 1.0 - ue_plr / ue_nc;
    let a = mid_loss <= 0.05;

    let mut violations = Vec::new();
    for &rho in &[-3, -6, -9] {
        for &q in qs {
            let (rl, plr) = (m[&(q, StrategyKind::Rl, rho)].1, m[&(q, StrategyKind::PlR, rho)].1);
            if plr < rl {
                violations.push(format!("Q={} rho={rho}: {:+.2}%", q as f64 / 1e3, 100.0 * (plr / rl - 1.0)));
            }
        }
    }
    let b = violations.is_empty();
    verdict(
        "C5 UE throughput trend",
        a && b,
        format!(
            "mid load Q={} Mbit at -3 dB: PL-R UE throughput {:.1}% below NoControl (need <= 5%) {}; PL-R >= RL at {}/{} (Q, rho) points {}{}",
            q_mid as f64 / 1e3,
            100.0 * mid_loss,
            if a { "ok" } else { "FAIL" },
            3 * qs.len() - violations.len(),
            3 * qs.len(),
            if b { "ok" } else { "FAIL" },
            if b { String::new() } else { format!(" [below RL: {}]", violations.join(", ")) }
        ),
    )
}

fn c6_unit_values() -> Verdict {
    let cfg = |eps: f64| BudgetConfig {
        epsilon: eps,
        rho_star: 0.1,
        guard_bstar: 1.0,
        period_slots: 10,
        refinement_enabled: false,
        floor_mode: FloorMode::AllowOvershoot,
    };
    let pb = PeriodBudget::new(100.0);
    // c* small enough that the floor stays below every value checked
    let cstar = 1e-3;
    let b55 = slot_budget(&pb, &cfg(0.5), cstar);
    let b10 = slot_budget(&pb, &cfg(1.0), cstar);
    let b100 = slot_budget(&pb, &cfg(0.0), cstar);
    let refine = BudgetConfig {
        guard_bstar: 2.0,
        refinement_enabled: true,
        ..cfg(0.9)
    };
    let half = refined_slot_budget(1.0, 1.0, &refine);
    let at_zero = refined_slot_budget(0.0, 1.0, &refine);
    let above = refined_slot_budget(3.0, 1.0, &refine);
    let d = pl_r_defaults(100.0, 10);
    let checks = [
        (b55, 55.0),
        (b10, 10.0),
        (b100, 100.0),
        (half, 0.1f64.sqrt()),
        (at_zero, 0.1),
        (above, 1.0),
        (d.guard_bstar, 10.0),
        (d.rho_star, 0.1),
        (d.epsilon, 0.9),
    ];
    let worst = checks.iter().map(|(got, want)| (got - want).abs()).fold(0.0, f64::max);
    verdict(
        "C6 slot budget unit values",
        worst <= 1e-12,
        format!("b(eps=0.5)={b55}, b(eps=1)={b10}, b'(b*/2)={half:.16}; worst abs error {worst:.1e} (tol 1e-12)"),
    )
}

fn c7_bound_soundness() -> Verdict {
    let mut sim = Config::default().base_sim_config();
    sim.segments = SegmentLayout {
        az_segments: 3,
        el_segments: 2,
        ..sim.segments
    };
    let cb = build_codebook(&sim.antenna, &sim.segments).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let (mut bad, mut tight) = (0, f64::INFINITY);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8);
        let allocs: Vec<UeAllocation> = (0..n)
            .map(|i| UeAllocation::new(i, rng.gen_range(1..=273), rng.gen_range(1e-3..0.73), rng.gen_range(0..cb.len())))
            .collect();
        let seg = rng.gen_range(0..cb.segments().len());
        let s = cb.segments().get(seg).unwrap();
        let c = segment_consumption(&allocs, &cb, s, cb.resolution()).unwrap();
        let ub = consumption_upper_bound(&allocs, &cb, seg).unwrap();
        if ub < c {
            bad += 1;
        }
        if c > 0.0 {
            tight = tight.min(ub / c);
        }
    }
    verdict(
        "C7 consumption bound soundness",
        bad == 0,
        format!("1000 random slots over 6 segments at 1 degree: {bad} with bound < consumption (min bound/consumption {tight:.6})"),
    )
}

fn c8_solver_speed() -> Verdict {
    let r = bench_users(8, 20_000, 0xC8);
    verdict(
        "C8 solver performance",
        r.median_ns <= 50_000.0,
        format!(
            "8 users: median {:.2} us, p90 {:.2} us, {:.0} allocations/s (limit 50 us median)",
            r.median_ns / 1e3,
            r.p90_ns / 1e3,
            r.allocs_per_sec
        ),
    )
}

fn all_csvs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c9_determinism(first: &Path, cfg: &Config) -> Verdict {
    let second = tempfile::tempdir().unwrap();
    run_sweep(cfg, second.path(), &mut std::io::sink()).unwrap();
    let (a, b) = (all_csvs(first), all_csvs(second.path()));
    let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
    let same = a.len() == b.len() && differing.is_empty();
    verdict(
        "C9 determinism",
        same,
        format!("desk sweep repeated: {} CSV files, {} identical, {} differ", a.len(), a.len() - differing.len(), differing.len()),
    )
}

fn main() {
    let mut v = vec![c1_waterfill_optimality(), c2_budget_conservation(), c3_sliding_compliance()];

    let cfg = desk_sweep_config();
    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let out = run_sweep(&cfg, dir.path(), &mut std::io::sink()).unwrap();
    let wall = t.elapsed();
    let qs: Vec<u64> = cfg.sweep.packet_mbits.as_ref().unwrap().iter().map(|q| (q * 1e3) as u64).collect();
    let m = means(&out);
    v.push(c4_fig2_trend(&m, &qs, wall));
    v.push(c5_fig3_trend(&m, &qs));
    v.extend([c6_unit_values(), c7_bound_soundness(), c8_solver_speed()]);
    v.push(c9_determinism(dir.path(), &cfg));

    let passed = v.iter().filter(|x| x.pass).count();
    println!("acceptance: {passed}/{} criteria PASS", v.len());
    for x in v.iter().filter(|x| !x.pass) {
        println!("  failing: {} ({})", x.id, x.detail);
    }
    if passed < v.len() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|s| s == "1") {
        std::process::exit(1);
    }
}
