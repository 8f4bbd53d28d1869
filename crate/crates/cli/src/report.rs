//! Summary of a finished sweep directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};

use crate::sweep::{mean_stderr, SWEEP_HEADER};

#[derive(Debug, Clone)]
struct Row {
    q_bits: f64,
    strategy: String,
    rho_db: f64,
    epsilon: f64,
    ok: bool,
    cell: f64,
    ue: f64,
    compliant: bool,
}

#[derive(Debug, Default)]
struct Group {
    cells: Vec<f64>,
    ues: Vec<f64>,
    runs: usize,
    failed: usize,
    non_compliant: usize,
}

fn read_rows(path: &Path) -> anyhow::Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != SWEEP_HEADER {
        bail!("{}: unexpected header", path.display());
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> anyhow::Result<f64> {
            rec[i].parse().with_context(|| format!("column {} of {:?}", header[i], rec))
        };
        let ok = &rec[5] == "ok";
        rows.push(Row {
            q_bits: num(0)?,
            strategy: rec[1].to_string(),
            rho_db: num(2)?,
            epsilon: num(3)?,
            ok,
            cell: if ok { num(6)? } else { f64::NAN },
            ue: if ok { num(7)? } else { f64::NAN },
            compliant: ok && &rec[10] == "true",
        });
    }
    Ok(rows)
}

fn pct(x: f64) -> String {
    if x.is_finite() {
        format!("{:.1}%", 100.0 * x)
    } else {
        "n/a".into()
    }
}

/// Bits/s to Mbit/s text.
fn mbps(x: f64) -> String {
    if x.is_finite() {
        format!("{:.2}", x / 1e6)
    } else {
        "n/a".into()
    }
}

/// Loss of `x` relative to `reference`.
fn loss(x: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        1.0 - x / reference
    } else {
        f64::NAN
    }
}

/// Renders the throughput, RL vs PL-R and compliance tables of the sweep in
/// `dir`.
pub fn report(dir: &Path) -> anyhow::Result<String> {
    let rows = read_rows(&dir.join("sweep.csv"))?;
    // keys in sweep order
    let mut order: Vec<(u64, String, u64, u64)> = Vec::new();
    let mut groups: BTreeMap<(u64, String, u64, u64), Group> = BTreeMap::new();
    for r in &rows {
        let key = (r.q_bits.to_bits(), r.strategy.clone(), r.rho_db.to_bits(), r.epsilon.to_bits());
        let g = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Group::default()
        });
        g.runs += 1;
        if r.ok {
            g.cells.push(r.cell);
            g.ues.push(r.ue);
            if !r.compliant {
                g.non_compliant += 1;
            }
        } else {
            g.failed += 1;
        }
    }
    let mean = |v: &[f64]| mean_stderr(v).0;
    let reference = |q: u64, rho: u64, eps: u64| -> Option<&Group> {
        groups.get(&(q, "NoControl".to_string(), rho, eps)).or_else(|| {
            groups
                .iter()
                .find(|((gq, s, _, _), _)| *gq == q && s == "NoControl")
                .map(|(_, g)| g)
        })
    };

    let mut out = String::new();
    let _ = writeln!(out, "throughput (mean over seeds, Mbit/s)");
    let _ = writeln!(
        out,
        "{:>8} {:>7} {:>7} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "Q_mbits", "rho_db", "epsilon", "strategy", "cell", "ue", "cell_loss", "ue_loss"
    );
    for key in &order {
        let g = &groups[key];
        let (q, s, rho, eps) = key;
        let (c, u) = (mean(&g.cells), mean(&g.ues));
        let (cl, ul) = match reference(*q, *rho, *eps) {
            Some(r) => (loss(c, mean(&r.cells)), loss(u, mean(&r.ues))),
            None => (f64::NAN, f64::NAN),
        };
        let _ = writeln!(
            out,
            "{:>8} {:>7} {:>7} {:>10} {:>10} {:>10} {:>10} {:>10}",
            f64::from_bits(*q) / 1e6,
            f64::from_bits(*rho),
            f64::from_bits(*eps),
            s,
            mbps(c),
            mbps(u),
            pct(cl),
            pct(ul)
        );
    }

    let _ = writeln!(out, "\nRL vs PL-R (gain of PL-R over RL)");
    let _ = writeln!(
        out,
        "{:>8} {:>7} {:>7} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "Q_mbits", "rho_db", "epsilon", "RL_cell", "PL-R_cell", "cell_delta", "RL_ue", "PL-R_ue", "ue_delta"
    );
    for key in order.iter().filter(|k| k.1 == "RL") {
        let (q, _, rho, eps) = key;
        let Some(plr) = groups.get(&(*q, "PL-R".to_string(), *rho, *eps)) else { continue };
        let rl = &groups[key];
        let (rc, pc, ru, pu) = (mean(&rl.cells), mean(&plr.cells), mean(&rl.ues), mean(&plr.ues));
        let _ = writeln!(
            out,
            "{:>8} {:>7} {:>7} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            f64::from_bits(*q) / 1e6,
            f64::from_bits(*rho),
            f64::from_bits(*eps),
            mbps(rc),
            mbps(pc),
            pct(pc / rc - 1.0),
            mbps(ru),
            mbps(pu),
            pct(pu / ru - 1.0)
        );
    }

    let _ = writeln!(out, "\ncompliance");
    let _ = writeln!(out, "{:>10} {:>7} {:>7} {:>6} {:>7} {:>14} {:>8}", "strategy", "rho_db", "epsilon", "runs", "failed", "non_compliant", "status");
    let mut by_point: BTreeMap<(String, u64, u64), (usize, usize, usize)> = BTreeMap::new();
    let mut point_order = Vec::new();
    for key in &order {
        let g = &groups[key];
        let k = (key.1.clone(), key.2, key.3);
        let e = by_point.entry(k.clone()).or_insert_with(|| {
            point_order.push(k);
            (0, 0, 0)
        });
        e.0 += g.runs;
        e.1 += g.failed;
        e.2 += g.non_compliant;
    }
    let mut failing = 0;
    for k in &point_order {
        let (runs, failed, bad) = by_point[k];
        let status = if k.0 == "NoControl" {
            "n/a"
        } else if failed + bad == 0 {
            "PASS"
        } else {
            failing += failed + bad;
            "FAIL"
        };
        let _ = writeln!(
            out,
            "{:>10} {:>7} {:>7} {:>6} {:>7} {:>14} {:>8}",
            k.0,
            f64::from_bits(k.1),
            f64::from_bits(k.2),
            runs,
            failed,
            bad,
            status
        );
    }
    if failing == 0 {
        let _ = writeln!(out, "compliance: PASS all segments");
    } else {
        let _ = writeln!(out, "compliance: FAIL in {failing} runs");
    }
    Ok(out)
}
