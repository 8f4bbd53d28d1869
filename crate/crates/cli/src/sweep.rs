//! Sweep execution and CSV emission.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::Context;
use eirp_core::emf::BeamCodebook;
use eirp_core::sim::{build_codebook, run_with, Deployment, Metrics, TraceLevel};

use crate::config::{Config, SweepPoint};

pub const SWEEP_HEADER: &str = "Q_bits,strategy,rho_db,epsilon,seed,status,cell_tput_bps,ue_tput_bps,\
mcs_rate_loss,dropped_grants,compliant,cell_tput_mean_bps,cell_tput_stderr_bps,ue_tput_mean_bps,ue_tput_stderr_bps";
pub const CELL_HEADER: &str = "Q_bits,strategy,rho_db,cell_tput_bps";

/// Aggregates of one finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub cell_tput_bps: f64,
    pub ue_tput_bps: f64,
    pub mcs_rate_loss: f64,
    pub dropped_grants: usize,
    pub compliant: bool,
}

impl RunSummary {
    fn of(m: &Metrics) -> Self {
        Self {
            cell_tput_bps: m.cell_throughput_bps,
            ue_tput_bps: m.ue_throughput_bps,
            mcs_rate_loss: m.mcs_rate_loss,
            dropped_grants: m.dropped_grants,
            compliant: m.compliant(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub point: SweepPoint,
    pub key: String,
    pub outcome: Result<RunSummary, String>,
}

impl RunResult {
    /// Failed, or breached the limit under a controlling strategy.
    pub fn failed_check(&self) -> bool {
        match &self.outcome {
            Err(_) => true,
            Ok(s) => self.point.strategy.controlled() && !s.compliant,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub results: Vec<RunResult>,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// All runs succeeded and every controlled run stayed compliant.
    pub fn passed(&self) -> bool {
        !self.results.iter().any(RunResult::failed_check)
    }
}

/// Directory name of one run, e.g. `q2mbit_pl-r_rho-6db_eps0.9_seed1`.
pub fn run_key(p: &SweepPoint) -> String {
    format!(
        "q{}mbit_{}_rho{}db_eps{}_seed{}",
        p.packet_mbits,
        p.strategy.label().to_ascii_lowercase(),
        p.rho_db,
        p.epsilon,
        p.seed
    )
}

fn write_run_files(dir: &Path, m: &Metrics, trace: TraceLevel) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = io::BufWriter::new(fs::File::create(dir.join("metrics.csv"))?);
    m.write_ue_csv(&mut f)?;
    f.flush()?;
    if trace != TraceLevel::None {
        let mut f = io::BufWriter::new(fs::File::create(dir.join("eirp_trace.csv"))?);
        m.write_eirp_trace(&mut f)?;
        f.flush()?;
    }
    let mut f = fs::File::create(dir.join("compliance.txt"))?;
    m.write_compliance(&mut f)
}

fn run_point(
    cfg: &Config,
    p: &SweepPoint,
    codebook: &BeamCodebook,
    dep: &Result<Deployment, String>,
    out: &Path,
) -> Result<RunSummary, String> {
    let dep = dep.as_ref().map_err(Clone::clone)?;
    let sim = cfg.sim_config(p);
    let m = run_with(&sim, codebook, dep).map_err(|e| e.to_string())?;
    write_run_files(&out.join("runs").join(run_key(p)), &m, sim.trace).map_err(|e| e.to_string())?;
    Ok(RunSummary::of(&m))
}

/// Runs every sweep point and writes `sweep.csv`, `cell_throughput.csv` and
/// the per-run artifacts under `out`. Progress goes to `log`.
///
/// Points run on all available cores; output order follows the sweep
/// order regardless.
pub fn run_sweep(cfg: &Config, out: &Path, log: &mut (dyn Write + Send)) -> anyhow::Result<SweepOutcome> {
    let start = Instant::now();
    let base = cfg.base_sim_config();
    base.validate().context("invalid configuration")?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let codebook = build_codebook(&base.antenna, &base.segments).context("building beam codebook")?;

    let points = cfg.points();
    let mut deployments: BTreeMap<u64, Result<Deployment, String>> = BTreeMap::new();
    for p in &points {
        deployments.entry(p.seed).or_insert_with(|| {
            let sim = cfg.sim_config(p);
            Deployment::new(&sim, &codebook).map_err(|e| e.to_string())
        });
    }
    writeln!(log, "sweep: {} runs, codebook and {} deployments ready", points.len(), deployments.len())?;

    let n = points.len();
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<RunResult>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let log = Mutex::new(log);
    let workers = std::thread::available_parallelism().map_or(1, |w| w.get()).min(n.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let p = &points[i];
                let key = run_key(p);
                let t = Instant::now();
                let outcome = run_point(cfg, p, &codebook, &deployments[&p.seed], out);
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                let status = match &outcome {
                    Ok(_) => "ok".to_string(),
                    Err(e) => format!("FAILED: {e}"),
                };
                let _ = writeln!(
                    log.lock().unwrap(),
                    "[{k}/{n}] {key} {status} ({:.2} s)",
                    t.elapsed().as_secs_f64()
                );
                *slots[i].lock().unwrap() = Some(RunResult { point: *p, key, outcome });
            });
        }
    });
    let results: Vec<RunResult> = slots.into_iter().map(|s| s.into_inner().unwrap().unwrap()).collect();

    write_sweep_csv(&out.join("sweep.csv"), &results)?;
    write_cell_csv(&out.join("cell_throughput.csv"), &results)?;
    let outcome = SweepOutcome { results };
    writeln!(
        log.lock().unwrap(),
        "sweep: {n} runs, {} failed, wall {:.1} s",
        outcome.failures(),
        start.elapsed().as_secs_f64()
    )?;
    Ok(outcome)
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs grouped by sweep point without the seed, in sweep order.
fn group_of(results: &[RunResult]) -> Vec<Vec<&RunResult>> {
    let mut groups: Vec<Vec<&RunResult>> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for r in results {
        let p = &r.point;
        let id = format!("{}|{}|{}|{}", p.packet_mbits, p.strategy, p.rho_db, p.epsilon);
        let slot = *index.entry(id).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(r);
    }
    groups
}

fn ok_values(runs: &[&RunResult], f: impl Fn(&RunSummary) -> f64) -> Vec<f64> {
    runs.iter().filter_map(|r| r.outcome.as_ref().ok()).map(f).collect()
}

fn write_sweep_csv(path: &Path, results: &[RunResult]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SWEEP_HEADER.split(','))?;
    for runs in group_of(results) {
        let (cm, cs) = mean_stderr(&ok_values(&runs, |s| s.cell_tput_bps));
        let (um, us) = mean_stderr(&ok_values(&runs, |s| s.ue_tput_bps));
        for r in runs {
            let p = &r.point;
            let mut row = vec![
                (p.packet_mbits * 1e6).to_string(),
                p.strategy.label().to_string(),
                p.rho_db.to_string(),
                p.epsilon.to_string(),
                p.seed.to_string(),
            ];
            match &r.outcome {
                Ok(s) => row.extend([
                    "ok".to_string(),
                    s.cell_tput_bps.to_string(),
                    s.ue_tput_bps.to_string(),
                    s.mcs_rate_loss.to_string(),
                    s.dropped_grants.to_string(),
                    s.compliant.to_string(),
                ]),
                Err(e) => {
                    row.push(format!("error: {e}"));
                    row.extend(std::iter::repeat(String::new()).take(5));
                }
            }
            row.extend([cm.to_string(), cs.to_string(), um.to_string(), us.to_string()]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_cell_csv(path: &Path, results: &[RunResult]) -> anyhow::Result<()> {
    let several_eps = results.iter().any(|r| r.point.epsilon != results[0].point.epsilon);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CELL_HEADER.split(','))?;
    for runs in group_of(results) {
        let p = &runs[0].point;
        let (mean, _) = mean_stderr(&ok_values(&runs, |s| s.cell_tput_bps));
        let label = if several_eps && p.strategy.controlled() {
            format!("{} eps={}", p.strategy.label(), p.epsilon)
        } else {
            p.strategy.label().to_string()
        };
        w.write_record([
            (p.packet_mbits * 1e6).to_string(),
            label,
            p.rho_db.to_string(),
            mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
