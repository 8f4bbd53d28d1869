//! Flat `section.key = value` run configuration.
//!
//! Files are TOML restricted to one level of section prefix, written either
//! as dotted keys (`budget.epsilon = 0.9`) or under `[budget]` headers.
//! Values are kept in the units the user writes (dB, dBm, ms, degrees);
//! [`Config::sim_config`] converts them to the linear units of the core
//! crate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use eirp_core::budget::{BudgetMode, BudgetPolicy, FloorMode};
use eirp_core::emf::PlanarArray;
use eirp_core::scheduler::{SchedStrategy, StrategyKind};
use eirp_core::sim::{
    AntennaConfig, CarrierConfig, ChannelModel, Scenario, SchedulerConfig, SegmentLayout, SimConfig, TraceLevel,
};
use eirp_core::units::{db_to_linear, dbm_to_watts};
use thiserror::Error;
use toml::Value;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("syntax: {0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("unknown preset `{0}` (expected desk or table1)")]
    Preset(String),
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// Log-distance intercept: calibrated from the edge SNR, or fixed in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intercept {
    Auto,
    Db(f64),
}

/// Outer-loop cap selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKey {
    Fixed,
    Sliding,
}

/// One value type of the config file.
trait ConfigValue: Sized {
    fn read(key: &str, v: &Value) -> Result<Self, ConfigError>;
    /// `None` leaves the key out of the emitted file.
    fn emit(&self) -> Option<String>;
}

impl ConfigValue for f64 {
    fn read(key: &str, v: &Value) -> Result<Self, ConfigError> {
        match v {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(invalid(key, "expected a number")),
        }
    }
    fn emit(&self) -> Option<String> {
        Some(format!("{self:?}"))
    }
}

macro_rules! int_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn read(key: &str, v: &Value) -> Result<Self, ConfigError> {
                match v {
                    Value::Integer(i) => <$t>::try_from(*i).map_err(|_| invalid(key, "integer out of range")),
                    _ => Err(invalid(key, "expected an integer")),
                }
            }
            fn emit(&self) -> Option<String> {
                Some(self.to_string())
            }
        }
    )*};
}
int_value!(usize, u32, u64);

impl ConfigValue for String {
    fn read(key: &str, v: &Value) -> Result<Self, ConfigError> {
        v.as_str().map(str::to_string).ok_or_else(|| invalid(key, "expected a string"))
    }
    fn emit(&self) -> Option<String> {
        Some(Value::String(self.clone()).to_string())
    }
}

impl<T: ConfigValue> ConfigValue for Option<T> {
    fn read(key: &str, v: &Value) -> Result<Self, ConfigError> {
        T::read(key, v).map(Some)
    }
    fn emit(&self) -> Option<String> {
        self.as_ref().and_then(T::emit)
    }
}

impl<T: ConfigValue> ConfigValue for Vec<T> {
    fn read(key: &str, v: &Value) -> Result<Self, ConfigError> {
        match v {
            Value::Array(items) => items.iter().map(|x| T::read(key, x)).collect(),
            // a bare scalar is a one-element list
            other => Ok(vec![T::read(key, other)?]),
        }
    }
    fn emit(&self) -> Option<String> {
        let items: Vec<String> = self.iter().filter_map(T::emit).collect();
        Some(format!("[{}]", items.join(", ")))
    }
}

/// Enumerations written as strings.
macro_rules! word_value {
    ($t:ty, $expect:literal, $parse:expr, $show:expr) => {
        impl ConfigValue for $t {
            fn read(key: &str, v: &Value) -> Result<Self, ConfigError> {
                let s = v.as_str().ok_or_else(|| invalid(key, concat!("expected ", $expect)))?;
                let parse: fn(&str) -> Option<$t> = $parse;
                parse(s).ok_or_else(|| invalid(key, format!(concat!("expected ", $expect, ", got `{}`"), s)))
            }
            fn emit(&self) -> Option<String> {
                let show: fn(&$t) -> String = $show;
                Some(Value::String(show(self)).to_string())
            }
        }
    };
}

word_value!(
    StrategyKind,
    "one of NoControl, RL, PL, PL-R",
    |s| StrategyKind::from_str(s).ok(),
    |k| k.label().to_string()
);
word_value!(
    ModeKey,
    "fixed or sliding",
    |s| match s {
        "fixed" => Some(ModeKey::Fixed),
        "sliding" => Some(ModeKey::Sliding),
        _ => None,
    },
    |m| match m {
        ModeKey::Fixed => "fixed".into(),
        ModeKey::Sliding => "sliding".into(),
    }
);
word_value!(
    FloorMode,
    "allow-overshoot or strict",
    |s| match s {
        "allow-overshoot" => Some(FloorMode::AllowOvershoot),
        "strict" => Some(FloorMode::Strict),
        _ => None,
    },
    |m| match m {
        FloorMode::AllowOvershoot => "allow-overshoot".into(),
        FloorMode::Strict => "strict".into(),
    }
);
word_value!(
    TraceLevel,
    "none, period or slot",
    |s| match s {
        "none" => Some(TraceLevel::None),
        "period" => Some(TraceLevel::Period),
        "slot" => Some(TraceLevel::Slot),
        _ => None,
    },
    |t| match t {
        TraceLevel::None => "none".into(),
        TraceLevel::Period => "period".into(),
        TraceLevel::Slot => "slot".into(),
    }
);

impl ConfigValue for Intercept {
    fn read(key: &str, v: &Value) -> Result<Self, ConfigError> {
        match v {
            Value::String(s) if s == "auto" => Ok(Intercept::Auto),
            Value::String(_) => Err(invalid(key, "expected \"auto\" or a number")),
            other => f64::read(key, other).map(Intercept::Db),
        }
    }
    fn emit(&self) -> Option<String> {
        match self {
            Intercept::Auto => Some("\"auto\"".into()),
            Intercept::Db(x) => x.emit(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioKeys {
    pub num_sites: usize,
    pub sectors_per_site: usize,
    pub inter_site_distance_m: f64,
    pub num_ues: usize,
    pub sim_slots: usize,
    pub seed: u64,
    pub min_distance_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficKeys {
    pub packet_mbits: f64,
    pub reading_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelKeys {
    pub pathloss_exponent: f64,
    pub pathloss_intercept_db: Intercept,
    pub edge_snr_db: f64,
    pub shadowing_sigma_db: f64,
    pub noise_figure_db: f64,
    pub prb_bandwidth_khz: f64,
    pub rank: f64,
    pub overhead: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntennaKeys {
    pub rows: usize,
    pub cols: usize,
    pub row_spacing: f64,
    pub col_spacing: f64,
    pub element_gain_dbi: f64,
    pub element_beamwidth_deg: f64,
    pub element_max_attenuation_db: f64,
    pub az_beams: usize,
    pub oversampling: usize,
    pub el_beams: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentKeys {
    pub az: usize,
    pub el: usize,
    pub resolution_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarrierKeys {
    pub total_prbs: u32,
    pub max_power_dbm: f64,
    pub slot_ms: f64,
    /// `D` for downlink and `U` for uplink slots, e.g. `DDDDU`.
    pub tdd_pattern: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerKeys {
    pub strategy: StrategyKind,
    pub alpha: f64,
    pub max_ues_per_slot: usize,
    pub pf_time_constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetKeys {
    pub budget_mode: ModeKey,
    /// Actual-EIRP threshold and fixed-mode cap relative to the maximum EIRP.
    pub rho_db: f64,
    pub epsilon: f64,
    pub rho_star: f64,
    pub guard_bstar_fraction: f64,
    pub period_slots: usize,
    pub window_periods: usize,
    pub floor_mode: FloorMode,
}

/// Sweep axes; an absent axis holds the corresponding base value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepKeys {
    pub packet_mbits: Option<Vec<f64>>,
    pub strategies: Option<Vec<StrategyKind>>,
    pub rho_db: Option<Vec<f64>>,
    pub epsilon: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputKeys {
    pub dir: String,
    pub eirp_trace: TraceLevel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: ScenarioKeys,
    pub traffic: TrafficKeys,
    pub channel: ChannelKeys,
    pub antenna: AntennaKeys,
    pub segments: SegmentKeys,
    pub carrier: CarrierKeys,
    pub scheduler: SchedulerKeys,
    pub budget: BudgetKeys,
    pub sweep: SweepKeys,
    pub output: OutputKeys,
}

impl Default for Config {
    /// The desk preset.
    fn default() -> Self {
        Self {
            scenario: ScenarioKeys {
                num_sites: 3,
                sectors_per_site: 3,
                inter_site_distance_m: 500.0,
                num_ues: 90,
                sim_slots: 20000,
                seed: 1,
                min_distance_m: 35.0,
            },
            traffic: TrafficKeys {
                packet_mbits: 2.0,
                reading_time_ms: 50.0,
            },
            channel: ChannelKeys {
                pathloss_exponent: 3.7,
                pathloss_intercept_db: Intercept::Auto,
                edge_snr_db: 5.0,
                shadowing_sigma_db: 6.0,
                noise_figure_db: 9.0,
                prb_bandwidth_khz: 360.0,
                rank: 2.0,
                overhead: 0.14,
                bs_height_m: 25.0,
                ue_height_m: 1.5,
            },
            antenna: AntennaKeys {
                rows: 12,
                cols: 8,
                row_spacing: 0.7,
                col_spacing: 0.5,
                element_gain_dbi: 5.2,
                element_beamwidth_deg: 65.0,
                element_max_attenuation_db: 30.0,
                az_beams: 15,
                oversampling: 2,
                el_beams: 5,
            },
            segments: SegmentKeys {
                az: 1,
                el: 1,
                resolution_deg: 1.0,
            },
            carrier: CarrierKeys {
                total_prbs: 273,
                max_power_dbm: 53.0,
                slot_ms: 0.5,
                tdd_pattern: "DDDDU".into(),
            },
            scheduler: SchedulerKeys {
                strategy: StrategyKind::PlR,
                alpha: 1.0,
                max_ues_per_slot: 8,
                pf_time_constant: 100.0,
            },
            budget: BudgetKeys {
                budget_mode: ModeKey::Fixed,
                rho_db: -6.0,
                epsilon: 0.9,
                rho_star: 0.1,
                guard_bstar_fraction: 0.1,
                period_slots: 200,
                window_periods: 10,
                floor_mode: FloorMode::Strict,
            },
            sweep: SweepKeys::default(),
            output: OutputKeys {
                dir: "out".into(),
                eirp_trace: TraceLevel::Period,
            },
        }
    }
}

macro_rules! config_keys {
    ($($key:literal => $sec:ident . $field:ident),* $(,)?) => {
        /// Every accepted key, in emission order.
        pub const KEYS: &[&str] = &[$($key),*];

        fn set_key(cfg: &mut Config, key: &str, v: &Value) -> Result<(), ConfigError> {
            match key {
                $($key => cfg.$sec.$field = ConfigValue::read(key, v)?,)*
                _ => return Err(ConfigError::UnknownKey(key.to_string())),
            }
            Ok(())
        }

        fn entries(cfg: &Config) -> Vec<(&'static str, Option<String>)> {
            vec![$(($key, cfg.$sec.$field.emit())),*]
        }
    };
}

config_keys! {
    "scenario.num_sites" => scenario.num_sites,
    "scenario.sectors_per_site" => scenario.sectors_per_site,
    "scenario.inter_site_distance_m" => scenario.inter_site_distance_m,
    "scenario.num_ues" => scenario.num_ues,
    "scenario.sim_slots" => scenario.sim_slots,
    "scenario.seed" => scenario.seed,
    "scenario.min_distance_m" => scenario.min_distance_m,
    "traffic.packet_mbits" => traffic.packet_mbits,
    "traffic.reading_time_ms" => traffic.reading_time_ms,
    "channel.pathloss_exponent" => channel.pathloss_exponent,
    "channel.pathloss_intercept_db" => channel.pathloss_intercept_db,
    "channel.edge_snr_db" => channel.edge_snr_db,
    "channel.shadowing_sigma_db" => channel.shadowing_sigma_db,
    "channel.noise_figure_db" => channel.noise_figure_db,
    "channel.prb_bandwidth_khz" => channel.prb_bandwidth_khz,
    "channel.rank" => channel.rank,
    "channel.overhead" => channel.overhead,
    "channel.bs_height_m" => channel.bs_height_m,
    "channel.ue_height_m" => channel.ue_height_m,
    "antenna.rows" => antenna.rows,
    "antenna.cols" => antenna.cols,
    "antenna.row_spacing" => antenna.row_spacing,
    "antenna.col_spacing" => antenna.col_spacing,
    "antenna.element_gain_dbi" => antenna.element_gain_dbi,
    "antenna.element_beamwidth_deg" => antenna.element_beamwidth_deg,
    "antenna.element_max_attenuation_db" => antenna.element_max_attenuation_db,
    "antenna.az_beams" => antenna.az_beams,
    "antenna.oversampling" => antenna.oversampling,
    "antenna.el_beams" => antenna.el_beams,
    "segments.az" => segments.az,
    "segments.el" => segments.el,
    "segments.resolution_deg" => segments.resolution_deg,
    "carrier.total_prbs" => carrier.total_prbs,
    "carrier.max_power_dbm" => carrier.max_power_dbm,
    "carrier.slot_ms" => carrier.slot_ms,
    "carrier.tdd_pattern" => carrier.tdd_pattern,
    "scheduler.strategy" => scheduler.strategy,
    "scheduler.alpha" => scheduler.alpha,
    "scheduler.max_ues_per_slot" => scheduler.max_ues_per_slot,
    "scheduler.pf_time_constant" => scheduler.pf_time_constant,
    "budget.budget_mode" => budget.budget_mode,
    "budget.rho_db" => budget.rho_db,
    "budget.epsilon" => budget.epsilon,
    "budget.rho_star" => budget.rho_star,
    "budget.guard_bstar_fraction" => budget.guard_bstar_fraction,
    "budget.period_slots" => budget.period_slots,
    "budget.window_periods" => budget.window_periods,
    "budget.floor_mode" => budget.floor_mode,
    "sweep.packet_mbits" => sweep.packet_mbits,
    "sweep.strategies" => sweep.strategies,
    "sweep.rho_db" => sweep.rho_db,
    "sweep.epsilon" => sweep.epsilon,
    "sweep.seeds" => sweep.seeds,
    "output.dir" => output.dir,
    "output.eirp_trace" => output.eirp_trace,
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub packet_mbits: f64,
    pub strategy: StrategyKind,
    pub rho_db: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Config {
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "desk" => Ok(Self::default()),
            "table1" => {
                let mut c = Self::default();
                c.scenario.num_sites = 7;
                c.scenario.num_ues = 210;
                // 12 s of 0.5 ms slots
                c.scenario.sim_slots = 24000;
                Ok(c)
            }
            other => Err(ConfigError::Preset(other.to_string())),
        }
    }

    /// Parses `text` over `base`, validating the result.
    pub fn parse_over(base: Self, text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut flat = BTreeMap::new();
        for (section, v) in table {
            match v {
                Value::Table(inner) => {
                    for (k, v) in inner {
                        if v.is_table() {
                            return Err(ConfigError::UnknownKey(format!("{section}.{k}")));
                        }
                        flat.insert(format!("{section}.{k}"), v);
                    }
                }
                _ => return Err(ConfigError::UnknownKey(section)),
            }
        }
        let mut cfg = base;
        for (k, v) in &flat {
            set_key(&mut cfg, k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_over(Self::default(), text)
    }

    pub fn load(path: &Path, base: Self) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_over(base, &text)
    }

    /// Writes every set key, one per line, grouped by section.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (key, value) in entries(self) {
            let Some(value) = value else { continue };
            let (sec, _) = key.split_once('.').unwrap();
            if sec != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = sec;
            }
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("must be positive, got {x}")))
            }
        };
        let nonzero = |key: &str, n: usize| {
            if n > 0 {
                Ok(())
            } else {
                Err(invalid(key, "must be at least 1"))
            }
        };
        let eps_ok = |key: &str, e: f64| {
            if (0.0..=1.0).contains(&e) {
                Ok(())
            } else {
                Err(invalid(key, format!("epsilon in [0,1], got {e}")))
            }
        };
        let rho_ok = |key: &str, r: f64| {
            if r <= 0.0 && r.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("rho_db in (-inf, 0], got {r}")))
            }
        };
        let s = &self.scenario;
        nonzero("scenario.num_sites", s.num_sites)?;
        nonzero("scenario.sectors_per_site", s.sectors_per_site)?;
        positive("scenario.inter_site_distance_m", s.inter_site_distance_m)?;
        nonzero("scenario.sim_slots", s.sim_slots)?;
        if !(s.min_distance_m >= 0.0 && s.min_distance_m < s.inter_site_distance_m / 2.0) {
            return Err(invalid("scenario.min_distance_m", "in [0, inter_site_distance_m / 2)"));
        }
        positive("traffic.packet_mbits", self.traffic.packet_mbits)?;
        positive("traffic.reading_time_ms", self.traffic.reading_time_ms)?;
        let c = &self.channel;
        positive("channel.pathloss_exponent", c.pathloss_exponent)?;
        if !(c.shadowing_sigma_db >= 0.0) {
            return Err(invalid("channel.shadowing_sigma_db", "must be >= 0"));
        }
        positive("channel.prb_bandwidth_khz", c.prb_bandwidth_khz)?;
        if !(1.0..=4.0).contains(&c.rank) {
            return Err(invalid("channel.rank", format!("rank in [1,4], got {}", c.rank)));
        }
        if !(0.0..1.0).contains(&c.overhead) {
            return Err(invalid("channel.overhead", "in [0,1)"));
        }
        positive("channel.bs_height_m", c.bs_height_m)?;
        positive("channel.ue_height_m", c.ue_height_m)?;
        let a = &self.antenna;
        nonzero("antenna.rows", a.rows)?;
        nonzero("antenna.cols", a.cols)?;
        positive("antenna.row_spacing", a.row_spacing)?;
        positive("antenna.col_spacing", a.col_spacing)?;
        positive("antenna.element_beamwidth_deg", a.element_beamwidth_deg)?;
        nonzero("antenna.az_beams", a.az_beams)?;
        nonzero("antenna.oversampling", a.oversampling)?;
        nonzero("antenna.el_beams", a.el_beams)?;
        nonzero("segments.az", self.segments.az)?;
        nonzero("segments.el", self.segments.el)?;
        positive("segments.resolution_deg", self.segments.resolution_deg)?;
        let k = &self.carrier;
        nonzero("carrier.total_prbs", k.total_prbs as usize)?;
        positive("carrier.slot_ms", k.slot_ms)?;
        if k.tdd_pattern.is_empty() || !k.tdd_pattern.chars().all(|ch| ch == 'D' || ch == 'U') {
            return Err(invalid("carrier.tdd_pattern", "letters D and U only"));
        }
        if !k.tdd_pattern.contains('D') {
            return Err(invalid("carrier.tdd_pattern", "needs at least one D slot"));
        }
        let sc = &self.scheduler;
        if !(sc.alpha >= 0.0 && sc.alpha.is_finite()) {
            return Err(invalid("scheduler.alpha", "must be >= 0"));
        }
        nonzero("scheduler.max_ues_per_slot", sc.max_ues_per_slot)?;
        if !(sc.pf_time_constant >= 1.0) {
            return Err(invalid("scheduler.pf_time_constant", "must be >= 1"));
        }
        let b = &self.budget;
        rho_ok("budget.rho_db", b.rho_db)?;
        eps_ok("budget.epsilon", b.epsilon)?;
        if !(b.rho_star > 0.0 && b.rho_star < 1.0) {
            return Err(invalid("budget.rho_star", format!("rho_star in (0,1), got {}", b.rho_star)));
        }
        positive("budget.guard_bstar_fraction", b.guard_bstar_fraction)?;
        nonzero("budget.period_slots", b.period_slots)?;
        nonzero("budget.window_periods", b.window_periods)?;
        let w = &self.sweep;
        let non_empty = |key: &str, n: Option<usize>| match n {
            Some(0) => Err(invalid(key, "sweep axis must not be empty")),
            _ => Ok(()),
        };
        non_empty("sweep.packet_mbits", w.packet_mbits.as_ref().map(Vec::len))?;
        non_empty("sweep.strategies", w.strategies.as_ref().map(Vec::len))?;
        non_empty("sweep.rho_db", w.rho_db.as_ref().map(Vec::len))?;
        non_empty("sweep.epsilon", w.epsilon.as_ref().map(Vec::len))?;
        non_empty("sweep.seeds", w.seeds.as_ref().map(Vec::len))?;
        for &q in w.packet_mbits.iter().flatten() {
            positive("sweep.packet_mbits", q)?;
        }
        for &r in w.rho_db.iter().flatten() {
            rho_ok("sweep.rho_db", r)?;
        }
        for &e in w.epsilon.iter().flatten() {
            eps_ok("sweep.epsilon", e)?;
        }
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(())
    }

    /// Sweep points in output order: packet size, then strategy, threshold,
    /// epsilon and seed.
    pub fn points(&self) -> Vec<SweepPoint> {
        let w = &self.sweep;
        let qs = w.packet_mbits.clone().unwrap_or_else(|| vec![self.traffic.packet_mbits]);
        let ks = w.strategies.clone().unwrap_or_else(|| vec![self.scheduler.strategy]);
        let rs = w.rho_db.clone().unwrap_or_else(|| vec![self.budget.rho_db]);
        let es = w.epsilon.clone().unwrap_or_else(|| vec![self.budget.epsilon]);
        let seeds = w.seeds.clone().unwrap_or_else(|| vec![self.scenario.seed]);
        let mut out = Vec::new();
        for &packet_mbits in &qs {
            for &strategy in &ks {
                for &rho_db in &rs {
                    for &epsilon in &es {
                        for &seed in &seeds {
                            out.push(SweepPoint {
                                packet_mbits,
                                strategy,
                                rho_db,
                                epsilon,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Core configuration of the base values, with every dB, dBm, ms and
    /// degree value converted to linear units.
    pub fn base_sim_config(&self) -> SimConfig {
        let s = &self.scenario;
        let c = &self.channel;
        let a = &self.antenna;
        let k = &self.carrier;
        let b = &self.budget;
        let rho = db_to_linear(b.rho_db);
        SimConfig {
            scenario: Scenario {
                num_sites: s.num_sites,
                sectors_per_site: s.sectors_per_site,
                inter_site_distance: s.inter_site_distance_m,
                num_ues: s.num_ues,
                packet_bits: self.traffic.packet_mbits * 1e6,
                reading_time_s: self.traffic.reading_time_ms * 1e-3,
                sim_slots: s.sim_slots,
                seed: s.seed,
                min_distance: s.min_distance_m,
            },
            channel: ChannelModel {
                pathloss_exponent: c.pathloss_exponent,
                pathloss_intercept_db: match c.pathloss_intercept_db {
                    Intercept::Auto => None,
                    Intercept::Db(x) => Some(x),
                },
                edge_snr_db: c.edge_snr_db,
                shadowing_sigma_db: c.shadowing_sigma_db,
                noise_figure_db: c.noise_figure_db,
                prb_bandwidth_hz: c.prb_bandwidth_khz * 1e3,
                rank: c.rank,
                overhead: c.overhead,
                bs_height: c.bs_height_m,
                ue_height: c.ue_height_m,
            },
            antenna: AntennaConfig {
                array: PlanarArray {
                    rows: a.rows,
                    cols: a.cols,
                    row_spacing: a.row_spacing,
                    col_spacing: a.col_spacing,
                    element_gain: db_to_linear(a.element_gain_dbi),
                    element_beamwidth: a.element_beamwidth_deg.to_radians(),
                    element_max_attenuation_db: a.element_max_attenuation_db,
                },
                az_beams: a.az_beams,
                oversampling: a.oversampling,
                el_beams: a.el_beams,
            },
            segments: SegmentLayout {
                az_segments: self.segments.az,
                el_segments: self.segments.el,
                resolution: self.segments.resolution_deg.to_radians(),
            },
            carrier: CarrierConfig {
                total_prbs: k.total_prbs,
                max_power: dbm_to_watts(k.max_power_dbm) / k.total_prbs as f64,
                slot_seconds: k.slot_ms * 1e-3,
                tdd_pattern: k.tdd_pattern.chars().map(|ch| ch == 'D').collect(),
            },
            scheduler: SchedulerConfig {
                strategy: SchedStrategy {
                    kind: self.scheduler.strategy,
                    alpha: self.scheduler.alpha,
                },
                max_ues_per_slot: self.scheduler.max_ues_per_slot,
                pf_time_constant: self.scheduler.pf_time_constant,
            },
            budget: BudgetPolicy {
                mode: match b.budget_mode {
                    ModeKey::Fixed => BudgetMode::Fixed { rho },
                    ModeKey::Sliding => BudgetMode::Sliding,
                },
                epsilon: b.epsilon,
                rho_star: b.rho_star,
                guard_fraction: b.guard_bstar_fraction,
                period_slots: b.period_slots,
                window_periods: b.window_periods,
                floor_mode: b.floor_mode,
            },
            limit_rho: rho,
            trace: self.output.eirp_trace,
        }
    }

    /// Core configuration of one sweep point.
    pub fn sim_config(&self, p: &SweepPoint) -> SimConfig {
        let mut c = self.clone();
        c.traffic.packet_mbits = p.packet_mbits;
        c.scheduler.strategy = p.strategy;
        c.budget.rho_db = p.rho_db;
        c.budget.epsilon = p.epsilon;
        c.scenario.seed = p.seed;
        c.base_sim_config()
    }
}
