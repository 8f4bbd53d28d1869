use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::topology::{wrap_angle, Topology};
use super::SimError;
use crate::emf::{BeamCodebook, Direction};
use crate::units::{db_to_linear, BOLTZMANN, NOISE_TEMPERATURE_K};

/// Log-distance pathloss with lognormal shadowing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub pathloss_exponent: f64,
    /// Pathloss at 1 m in dB. `None` calibrates it so that a UE at half the
    /// inter-site distance sees `edge_snr_db` at full power per PRB through a
    /// single antenna element, before beamforming gain.
    pub pathloss_intercept_db: Option<f64>,
    pub edge_snr_db: f64,
    pub shadowing_sigma_db: f64,
    pub noise_figure_db: f64,
    pub prb_bandwidth_hz: f64,
    /// Spatial layers carried per PRB.
    pub rank: f64,
    /// Fraction of resource elements lost to control and reference signals.
    pub overhead: f64,
    pub bs_height: f64,
    pub ue_height: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            pathloss_exponent: 3.7,
            pathloss_intercept_db: None,
            edge_snr_db: 5.0,
            shadowing_sigma_db: 6.0,
            noise_figure_db: 9.0,
            prb_bandwidth_hz: 360e3,
            rank: 2.0,
            overhead: 0.14,
            bs_height: 25.0,
            ue_height: 1.5,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.pathloss_exponent > 0.0) {
            return err("channel.pathloss_exponent must be positive");
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return err("channel.shadowing_sigma_db must be >= 0");
        }
        if !(self.prb_bandwidth_hz > 0.0) {
            return err("channel.prb_bandwidth_hz must be positive");
        }
        if !(1.0..=4.0).contains(&self.rank) {
            return err("channel.rank in [1,4]");
        }
        if !(0.0..1.0).contains(&self.overhead) {
            return err("channel.overhead in [0,1)");
        }
        if !(self.bs_height > 0.0 && self.ue_height > 0.0) {
            return err("antenna heights must be positive");
        }
        Ok(())
    }

    /// Thermal noise per PRB in watts, `k T B F`.
    pub fn noise_per_prb(&self) -> f64 {
        BOLTZMANN * NOISE_TEMPERATURE_K * self.prb_bandwidth_hz * db_to_linear(self.noise_figure_db)
    }

    /// Pathloss at 1 m in dB, calibrated when not given.
    pub fn intercept_db(&self, isd: f64, max_power: f64, reference_gain: f64) -> f64 {
        if let Some(pl0) = self.pathloss_intercept_db {
            return pl0;
        }
        let d = self.distance_3d(isd / 2.0);
        let target_gain = db_to_linear(self.edge_snr_db) * self.noise_per_prb() / (max_power * reference_gain);
        -10.0 * target_gain.log10() - 10.0 * self.pathloss_exponent * d.log10()
    }

    pub fn distance_3d(&self, d2d: f64) -> f64 {
        d2d.hypot(self.bs_height - self.ue_height)
    }

    /// Linear path gain at 3-D distance `d` (no shadowing).
    pub fn path_gain(&self, intercept_db: f64, d: f64) -> f64 {
        db_to_linear(-(intercept_db + 10.0 * self.pathloss_exponent * d.log10()))
    }
}

/// Per UE, cell and beam: beam gain towards the UE times path gain.
#[derive(Debug, Clone)]
pub struct GainTable {
    num_cells: usize,
    num_beams: usize,
    values: Vec<f64>,
}

impl GainTable {
    pub fn build(
        topo: &Topology,
        channel: &ChannelModel,
        codebook: &BeamCodebook,
        intercept_db: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, SimError> {
        let shadow = Normal::new(0.0, channel.shadowing_sigma_db)
            .map_err(|e| SimError::Config(format!("shadowing: {e}")))?;
        let n_sites = topo.sites.len();
        // one draw per UE and site, in UE-major order
        let shadows: Vec<f64> = (0..topo.ues.len() * n_sites)
            .map(|_| db_to_linear(shadow.sample(rng)))
            .collect();
        let num_cells = topo.cells.len();
        let num_beams = codebook.len();
        let mut values = Vec::with_capacity(topo.ues.len() * num_cells * num_beams);
        for ue in &topo.ues {
            for cell in &topo.cells {
                let site = topo.sites[cell.site];
                let (dx, dy) = (ue.x - site.x, ue.y - site.y);
                let d2d = dx.hypot(dy);
                let az = wrap_angle(dy.atan2(dx) - cell.boresight);
                let el = (channel.ue_height - channel.bs_height).atan2(d2d);
                let dir = Direction::wrapped(az, el);
                let pg = channel.path_gain(intercept_db, channel.distance_3d(d2d))
                    * shadows[ue.id * n_sites + cell.site];
                for b in codebook.beams() {
                    values.push(b.gain(dir) * pg);
                }
            }
        }
        Ok(Self {
            num_cells,
            num_beams,
            values,
        })
    }

    #[inline]
    pub fn get(&self, ue: usize, cell: usize, beam: usize) -> f64 {
        self.values[(ue * self.num_cells + cell) * self.num_beams + beam]
    }

    /// Gains of all beams of `cell` towards `ue`.
    #[inline]
    pub fn beams(&self, ue: usize, cell: usize) -> &[f64] {
        let at = (ue * self.num_cells + cell) * self.num_beams;
        &self.values[at..at + self.num_beams]
    }

    /// Best `(cell, beam)` for `ue`; ties go to the lower ids.
    pub fn best_server(&self, ue: usize) -> (usize, usize) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for c in 0..self.num_cells {
            for (b, &g) in self.beams(ue, c).iter().enumerate() {
                if g > best.2 {
                    best = (c, b, g);
                }
            }
        }
        (best.0, best.1)
    }
}
