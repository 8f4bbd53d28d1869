use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::geometry::{segment_grid, Direction, SegmentSet};
use super::{EmfError, UeAllocation};

/// Linear antenna gain as a function of direction. Must be non-negative.
pub trait GainPattern: Send + Sync {
    fn gain(&self, d: Direction) -> f64;
}

/// Uniform rectangular array with a 3GPP-style element pattern.
///
/// `cols` elements run horizontally (azimuth), `rows` vertically. Spacings
/// are in wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarArray {
    pub rows: usize,
    pub cols: usize,
    pub row_spacing: f64,
    pub col_spacing: f64,
    /// Peak element gain, linear.
    pub element_gain: f64,
    /// Element half-power beamwidth in radians (both planes).
    pub element_beamwidth: f64,
    /// Floor of the element pattern relative to its peak, in dB.
    pub element_max_attenuation_db: f64,
}

impl PlanarArray {
    /// 12 x 8 array, 0.7 wavelength row and 0.5 wavelength column spacing,
    /// 5.2 dBi elements with 65 degree beamwidth and a 30 dB floor.
    pub fn default_macro() -> Self {
        Self {
            rows: 12,
            cols: 8,
            row_spacing: 0.7,
            col_spacing: 0.5,
            element_gain: 10f64.powf(0.52),
            element_beamwidth: 65f64.to_radians(),
            element_max_attenuation_db: 30.0,
        }
    }

    pub fn num_elements(&self) -> usize {
        self.rows * self.cols
    }

    pub fn element_pattern(&self, d: Direction) -> f64 {
        let h = d.azimuth() / self.element_beamwidth;
        let v = d.elevation() / self.element_beamwidth;
        let atten_db = (12.0 * (h * h + v * v)).min(self.element_max_attenuation_db);
        self.element_gain * 10f64.powf(-atten_db / 10.0)
    }

    /// Peak gain of a broadside beam: element gain times element count.
    pub fn peak_gain(&self) -> f64 {
        self.element_gain * self.num_elements() as f64
    }
}

/// `|sum_{m<n} exp(j m x)|^2 = sin^2(n x / 2) / sin^2(x / 2)`.
#[inline]
fn dirichlet_sq(n: usize, half_x: f64) -> f64 {
    let s = half_x.sin();
    if s.abs() < 1e-12 {
        return (n * n) as f64;
    }
    let num = (n as f64 * half_x).sin();
    (num * num) / (s * s)
}

/// DFT beam of a [`PlanarArray`] steered to direction cosines
/// `(u0, v0) = (sin(az) cos(el), sin(el))`.
#[derive(Clone)]
pub struct DftBeam {
    array: Arc<PlanarArray>,
    steer_u: f64,
    steer_v: f64,
}

impl DftBeam {
    pub fn new(array: Arc<PlanarArray>, steer_u: f64, steer_v: f64) -> Self {
        Self {
            array,
            steer_u,
            steer_v,
        }
    }

    pub fn steered_to(array: Arc<PlanarArray>, d: Direction) -> Self {
        let (u, v) = direction_cosines(d);
        Self::new(array, u, v)
    }

    pub fn steering(&self) -> (f64, f64) {
        (self.steer_u, self.steer_v)
    }

    /// Array factor normalised so that a beam's peak equals the element count.
    #[inline]
    fn array_factor(&self, u: f64, v: f64) -> f64 {
        let a = &self.array;
        let h = dirichlet_sq(a.cols, PI * a.col_spacing * (u - self.steer_u));
        let w = dirichlet_sq(a.rows, PI * a.row_spacing * (v - self.steer_v));
        h * w / a.num_elements() as f64
    }

    /// Standard oversampled DFT codebook: `az_beams` horizontal beams spaced
    /// `1 / (cols * col_spacing * oversampling)` in `u` around broadside, and
    /// `el_beams` beams tilted downwards in steps of `1 / (rows * row_spacing)`
    /// in `v`.
    pub fn codebook(
        array: Arc<PlanarArray>,
        az_beams: usize,
        oversampling: usize,
        el_beams: usize,
    ) -> Vec<DftBeam> {
        let du = 1.0 / (array.cols as f64 * array.col_spacing * oversampling.max(1) as f64);
        let dv = 1.0 / (array.rows as f64 * array.row_spacing);
        let mut beams = Vec::with_capacity(az_beams * el_beams);
        let centre = (az_beams as f64 - 1.0) / 2.0;
        for l in 0..el_beams {
            let v = -(l as f64) * dv;
            for k in 0..az_beams {
                let u = (k as f64 - centre) * du;
                beams.push(DftBeam::new(array.clone(), u, v));
            }
        }
        beams
    }
}

impl fmt::Debug for DftBeam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DftBeam")
            .field("steer_u", &self.steer_u)
            .field("steer_v", &self.steer_v)
            .finish()
    }
}

#[inline]
pub(crate) fn direction_cosines(d: Direction) -> (f64, f64) {
    let (se, ce) = d.elevation().sin_cos();
    (d.azimuth().sin() * ce, se)
}

impl GainPattern for DftBeam {
    fn gain(&self, d: Direction) -> f64 {
        let (u, v) = direction_cosines(d);
        self.array.element_pattern(d) * self.array_factor(u, v)
    }
}

/// A beam of the codebook with its per-segment maximum grid gain.
#[derive(Clone)]
pub struct BeamGain {
    pub beam_id: usize,
    pattern: Arc<dyn GainPattern>,
    pub max_gain_per_segment: Vec<f64>,
}

impl BeamGain {
    #[inline]
    pub fn gain(&self, d: Direction) -> f64 {
        self.pattern.gain(d)
    }

    pub fn pattern(&self) -> &Arc<dyn GainPattern> {
        &self.pattern
    }
}

impl fmt::Debug for BeamGain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BeamGain")
            .field("beam_id", &self.beam_id)
            .field("max_gain_per_segment", &self.max_gain_per_segment)
            .finish()
    }
}

/// Radiated power `sum A * P` aggregated per beam, sorted by beam id.
///
/// Both [`BeamCodebook::consumption`] and [`BeamCodebook::bound`] sum over
/// this list in the same order, so the bound dominates the consumption
/// exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BeamLoad {
    entries: Vec<(usize, f64)>,
}

impl BeamLoad {
    pub fn from_allocations(allocs: &[UeAllocation]) -> Self {
        let mut load = Self::default();
        for a in allocs {
            load.add(a.beam_id, a.radiated_power());
        }
        load
    }

    pub fn add(&mut self, beam_id: usize, radiated_power: f64) {
        if radiated_power <= 0.0 {
            return;
        }
        match self.entries.binary_search_by_key(&beam_id, |e| e.0) {
            Ok(i) => self.entries[i].1 += radiated_power,
            Err(i) => self.entries.insert(i, (beam_id, radiated_power)),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

const BLOCK: usize = 8;

#[derive(Debug, Clone)]
struct GridBlock {
    el: (usize, usize),
    az: (usize, usize),
}

/// Gain tables of one segment: every beam sampled on the segment grid.
#[derive(Debug, Clone)]
struct SegmentTable {
    n_az: usize,
    points: Vec<Direction>,
    /// `gains[b * n + p]`.
    gains: Vec<f64>,
    /// Grid index of each beam's maximum.
    argmax: Vec<usize>,
    blocks: Vec<GridBlock>,
    /// `block_max[b * blocks + k]`.
    block_max: Vec<f64>,
}

impl SegmentTable {
    #[inline]
    fn n(&self) -> usize {
        self.points.len()
    }

    #[inline]
    fn eval(&self, load: &BeamLoad, p: usize) -> f64 {
        let n = self.n();
        let mut v = 0.0;
        for &(b, w) in load.entries() {
            v += w * self.gains[b * n + p];
        }
        v
    }
}

/// A set of beams sampled over the segments of one sector.
///
/// Construction evaluates every beam on every segment grid once; the
/// per-slot consumption then only needs table lookups.
#[derive(Clone)]
pub struct BeamCodebook {
    beams: Vec<BeamGain>,
    segments: SegmentSet,
    resolution: f64,
    tables: Vec<SegmentTable>,
    main_lobe: Vec<usize>,
}

impl fmt::Debug for BeamCodebook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BeamCodebook")
            .field("beams", &self.beams.len())
            .field("segments", &self.segments.len())
            .field("resolution", &self.resolution)
            .finish()
    }
}

impl BeamCodebook {
    pub fn new(
        patterns: Vec<Arc<dyn GainPattern>>,
        segments: SegmentSet,
        resolution: f64,
    ) -> Result<Self, EmfError> {
        let nb = patterns.len();
        let mut tables = Vec::with_capacity(segments.len());
        for seg in segments.iter() {
            let grid = segment_grid(seg, resolution)?;
            let n = grid.points.len();
            let mut gains = vec![0.0; nb * n];
            let mut argmax = vec![0usize; nb];
            for (b, pat) in patterns.iter().enumerate() {
                let row = &mut gains[b * n..(b + 1) * n];
                let mut best = (0usize, f64::NEG_INFINITY);
                for (p, &d) in grid.points.iter().enumerate() {
                    let g = pat.gain(d).max(0.0);
                    row[p] = g;
                    if g > best.1 {
                        best = (p, g);
                    }
                }
                argmax[b] = best.0;
            }
            let mut blocks = Vec::new();
            for e0 in (0..grid.n_el).step_by(BLOCK) {
                for a0 in (0..grid.n_az).step_by(BLOCK) {
                    blocks.push(GridBlock {
                        el: (e0, (e0 + BLOCK).min(grid.n_el)),
                        az: (a0, (a0 + BLOCK).min(grid.n_az)),
                    });
                }
            }
            let nk = blocks.len();
            let mut block_max = vec![0.0; nb * nk];
            for b in 0..nb {
                for (k, blk) in blocks.iter().enumerate() {
                    let mut m = 0.0f64;
                    for e in blk.el.0..blk.el.1 {
                        for a in blk.az.0..blk.az.1 {
                            m = m.max(gains[b * n + e * grid.n_az + a]);
                        }
                    }
                    block_max[b * nk + k] = m;
                }
            }
            tables.push(SegmentTable {
                n_az: grid.n_az,
                points: grid.points,
                gains,
                argmax,
                blocks,
                block_max,
            });
        }

        let mut beams = Vec::with_capacity(nb);
        let mut main_lobe = Vec::with_capacity(nb);
        for (b, pattern) in patterns.into_iter().enumerate() {
            let maxes: Vec<f64> = tables
                .iter()
                .map(|t| t.gains[b * t.n() + t.argmax[b]])
                .collect();
            let lobe = maxes
                .iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |acc, (s, &g)| {
                    if g > acc.1 {
                        (s, g)
                    } else {
                        acc
                    }
                })
                .0;
            main_lobe.push(lobe);
            beams.push(BeamGain {
                beam_id: b,
                pattern,
                max_gain_per_segment: maxes,
            });
        }
        Ok(Self {
            beams,
            segments,
            resolution,
            tables,
            main_lobe,
        })
    }

    /// DFT codebook of `array` over `segments`.
    pub fn dft(
        array: Arc<PlanarArray>,
        az_beams: usize,
        oversampling: usize,
        el_beams: usize,
        segments: SegmentSet,
        resolution: f64,
    ) -> Result<Self, EmfError> {
        let patterns = DftBeam::codebook(array, az_beams, oversampling, el_beams)
            .into_iter()
            .map(|b| Arc::new(b) as Arc<dyn GainPattern>)
            .collect();
        Self::new(patterns, segments, resolution)
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn segments(&self) -> &SegmentSet {
        &self.segments
    }

    pub fn beam(&self, beam_id: usize) -> Result<&BeamGain, EmfError> {
        self.beams.get(beam_id).ok_or(EmfError::UnknownBeam(beam_id))
    }

    pub fn beams(&self) -> &[BeamGain] {
        &self.beams
    }

    /// `Ghat` of a beam over a segment.
    pub fn max_gain(&self, beam_id: usize, segment_id: usize) -> Result<f64, EmfError> {
        let beam = self.beam(beam_id)?;
        beam.max_gain_per_segment
            .get(segment_id)
            .copied()
            .ok_or(EmfError::UnknownSegment(segment_id))
    }

    pub fn main_lobe_segment(&self, beam_id: usize) -> Result<usize, EmfError> {
        self.main_lobe
            .get(beam_id)
            .copied()
            .ok_or(EmfError::UnknownBeam(beam_id))
    }

    /// Largest `Ghat` over all beams for the segment.
    pub fn peak_gain_in_segment(&self, segment_id: usize) -> f64 {
        self.beams
            .iter()
            .filter_map(|b| b.max_gain_per_segment.get(segment_id))
            .fold(0.0, |m, &g| m.max(g))
    }

    /// Beam with the highest gain towards `d`; ties go to the lower id.
    pub fn best_beam_toward(&self, d: Direction) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for b in &self.beams {
            let g = b.gain(d);
            if best.map_or(true, |(_, bg)| g > bg) {
                best = Some((b.beam_id, g));
            }
        }
        best.map(|(id, _)| id)
    }

    /// Grid maximum of the EIRP caused by `load` over segment `segment_id`.
    ///
    /// Exact over the grid: blocks are visited only while their upper bound
    /// (per-beam block maxima) can still beat the current best.
    ///
    /// # Panics
    ///
    /// Panics if `segment_id` or a beam in `load` is out of range.
    pub fn consumption(&self, segment_id: usize, load: &BeamLoad) -> f64 {
        let entries = load.entries();
        let t = &self.tables[segment_id];
        match entries {
            [] => 0.0,
            [(b, w)] => w * t.gains[b * t.n() + t.argmax[*b]],
            _ => {
                let mut best = 0.0f64;
                for &(b, _) in entries {
                    best = best.max(t.eval(load, t.argmax[b]));
                }
                let nk = t.blocks.len();
                for (k, blk) in t.blocks.iter().enumerate() {
                    let mut ub = 0.0;
                    for &(b, w) in entries {
                        ub += w * t.block_max[b * nk + k];
                    }
                    if ub <= best {
                        continue;
                    }
                    for e in blk.el.0..blk.el.1 {
                        for a in blk.az.0..blk.az.1 {
                            best = best.max(t.eval(load, e * t.n_az + a));
                        }
                    }
                }
                best
            }
        }
    }

    /// `sum_b w_b * Ghat_b` over `load`, in the same order as
    /// [`consumption`](Self::consumption).
    pub fn bound(&self, segment_id: usize, load: &BeamLoad) -> f64 {
        let t = &self.tables[segment_id];
        let mut v = 0.0;
        for &(b, w) in load.entries() {
            v += w * t.gains[b * t.n() + t.argmax[b]];
        }
        v
    }

    /// Grid direction where beam `beam_id` peaks within `segment_id`.
    pub fn argmax_direction(&self, beam_id: usize, segment_id: usize) -> Result<Direction, EmfError> {
        let t = self
            .tables
            .get(segment_id)
            .ok_or(EmfError::UnknownSegment(segment_id))?;
        let p = *t.argmax.get(beam_id).ok_or(EmfError::UnknownBeam(beam_id))?;
        Ok(t.points[p])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emf::{AngleRange, SegmentSet};

    fn macro_codebook(segments: SegmentSet) -> BeamCodebook {
        let array = Arc::new(PlanarArray::default_macro());
        BeamCodebook::dft(array, 15, 2, 5, segments, 1f64.to_radians()).unwrap()
    }

    #[test]
    fn broadside_peak_is_element_count_times_element_gain() {
        let array = Arc::new(PlanarArray::default_macro());
        let b = DftBeam::new(array.clone(), 0.0, 0.0);
        let g = b.gain(Direction::new(0.0, 0.0).unwrap());
        assert!((g - array.peak_gain()).abs() < 1e-9 * g);
        // 5.2 dBi + 10 log10(96)
        assert!((10.0 * g.log10() - 25.02).abs() < 0.01);
    }

    #[test]
    fn gain_is_nonnegative() {
        let array = Arc::new(PlanarArray::default_macro());
        let b = DftBeam::new(array, 0.3, -0.2);
        for i in -179..180 {
            for j in -89..=89 {
                let d = Direction::from_degrees(i as f64, j as f64).unwrap();
                assert!(b.gain(d) >= 0.0);
            }
        }
    }

    #[test]
    fn max_gain_dominates_grid() {
        let (az, el) = SegmentSet::front_half_space();
        let cb = macro_codebook(SegmentSet::uniform(az, el, 3, 2).unwrap());
        for beam in cb.beams() {
            for (s, seg) in cb.segments().iter().enumerate() {
                let grid = segment_grid(seg, cb.resolution()).unwrap();
                let top = grid
                    .points
                    .iter()
                    .map(|&d| beam.gain(d))
                    .fold(0.0f64, f64::max);
                assert_eq!(top, beam.max_gain_per_segment[s]);
            }
        }
    }

    #[test]
    fn boresight_beam_lands_in_central_segment() {
        let (az, el) = SegmentSet::front_half_space();
        let cb = macro_codebook(SegmentSet::uniform(az, el, 3, 1).unwrap());
        // 15 azimuth beams: index 7 of the top (untilted) row is broadside.
        assert_eq!(cb.main_lobe_segment(7).unwrap(), 1);
    }

    #[test]
    fn steered_beam_lands_in_covering_segment() {
        let array = Arc::new(PlanarArray::default_macro());
        let thirty = Direction::from_degrees(30.0, 0.0).unwrap();
        let beam = DftBeam::steered_to(array.clone(), thirty);
        let other = DftBeam::steered_to(array, thirty);
        // 20 degree segments, one of them [20, 40)
        let az = AngleRange::from_degrees(-80.0, 80.0).unwrap();
        let el = AngleRange::from_degrees(-90.0, 90.0).unwrap();
        let set = SegmentSet::uniform(az, el, 8, 1).unwrap();
        let cb = BeamCodebook::new(
            vec![Arc::new(beam), Arc::new(other)],
            set,
            1f64.to_radians(),
        )
        .unwrap();
        let s = cb.main_lobe_segment(0).unwrap();
        let seg = cb.segments().get(s).unwrap();
        assert!(seg.azimuth.contains(30f64.to_radians()));
        assert_eq!(cb.main_lobe_segment(1).unwrap(), s);
    }

    #[test]
    fn fast_consumption_matches_direct_evaluation() {
        let (az, el) = SegmentSet::front_half_space();
        let cb = macro_codebook(SegmentSet::single(az, el).unwrap());
        let allocs = [
            UeAllocation::new(0, 40, 0.5, 3),
            UeAllocation::new(1, 100, 0.2, 22),
            UeAllocation::new(2, 10, 0.73, 60),
            UeAllocation::new(3, 5, 0.1, 22),
        ];
        let seg = cb.segments().get(0).unwrap().clone();
        let direct = crate::emf::segment_consumption(&allocs, &cb, &seg, cb.resolution()).unwrap();
        let fast = cb.consumption(0, &BeamLoad::from_allocations(&allocs));
        assert!((direct - fast).abs() <= 1e-12 * direct, "{direct} {fast}");
        let bound = cb.bound(0, &BeamLoad::from_allocations(&allocs));
        assert!(bound >= fast);
    }

    #[test]
    fn load_aggregates_per_beam() {
        let allocs = [
            UeAllocation::new(0, 2, 1.0, 5),
            UeAllocation::new(1, 3, 1.0, 1),
            UeAllocation::new(2, 4, 1.0, 5),
            UeAllocation::new(3, 0, 1.0, 9),
        ];
        let load = BeamLoad::from_allocations(&allocs);
        assert_eq!(load.entries(), &[(1, 3.0), (5, 6.0)]);
    }
}
