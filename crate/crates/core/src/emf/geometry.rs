use std::f64::consts::{FRAC_PI_2, PI};

use super::EmfError;

/// Azimuth/elevation direction relative to the antenna broadside.
///
/// Azimuth lies in `[-pi, pi)`, elevation in `[-pi/2, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self, EmfError> {
        let ok = azimuth.is_finite()
            && elevation.is_finite()
            && (-PI..PI).contains(&azimuth)
            && (-FRAC_PI_2..=FRAC_PI_2).contains(&elevation);
        if ok {
            Ok(Self { azimuth, elevation })
        } else {
            Err(EmfError::InvalidDirection { azimuth, elevation })
        }
    }

    pub fn from_degrees(azimuth: f64, elevation: f64) -> Result<Self, EmfError> {
        Self::new(azimuth.to_radians(), elevation.to_radians())
    }

    /// Wraps the azimuth into `[-pi, pi)` and clamps the elevation.
    pub fn wrapped(azimuth: f64, elevation: f64) -> Self {
        let mut az = (azimuth + PI).rem_euclid(2.0 * PI) - PI;
        if az >= PI {
            az -= 2.0 * PI;
        }
        Self {
            azimuth: az,
            elevation: elevation.clamp(-FRAC_PI_2, FRAC_PI_2),
        }
    }

    #[inline]
    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    #[inline]
    pub fn elevation(&self) -> f64 {
        self.elevation
    }
}

/// Half-open interval of angles `[start, end)` in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRange {
    start: f64,
    end: f64,
}

impl AngleRange {
    pub fn new(start: f64, end: f64) -> Result<Self, EmfError> {
        if start.is_finite() && end.is_finite() && start < end {
            Ok(Self { start, end })
        } else {
            Err(EmfError::EmptyRange { start, end })
        }
    }

    pub fn from_degrees(start: f64, end: f64) -> Result<Self, EmfError> {
        Self::new(start.to_radians(), end.to_radians())
    }

    #[inline]
    pub fn start(&self) -> f64 {
        self.start
    }

    #[inline]
    pub fn end(&self) -> f64 {
        self.end
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.start <= x && x < self.end
    }

    fn overlaps(&self, other: &AngleRange) -> bool {
        self.start < other.end && other.start < self.end
    }

    fn within(&self, outer: &AngleRange) -> bool {
        outer.start <= self.start && self.end <= outer.end
    }
}

/// Angular cell with its actual-EIRP threshold `C_s` and maximum per-slot
/// EIRP `c*_s`, both in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: usize,
    pub azimuth: AngleRange,
    pub elevation: AngleRange,
    pub threshold: f64,
    pub max_eirp: f64,
}

impl Segment {
    /// Segment with no limits yet (both set to infinity).
    pub fn new(id: usize, azimuth: AngleRange, elevation: AngleRange) -> Self {
        Self {
            id,
            azimuth,
            elevation,
            threshold: f64::INFINITY,
            max_eirp: f64::INFINITY,
        }
    }

    pub fn with_limits(mut self, threshold: f64, max_eirp: f64) -> Result<Self, EmfError> {
        self.set_limits(threshold, max_eirp)?;
        Ok(self)
    }

    pub fn set_limits(&mut self, threshold: f64, max_eirp: f64) -> Result<(), EmfError> {
        if !(threshold > 0.0 && max_eirp > 0.0) {
            return Err(EmfError::InvalidLimits { threshold, max_eirp });
        }
        self.threshold = threshold;
        self.max_eirp = max_eirp;
        Ok(())
    }

    pub fn contains(&self, d: Direction) -> bool {
        self.azimuth.contains(d.azimuth()) && self.elevation.contains(d.elevation())
    }
}

/// Segments partitioning a rectangular angular domain (the sector's field of
/// view).
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSet {
    azimuth: AngleRange,
    elevation: AngleRange,
    segments: Vec<Segment>,
}

impl SegmentSet {
    /// Checks that the segments lie in the domain, do not overlap and cover
    /// it. Segment ids must be `0..n` in order.
    pub fn new(
        azimuth: AngleRange,
        elevation: AngleRange,
        segments: Vec<Segment>,
    ) -> Result<Self, EmfError> {
        if segments.is_empty() {
            return Err(EmfError::NotAPartition("no segments".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if s.id != i {
                return Err(EmfError::NotAPartition(format!(
                    "segment at position {i} has id {}",
                    s.id
                )));
            }
            if !s.azimuth.within(&azimuth) || !s.elevation.within(&elevation) {
                return Err(EmfError::NotAPartition(format!(
                    "segment {i} leaves the domain"
                )));
            }
        }
        for (i, a) in segments.iter().enumerate() {
            for b in &segments[i + 1..] {
                if a.azimuth.overlaps(&b.azimuth) && a.elevation.overlaps(&b.elevation) {
                    return Err(EmfError::NotAPartition(format!(
                        "segments {} and {} overlap",
                        a.id, b.id
                    )));
                }
            }
        }
        let area: f64 = segments
            .iter()
            .map(|s| s.azimuth.width() * s.elevation.width())
            .sum();
        let domain = azimuth.width() * elevation.width();
        if ((area - domain) / domain).abs() > 1e-9 {
            return Err(EmfError::NotAPartition(format!(
                "segments cover {area} sr-rad of {domain}"
            )));
        }
        Ok(Self {
            azimuth,
            elevation,
            segments,
        })
    }

    /// One segment covering the whole domain.
    pub fn single(azimuth: AngleRange, elevation: AngleRange) -> Result<Self, EmfError> {
        Self::new(azimuth, elevation, vec![Segment::new(0, azimuth, elevation)])
    }

    /// `n_az x n_el` equal rectangles, ids increasing along azimuth first.
    pub fn uniform(
        azimuth: AngleRange,
        elevation: AngleRange,
        n_az: usize,
        n_el: usize,
    ) -> Result<Self, EmfError> {
        if n_az == 0 || n_el == 0 {
            return Err(EmfError::NotAPartition("zero segment count".into()));
        }
        let edges = |r: AngleRange, n: usize| -> Vec<f64> {
            (0..=n)
                .map(|i| {
                    if i == n {
                        r.end()
                    } else {
                        r.start() + r.width() * i as f64 / n as f64
                    }
                })
                .collect()
        };
        let az_edges = edges(azimuth, n_az);
        let el_edges = edges(elevation, n_el);
        let mut segments = Vec::with_capacity(n_az * n_el);
        for j in 0..n_el {
            for i in 0..n_az {
                let id = segments.len();
                segments.push(Segment::new(
                    id,
                    AngleRange::new(az_edges[i], az_edges[i + 1])?,
                    AngleRange::new(el_edges[j], el_edges[j + 1])?,
                ));
            }
        }
        Self::new(azimuth, elevation, segments)
    }

    /// Front half-space of a sector antenna: azimuth and elevation in
    /// `[-90deg, 90deg)`.
    pub fn front_half_space() -> (AngleRange, AngleRange) {
        let r = AngleRange::new(-FRAC_PI_2, FRAC_PI_2).expect("static range");
        (r, r)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Segment> {
        self.segments.get(id)
    }

    pub fn get_mut(&mut self, id: usize) -> Option<&mut Segment> {
        self.segments.get_mut(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter()
    }

    pub fn azimuth(&self) -> AngleRange {
        self.azimuth
    }

    pub fn elevation(&self) -> AngleRange {
        self.elevation
    }

    /// Segment containing `d`, if `d` is inside the domain.
    pub fn locate(&self, d: Direction) -> Option<usize> {
        self.segments.iter().position(|s| s.contains(d))
    }
}

/// Regular grid over a segment: cell centres of an `n_el x n_az` split,
/// stored row-major (elevation outer).
#[derive(Debug, Clone)]
pub struct SegmentGrid {
    pub n_az: usize,
    pub n_el: usize,
    pub points: Vec<Direction>,
}

/// Grid with spacing as close to `resolution` as an integer split allows.
pub fn segment_grid(segment: &Segment, resolution: f64) -> Result<SegmentGrid, EmfError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(EmfError::InvalidResolution(resolution));
    }
    let count = |r: AngleRange| ((r.width() / resolution).round() as usize).max(1);
    let n_az = count(segment.azimuth);
    let n_el = count(segment.elevation);
    let step_az = segment.azimuth.width() / n_az as f64;
    let step_el = segment.elevation.width() / n_el as f64;
    let mut points = Vec::with_capacity(n_az * n_el);
    for j in 0..n_el {
        let el = segment.elevation.start() + (j as f64 + 0.5) * step_el;
        for i in 0..n_az {
            let az = segment.azimuth.start() + (i as f64 + 0.5) * step_az;
            points.push(Direction::new(az, el)?);
        }
    }
    Ok(SegmentGrid {
        n_az,
        n_el,
        points,
    })
}
