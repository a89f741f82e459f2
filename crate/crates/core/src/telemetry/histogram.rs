//! The 42-bin FPS histogram and its coarse 5-class view.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::distribution::ClassDistribution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const NUM_BINS: usize = 42;
pub const NUM_CLASSES: usize = 5;

/// Class cut points in Hz. Each one coincides with a bin lower edge.
pub const CLASS_THRESHOLDS_HZ: [f64; 4] = [25.0, 45.0, 60.0, 145.0];

/// First bin index of classes 1..=4.
const CLASS_START_BIN: [usize; 4] = [4, 8, 11, 28];

/// Lower edge of bin `i` in Hz.
pub fn bin_lower_edge(i: usize) -> f64 {
    match i {
        0 => 0.0,
        1..=38 => 10.0 + 5.0 * (i as f64 - 1.0),
        39 => 200.0,
        40 => 300.0,
        41 => 400.0,
        _ => panic!("bin index {i} out of range"),
    }
}

/// Upper edge of bin `i` in Hz (`inf` for the overflow bin).
pub fn bin_upper_edge(i: usize) -> f64 {
    if i + 1 < NUM_BINS {
        bin_lower_edge(i + 1)
    } else {
        f64::INFINITY
    }
}

/// Bin containing `fps`. Intervals are closed below and open above.
pub fn bin_index(fps: f64) -> Result<usize> {
    if !fps.is_finite() || fps < 0.0 {
        return Err(Error::InvalidInput(format!("fps must be finite and non-negative, got {fps}")));
    }
    let idx = if fps < 10.0 {
        0
    } else if fps < 200.0 {
        // (fps - 10) / 5 is exact for every edge, so floor is safe here.
        1 + ((fps - 10.0) / 5.0).floor() as usize
    } else if fps < 300.0 {
        39
    } else if fps < 400.0 {
        40
    } else {
        41
    };
    Ok(idx)
}

/// Coarse class of a bin.
pub fn class_of_bin(bin: usize) -> usize {
    CLASS_START_BIN.iter().take_while(|&&start| bin >= start).count()
}

/// Counts of FPS samples in each of the 42 bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FpsHistogram42 {
    counts: [u64; NUM_BINS],
}

impl Default for FpsHistogram42 {
    fn default() -> Self {
        Self { counts: [0; NUM_BINS] }
    }
}

impl FpsHistogram42 {
    pub fn new(counts: [u64; NUM_BINS]) -> Self {
        Self { counts }
    }

    pub fn from_slice(counts: &[u64]) -> Result<Self> {
        let counts: [u64; NUM_BINS] = counts
            .try_into()
            .map_err(|_| Error::ShapeMismatch { expected: NUM_BINS, got: counts.len() })?;
        Ok(Self { counts })
    }

    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let mut h = Self::default();
        for &s in samples {
            h.add_sample(s)?;
        }
        Ok(h)
    }

    pub fn add_sample(&mut self, fps: f64) -> Result<()> {
        self.counts[bin_index(fps)?] += 1;
        Ok(())
    }

    pub fn counts(&self) -> &[u64; NUM_BINS] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &FpsHistogram42) {
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += b;
        }
    }

    /// Aggregates into the five smoothness classes.
    pub fn to_classes(&self) -> [u64; NUM_CLASSES] {
        aggregate_to_classes(self)
    }
}

impl Serialize for FpsHistogram42 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.counts.as_slice().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FpsHistogram42 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<u64>::deserialize(deserializer)?;
        FpsHistogram42::from_slice(&v).map_err(serde::de::Error::custom)
    }
}

pub fn aggregate_to_classes(h: &FpsHistogram42) -> [u64; NUM_CLASSES] {
    let mut out = [0u64; NUM_CLASSES];
    for (bin, &c) in h.counts.iter().enumerate() {
        out[class_of_bin(bin)] += c;
    }
    out
}

/// Normalizes raw counts into a distribution.
pub fn normalize<S: Scalar>(counts: &[u64]) -> Result<ClassDistribution<S>> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let t = total as f64;
    let probs = counts.iter().map(|&c| S::of(c as f64 / t)).collect();
    ClassDistribution::new(probs)
}

/// Representative Hz value of a bin when mapping a histogram back to a rate.
pub fn bin_representative(bin: usize) -> f64 {
    match bin {
        0 => 5.0,
        _ => bin_lower_edge(bin),
    }
}

/// Bottom-5% frame rate: representative value of the first bin at which the
/// cumulative fraction reaches 0.05.
pub fn fps_floor_95(h: &FpsHistogram42) -> Result<f64> {
    let total = h.total();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let mut cum = 0u64;
    for (bin, &c) in h.counts.iter().enumerate() {
        cum += c;
        // cum / total >= 0.05, in integers.
        if cum * 20 >= total {
            return Ok(bin_representative(bin));
        }
    }
    unreachable!("cumulative count reaches total")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(bin: usize, n: u64) -> FpsHistogram42 {
        let mut c = [0; NUM_BINS];
        c[bin] = n;
        FpsHistogram42::new(c)
    }

    #[test]
    fn bin_examples() {
        assert_eq!(bin_index(7.0).unwrap(), 0);
        assert_eq!(bin_index(10.0).unwrap(), 1);
        assert_eq!(bin_index(62.5).unwrap(), 11);
        assert_eq!(bin_index(450.0).unwrap(), 41);
        assert_eq!(bin_index(0.0).unwrap(), 0);
        assert_eq!(bin_index(199.999).unwrap(), 38);
        assert_eq!(bin_index(200.0).unwrap(), 39);
        assert_eq!(bin_index(300.0).unwrap(), 40);
        assert_eq!(bin_index(400.0).unwrap(), 41);
    }

    #[test]
    fn bin_rejects_bad_input() {
        assert!(bin_index(-0.1).is_err());
        assert!(bin_index(f64::NAN).is_err());
        assert!(bin_index(f64::INFINITY).is_err());
    }

    #[test]
    fn edges_are_consistent() {
        for i in 0..NUM_BINS {
            assert_eq!(bin_index(bin_lower_edge(i)).unwrap(), i);
        }
        assert_eq!(bin_lower_edge(38), 195.0);
        assert_eq!(bin_upper_edge(38), 200.0);
    }

    #[test]
    fn aggregation_examples() {
        assert_eq!(aggregate_to_classes(&single(0, 9)), [9, 0, 0, 0, 0]);
        let ones = FpsHistogram42::new([1; NUM_BINS]);
        assert_eq!(aggregate_to_classes(&ones), [4, 4, 3, 17, 14]);
        assert_eq!(aggregate_to_classes(&FpsHistogram42::default()), [0; 5]);
    }

    #[test]
    fn thresholds_are_class_boundaries() {
        for (c, &t) in CLASS_THRESHOLDS_HZ.iter().enumerate() {
            let bin = bin_index(t).unwrap();
            assert_eq!(bin_lower_edge(bin), t);
            assert_eq!(class_of_bin(bin), c + 1);
            assert_eq!(class_of_bin(bin - 1), c);
        }
    }

    #[test]
    fn normalize_examples() {
        let d = normalize::<f64>(&[1, 1, 1, 1, 1]).unwrap();
        assert_eq!(d.probs(), &[0.2; 5]);
        let d = normalize::<f64>(&[3, 1, 0, 0, 0]).unwrap();
        assert_eq!(d.probs(), &[0.75, 0.25, 0.0, 0.0, 0.0]);
        assert!(matches!(normalize::<f64>(&[0; 5]), Err(Error::EmptyHistogram)));
    }

    #[test]
    fn floor_examples() {
        assert_eq!(fps_floor_95(&single(11, 50)).unwrap(), 60.0);
        let mut c = [0; NUM_BINS];
        c[1] = 5;
        c[10] = 95;
        assert_eq!(fps_floor_95(&FpsHistogram42::new(c)).unwrap(), 10.0);
        c[1] = 4;
        c[10] = 96;
        assert_eq!(fps_floor_95(&FpsHistogram42::new(c)).unwrap(), 55.0);
        assert_eq!(fps_floor_95(&single(0, 3)).unwrap(), 5.0);
        assert_eq!(fps_floor_95(&single(41, 3)).unwrap(), 400.0);
        assert!(fps_floor_95(&FpsHistogram42::default()).is_err());
    }

    #[test]
    fn serde_roundtrip_and_length_check() {
        let h = single(3, 2);
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(serde_json::from_str::<FpsHistogram42>(&s).unwrap(), h);
        assert!(serde_json::from_str::<FpsHistogram42>("[1,2,3]").is_err());
    }
}
