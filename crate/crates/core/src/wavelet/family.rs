use std::f64::consts::SQRT_2;
use std::fmt;

use crate::error::{Error, Result};

/// Orthonormal compactly supported wavelet, described by its analysis
/// lowpass filter. The highpass filter follows the quadrature-mirror rule
/// `g[n] = (-1)^n h[L-1-n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFamily {
    name: String,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
    vanishing_moments: usize,
}

impl WaveletFamily {
    pub fn new(name: impl Into<String>, lowpass: Vec<f64>, vanishing_moments: usize) -> Result<Self> {
        let l = lowpass.len();
        if l < 2 || !l.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "wavelet filter must have an even number of taps, got {l}"
            )));
        }
        let sum: f64 = lowpass.iter().sum();
        if (sum - SQRT_2).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "lowpass taps sum to {sum}, expected sqrt(2)"
            )));
        }
        for shift in (0..l).step_by(2) {
            let c: f64 = (0..l - shift).map(|n| lowpass[n] * lowpass[n + shift]).sum();
            let expected = if shift == 0 { 1.0 } else { 0.0 };
            if (c - expected).abs() > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "lowpass filter is not orthonormal at shift {shift}"
                )));
            }
        }
        let highpass = (0..l)
            .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 } * lowpass[l - 1 - n])
            .collect();
        Ok(Self {
            name: name.into(),
            lowpass,
            highpass,
            vanishing_moments,
        })
    }

    pub fn haar() -> Self {
        Self::new("haar", vec![1.0 / SQRT_2, 1.0 / SQRT_2], 1).expect("valid filter")
    }

    /// Daubechies wavelet with two vanishing moments (4 taps).
    pub fn db2() -> Self {
        let s3 = 3f64.sqrt();
        let d = 4.0 * SQRT_2;
        Self::new(
            "db2",
            vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d],
            2,
        )
        .expect("valid filter")
    }

    /// Daubechies wavelet with three vanishing moments (6 taps).
    pub fn db3() -> Self {
        let s10 = 10f64.sqrt();
        let r = (5.0 + 2.0 * s10).sqrt();
        let d = 16.0 * SQRT_2;
        Self::new(
            "db3",
            vec![
                (1.0 + s10 + r) / d,
                (5.0 + s10 + 3.0 * r) / d,
                (10.0 - 2.0 * s10 + 2.0 * r) / d,
                (10.0 - 2.0 * s10 - 2.0 * r) / d,
                (5.0 + s10 - 3.0 * r) / d,
                (1.0 + s10 - r) / d,
            ],
            3,
        )
        .expect("valid filter")
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(Self::haar()),
            "db2" => Ok(Self::db2()),
            "db3" => Ok(Self::db3()),
            other => Err(Error::InvalidParameter(format!(
                "unknown wavelet `{other}` (expected haar, db2 or db3)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn vanishing_moments(&self) -> usize {
        self.vanishing_moments
    }

    pub fn support_length(&self) -> usize {
        self.lowpass.len()
    }
}

impl Default for WaveletFamily {
    fn default() -> Self {
        Self::db2()
    }
}

impl fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_filters_are_orthonormal_with_moments() {
        for fam in [WaveletFamily::haar(), WaveletFamily::db2(), WaveletFamily::db3()] {
            let g = fam.highpass();
            // discrete moments of the highpass filter vanish up to M - 1
            for p in 0..fam.vanishing_moments() {
                let m: f64 = g
                    .iter()
                    .enumerate()
                    .map(|(n, v)| v * (n as f64).powi(p as i32))
                    .sum();
                assert!(m.abs() < 1e-10, "{} moment {p}: {m}", fam.name());
            }
            assert_eq!(fam.support_length(), 2 * fam.vanishing_moments());
        }
    }

    #[test]
    fn db3_matches_reference_taps() {
        let reference = [
            0.332_670_552_950_082_6,
            0.806_891_509_311_092_4,
            0.459_877_502_118_491_4,
            -0.135_011_020_010_254_6,
            -0.085_441_273_882_026_7,
            0.035_226_291_885_709_5,
        ];
        for (a, b) in WaveletFamily::db3().lowpass().iter().zip(reference) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_orthonormal() {
        assert!(WaveletFamily::new("bad", vec![1.0, 0.5], 1).is_err());
        assert!(WaveletFamily::new("odd", vec![SQRT_2], 0).is_err());
        assert!(WaveletFamily::from_name("sym9").is_err());
        assert_eq!(WaveletFamily::from_name("DB2").unwrap(), WaveletFamily::db2());
    }
}
