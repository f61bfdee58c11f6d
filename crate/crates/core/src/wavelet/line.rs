//! One-dimensional transform. Canonical order: `[a_J, d_J, d_{J-1}, ..., d_1]`.

use super::{analyze, synthesize, Interval, WaveletFamily};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Index1d {
    pub level: usize,
    pub approx: bool,
    pub position: usize,
}

fn check(n: usize, levels: usize) -> Result<()> {
    if levels == 0 || n == 0 || !n.is_multiple_of(1usize << levels.min(63)) || levels >= 63 {
        return Err(Error::Level(format!("2^{levels} does not divide length {n}")));
    }
    Ok(())
}

/// Offset of the band `(level, approx)` in the canonical order.
pub fn band_offset(n: usize, level: usize, approx: bool) -> usize {
    if approx {
        0
    } else {
        n >> level
    }
}

pub fn flat_index(n: usize, levels: usize, idx: Index1d) -> Result<usize> {
    check(n, levels)?;
    if idx.level == 0 || idx.level > levels || (idx.approx && idx.level != levels) {
        return Err(Error::Index(format!("no 1D band {:?}", idx)));
    }
    if idx.position >= n >> idx.level {
        return Err(Error::Index(format!("position {} out of band", idx.position)));
    }
    Ok(band_offset(n, idx.level, idx.approx) + idx.position)
}

pub fn index_of_flat(n: usize, levels: usize, i: usize) -> Index1d {
    let coarse = n >> levels;
    if i < coarse {
        return Index1d { level: levels, approx: true, position: i };
    }
    // detail band at level j occupies [n >> j, n >> (j - 1))
    let level = (1..=levels).find(|&j| i >= n >> j && i < n >> (j - 1)).expect("index in range");
    Index1d { level, approx: false, position: i - (n >> level) }
}

pub fn forward(signal: &[f64], family: &WaveletFamily, levels: usize) -> Result<Vec<f64>> {
    let n = signal.len();
    check(n, levels)?;
    let mut out = vec![0.0; n];
    let mut cur = signal.to_vec();
    let mut a = vec![0.0; n / 2];
    let mut d = vec![0.0; n / 2];
    let mut len = n;
    for _ in 0..levels {
        let half = len / 2;
        analyze(&cur[..len], family.lowpass(), family.highpass(), &mut a[..half], &mut d[..half]);
        out[half..len].copy_from_slice(&d[..half]);
        cur[..half].copy_from_slice(&a[..half]);
        len = half;
    }
    out[..len].copy_from_slice(&cur[..len]);
    Ok(out)
}

pub fn inverse(coeffs: &[f64], family: &WaveletFamily, levels: usize) -> Result<Vec<f64>> {
    let n = coeffs.len();
    check(n, levels)?;
    let mut len = n >> levels;
    let mut cur = coeffs[..len].to_vec();
    let mut next = vec![0.0; n];
    for _ in 0..levels {
        synthesize(&cur, &coeffs[len..2 * len], family.lowpass(), family.highpass(), &mut next[..2 * len]);
        len *= 2;
        cur = next[..len].to_vec();
    }
    Ok(cur)
}

pub fn synthesize_atom(idx: Index1d, n: usize, family: &WaveletFamily, levels: usize) -> Result<Vec<f64>> {
    let i = flat_index(n, levels, idx)?;
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    inverse(&e, family, levels)
}

pub fn support_interval(idx: Index1d, family: &WaveletFamily) -> Interval {
    super::support_interval(idx.level, idx.position, family.support_length())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GaussianStream;

    #[test]
    fn round_trip_and_energy() {
        let fam = WaveletFamily::db3();
        let x = GaussianStream::new(11).fill(256);
        let c = forward(&x, &fam, 5).unwrap();
        let e0: f64 = x.iter().map(|v| v * v).sum();
        let e1: f64 = c.iter().map(|v| v * v).sum();
        assert!((e0 - e1).abs() < 1e-10 * e0);
        let back = inverse(&c, &fam, 5).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn index_mapping() {
        for i in 0..64 {
            let idx = index_of_flat(64, 3, i);
            assert_eq!(flat_index(64, 3, idx).unwrap(), i);
        }
        assert!(flat_index(64, 3, Index1d { level: 2, approx: true, position: 0 }).is_err());
        assert!(forward(&[0.0; 12], &WaveletFamily::haar(), 3).is_err());
    }

    #[test]
    fn polynomial_interior_details_vanish() {
        // linear ramp: db2 annihilates degree < 2 away from the wrap seam
        let fam = WaveletFamily::db2();
        let x: Vec<f64> = (0..64).map(|i| 0.3 + 0.01 * i as f64).collect();
        let c = forward(&x, &fam, 1).unwrap();
        for (p, d) in c[32..].iter().enumerate() {
            if 2 * p + fam.support_length() <= 64 {
                assert!(d.abs() < 1e-12, "{p}: {d}");
            }
        }
    }
}
