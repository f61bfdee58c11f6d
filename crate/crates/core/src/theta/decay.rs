//! Off-diagonal decay of wavelet-domain operator coefficients.
//!
//! For atoms with supports `I`, `I'` at distance `dist > 0`, coefficients of
//! a Calderón–Zygmund operator obey
//! `|theta| <= C_M min(|I|/|I'|, |I'|/|I|)^(1/2) (min(|I|, |I'|) / dist)^(M+1)`.
//! The reports below fit `C_M` and the empirical decay exponent.

use crate::error::{Error, Result};
use crate::kernel::Kernel1d;
use crate::theta::{SparseTheta, FLOOR};
use crate::wavelet::{line, Interval, WaveletFamily};

#[derive(Debug, Clone, PartialEq)]
pub struct DecayRecord {
    pub row: usize,
    pub col: usize,
    pub level_row: usize,
    pub level_col: usize,
    pub distance: f64,
    pub magnitude: f64,
    /// Structural factor of the bound, without `C_M`.
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub records: Vec<DecayRecord>,
    /// Smallest constant for which every record satisfies the bound.
    pub fitted_constant: f64,
    /// Records exceeding `fitted_constant * bound` (zero unless the fit is
    /// overridden).
    pub violations: usize,
    /// Least-squares slope of `log|theta|` against `log(dist / |I|)` over
    /// same-level detail pairs with nonzero coefficients.
    pub slope: f64,
    pub slope_points: usize,
    pub vanishing_moments: usize,
    /// Same-level detail pairs farther apart than the kernel reach.
    pub far_pairs: usize,
    /// Of those, how many have a nonzero coefficient.
    pub far_nonzero: usize,
}

impl DecayReport {
    /// Header and rows of the per-coefficient CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,level_row,level_col,distance,magnitude,bound,ratio\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{:e},{:e},{:e}\n",
                r.row, r.col, r.level_row, r.level_col, r.distance, r.magnitude, r.bound, r.ratio
            ));
        }
        out
    }
}

pub fn structural_bound(len_a: f64, len_b: f64, dist: f64, moments: usize) -> f64 {
    let ratio = (len_a / len_b).min(len_b / len_a);
    ratio.sqrt() * (len_a.min(len_b) / dist).powi(moments as i32 + 1)
}

/// Slope of the least-squares line through `(x, y)`.
pub fn regression_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Full 1D operator matrix, dense, indexed `[row][col]` in canonical order.
pub fn theta_1d(kernel: &Kernel1d, family: &WaveletFamily, levels: usize) -> Result<Vec<Vec<f64>>> {
    let n = kernel.size;
    let h = kernel.matrix();
    let mut theta = vec![vec![0.0; n]; n];
    let mut blurred = vec![0.0; n];
    for c in 0..n {
        let atom = line::synthesize_atom(line::index_of_flat(n, levels, c), n, family, levels)?;
        h.matvec(&atom, &mut blurred);
        let column = line::forward(&blurred, family, levels)?;
        for (r, v) in column.into_iter().enumerate() {
            theta[r][c] = v;
        }
    }
    Ok(theta)
}

/// Builds the full 1D operator, fits `C_M`, and measures the decay exponent.
///
/// Atoms whose support wraps around the periodic boundary are left out,
/// since their unwrapped intervals do not describe their support.
pub fn verify_decay_1d(kernel: &Kernel1d, family: &WaveletFamily, levels: usize) -> Result<DecayReport> {
    let n = kernel.size;
    let theta = theta_1d(kernel, family, levels)?;
    let moments = family.vanishing_moments();
    let atoms: Vec<(line::Index1d, Interval)> = (0..n)
        .map(|i| {
            let idx = line::index_of_flat(n, levels, i);
            (idx, line::support_interval(idx, family))
        })
        .collect();
    let reach = kernel.max_radius();
    let mut records = Vec::new();
    let mut points = Vec::new();
    let (mut far_pairs, mut far_nonzero) = (0, 0);
    for (r, (ir, sr)) in atoms.iter().enumerate() {
        if sr.start + sr.len > n {
            continue;
        }
        for (c, (ic, sc)) in atoms.iter().enumerate() {
            if sc.start + sc.len > n {
                continue;
            }
            let dist = sr.distance(sc) as f64;
            if dist == 0.0 {
                continue;
            }
            let magnitude = theta[r][c].abs();
            let bound = structural_bound(sr.len as f64, sc.len as f64, dist, moments);
            records.push(DecayRecord {
                row: r,
                col: c,
                level_row: ir.level,
                level_col: ic.level,
                distance: dist,
                magnitude,
                bound,
                ratio: magnitude / bound,
            });
            let same_level_detail = ir.level == ic.level && !ir.approx && !ic.approx;
            if same_level_detail {
                if dist > reach {
                    far_pairs += 1;
                    if magnitude != 0.0 {
                        far_nonzero += 1;
                    }
                }
                if magnitude > FLOOR {
                    points.push(((dist / sr.len as f64).ln(), magnitude.ln()));
                }
            }
        }
    }
    if records.is_empty() {
        return Err(Error::Degenerate(
            "no pair of atoms with disjoint supports; signal too short".into(),
        ));
    }
    let slope = regression_slope(&points).ok_or_else(|| {
        Error::Degenerate("too few same-level pairs with nonzero coefficients".into())
    })?;
    let fitted_constant = records.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let violations = records
        .iter()
        .filter(|r| r.magnitude > fitted_constant * r.bound * (1.0 + 1e-12))
        .count();
    Ok(DecayReport {
        records,
        fitted_constant,
        violations,
        slope,
        slope_points: points.len(),
        vanishing_moments: moments,
        far_pairs,
        far_nonzero,
    })
}

/// Empirical 2D counterpart over the stored entries of `theta`, using the
/// Euclidean gap between support boxes and box side lengths as sizes.
pub fn decay_2d(theta: &SparseTheta) -> Result<DecayReport> {
    let family = theta.family()?;
    let layout = theta.layout()?;
    let n = layout.width();
    let moments = family.vanishing_moments();
    let boxes: Vec<_> = (0..layout.dim())
        .map(|i| {
            let idx = layout.subband_of(i);
            crate::wavelet::support_box(&idx, &layout, &family).map(|b| (idx, b))
        })
        .collect::<Result<_>>()?;
    let inside = |b: &crate::wavelet::SupportBox| b.rows.start + b.rows.len <= n && b.cols.start + b.cols.len <= n;
    let mut records = Vec::new();
    let mut points = Vec::new();
    for (r, c, v) in theta.matrix().iter() {
        let ((ir, br), (ic, bc)) = (&boxes[r], &boxes[c]);
        if !inside(br) || !inside(bc) {
            continue;
        }
        let dist = br.distance(bc);
        if dist == 0.0 {
            continue;
        }
        let (la, lb) = (br.rows.len as f64, bc.rows.len as f64);
        let bound = structural_bound(la, lb, dist, moments);
        records.push(DecayRecord {
            row: r,
            col: c,
            level_row: ir.level,
            level_col: ic.level,
            distance: dist,
            magnitude: v.abs(),
            bound,
            ratio: v.abs() / bound,
        });
        if ir.level == ic.level {
            points.push(((dist / la).ln(), v.abs().ln()));
        }
    }
    if records.is_empty() {
        return Err(Error::Degenerate("no stored pair with separated supports".into()));
    }
    let slope = regression_slope(&points)
        .ok_or_else(|| Error::Degenerate("too few same-level pairs".into()))?;
    let fitted_constant = records.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(DecayReport {
        slope_points: points.len(),
        records,
        fitted_constant,
        violations: 0,
        slope,
        vanishing_moments: moments,
        far_pairs: 0,
        far_nonzero: 0,
    })
}
