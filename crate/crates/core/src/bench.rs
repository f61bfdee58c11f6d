//! Timing harness comparing the direct blur with the wavelet-domain
//! operator.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::image::GaussianStream;
use crate::kernel::{ExactOperator, KernelSpec};
use crate::theta::{build_theta_thresholded, operator_error_with, SparseTheta, ThetaOperator};
use crate::wavelet::{default_levels, WaveletFamily};

pub const CSV_HEADER: &str = "N,k,nnz,t_exact_ms,t_sparse_ms,speedup,mc_error";
pub const MIN_REPS: usize = 20;

/// Median wall time of `reps` calls of `f`, in milliseconds.
pub fn median_ms(reps: usize, mut f: impl FnMut()) -> f64 {
    let mut times: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let m = times.len() / 2;
    if times.len() % 2 == 1 {
        times[m]
    } else {
        0.5 * (times[m - 1] + times[m])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    /// Per-pixel budget label; `None` for an operator without one.
    pub k: Option<usize>,
    pub nnz: usize,
    pub t_exact_ms: f64,
    pub t_sparse_ms: f64,
    pub speedup: f64,
    pub mc_error: f64,
}

impl BenchRow {
    pub fn to_csv(&self) -> String {
        let k = self.k.map(|k| k.to_string()).unwrap_or_else(|| "full".into());
        format!(
            "{},{},{},{:.6},{:.6},{:.4},{:.6e}",
            self.n, k, self.nnz, self.t_exact_ms, self.t_sparse_ms, self.speedup, self.mc_error
        )
    }
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

/// Times one application of `exact` against one application of `theta`
/// (forward transform, sparse product, inverse transform), median of
/// `reps >= 20` runs each.
pub fn bench_operator(
    exact: &ExactOperator,
    theta: &SparseTheta,
    k: Option<usize>,
    reps: usize,
    seed: u64,
) -> Result<BenchRow> {
    if reps < MIN_REPS {
        return Err(Error::InvalidParameter(format!("need at least {MIN_REPS} repetitions, got {reps}")));
    }
    let n = exact.size();
    let mut op = ThetaOperator::from_theta(theta)?;
    if op.dim() != n * n {
        return Err(Error::Dimension(format!("{}-pixel operator for a {n}x{n} kernel", op.dim())));
    }
    let x = GaussianStream::new(seed).fill(n * n);
    let mut y = vec![0.0; n * n];
    let t_exact_ms = median_ms(reps, || exact.apply_slice(&x, &mut y));
    let t_sparse_ms = median_ms(reps, || op.apply(&x, &mut y));
    let mc_error = operator_error_with(theta, exact, 5, seed)?;
    Ok(BenchRow {
        n,
        k,
        nnz: theta.nnz(),
        t_exact_ms,
        t_sparse_ms,
        speedup: t_exact_ms / t_sparse_ms,
        mc_error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub nnz: usize,
    pub madds: u64,
    pub t_sparse_ms: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Apply cost of `Theta_{T_k}` on the default kernel for each size, with the
/// default depth.
pub fn scaling_sweep(sizes: &[usize], k: usize, family: &WaveletFamily, reps: usize) -> Result<Vec<ScalingRow>> {
    sizes
        .iter()
        .map(|&n| {
            let levels = default_levels(n);
            let theta = build_theta_thresholded(&KernelSpec::default_for(n), family, levels, k)?;
            let mut op = ThetaOperator::from_theta(&theta)?;
            let x = GaussianStream::new(n as u64).fill(n * n);
            let mut y = vec![0.0; n * n];
            op.apply(&x, &mut y);
            let madds = op.madds();
            let t_sparse_ms = median_ms(reps, || op.apply(&x, &mut y));
            Ok(ScalingRow {
                n,
                nnz: theta.nnz(),
                madds,
                t_sparse_ms,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_fixed() {
        assert_eq!(to_csv(&[]), "N,k,nnz,t_exact_ms,t_sparse_ms,speedup,mc_error\n");
    }

    #[test]
    fn median_of_sorted_times() {
        let mut calls = 0;
        let m = median_ms(21, || calls += 1);
        assert_eq!(calls, 21);
        assert!(m >= 0.0);
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x| (x, 3.0 * x * x)).collect();
        assert!((loglog_slope(&pts) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bench_row_shape() {
        let spec = KernelSpec::default_for(16);
        let family = WaveletFamily::haar();
        let theta = crate::theta::build_theta(&spec, &family, 2).unwrap();
        let exact = ExactOperator::new(&spec);
        let row = bench_operator(&exact, &theta, None, 20, 1).unwrap();
        assert_eq!(row.n, 16);
        assert!(row.mc_error < 1e-9);
        assert!(row.to_csv().starts_with("16,full,"));
        assert!(bench_operator(&exact, &theta, None, 5, 1).is_err());
    }
}
