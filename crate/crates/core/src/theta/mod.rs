//! The blur operator in the wavelet domain: `Theta = W H W^T`.
//!
//! Column `c` of `Theta` is the forward transform of `H` applied to the
//! basis atom `c`. Rows and columns share the canonical coefficient order.

pub mod decay;
mod io;

pub use io::{load_theta, save_theta};

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{norm2, GaussianStream, Image};
use crate::kernel::{ExactOperator, KernelSpec};
use crate::sparse::CsrMatrix;
use crate::wavelet::{synthesize_atom, Layout, SubbandIndex, Transform2d, WaveletFamily};

/// Magnitudes at or below this are not stored.
pub const FLOOR: f64 = 1e-14;

/// How the stored support was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Full,
    /// At most `k` entries per pixel, largest magnitudes first.
    PerPixel(usize),
    /// Support fixed in advance by a neighbourhood pattern.
    Pattern,
    Unspecified,
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Full => f.write_str("full"),
            Budget::PerPixel(k) => write!(f, "k={k}"),
            Budget::Pattern => f.write_str("pattern"),
            Budget::Unspecified => f.write_str("unspecified"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaMeta {
    pub family: String,
    pub levels: usize,
    pub kernel_id: String,
    pub budget: Budget,
}

/// Sparse wavelet-domain operator matrix plus the transform it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTheta {
    matrix: CsrMatrix,
    meta: ThetaMeta,
}

impl SparseTheta {
    pub fn new(matrix: CsrMatrix, meta: ThetaMeta) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::Dimension(format!(
                "theta must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if matrix.values().iter().any(|&v| v == 0.0 || !v.is_finite()) {
            return Err(Error::Format("theta stores zero or non-finite values".into()));
        }
        Ok(Self { matrix, meta })
    }

    pub fn identity(dim: usize, family: &WaveletFamily, levels: usize) -> Self {
        Self {
            matrix: CsrMatrix::identity(dim),
            meta: ThetaMeta {
                family: family.name().into(),
                levels,
                kernel_id: "identity".into(),
                budget: Budget::Full,
            },
        }
    }

    pub fn zeros(dim: usize, family: &WaveletFamily, levels: usize) -> Self {
        Self {
            matrix: CsrMatrix::zeros(dim, dim),
            meta: ThetaMeta {
                family: family.name().into(),
                levels,
                kernel_id: "zero".into(),
                budget: Budget::Full,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    /// Stored entries per pixel.
    pub fn density(&self) -> f64 {
        self.nnz() as f64 / self.dim() as f64
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn meta(&self) -> &ThetaMeta {
        &self.meta
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.meta.budget = budget;
        self
    }

    pub fn family(&self) -> Result<WaveletFamily> {
        WaveletFamily::from_name(&self.meta.family)
    }

    /// Image side length, assuming a square image.
    pub fn side(&self) -> usize {
        (self.dim() as f64).sqrt().round() as usize
    }

    pub fn layout(&self) -> Result<Layout> {
        let n = self.side();
        if n * n != self.dim() {
            return Err(Error::Dimension(format!("dimension {} is not a square", self.dim())));
        }
        Layout::new(n, n, self.meta.levels)
    }
}

/// Column-wise evaluation of `Theta` from prototype atoms.
///
/// Atoms of one band are periodic translates of each other, so each band is
/// synthesized once and shifted.
struct ColumnBuilder {
    layout: Layout,
    family: WaveletFamily,
    op: ExactOperator,
    /// Per band: nonzero samples `(row, col, value)` of the atom at (0, 0).
    prototypes: Vec<Vec<(usize, usize, f64)>>,
}

impl ColumnBuilder {
    fn new(spec: &KernelSpec, family: &WaveletFamily, levels: usize) -> Result<Self> {
        let n = spec.size;
        let layout = Layout::new(n, n, levels)?;
        let prototypes = layout
            .bands()
            .iter()
            .map(|b| {
                let idx = SubbandIndex {
                    level: b.level,
                    orientation: b.orientation,
                    row: 0,
                    col: 0,
                };
                let atom = synthesize_atom(&idx, (n, n), family, levels)?;
                Ok(atom
                    .data()
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, &v)| (i / n, i % n, v))
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layout,
            family: family.clone(),
            op: ExactOperator::new(spec),
            prototypes,
        })
    }

    fn scratch(&self) -> (Transform2d, Vec<f64>, Vec<f64>) {
        let n = self.layout.dim();
        (
            Transform2d::new(self.family.clone(), self.layout.clone()),
            vec![0.0; n],
            vec![0.0; n],
        )
    }

    /// Dense column `c` of `Theta` written into `coeffs`.
    fn column(&self, c: usize, tr: &mut Transform2d, blurred: &mut [f64], coeffs: &mut [f64]) {
        let n = self.layout.width();
        let band_pos = self.layout.bands().partition_point(|b| b.offset + b.len() <= c);
        let band = &self.layout.bands()[band_pos];
        let local = c - band.offset;
        let (dr, dc) = ((local / band.cols) << band.level, (local % band.cols) << band.level);
        blurred.fill(0.0);
        let columns = self.op.transpose_matrix();
        for &(r, cc, v) in &self.prototypes[band_pos] {
            let y = ((r + dr) % n) * n + (cc + dc) % n;
            let (rows, weights) = columns.row(y);
            for (&x, &w) in rows.iter().zip(weights) {
                blurred[x as usize] += w * v;
            }
        }
        tr.forward(blurred, coeffs);
    }

    fn sparse_column(
        &self,
        c: usize,
        scratch: &mut (Transform2d, Vec<f64>, Vec<f64>),
        keep_rows: Option<&[u32]>,
    ) -> Vec<(u32, f64)> {
        let (tr, blurred, coeffs) = scratch;
        self.column(c, tr, blurred, coeffs);
        match keep_rows {
            Some(rows) => rows
                .iter()
                .map(|&r| (r, coeffs[r as usize]))
                .filter(|(_, v)| v.abs() > FLOOR)
                .collect(),
            None => coeffs
                .iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > FLOOR)
                .map(|(r, &v)| (r as u32, v))
                .collect(),
        }
    }

    fn columns(&self, range: std::ops::Range<usize>) -> Vec<Vec<(u32, f64)>> {
        range
            .into_par_iter()
            .map_init(|| self.scratch(), |s, c| self.sparse_column(c, s, None))
            .collect()
    }

    fn meta(&self, spec: &KernelSpec, budget: Budget) -> ThetaMeta {
        ThetaMeta {
            family: self.family.name().into(),
            levels: self.layout.levels(),
            kernel_id: spec.id(),
            budget,
        }
    }
}

/// Full `Theta` of the kernel, with entries of magnitude at most [`FLOOR`]
/// dropped.
pub fn build_theta(spec: &KernelSpec, family: &WaveletFamily, levels: usize) -> Result<SparseTheta> {
    let builder = ColumnBuilder::new(spec, family, levels)?;
    let dim = builder.layout.dim();
    let columns = builder.columns(0..dim);
    Ok(SparseTheta {
        matrix: CsrMatrix::from_columns(dim, &columns),
        meta: builder.meta(spec, Budget::Full),
    })
}

/// Entries of `Theta` at the positions listed per column in `support`
/// (row indices sorted), computed without forming the full matrix.
pub(crate) fn build_theta_on_support(
    spec: &KernelSpec,
    family: &WaveletFamily,
    levels: usize,
    support_by_column: &CsrMatrix,
    budget: Budget,
) -> Result<SparseTheta> {
    let builder = ColumnBuilder::new(spec, family, levels)?;
    let dim = builder.layout.dim();
    if support_by_column.rows() != dim {
        return Err(Error::Geometry(format!(
            "support of dimension {} for an operator of dimension {dim}",
            support_by_column.rows()
        )));
    }
    let columns: Vec<_> = (0..dim)
        .into_par_iter()
        .map_init(
            || builder.scratch(),
            |s, c| builder.sparse_column(c, s, Some(support_by_column.row(c).0)),
        )
        .collect();
    Ok(SparseTheta {
        matrix: CsrMatrix::from_columns(dim, &columns),
        meta: builder.meta(spec, budget),
    })
}

/// Total order used for selection: larger magnitude first, then smaller
/// `(row, col)`.
fn rank_order(a: &(f64, u32, u32), b: &(f64, u32, u32)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
}

/// Keeps the `budget` best entries of `candidates` (unordered).
fn select_top(candidates: &mut Vec<(f64, u32, u32)>, budget: usize) {
    if candidates.len() > budget {
        if budget == 0 {
            candidates.clear();
            return;
        }
        candidates.select_nth_unstable_by(budget - 1, rank_order);
        candidates.truncate(budget);
    }
}

fn from_selection(dim: usize, selected: Vec<(f64, u32, u32)>, values: impl Fn(u32, u32) -> f64) -> CsrMatrix {
    let triplets = selected
        .into_iter()
        .map(|(_, r, c)| (r as usize, c as usize, values(r, c)))
        .collect();
    CsrMatrix::from_triplets(dim, dim, triplets)
}

/// Keeps the `k * dim` entries of largest magnitude; ties at the cutoff go to
/// the smallest `(row, col)`.
pub fn threshold_theta(theta: &SparseTheta, k: usize) -> Result<SparseTheta> {
    if k == 0 {
        return Err(Error::InvalidParameter("entry budget k must be >= 1".into()));
    }
    let budget = k.saturating_mul(theta.dim());
    if theta.nnz() <= budget {
        return Ok(theta.clone());
    }
    let mut candidates: Vec<_> = theta
        .matrix
        .iter()
        .map(|(r, c, v)| (v.abs(), r as u32, c as u32))
        .collect();
    select_top(&mut candidates, budget);
    let matrix = from_selection(theta.dim(), candidates, |r, c| theta.matrix.get(r as usize, c as usize));
    Ok(SparseTheta {
        matrix,
        meta: ThetaMeta {
            budget: Budget::PerPixel(k),
            ..theta.meta.clone()
        },
    })
}

/// [`threshold_theta`] for several budgets from one ranking of the entries.
pub fn threshold_many(theta: &SparseTheta, ks: &[usize]) -> Result<Vec<SparseTheta>> {
    if ks.contains(&0) {
        return Err(Error::InvalidParameter("entry budget k must be >= 1".into()));
    }
    let mut order: Vec<(f64, u32, u32)> = theta
        .matrix
        .iter()
        .map(|(r, c, v)| (v.abs(), r as u32, c as u32))
        .collect();
    order.sort_unstable_by(rank_order);
    let mut rank = vec![0usize; theta.nnz()];
    // entries are enumerated in storage order; map (row, col) -> storage slot
    for (pos, &(_, r, c)) in order.iter().enumerate() {
        let (cols, _) = theta.matrix.row(r as usize);
        let slot = theta.matrix.row_ptr()[r as usize] + cols.binary_search(&c).expect("stored");
        rank[slot] = pos;
    }
    Ok(ks
        .iter()
        .map(|&k| {
            let budget = k.saturating_mul(theta.dim());
            if theta.nnz() <= budget {
                return theta.clone();
            }
            let mut slot = 0;
            let matrix = theta.matrix.filter(|_, _, _| {
                let keep = rank[slot] < budget;
                slot += 1;
                keep
            });
            SparseTheta {
                matrix,
                meta: ThetaMeta {
                    budget: Budget::PerPixel(k),
                    ..theta.meta.clone()
                },
            }
        })
        .collect())
}

/// Same result as `threshold_theta(&build_theta(..), k)` without holding the
/// full matrix: columns are produced in chunks and pruned to the budget.
pub fn build_theta_thresholded(
    spec: &KernelSpec,
    family: &WaveletFamily,
    levels: usize,
    k: usize,
) -> Result<SparseTheta> {
    if k == 0 {
        return Err(Error::InvalidParameter("entry budget k must be >= 1".into()));
    }
    let builder = ColumnBuilder::new(spec, family, levels)?;
    let dim = builder.layout.dim();
    let budget = k * dim;
    let mut candidates: Vec<(f64, u32, u32)> = Vec::new();
    let mut values = std::collections::HashMap::new();
    let chunk = 256.min(dim);
    let mut start = 0;
    let mut full_nnz = 0usize;
    while start < dim {
        let end = (start + chunk).min(dim);
        for (c, col) in (start..end).zip(builder.columns(start..end)) {
            full_nnz += col.len();
            for (r, v) in col {
                candidates.push((v.abs(), r, c as u32));
                values.insert((r, c as u32), v);
            }
        }
        if candidates.len() > 2 * budget {
            select_top(&mut candidates, budget);
            let keep: std::collections::HashSet<_> = candidates.iter().map(|&(_, r, c)| (r, c)).collect();
            values.retain(|key, _| keep.contains(key));
        }
        start = end;
    }
    select_top(&mut candidates, budget);
    let matrix = from_selection(dim, candidates, |r, c| values[&(r, c)]);
    let budget_tag = if full_nnz <= budget {
        Budget::Full
    } else {
        Budget::PerPixel(k)
    };
    Ok(SparseTheta {
        matrix,
        meta: builder.meta(spec, budget_tag),
    })
}

/// `Frobenius(a - b)` for two matrices of the same shape.
pub fn frobenius_distance(a: &CsrMatrix, b: &CsrMatrix) -> f64 {
    let mut total = 0.0;
    for r in 0..a.rows() {
        let (ca, va) = a.row(r);
        let (cb, vb) = b.row(r);
        let (mut i, mut j) = (0, 0);
        while i < ca.len() || j < cb.len() {
            let d = match (ca.get(i), cb.get(j)) {
                (Some(x), Some(y)) if x == y => {
                    i += 1;
                    j += 1;
                    va[i - 1] - vb[j - 1]
                }
                (Some(x), Some(y)) if x < y => {
                    i += 1;
                    va[i - 1]
                }
                (Some(_), None) => {
                    i += 1;
                    va[i - 1]
                }
                _ => {
                    j += 1;
                    -vb[j - 1]
                }
            };
            total += d * d;
        }
    }
    total.sqrt()
}

/// `W^T Theta W` as a reusable operator on row-major images, with counters
/// for the multiply-adds it performs.
#[derive(Debug, Clone)]
pub struct ThetaOperator {
    theta: CsrMatrix,
    theta_t: CsrMatrix,
    transform: Transform2d,
    coeffs: Vec<f64>,
    mapped: Vec<f64>,
    matvec_madds: u64,
}

impl ThetaOperator {
    pub fn new(theta: &SparseTheta, family: &WaveletFamily, levels: usize) -> Result<Self> {
        check_meta(theta, family, levels)?;
        let layout = theta.layout()?;
        let dim = theta.dim();
        Ok(Self {
            theta: theta.matrix.clone(),
            theta_t: theta.matrix.transpose(),
            transform: Transform2d::new(family.clone(), layout),
            coeffs: vec![0.0; dim],
            mapped: vec![0.0; dim],
            matvec_madds: 0,
        })
    }

    /// Uses the family and depth recorded in the operator metadata.
    pub fn from_theta(theta: &SparseTheta) -> Result<Self> {
        Self::new(theta, &theta.family()?, theta.meta.levels)
    }

    pub fn dim(&self) -> usize {
        self.theta.rows()
    }

    pub fn side(&self) -> usize {
        self.transform.layout().width()
    }

    pub fn apply(&mut self, x: &[f64], y: &mut [f64]) {
        self.transform.forward(x, &mut self.coeffs);
        self.theta.matvec(&self.coeffs, &mut self.mapped);
        self.transform.inverse(&self.mapped, y);
        self.matvec_madds += self.theta.nnz() as u64;
    }

    pub fn apply_adjoint(&mut self, x: &[f64], y: &mut [f64]) {
        self.transform.forward(x, &mut self.coeffs);
        self.theta_t.matvec(&self.coeffs, &mut self.mapped);
        self.transform.inverse(&self.mapped, y);
        self.matvec_madds += self.theta.nnz() as u64;
    }

    /// Multiply-adds performed since construction.
    pub fn madds(&self) -> u64 {
        self.matvec_madds + self.transform.ops()
    }

    fn image(&self, data: Vec<f64>) -> Image {
        let n = self.side();
        Image::new(n, n, data).expect("square power-of-two layout")
    }

    pub fn apply_image(&mut self, img: &Image) -> Result<Image> {
        self.check(img)?;
        let mut out = vec![0.0; self.dim()];
        self.apply(img.data(), &mut out);
        Ok(self.image(out))
    }

    pub fn apply_adjoint_image(&mut self, img: &Image) -> Result<Image> {
        self.check(img)?;
        let mut out = vec![0.0; self.dim()];
        self.apply_adjoint(img.data(), &mut out);
        Ok(self.image(out))
    }

    fn check(&self, img: &Image) -> Result<()> {
        if img.height() != self.side() || img.width() != self.side() {
            return Err(Error::Dimension(format!(
                "{}x{} image for a {}x{} operator",
                img.height(),
                img.width(),
                self.side(),
                self.side()
            )));
        }
        Ok(())
    }
}

fn check_meta(theta: &SparseTheta, family: &WaveletFamily, levels: usize) -> Result<()> {
    if theta.meta.family != family.name() || theta.meta.levels != levels {
        return Err(Error::MetaMismatch(format!(
            "operator built for {} with {} levels, used with {} with {} levels",
            theta.meta.family,
            theta.meta.levels,
            family.name(),
            levels
        )));
    }
    Ok(())
}

/// `W^T Theta W img`.
pub fn apply_theta(theta: &SparseTheta, img: &Image, family: &WaveletFamily, levels: usize) -> Result<Image> {
    ThetaOperator::new(theta, family, levels)?.apply_image(img)
}

/// `W^T Theta^T W img`.
pub fn apply_theta_adjoint(
    theta: &SparseTheta,
    img: &Image,
    family: &WaveletFamily,
    levels: usize,
) -> Result<Image> {
    ThetaOperator::new(theta, family, levels)?.apply_adjoint_image(img)
}

/// Monte Carlo estimate of the relative operator error: the maximum over
/// `trials` unit-norm Gaussian inputs `u` of `|Hu - H~u| / |Hu|`.
pub fn operator_error(theta: &SparseTheta, spec: &KernelSpec, trials: usize, seed: u64) -> Result<f64> {
    let exact = ExactOperator::new(spec);
    operator_error_with(theta, &exact, trials, seed)
}

pub fn operator_error_with(
    theta: &SparseTheta,
    exact: &ExactOperator,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let mut approx = ThetaOperator::from_theta(theta)?;
    if approx.dim() != exact.size() * exact.size() {
        return Err(Error::Dimension("operator and kernel sizes differ".into()));
    }
    let dim = approx.dim();
    let mut stream = GaussianStream::new(seed);
    let (mut hu, mut au) = (vec![0.0; dim], vec![0.0; dim]);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut u = stream.fill(dim);
        let s = 1.0 / norm2(&u);
        u.iter_mut().for_each(|v| *v *= s);
        exact.apply_slice(&u, &mut hu);
        approx.apply(&u, &mut au);
        let diff: f64 = hu.iter().zip(&au).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        worst = worst.max(diff / norm2(&hu));
    }
    Ok(worst)
}

/// Power-iteration estimate of the spectral norm `|H - W^T Theta W|`.
pub fn operator_error_norm(theta: &SparseTheta, spec: &KernelSpec, iters: usize, seed: u64) -> Result<f64> {
    let exact = ExactOperator::new(spec);
    let mut approx = ThetaOperator::from_theta(theta)?;
    let dim = approx.dim();
    let mut x = GaussianStream::new(seed).fill(dim);
    let (mut a, mut b, mut e, mut back) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let nx = norm2(&x);
        if nx == 0.0 {
            return Ok(0.0);
        }
        x.iter_mut().for_each(|v| *v /= nx);
        exact.apply_slice(&x, &mut a);
        approx.apply(&x, &mut b);
        for i in 0..dim {
            e[i] = a[i] - b[i];
        }
        estimate = norm2(&e);
        exact.apply_adjoint_slice(&e, &mut a);
        approx.apply_adjoint(&e, &mut back);
        for i in 0..dim {
            x[i] = a[i] - back[i];
        }
    }
    Ok(estimate)
}
