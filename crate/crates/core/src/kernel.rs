//! Spatially varying blur kernels and the exact (dense-storage) blur operator.
//!
//! Every kernel is truncated at the image border and renormalized so that
//! each output pixel's weights sum to one.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::kv::KeyValues;
use crate::sparse::CsrMatrix;

/// Grid of sampled PSFs; each output pixel uses the PSF of the grid cell it
/// falls in.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPsf {
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// PSFs are `(2 radius + 1)^2` row-major arrays centred on the pixel.
    pub radius: usize,
    pub psfs: Vec<Vec<f64>>,
}

impl TabulatedPsf {
    pub fn validate(&self) -> Result<()> {
        let side = 2 * self.radius + 1;
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(Error::InvalidParameter("empty PSF grid".into()));
        }
        if self.psfs.len() != self.grid_rows * self.grid_cols {
            return Err(Error::InvalidParameter(format!(
                "{} PSFs for a {}x{} grid",
                self.psfs.len(),
                self.grid_rows,
                self.grid_cols
            )));
        }
        for psf in &self.psfs {
            if psf.len() != side * side {
                return Err(Error::InvalidParameter(format!(
                    "PSF with {} samples, expected {}",
                    psf.len(),
                    side * side
                )));
            }
            if psf.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || psf.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidParameter(
                    "PSF samples must be finite, non-negative, with positive mass".into(),
                ));
            }
        }
        Ok(())
    }

    /// Text form: `grid_rows grid_cols radius` then all samples, whitespace
    /// separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        let mut header = [0usize; 3];
        for h in header.iter_mut() {
            *h = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Format("bad PSF table header".into()))?;
        }
        let [grid_rows, grid_cols, radius] = header;
        let side = 2 * radius + 1;
        let values: Vec<f64> = tokens
            .map(|t| t.parse().map_err(|_| Error::Format(format!("bad PSF sample `{t}`"))))
            .collect::<Result<_>>()?;
        if values.len() != grid_rows * grid_cols * side * side {
            return Err(Error::Format(format!(
                "PSF table has {} samples, expected {}",
                values.len(),
                grid_rows * grid_cols * side * side
            )));
        }
        let t = Self {
            grid_rows,
            grid_cols,
            radius,
            psfs: values.chunks(side * side).map(<[f64]>::to_vec).collect(),
        };
        t.validate()?;
        Ok(t)
    }

    fn checksum(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for v in self.psfs.iter().flatten() {
            h.update(&v.to_le_bytes());
        }
        h.finalize()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// Isotropic Gaussian whose variance grows linearly from `sigma_min^2` on
    /// the top row to `sigma_max^2` on the bottom row.
    GaussianVerticalVariance { sigma_min: f64, sigma_max: f64 },
    /// Stationary Gaussian. When `truncation * sigma < 1` only the centre
    /// sample survives and the operator is the identity.
    GaussianConstant { sigma: f64 },
    CustomTabulated(TabulatedPsf),
}

/// Spatially varying kernel on an `size x size` pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub size: usize,
    /// Support cutoff in units of the local standard deviation.
    pub truncation: f64,
}

const KERNEL_KEYS: &[&str] = &[
    "kind",
    "n",
    "sigma",
    "sigma_min",
    "sigma_max",
    "truncation",
    "normalization",
    "table",
];

impl KernelSpec {
    pub fn new(kind: KernelKind, size: usize, truncation: f64) -> Result<Self> {
        let spec = Self {
            kind,
            size,
            truncation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn vertical(size: usize, sigma_min: f64, sigma_max: f64, truncation: f64) -> Result<Self> {
        Self::new(
            KernelKind::GaussianVerticalVariance {
                sigma_min,
                sigma_max,
            },
            size,
            truncation,
        )
    }

    /// Default experiment kernel: sigma from 0.8 to 3.0 pixels, cut at 4 sigma.
    pub fn default_for(size: usize) -> Self {
        Self::vertical(size, 0.8, 3.0, 4.0).expect("valid defaults")
    }

    /// A kernel whose operator is exactly the identity.
    pub fn identity(size: usize) -> Self {
        Self::new(KernelKind::GaussianConstant { sigma: 1e-3 }, size, 3.0).expect("valid")
    }

    fn validate(&self) -> Result<()> {
        if !self.size.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "kernel grid size {} is not a power of two",
                self.size
            )));
        }
        if !(self.truncation >= 3.0) || !self.truncation.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "truncation must be at least 3 sigmas, got {}",
                self.truncation
            )));
        }
        match &self.kind {
            KernelKind::GaussianVerticalVariance {
                sigma_min,
                sigma_max,
            } => {
                if !(*sigma_min > 0.0 && sigma_min <= sigma_max && sigma_max.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "need 0 < sigma_min <= sigma_max, got {sigma_min}, {sigma_max}"
                    )));
                }
            }
            KernelKind::GaussianConstant { sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
                }
            }
            KernelKind::CustomTabulated(t) => t.validate()?,
        }
        Ok(())
    }

    /// PSF standard deviation used for output row `row`.
    pub fn sigma_at_row(&self, row: usize) -> f64 {
        match &self.kind {
            KernelKind::GaussianVerticalVariance {
                sigma_min,
                sigma_max,
            } => {
                let t = if self.size > 1 {
                    row as f64 / (self.size - 1) as f64
                } else {
                    0.0
                };
                (sigma_min * sigma_min + (sigma_max * sigma_max - sigma_min * sigma_min) * t).sqrt()
            }
            KernelKind::GaussianConstant { sigma } => *sigma,
            KernelKind::CustomTabulated(_) => f64::NAN,
        }
    }

    /// Largest distance, in pixels, over which any output depends on an input.
    pub fn max_radius(&self) -> f64 {
        match &self.kind {
            KernelKind::CustomTabulated(t) => t.radius as f64 * std::f64::consts::SQRT_2,
            _ => (0..self.size)
                .map(|r| self.truncation * self.sigma_at_row(r))
                .fold(0.0, f64::max),
        }
    }

    /// Normalized weights `(input pixel index, K(x, y))` of output pixel
    /// `(row, col)`, in increasing input index order.
    pub fn row_weights(&self, row: usize, col: usize) -> Vec<(usize, f64)> {
        let n = self.size as isize;
        let (r0, c0) = (row as isize, col as isize);
        let mut out = Vec::new();
        match &self.kind {
            KernelKind::CustomTabulated(t) => {
                let cell = (row * t.grid_rows / self.size) * t.grid_cols + col * t.grid_cols / self.size;
                let psf = &t.psfs[cell];
                let rad = t.radius as isize;
                let side = 2 * rad + 1;
                for dy in -rad..=rad {
                    for dx in -rad..=rad {
                        let (y, x) = (r0 + dy, c0 + dx);
                        if (0..n).contains(&y) && (0..n).contains(&x) {
                            let w = psf[((dy + rad) * side + dx + rad) as usize];
                            if w != 0.0 {
                                out.push(((y * n + x) as usize, w));
                            }
                        }
                    }
                }
            }
            _ => {
                let sigma = self.sigma_at_row(row);
                let cut = self.truncation * sigma;
                let cut2 = cut * cut;
                let rad = cut.floor() as isize;
                let inv = 1.0 / (2.0 * sigma * sigma);
                for dy in -rad..=rad {
                    let y = r0 + dy;
                    if !(0..n).contains(&y) {
                        continue;
                    }
                    for dx in -rad..=rad {
                        let x = c0 + dx;
                        let d2 = (dy * dy + dx * dx) as f64;
                        if (0..n).contains(&x) && d2 <= cut2 {
                            out.push(((y * n + x) as usize, (-d2 * inv).exp()));
                        }
                    }
                }
            }
        }
        let mass: f64 = out.iter().map(|(_, w)| w).sum();
        for (_, w) in &mut out {
            *w /= mass;
        }
        out
    }

    /// `K(x, y)` for output pixel `x` and input pixel `y`, both `(row, col)`.
    pub fn kernel_eval(&self, x: (usize, usize), y: (usize, usize)) -> Result<f64> {
        let n = self.size;
        if x.0 >= n || x.1 >= n || y.0 >= n || y.1 >= n {
            return Err(Error::Domain(format!(
                "coordinates {x:?}, {y:?} outside a {n}x{n} grid"
            )));
        }
        let target = y.0 * n + y.1;
        Ok(self
            .row_weights(x.0, x.1)
            .into_iter()
            .find(|&(i, _)| i == target)
            .map_or(0.0, |(_, w)| w))
    }

    /// Stable identifier recorded in operator files.
    pub fn id(&self) -> String {
        format!("{self}")
    }

    pub fn from_key_values(kv: &KeyValues, base_dir: Option<&Path>) -> Result<Self> {
        kv.check_keys(KERNEL_KEYS)?;
        let size: usize = kv
            .parse_opt("n")?
            .ok_or_else(|| Error::Format("kernel spec needs `n`".into()))?;
        let truncation = kv.parse_or("truncation", 4.0)?;
        if let Some(norm) = kv.get("normalization") {
            if norm != "unit_mass" {
                return Err(Error::Format(format!("unsupported normalization `{norm}`")));
            }
        }
        let kind = match kv.require("kind")? {
            "gaussian_vertical_variance" => KernelKind::GaussianVerticalVariance {
                sigma_min: kv.parse_opt("sigma_min")?.ok_or_else(|| Error::Format("missing `sigma_min`".into()))?,
                sigma_max: kv.parse_opt("sigma_max")?.ok_or_else(|| Error::Format("missing `sigma_max`".into()))?,
            },
            "gaussian_constant" => {
                let sigma = match kv.parse_opt("sigma")? {
                    Some(s) => s,
                    None => {
                        let lo: f64 = kv.parse_opt("sigma_min")?.ok_or_else(|| Error::Format("missing `sigma`".into()))?;
                        let hi: f64 = kv.parse_or("sigma_max", lo)?;
                        if lo != hi {
                            return Err(Error::Format("gaussian_constant needs sigma_min = sigma_max".into()));
                        }
                        lo
                    }
                };
                KernelKind::GaussianConstant { sigma }
            }
            "custom_tabulated" => {
                let rel = kv.require("table")?;
                let path = match base_dir {
                    Some(dir) => dir.join(rel),
                    None => rel.into(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                KernelKind::CustomTabulated(TabulatedPsf::parse(&text)?)
            }
            other => return Err(Error::Format(format!("unknown kernel kind `{other}`"))),
        };
        Self::new(kind, size, truncation)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text)?, None)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_key_values(&KeyValues::load(path)?, path.parent())
    }

    /// Key-value text. Tabulated kernels reference their table file by
    /// `table_path`.
    pub fn to_text(&self, table_path: Option<&str>) -> String {
        let mut kv = KeyValues::default();
        kv.insert("n", self.size);
        kv.insert("truncation", self.truncation);
        kv.insert("normalization", "unit_mass");
        match &self.kind {
            KernelKind::GaussianVerticalVariance {
                sigma_min,
                sigma_max,
            } => {
                kv.insert("kind", "gaussian_vertical_variance");
                kv.insert("sigma_min", sigma_min);
                kv.insert("sigma_max", sigma_max);
            }
            KernelKind::GaussianConstant { sigma } => {
                kv.insert("kind", "gaussian_constant");
                kv.insert("sigma", sigma);
            }
            KernelKind::CustomTabulated(_) => {
                kv.insert("kind", "custom_tabulated");
                kv.insert("table", table_path.unwrap_or("psf_table.txt"));
            }
        }
        kv.to_text()
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            KernelKind::GaussianVerticalVariance {
                sigma_min,
                sigma_max,
            } => write!(
                f,
                "gaussian_vertical_variance(n={},sigma_min={},sigma_max={},truncation={})",
                self.size, sigma_min, sigma_max, self.truncation
            ),
            KernelKind::GaussianConstant { sigma } => write!(
                f,
                "gaussian_constant(n={},sigma={},truncation={})",
                self.size, sigma, self.truncation
            ),
            KernelKind::CustomTabulated(t) => write!(
                f,
                "custom_tabulated(n={},grid={}x{},radius={},crc={:08x})",
                self.size,
                t.grid_rows,
                t.grid_cols,
                t.radius,
                t.checksum()
            ),
        }
    }
}

/// The discretized blur `H` in row storage, with its transpose for adjoint
/// products and column extraction.
#[derive(Debug, Clone)]
pub struct ExactOperator {
    spec: KernelSpec,
    rows: CsrMatrix,
    cols: CsrMatrix,
}

impl ExactOperator {
    pub fn new(spec: &KernelSpec) -> Self {
        let n = spec.size;
        let mut row_ptr = Vec::with_capacity(n * n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..n {
            for c in 0..n {
                for (i, w) in spec.row_weights(r, c) {
                    col_idx.push(i as u32);
                    values.push(w);
                }
                row_ptr.push(values.len());
            }
        }
        let rows = CsrMatrix::new(n * n, n * n, row_ptr, col_idx, values).expect("sorted rows");
        let cols = rows.transpose();
        Self {
            spec: spec.clone(),
            rows,
            cols,
        }
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn size(&self) -> usize {
        self.spec.size
    }

    /// Row storage of `H`.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.rows
    }

    /// Row storage of `H^T`, i.e. the columns of `H`.
    pub fn transpose_matrix(&self) -> &CsrMatrix {
        &self.cols
    }

    fn check(&self, img: &Image) -> Result<()> {
        if img.height() != self.spec.size || img.width() != self.spec.size {
            return Err(Error::Dimension(format!(
                "{}x{} image for a {}x{} kernel",
                img.height(),
                img.width(),
                self.spec.size,
                self.spec.size
            )));
        }
        Ok(())
    }

    pub fn apply(&self, img: &Image) -> Result<Image> {
        self.check(img)?;
        let mut out = vec![0.0; img.len()];
        self.rows.matvec(img.data(), &mut out);
        Ok(Image::from_raw(img.height(), img.width(), out))
    }

    pub fn apply_adjoint(&self, img: &Image) -> Result<Image> {
        self.check(img)?;
        let mut out = vec![0.0; img.len()];
        self.cols.matvec(img.data(), &mut out);
        Ok(Image::from_raw(img.height(), img.width(), out))
    }

    pub fn apply_slice(&self, x: &[f64], y: &mut [f64]) {
        self.rows.matvec(x, y);
    }

    pub fn apply_adjoint_slice(&self, x: &[f64], y: &mut [f64]) {
        self.cols.matvec(x, y);
    }

    /// Number of multiply-adds per application.
    pub fn cost(&self) -> usize {
        self.rows.nnz()
    }
}

pub fn apply_exact(spec: &KernelSpec, img: &Image) -> Result<Image> {
    ExactOperator::new(spec).apply(img)
}

pub fn apply_exact_adjoint(spec: &KernelSpec, img: &Image) -> Result<Image> {
    ExactOperator::new(spec).apply_adjoint(img)
}

/// One-dimensional analogue of [`KernelKind::GaussianVerticalVariance`]: the
/// standard deviation grows (in variance) linearly along the signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel1d {
    pub size: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub truncation: f64,
}

impl Kernel1d {
    pub fn new(size: usize, sigma_min: f64, sigma_max: f64, truncation: f64) -> Result<Self> {
        if !size.is_power_of_two() {
            return Err(Error::Dimension(format!("signal length {size} is not a power of two")));
        }
        if !(sigma_min > 0.0 && sigma_min <= sigma_max && truncation >= 3.0) {
            return Err(Error::InvalidParameter(
                "need 0 < sigma_min <= sigma_max and truncation >= 3".into(),
            ));
        }
        Ok(Self {
            size,
            sigma_min,
            sigma_max,
            truncation,
        })
    }

    pub fn sigma_at(&self, x: usize) -> f64 {
        let t = x as f64 / (self.size.max(2) - 1) as f64;
        (self.sigma_min.powi(2) + (self.sigma_max.powi(2) - self.sigma_min.powi(2)) * t).sqrt()
    }

    pub fn max_radius(&self) -> f64 {
        self.truncation * self.sigma_max
    }

    pub fn matrix(&self) -> CsrMatrix {
        let n = self.size as isize;
        let mut triplets = Vec::new();
        for x in 0..n {
            let sigma = self.sigma_at(x as usize);
            let cut = self.truncation * sigma;
            let rad = cut.floor() as isize;
            let row: Vec<(usize, f64)> = (x - rad..=x + rad)
                .filter(|y| (0..n).contains(y) && ((y - x).abs() as f64) <= cut)
                .map(|y| (y as usize, (-((y - x) as f64).powi(2) / (2.0 * sigma * sigma)).exp()))
                .collect();
            let mass: f64 = row.iter().map(|(_, w)| w).sum();
            triplets.extend(row.into_iter().map(|(y, w)| (x as usize, y, w / mass)));
        }
        CsrMatrix::from_triplets(self.size, self.size, triplets)
    }
}
