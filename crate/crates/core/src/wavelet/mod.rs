//! Multilevel orthonormal discrete wavelet transform with periodic
//! boundaries, in 1D and separable 2D.
//!
//! Coefficients use one canonical flat ordering everywhere (operator
//! matrices, files, masks): sub-bands from the coarsest level to the finest,
//! orientations in the order approx, horizontal, vertical, diagonal, each
//! band stored row-major.

mod family;
pub mod line;

pub use family::WaveletFamily;

use std::fmt;

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    Approx,
    Horizontal,
    Vertical,
    Diagonal,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::Approx,
        Orientation::Horizontal,
        Orientation::Vertical,
        Orientation::Diagonal,
    ];
    pub const DETAILS: [Orientation; 3] = [
        Orientation::Horizontal,
        Orientation::Vertical,
        Orientation::Diagonal,
    ];

    pub fn letter(self) -> char {
        match self {
            Orientation::Approx => 'l',
            Orientation::Horizontal => 'h',
            Orientation::Vertical => 'v',
            Orientation::Diagonal => 'd',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'l' => Some(Orientation::Approx),
            'h' => Some(Orientation::Horizontal),
            'v' => Some(Orientation::Vertical),
            'd' => Some(Orientation::Diagonal),
            _ => None,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Position of one coefficient: level 1 is the finest scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubbandIndex {
    pub level: usize,
    pub orientation: Orientation,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Band {
    pub level: usize,
    pub orientation: Orientation,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Band {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Sub-band geometry of a `levels`-deep 2D decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    height: usize,
    width: usize,
    levels: usize,
    bands: Vec<Band>,
}

/// `log2(n) - 3`, so the coarsest band is 8 samples wide, but at least 1.
pub fn default_levels(n: usize) -> usize {
    (n.trailing_zeros() as usize).saturating_sub(3).max(1)
}

impl Layout {
    pub fn new(height: usize, width: usize, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Level("decomposition depth must be at least 1".into()));
        }
        let block = 1usize
            .checked_shl(levels as u32)
            .ok_or_else(|| Error::Level(format!("depth {levels} too large")))?;
        if height == 0 || width == 0 || !height.is_multiple_of(block) || !width.is_multiple_of(block) {
            return Err(Error::Level(format!(
                "2^{levels} does not divide {height}x{width}"
            )));
        }
        let mut bands = Vec::with_capacity(3 * levels + 1);
        let mut offset = 0;
        for level in (1..=levels).rev() {
            let (rows, cols) = (height >> level, width >> level);
            let orientations: &[Orientation] = if level == levels {
                &Orientation::ALL
            } else {
                &Orientation::DETAILS
            };
            for &orientation in orientations {
                bands.push(Band {
                    level,
                    orientation,
                    rows,
                    cols,
                    offset,
                });
                offset += rows * cols;
            }
        }
        debug_assert_eq!(offset, height * width);
        Ok(Self {
            height,
            width,
            levels,
            bands,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.height * self.width
    }

    /// Bands in canonical order.
    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn band(&self, level: usize, orientation: Orientation) -> Option<&Band> {
        self.bands
            .iter()
            .find(|b| b.level == level && b.orientation == orientation)
    }

    /// Band containing the flat index `i`.
    pub fn band_of(&self, i: usize) -> &Band {
        let k = self.bands.partition_point(|b| b.offset + b.len() <= i);
        &self.bands[k]
    }

    pub fn index_of(&self, idx: &SubbandIndex) -> Result<usize> {
        let band = self.band(idx.level, idx.orientation).ok_or_else(|| {
            Error::Index(format!(
                "no band at level {} with orientation {}",
                idx.level, idx.orientation
            ))
        })?;
        if idx.row >= band.rows || idx.col >= band.cols {
            return Err(Error::Index(format!(
                "position ({}, {}) outside {}x{} band",
                idx.row, idx.col, band.rows, band.cols
            )));
        }
        Ok(band.offset + idx.row * band.cols + idx.col)
    }

    pub fn subband_of(&self, i: usize) -> SubbandIndex {
        let band = self.band_of(i);
        let local = i - band.offset;
        SubbandIndex {
            level: band.level,
            orientation: band.orientation,
            row: local / band.cols,
            col: local % band.cols,
        }
    }
}

/// Coefficients of a 2D decomposition, stored in canonical flat order.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    layout: Layout,
    data: Vec<f64>,
}

impl WaveletCoeffs {
    pub fn new(layout: Layout, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.dim() {
            return Err(Error::Shape(format!(
                "{} coefficients for a layout of {}",
                data.len(),
                layout.dim()
            )));
        }
        Ok(Self { layout, data })
    }

    pub fn zeros(layout: Layout) -> Self {
        let data = vec![0.0; layout.dim()];
        Self { layout, data }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn levels(&self) -> usize {
        self.layout.levels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn band(&self, level: usize, orientation: Orientation) -> Option<&[f64]> {
        self.layout
            .band(level, orientation)
            .map(|b| &self.data[b.range()])
    }

    pub fn norm(&self) -> f64 {
        crate::image::norm2(&self.data)
    }
}

/// One level of periodic analysis: `a[i] = sum_k h[k] x[2i+k]`,
/// `d[i] = sum_k g[k] x[2i+k]`, indices modulo `x.len()`.
#[inline]
fn analyze(x: &[f64], lo: &[f64], hi: &[f64], a: &mut [f64], d: &mut [f64]) {
    let n = x.len();
    let taps = lo.len();
    for i in 0..n / 2 {
        let base = 2 * i;
        let (mut sa, mut sd) = (0.0, 0.0);
        if base + taps <= n {
            let window = &x[base..base + taps];
            for k in 0..taps {
                sa += lo[k] * window[k];
                sd += hi[k] * window[k];
            }
        } else {
            for k in 0..taps {
                let v = x[(base + k) % n];
                sa += lo[k] * v;
                sd += hi[k] * v;
            }
        }
        a[i] = sa;
        d[i] = sd;
    }
}

/// Adjoint of [`analyze`], which is also its inverse.
#[inline]
fn synthesize(a: &[f64], d: &[f64], lo: &[f64], hi: &[f64], x: &mut [f64]) {
    let n = x.len();
    let taps = lo.len();
    x.fill(0.0);
    for i in 0..n / 2 {
        let base = 2 * i;
        let (va, vd) = (a[i], d[i]);
        if base + taps <= n {
            let window = &mut x[base..base + taps];
            for k in 0..taps {
                window[k] += lo[k] * va + hi[k] * vd;
            }
        } else {
            for k in 0..taps {
                x[(base + k) % n] += lo[k] * va + hi[k] * vd;
            }
        }
    }
}

/// Reusable 2D transform with preallocated scratch space.
#[derive(Debug, Clone)]
pub struct Transform2d {
    family: WaveletFamily,
    layout: Layout,
    block: Vec<f64>,
    rows_lo: Vec<f64>,
    rows_hi: Vec<f64>,
    col_in: Vec<f64>,
    col_a: Vec<f64>,
    col_d: Vec<f64>,
    ops: u64,
}

impl Transform2d {
    pub fn new(family: WaveletFamily, layout: Layout) -> Self {
        let n = layout.dim();
        let side = layout.height.max(layout.width);
        Self {
            family,
            layout,
            block: vec![0.0; n],
            rows_lo: vec![0.0; n / 2],
            rows_hi: vec![0.0; n / 2],
            col_in: vec![0.0; side],
            col_a: vec![0.0; side / 2],
            col_d: vec![0.0; side / 2],
            ops: 0,
        }
    }

    /// Filter multiply-adds performed so far by this instance.
    pub fn ops(&self) -> u64 {
        self.ops
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn family(&self) -> &WaveletFamily {
        &self.family
    }

    /// Forward transform of a row-major image into canonical coefficients.
    pub fn forward(&mut self, img: &[f64], out: &mut [f64]) {
        let layout = &self.layout;
        assert_eq!(img.len(), layout.dim());
        assert_eq!(out.len(), layout.dim());
        let (lo, hi) = (self.family.lowpass(), self.family.highpass());
        self.block.copy_from_slice(img);
        let (mut rows, mut cols) = (layout.height, layout.width);
        for level in 1..=layout.levels {
            let half_c = cols / 2;
            let half_r = rows / 2;
            self.ops += (2 * lo.len() * rows * cols) as u64;
            for r in 0..rows {
                analyze(
                    &self.block[r * cols..(r + 1) * cols],
                    lo,
                    hi,
                    &mut self.rows_lo[r * half_c..(r + 1) * half_c],
                    &mut self.rows_hi[r * half_c..(r + 1) * half_c],
                );
            }
            let off = |o: Orientation| layout.band(level, o).expect("band exists").offset;
            let (oh, ov, od) = (
                off(Orientation::Horizontal),
                off(Orientation::Vertical),
                off(Orientation::Diagonal),
            );
            // lowpass-x columns give approx + horizontal, highpass-x columns
            // give vertical + diagonal
            for c in 0..half_c {
                for r in 0..rows {
                    self.col_in[r] = self.rows_lo[r * half_c + c];
                }
                analyze(
                    &self.col_in[..rows],
                    lo,
                    hi,
                    &mut self.col_a[..half_r],
                    &mut self.col_d[..half_r],
                );
                for r in 0..half_r {
                    self.block[r * half_c + c] = self.col_a[r];
                    out[oh + r * half_c + c] = self.col_d[r];
                }
                for r in 0..rows {
                    self.col_in[r] = self.rows_hi[r * half_c + c];
                }
                analyze(
                    &self.col_in[..rows],
                    lo,
                    hi,
                    &mut self.col_a[..half_r],
                    &mut self.col_d[..half_r],
                );
                for r in 0..half_r {
                    out[ov + r * half_c + c] = self.col_a[r];
                    out[od + r * half_c + c] = self.col_d[r];
                }
            }
            rows = half_r;
            cols = half_c;
        }
        out[..rows * cols].copy_from_slice(&self.block[..rows * cols]);
    }

    /// Inverse of [`Transform2d::forward`].
    pub fn inverse(&mut self, coeffs: &[f64], out: &mut [f64]) {
        let layout = &self.layout;
        assert_eq!(coeffs.len(), layout.dim());
        assert_eq!(out.len(), layout.dim());
        let (lo, hi) = (self.family.lowpass(), self.family.highpass());
        let (mut rows, mut cols) = (layout.height >> layout.levels, layout.width >> layout.levels);
        self.block[..rows * cols].copy_from_slice(&coeffs[..rows * cols]);
        for level in (1..=layout.levels).rev() {
            let off = |o: Orientation| layout.band(level, o).expect("band exists").offset;
            let (oh, ov, od) = (
                off(Orientation::Horizontal),
                off(Orientation::Vertical),
                off(Orientation::Diagonal),
            );
            let (full_r, full_c) = (rows * 2, cols * 2);
            self.ops += (2 * lo.len() * full_r * full_c) as u64;
            for c in 0..cols {
                for r in 0..rows {
                    self.col_a[r] = self.block[r * cols + c];
                    self.col_d[r] = coeffs[oh + r * cols + c];
                }
                synthesize(
                    &self.col_a[..rows],
                    &self.col_d[..rows],
                    lo,
                    hi,
                    &mut self.col_in[..full_r],
                );
                for r in 0..full_r {
                    self.rows_lo[r * cols + c] = self.col_in[r];
                }
                for r in 0..rows {
                    self.col_a[r] = coeffs[ov + r * cols + c];
                    self.col_d[r] = coeffs[od + r * cols + c];
                }
                synthesize(
                    &self.col_a[..rows],
                    &self.col_d[..rows],
                    lo,
                    hi,
                    &mut self.col_in[..full_r],
                );
                for r in 0..full_r {
                    self.rows_hi[r * cols + c] = self.col_in[r];
                }
            }
            for r in 0..full_r {
                synthesize(
                    &self.rows_lo[r * cols..(r + 1) * cols],
                    &self.rows_hi[r * cols..(r + 1) * cols],
                    lo,
                    hi,
                    &mut self.block[r * full_c..(r + 1) * full_c],
                );
            }
            rows = full_r;
            cols = full_c;
        }
        out.copy_from_slice(&self.block);
    }
}

pub fn forward(img: &Image, family: &WaveletFamily, levels: usize) -> Result<WaveletCoeffs> {
    let layout = Layout::new(img.height(), img.width(), levels)?;
    let mut out = vec![0.0; layout.dim()];
    Transform2d::new(family.clone(), layout.clone()).forward(img.data(), &mut out);
    Ok(WaveletCoeffs { layout, data: out })
}

pub fn inverse(coeffs: &WaveletCoeffs, family: &WaveletFamily) -> Result<Image> {
    let layout = coeffs.layout.clone();
    if coeffs.data.len() != layout.dim() {
        return Err(Error::Shape("coefficient vector does not match layout".into()));
    }
    let mut out = vec![0.0; layout.dim()];
    Transform2d::new(family.clone(), layout.clone()).inverse(&coeffs.data, &mut out);
    Image::new(layout.height, layout.width, out)
}

/// The basis function whose coefficient vector is the indicator of `idx`.
pub fn synthesize_atom(
    idx: &SubbandIndex,
    shape: (usize, usize),
    family: &WaveletFamily,
    levels: usize,
) -> Result<Image> {
    let layout = Layout::new(shape.0, shape.1, levels)?;
    let i = layout.index_of(idx)?;
    let mut coeffs = WaveletCoeffs::zeros(layout);
    coeffs.data[i] = 1.0;
    inverse(&coeffs, family)
}

/// Filter multiply-adds of one forward (or inverse) 2D transform:
/// `2 L h w` per level on the shrinking approximation block.
pub fn transform_cost(layout: &Layout, family: &WaveletFamily) -> u64 {
    (1..=layout.levels)
        .map(|l| (2 * family.support_length() * (layout.height >> (l - 1)) * (layout.width >> (l - 1))) as u64)
        .sum()
}

/// Closed interval `[start, start + len - 1]` on an unwrapped axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start: usize,
    pub len: usize,
}

impl Interval {
    pub fn end(&self) -> usize {
        self.start + self.len - 1
    }

    /// Gap between two intervals on the line, 0 if they overlap or touch.
    pub fn distance(&self, other: &Interval) -> usize {
        other
            .start
            .saturating_sub(self.end())
            .max(self.start.saturating_sub(other.end()))
    }

    /// Whether `i` lies in the interval once wrapped onto `0..n`.
    pub fn contains_wrapped(&self, i: usize, n: usize) -> bool {
        let rel = (i + n - self.start % n) % n;
        self.len >= n || rel < self.len
    }
}

/// Support interval of a level-`level` atom at `position` along one axis:
/// starts at `2^level * position` and spans `(L - 1) 2^level + 1` samples.
pub fn support_interval(level: usize, position: usize, support_length: usize) -> Interval {
    Interval {
        start: position << level,
        len: ((support_length - 1) << level) + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportBox {
    pub rows: Interval,
    pub cols: Interval,
}

impl SupportBox {
    /// Euclidean distance between two boxes on the unwrapped plane.
    pub fn distance(&self, other: &SupportBox) -> f64 {
        let dr = self.rows.distance(&other.rows) as f64;
        let dc = self.cols.distance(&other.cols) as f64;
        dr.hypot(dc)
    }
}

/// Box containing the support of the atom `idx` before periodic wrapping.
pub fn support_box(
    idx: &SubbandIndex,
    layout: &Layout,
    family: &WaveletFamily,
) -> Result<SupportBox> {
    layout.index_of(idx)?;
    Ok(SupportBox {
        rows: support_interval(idx.level, idx.row, family.support_length()),
        cols: support_interval(idx.level, idx.col, family.support_length()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GaussianStream;
    use proptest::prelude::*;

    fn random_image(n: usize, seed: u64) -> Image {
        Image::new(n, n, GaussianStream::new(seed).fill(n * n)).unwrap()
    }

    #[test]
    fn layout_ordering_is_coarsest_first() {
        let l = Layout::new(64, 64, 3).unwrap();
        let names: Vec<_> = l
            .bands()
            .iter()
            .map(|b| format!("{}{}", b.level, b.orientation))
            .collect();
        assert_eq!(
            names,
            ["3l", "3h", "3v", "3d", "2h", "2v", "2d", "1h", "1v", "1d"]
        );
        assert_eq!(l.bands().iter().map(Band::len).sum::<usize>(), 64 * 64);
        for i in [0, 63, 64, 1000, 4095] {
            assert_eq!(l.index_of(&l.subband_of(i)).unwrap(), i);
        }
        assert!(Layout::new(64, 64, 7).is_err());
        assert!(Layout::new(64, 48, 5).is_err());
        assert!(Layout::new(64, 64, 0).is_err());
        assert_eq!(default_levels(64), 3);
        assert_eq!(default_levels(8), 1);
    }

    #[test]
    fn constant_image_has_only_approx() {
        for fam in [WaveletFamily::haar(), WaveletFamily::db2(), WaveletFamily::db3()] {
            let img = Image::filled(32, 32, 0.7).unwrap();
            let c = forward(&img, &fam, 3).unwrap();
            let approx = c.band(3, Orientation::Approx).unwrap();
            assert!(approx.iter().all(|v| (v - 0.7 * 8.0).abs() < 1e-12));
            assert!(c.data()[approx.len()..].iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn haar_pair() {
        let fam = WaveletFamily::haar();
        let out = line::forward(&[1.0, 1.0], &fam, 1).unwrap();
        let (a, d) = out.split_at(1);
        assert!((a[0] - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(d[0].abs() < 1e-15);
    }

    #[test]
    fn perfect_reconstruction_and_parseval() {
        for (fam, seed) in [(WaveletFamily::haar(), 1), (WaveletFamily::db2(), 2), (WaveletFamily::db3(), 3)] {
            let img = random_image(64, seed);
            let c = forward(&img, &fam, 3).unwrap();
            assert!((c.norm() - img.norm()).abs() <= 1e-10 * img.norm());
            let back = inverse(&c, &fam).unwrap();
            let err = back
                .data()
                .iter()
                .zip(img.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-10);
        }
    }

    #[test]
    fn rectangular_images() {
        let fam = WaveletFamily::db2();
        let img = Image::new(16, 64, GaussianStream::new(5).fill(16 * 64)).unwrap();
        let c = forward(&img, &fam, 2).unwrap();
        let back = inverse(&c, &fam).unwrap();
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_coeffs_give_zero_image() {
        let layout = Layout::new(16, 16, 2).unwrap();
        let img = inverse(&WaveletCoeffs::zeros(layout), &WaveletFamily::db2()).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.0));
        assert!(WaveletCoeffs::new(Layout::new(16, 16, 2).unwrap(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn haar_fine_detail_atom_in_1d() {
        let atom = line::synthesize_atom(line::Index1d { level: 1, approx: false, position: 0 }, 8, &WaveletFamily::haar(), 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [h, -h, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (a, b) in atom.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn atoms_have_unit_norm_and_lie_in_their_box() {
        for fam in [WaveletFamily::haar(), WaveletFamily::db2(), WaveletFamily::db3()] {
            let layout = Layout::new(32, 32, 2).unwrap();
            for i in 0..layout.dim() {
                let idx = layout.subband_of(i);
                let atom = synthesize_atom(&idx, (32, 32), &fam, 2).unwrap();
                assert!((atom.norm() - 1.0).abs() < 1e-10);
                let bx = support_box(&idx, &layout, &fam).unwrap();
                for (p, v) in atom.data().iter().enumerate() {
                    if *v != 0.0 {
                        assert!(
                            bx.rows.contains_wrapped(p / 32, 32) && bx.cols.contains_wrapped(p % 32, 32),
                            "{} atom {:?} leaks at {p}",
                            fam.name(),
                            idx
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_atom_index() {
        let fam = WaveletFamily::haar();
        let bad = SubbandIndex { level: 1, orientation: Orientation::Approx, row: 0, col: 0 };
        assert!(matches!(synthesize_atom(&bad, (16, 16), &fam, 2), Err(Error::Index(_))));
        let out = SubbandIndex { level: 2, orientation: Orientation::Diagonal, row: 4, col: 0 };
        assert!(matches!(synthesize_atom(&out, (16, 16), &fam, 2), Err(Error::Index(_))));
    }

    #[test]
    fn separated_fine_boxes() {
        let layout = Layout::new(16, 16, 1).unwrap();
        let fam = WaveletFamily::haar();
        let a = SubbandIndex { level: 1, orientation: Orientation::Diagonal, row: 0, col: 0 };
        let b = SubbandIndex { level: 1, orientation: Orientation::Diagonal, row: 0, col: 7 };
        let d = support_box(&a, &layout, &fam)
            .unwrap()
            .distance(&support_box(&b, &layout, &fam).unwrap());
        assert!(d > 0.0);
        assert_eq!(support_interval(1, 3, 2), Interval { start: 6, len: 3 });
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn shifted_positions_shift_atoms(level in 1usize..=3, r in 0usize..4, c in 0usize..4, o in 0usize..3) {
            let fam = WaveletFamily::db2();
            let orientation = Orientation::DETAILS[o];
            let base = synthesize_atom(&SubbandIndex { level, orientation, row: 0, col: 0 }, (32, 32), &fam, 3).unwrap();
            let moved = synthesize_atom(&SubbandIndex { level, orientation, row: r, col: c }, (32, 32), &fam, 3).unwrap();
            let (dr, dc) = (r << level, c << level);
            for i in 0..32 {
                for j in 0..32 {
                    let expect = base.get(i, j);
                    let got = moved.get((i + dr) % 32, (j + dc) % 32);
                    prop_assert!((expect - got).abs() < 1e-14);
                }
            }
        }
    }
}
