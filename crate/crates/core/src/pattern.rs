//! Sparsity patterns for `Theta` fixed in advance from wavelet
//! neighbourhoods.
//!
//! A neighbourhood lists, for a source sub-band, which coefficients of which
//! target sub-bands are linked to each source coefficient. Text grammar, one
//! entry per line:
//!
//! ```text
//! # <scale> <orientation> <dy> <dx>
//! same all 0 0
//! [band 2 h]        # entries below only apply to sources in band (2, h)
//! +1 l 0 0
//! ```
//!
//! `<scale>` is an absolute level `j`, `same`, `+1` (one level coarser) or
//! `-1` (one level finer); `<orientation>` is one of `l h v d all`. Entries
//! before the first section header apply to every band.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::sparse::CsrMatrix;
use crate::theta::{build_theta_on_support, Budget, SparseTheta};
use crate::wavelet::{Layout, Orientation, WaveletFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleSelector {
    Absolute(usize),
    /// Level offset from the source; positive is coarser.
    Relative(i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientationSelector {
    One(Orientation),
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborhoodEntry {
    pub scale: ScaleSelector,
    pub orientation: OrientationSelector,
    pub dy: i64,
    pub dx: i64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborhoodSpec {
    pub global: Vec<NeighborhoodEntry>,
    pub per_band: Vec<((usize, Orientation), Vec<NeighborhoodEntry>)>,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Splits a line into tokens with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn parse_orientation(tok: &str, line: usize, col: usize) -> Result<OrientationSelector> {
    if tok == "all" {
        return Ok(OrientationSelector::All);
    }
    let mut chars = tok.chars();
    match (chars.next().and_then(Orientation::from_letter), chars.next()) {
        (Some(o), None) => Ok(OrientationSelector::One(o)),
        _ => Err(parse_err(line, col, format!("unknown orientation `{tok}`"))),
    }
}

impl NeighborhoodSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = NeighborhoodSpec::default();
        let mut section: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            let toks = tokens(content);
            if toks.is_empty() {
                continue;
            }
            if toks[0].1.starts_with('[') {
                let inner = content.trim();
                let (col, _) = toks[0];
                let body = inner
                    .strip_prefix('[')
                    .and_then(|s| s.strip_suffix(']'))
                    .ok_or_else(|| parse_err(line, col, "unterminated section header"))?;
                let parts: Vec<&str> = body.split_whitespace().collect();
                if parts.len() != 3 || parts[0] != "band" {
                    return Err(parse_err(line, col, "expected `[band <level> <orientation>]`"));
                }
                let level: usize = parts[1]
                    .parse()
                    .ok()
                    .filter(|&l| l >= 1)
                    .ok_or_else(|| parse_err(line, col, format!("bad level `{}`", parts[1])))?;
                let orientation = match parse_orientation(parts[2], line, col)? {
                    OrientationSelector::One(o) => o,
                    OrientationSelector::All => {
                        return Err(parse_err(line, col, "section needs a single orientation"))
                    }
                };
                spec.per_band.push(((level, orientation), Vec::new()));
                section = Some(spec.per_band.len() - 1);
                continue;
            }
            if toks.len() != 4 {
                return Err(parse_err(
                    line,
                    toks[0].0,
                    format!("expected 4 fields `<scale> <orientation> <dy> <dx>`, got {}", toks.len()),
                ));
            }
            let (sc, st) = toks[0];
            let scale = match st {
                "same" => ScaleSelector::Relative(0),
                "+1" => ScaleSelector::Relative(1),
                "-1" => ScaleSelector::Relative(-1),
                s => match s.parse::<usize>() {
                    Ok(j) if j >= 1 && !s.starts_with('+') => ScaleSelector::Absolute(j),
                    _ => return Err(parse_err(line, sc, format!("bad scale `{s}`"))),
                },
            };
            let orientation = parse_orientation(toks[1].1, line, toks[1].0)?;
            let offset = |(c, t): (usize, &str)| {
                t.parse::<i64>()
                    .map_err(|_| parse_err(line, c, format!("bad offset `{t}`")))
            };
            let entry = NeighborhoodEntry {
                scale,
                orientation,
                dy: offset(toks[2])?,
                dx: offset(toks[3])?,
            };
            match section {
                Some(s) => spec.per_band[s].1.push(entry),
                None => spec.global.push(entry),
            }
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Same-position links to every band of the same level.
    pub fn same_scale_all_orientations() -> Self {
        Self::parse("same all 0 0").expect("valid")
    }

    /// Same-level links to every orientation at the position and its four
    /// direct neighbours.
    pub fn same_scale_cross() -> Self {
        Self::parse("same all 0 0\nsame all -1 0\nsame all 1 0\nsame all 0 -1\nsame all 0 1").expect("valid")
    }

    /// Entries in effect for a source band, global ones first.
    pub fn entries_for(&self, level: usize, orientation: Orientation) -> Vec<NeighborhoodEntry> {
        let mut out = self.global.clone();
        for ((l, o), entries) in &self.per_band {
            if *l == level && *o == orientation {
                out.extend_from_slice(entries);
            }
        }
        out
    }

    /// Number of entries after expanding `all` to the four orientations.
    pub fn expanded_len(&self) -> usize {
        let count = |e: &NeighborhoodEntry| match e.orientation {
            OrientationSelector::All => 4,
            OrientationSelector::One(_) => 1,
        };
        self.global.iter().map(count).sum::<usize>()
            + self.per_band.iter().flat_map(|(_, v)| v).map(count).sum::<usize>()
    }

    pub fn len(&self) -> usize {
        self.global.len() + self.per_band.iter().map(|(_, v)| v.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Boolean sparsity pattern over `Theta`, stored as a CSR matrix of ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternMask {
    support: CsrMatrix,
}

impl PatternMask {
    /// Pattern from arbitrary `(row, col)` pairs (not symmetrized).
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let triplets = pairs
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|(r, c)| (r, c, 1.0))
            .collect();
        Self {
            support: CsrMatrix::from_triplets(dim, dim, triplets),
        }
    }

    pub fn full(dim: usize) -> Self {
        Self::from_pairs(dim, (0..dim).flat_map(|r| (0..dim).map(move |c| (r, c))))
    }

    pub fn diagonal(dim: usize) -> Self {
        Self::from_pairs(dim, (0..dim).map(|i| (i, i)))
    }

    pub fn dim(&self) -> usize {
        self.support.rows()
    }

    pub fn nnz(&self) -> usize {
        self.support.nnz()
    }

    /// Entries per coefficient.
    pub fn density(&self) -> f64 {
        self.nnz() as f64 / self.dim() as f64
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.support.get(r, c) != 0.0
    }

    pub fn support(&self) -> &CsrMatrix {
        &self.support
    }

    pub fn is_symmetric(&self) -> bool {
        self.support.transpose() == self.support
    }

    pub fn is_subset_of(&self, other: &PatternMask) -> bool {
        self.support.iter().all(|(r, c, _)| other.contains(r, c))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.support.iter().map(|(r, c, _)| (r, c))
    }
}

fn map_position(p: usize, from_level: usize, to_level: usize) -> usize {
    if to_level >= from_level {
        p >> (to_level - from_level)
    } else {
        p << (from_level - to_level)
    }
}

/// Marks, for every source coefficient, the targets its neighbourhood
/// selects, then symmetrizes. The diagonal is always included.
pub fn generate_mask(spec: &NeighborhoodSpec, layout: &Layout) -> Result<PatternMask> {
    let levels = layout.levels();
    for entry in spec.global.iter().chain(spec.per_band.iter().flat_map(|(_, v)| v)) {
        if let ScaleSelector::Absolute(j) = entry.scale {
            if j > levels {
                return Err(Error::Geometry(format!(
                    "neighbourhood references level {j} of a {levels}-level transform"
                )));
            }
            if entry.orientation == OrientationSelector::One(Orientation::Approx) && j != levels {
                return Err(Error::Geometry(format!(
                    "no approximation band at level {j} (coarsest level is {levels})"
                )));
            }
        }
    }
    for ((l, o), _) in &spec.per_band {
        if layout.band(*l, *o).is_none() {
            return Err(Error::Geometry(format!("section for missing band ({l}, {o})")));
        }
    }
    let mut pairs = Vec::new();
    for src in layout.bands() {
        let entries = spec.entries_for(src.level, src.orientation);
        for entry in entries {
            let target_level = match entry.scale {
                ScaleSelector::Absolute(j) => j as i64,
                ScaleSelector::Relative(d) => src.level as i64 + d as i64,
            };
            if target_level < 1 || target_level > levels as i64 {
                continue;
            }
            let target_level = target_level as usize;
            let targets: Vec<_> = layout
                .bands()
                .iter()
                .filter(|b| b.level == target_level)
                .filter(|b| match entry.orientation {
                    OrientationSelector::All => true,
                    OrientationSelector::One(o) => b.orientation == o,
                })
                .copied()
                .collect();
            for tgt in targets {
                if entry.dy.unsigned_abs() as usize > tgt.rows || entry.dx.unsigned_abs() as usize > tgt.cols {
                    return Err(Error::Geometry(format!(
                        "offset ({}, {}) exceeds the {}x{} target band",
                        entry.dy, entry.dx, tgt.rows, tgt.cols
                    )));
                }
                for r in 0..src.rows {
                    for c in 0..src.cols {
                        let tr = (map_position(r, src.level, tgt.level) as i64 + entry.dy)
                            .rem_euclid(tgt.rows as i64) as usize;
                        let tc = (map_position(c, src.level, tgt.level) as i64 + entry.dx)
                            .rem_euclid(tgt.cols as i64) as usize;
                        let s = src.offset + r * src.cols + c;
                        let t = tgt.offset + tr * tgt.cols + tc;
                        pairs.push((s, t));
                        pairs.push((t, s));
                    }
                }
            }
        }
    }
    pairs.extend((0..layout.dim()).map(|i| (i, i)));
    Ok(PatternMask::from_pairs(layout.dim(), pairs))
}

/// `Theta` restricted to `mask`, computed column by column without forming
/// the full matrix.
pub fn build_theta_masked(
    spec: &KernelSpec,
    mask: &PatternMask,
    family: &WaveletFamily,
    levels: usize,
) -> Result<SparseTheta> {
    let by_column = mask.support.transpose();
    build_theta_on_support(spec, family, levels, &by_column, Budget::Pattern)
}

/// Fraction of the squared Frobenius norm of `theta` lying inside `mask`.
pub fn energy_capture(theta: &SparseTheta, mask: &PatternMask) -> f64 {
    let (mut inside, mut total) = (0.0, 0.0);
    for (r, c, v) in theta.matrix().iter() {
        total += v * v;
        if mask.contains(r, c) {
            inside += v * v;
        }
    }
    if total == 0.0 {
        1.0
    } else {
        inside / total
    }
}
