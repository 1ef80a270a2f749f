//! Points, codebooks and the Voronoi assignment rule.
//!
//! Points and codepoints are stored row-major in flat `Vec<f64>` buffers. The
//! assignment of a point to a cell follows the tessellation convention: the
//! closest codepoint wins and ties go to the lowest index, compared with exact
//! floating-point equality.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Slack allowed on `‖x‖ ≤ M` when validating a dataset.
pub const RADIUS_SLACK: f64 = 1e-9;

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `n` points in `ℝ^d` with optional latent labels and an enclosing radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    points: Vec<f64>,
    labels: Option<Vec<usize>>,
    radius: f64,
}

/// Outcome of [`validate_dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub n: usize,
    pub dim: usize,
    pub max_norm: f64,
}

/// Checks rows for equal dimension, finiteness and membership in `B(0, M)`.
///
/// When `radius` is `None` only the first two are checked; the reported
/// `max_norm` is what `M` defaults to.
pub fn validate_dataset(rows: &[Vec<f64>], radius: Option<f64>) -> Result<ValidationReport> {
    let dim = rows.first().map_or(0, Vec::len);
    let mut max_norm = 0.0f64;
    for (index, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let r = norm(row);
        if let Some(m) = radius {
            if r > m + RADIUS_SLACK {
                return Err(Error::OutsideBall {
                    index,
                    norm: r,
                    radius: m,
                });
            }
        }
        max_norm = max_norm.max(r);
    }
    Ok(ValidationReport {
        n: rows.len(),
        dim,
        max_norm,
    })
}

impl Dataset {
    /// Builds a dataset from flat row-major storage. `radius = None` sets `M`
    /// to the largest point norm.
    pub fn new(
        dim: usize,
        points: Vec<f64>,
        labels: Option<Vec<usize>>,
        radius: Option<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !points.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: points.len() % dim,
            });
        }
        let n = points.len() / dim;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::invalid(format!(
                    "{} labels for {} points",
                    l.len(),
                    n
                )));
            }
        }
        if let Some(m) = radius {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::invalid(format!("radius {m} must be finite and nonnegative")));
            }
        }
        let mut max_norm = 0.0f64;
        for (index, p) in points.chunks_exact(dim).enumerate() {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index });
            }
            let r = norm(p);
            if let Some(m) = radius {
                if r > m + RADIUS_SLACK {
                    return Err(Error::OutsideBall {
                        index,
                        norm: r,
                        radius: m,
                    });
                }
            }
            max_norm = max_norm.max(r);
        }
        Ok(Self {
            dim,
            points,
            labels,
            radius: radius.unwrap_or(max_norm),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], radius: Option<f64>) -> Result<Self> {
        let report = validate_dataset(rows, radius)?;
        if rows.is_empty() {
            return Err(Error::invalid(
                "cannot infer the dimension of an empty row list; use Dataset::new",
            ));
        }
        let points = rows.iter().flatten().copied().collect();
        Ok(Self {
            dim: report.dim,
            points,
            labels: None,
            radius: radius.unwrap_or(report.max_norm),
        })
    }

    /// One-dimensional dataset from scalars.
    pub fn from_scalars(values: &[f64], radius: Option<f64>) -> Result<Self> {
        Self::new(1, values.to_vec(), None, radius)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Enclosing radius `M`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    /// Largest point norm.
    pub fn max_norm(&self) -> f64 {
        self.points().map(norm).fold(0.0, f64::max)
    }

    /// Number of distinct points (exact coordinate equality).
    pub fn distinct_count(&self) -> usize {
        let mut rows: Vec<&[f64]> = self.points().collect();
        rows.sort_by(|a, b| lex_cmp(a, b));
        rows.dedup();
        rows.len()
    }

    /// Grand mean of all points.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for p in self.points() {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        let n = self.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// An ordered k-tuple of codepoints. Codepoints need not be distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    points: Vec<f64>,
}

impl Codebook {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "codebook storage of length {} is not a positive multiple of d = {dim}",
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("codebook has a non-finite coordinate"));
        }
        Ok(Self { dim, points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::new(dim, rows.iter().flatten().copied().collect())
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn codepoint(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub(crate) fn codepoint_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn codepoints(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.codepoints().map(<[f64]>::to_vec).collect()
    }

    /// Smallest distance between two codepoints; `+∞` when `k = 1`.
    pub fn min_separation(&self) -> f64 {
        let k = self.k();
        let mut best = f64::INFINITY;
        for i in 0..k {
            for j in i + 1..k {
                best = best.min(sq_dist(self.codepoint(i), self.codepoint(j)).sqrt());
            }
        }
        best
    }

    /// Codebook with codepoints reordered as `self[perm[0]], self[perm[1]], …`.
    pub fn permuted(&self, perm: &[usize]) -> Codebook {
        let points = perm
            .iter()
            .flat_map(|&j| self.codepoint(j).iter().copied())
            .collect();
        Codebook {
            dim: self.dim,
            points,
        }
    }

    /// Codepoints sorted lexicographically; the canonical representative up
    /// to relabeling.
    pub fn canonical(&self) -> Codebook {
        let mut order: Vec<usize> = (0..self.k()).collect();
        order.sort_by(|&a, &b| lex_cmp(self.codepoint(a), self.codepoint(b)));
        self.permuted(&order)
    }

    /// Largest coordinate difference to `other`, both taken in canonical order.
    pub fn relabeled_max_diff(&self, other: &Codebook) -> f64 {
        if self.dim != other.dim || self.k() != other.k() {
            return f64::INFINITY;
        }
        let a = self.canonical();
        let b = other.canonical();
        a.points
            .iter()
            .zip(&b.points)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }
}

/// Per-point cell indices under the tessellation convention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    cells: Vec<usize>,
    k: usize,
}

impl Assignment {
    pub fn new(cells: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        if let Some((index, &label)) = cells.iter().enumerate().find(|(_, &c)| c >= k) {
            return Err(Error::LabelOutOfRange { index, label, k });
        }
        Ok(Self { cells, k })
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &j in &self.cells {
            c[j] += 1;
        }
        c
    }
}

/// Nearest codepoint and its squared distance, no dimension check.
#[inline]
pub(crate) fn nearest(point: &[f64], codebook: &Codebook) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in codebook.codepoints().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (best, best_d)
}

/// Index of the closest codepoint; ties go to the lowest index.
pub fn assign(point: &[f64], codebook: &Codebook) -> Result<usize> {
    codebook.check_dim(point.len())?;
    Ok(nearest(point, codebook).0)
}

/// [`assign`] applied to every point.
pub fn partition(dataset: &Dataset, codebook: &Codebook) -> Result<Assignment> {
    codebook.check_dim(dataset.dim())?;
    let cells = dataset.points().map(|p| nearest(p, codebook).0).collect();
    Ok(Assignment {
        cells,
        k: codebook.k(),
    })
}

// --- text format -----------------------------------------------------------

/// Parses the dataset text format:
///
/// ```text
/// d=<int> n=<int> [M=<float>] [labeled=0|1]
/// x_1 … x_d [label]
/// ```
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;

    let (mut dim, mut n, mut radius, mut labeled) = (None, None, None, false);
    for tok in header.split_whitespace() {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| Error::parse(hline, format!("expected key=value, got `{tok}`")))?;
        let bad = || Error::parse(hline, format!("bad value for {key}: `{value}`"));
        match key {
            "d" => dim = Some(value.parse::<usize>().map_err(|_| bad())?),
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
            "M" => radius = Some(value.parse::<f64>().map_err(|_| bad())?),
            "labeled" => {
                labeled = match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(Error::parse(hline, "labeled must be 0 or 1")),
                }
            }
            _ => return Err(Error::parse(hline, format!("unknown header key `{key}`"))),
        }
    }
    let dim = dim.ok_or_else(|| Error::parse(hline, "header lacks d="))?;
    let n = n.ok_or_else(|| Error::parse(hline, "header lacks n="))?;
    if dim == 0 {
        return Err(Error::parse(hline, "d must be positive"));
    }

    let mut points = Vec::with_capacity(n * dim);
    let mut labels = Vec::new();
    let mut count = 0;
    for (line, body) in lines {
        let mut toks = body.split_whitespace();
        for _ in 0..dim {
            let tok = toks
                .next()
                .ok_or_else(|| Error::parse(line, format!("expected {dim} coordinates")))?;
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(line, format!("bad coordinate `{tok}`")))?;
            points.push(v);
        }
        if labeled {
            let tok = toks
                .next()
                .ok_or_else(|| Error::parse(line, "missing label"))?;
            labels.push(
                tok.parse::<usize>()
                    .map_err(|_| Error::parse(line, format!("bad label `{tok}`")))?,
            );
        }
        if toks.next().is_some() {
            return Err(Error::parse(line, "trailing tokens"));
        }
        count += 1;
    }
    if count != n {
        return Err(Error::parse(
            hline,
            format!("header declares n={n} but {count} points follow"),
        ));
    }
    Dataset::new(dim, points, labeled.then_some(labels), radius)
}

pub fn format_dataset(dataset: &Dataset) -> String {
    let mut out = String::new();
    let labeled = dataset.labels().is_some();
    let _ = writeln!(
        out,
        "d={} n={} M={} labeled={}",
        dataset.dim(),
        dataset.len(),
        dataset.radius(),
        u8::from(labeled)
    );
    for (i, p) in dataset.points().enumerate() {
        let mut first = true;
        for v in p {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        if let Some(l) = dataset.labels() {
            let _ = write!(out, " {}", l[i]);
        }
        out.push('\n');
    }
    out
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_dataset(dataset)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cb(v: &[f64]) -> Codebook {
        Codebook::from_scalars(v).unwrap()
    }

    #[test]
    fn assign_breaks_ties_to_lowest_index() {
        assert_eq!(assign(&[0.5], &cb(&[0.0, 1.0])).unwrap(), 0);
        assert_eq!(assign(&[0.5], &cb(&[1.0, 0.0])).unwrap(), 0);
    }

    #[test]
    fn assign_picks_nearest() {
        let c = Codebook::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(assign(&[3.0, 3.0], &c).unwrap(), 1);
        assert_eq!(assign(&[10.0], &cb(&[0.5, 10.5])).unwrap(), 1);
    }

    #[test]
    fn assign_rejects_dimension_mismatch() {
        let err = assign(&[1.0, 2.0], &cb(&[0.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn partition_examples() {
        let d = Dataset::from_scalars(&[0.0, 1.0, 10.0, 11.0], None).unwrap();
        assert_eq!(partition(&d, &cb(&[0.5, 10.5])).unwrap().cells(), &[0, 0, 1, 1]);

        let rows = vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 0.0]];
        let d = Dataset::from_rows(&rows, None).unwrap();
        let c = Codebook::from_rows(&rows).unwrap();
        assert_eq!(partition(&d, &c).unwrap().cells(), &[0, 1, 2]);

        let empty = Dataset::new(2, vec![], None, None).unwrap();
        assert!(partition(&empty, &c).unwrap().is_empty());
    }

    #[test]
    fn validation_examples() {
        let r = validate_dataset(&[vec![0.0, 0.0], vec![1.0, 1.0]], Some(2.0)).unwrap();
        assert_eq!(r.max_norm, 2f64.sqrt());
        assert!(matches!(
            validate_dataset(&[vec![0.0, 0.0], vec![3.0, 0.0]], Some(2.0)),
            Err(Error::OutsideBall { index: 1, .. })
        ));
        assert!(matches!(
            validate_dataset(&[vec![0.0, f64::NAN]], None),
            Err(Error::NonFinite { index: 0 })
        ));
        assert!(matches!(
            validate_dataset(&[vec![0.0, 0.0], vec![1.0]], None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn radius_defaults_to_max_norm() {
        let d = Dataset::from_rows(&[vec![3.0, 4.0], vec![0.0, 1.0]], None).unwrap();
        assert_eq!(d.radius(), 5.0);
    }

    #[test]
    fn text_format_round_trip() {
        let d = Dataset::from_rows(&[vec![0.1, -2.5], vec![1e-17, 3.0]], Some(4.0))
            .unwrap()
            .with_labels(vec![1, 0])
            .unwrap();
        let back = parse_dataset(&format_dataset(&d)).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn text_format_defaults_and_errors() {
        let d = parse_dataset("d=1 n=2\n3\n-4\n").unwrap();
        assert_eq!(d.radius(), 4.0);
        assert!(d.labels().is_none());
        assert!(parse_dataset("d=1 n=3\n3\n-4\n").is_err());
        assert!(parse_dataset("d=2 n=1\n3\n").is_err());
        assert!(parse_dataset("d=1 n=1 M=1\n3\n").is_err());
        assert!(parse_dataset("d=1 n=1 labeled=1\n3\n").is_err());
    }

    proptest! {
        #[test]
        fn assign_is_permutation_covariant(
            pts in prop::collection::vec(-5.0f64..5.0, 2..12),
            x in -6.0f64..6.0,
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let c = cb(&pts);
            let mut perm: Vec<usize> = (0..c.k()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let p = c.permuted(&perm);
            let a = assign(&[x], &c).unwrap();
            let b = assign(&[x], &p).unwrap();
            prop_assert_eq!(sq_dist(&[x], c.codepoint(a)), sq_dist(&[x], p.codepoint(b)));
            let best = sq_dist(&[x], c.codepoint(a));
            let ties = c.codepoints().filter(|q| sq_dist(&[x], q) == best).count();
            if ties == 1 {
                prop_assert_eq!(c.codepoint(a), p.codepoint(b));
            }
        }
    }
}
