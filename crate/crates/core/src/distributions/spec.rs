use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;

use super::{Minimax, MinimaxParams, Model, SignVector, TruncatedGmm, TruncatedGmmParams};
use crate::error::{Error, Result};
use crate::oracle::FiniteDistribution;
use crate::rng::{derive_seed, rng_from};

/// Sign vector of a minimax model: fixed, or drawn afresh per replicate.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaRule {
    Fixed(SignVector),
    Random,
}

/// Tilt of a minimax model: fixed, or `min(1, √k / (2√n))` for sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    Fixed(f64),
    Auto,
}

impl DeltaRule {
    pub fn resolve(self, k: usize, n: usize) -> f64 {
        match self {
            DeltaRule::Fixed(d) => d,
            DeltaRule::Auto => ((k as f64).sqrt() / (2.0 * (n.max(1) as f64).sqrt())).min(1.0),
        }
    }
}

/// A parsed model specification.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    Finite {
        dist: FiniteDistribution,
        seed: Option<u64>,
    },
    TruncatedGmm {
        params: TruncatedGmmParams,
        seed: Option<u64>,
    },
    Minimax {
        k: usize,
        d: usize,
        radius: f64,
        sigma: SigmaRule,
        delta: DeltaRule,
        seed: Option<u64>,
    },
}

impl ModelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Finite { .. } => "finite",
            ModelSpec::TruncatedGmm { .. } => "tgmm",
            ModelSpec::Minimax { .. } => "minimax",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ModelSpec::Finite { seed, .. }
            | ModelSpec::TruncatedGmm { seed, .. }
            | ModelSpec::Minimax { seed, .. } => *seed,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Finite { dist, .. } => dist.dim(),
            ModelSpec::TruncatedGmm { params, .. } => params.dim(),
            ModelSpec::Minimax { d, .. } => *d,
        }
    }

    /// Whether the model does not depend on `n` or on the replicate.
    pub fn is_fixed(&self) -> bool {
        !matches!(
            self,
            ModelSpec::Minimax { sigma: SigmaRule::Random, .. } | ModelSpec::Minimax { delta: DeltaRule::Auto, .. }
        )
    }

    /// Instantiates the model for `k` cells and sample size `n`. A random sign
    /// vector is drawn from `seed`.
    pub fn build(&self, k: usize, n: usize, seed: u64) -> Result<Model> {
        match self {
            ModelSpec::Finite { dist, .. } => Ok(Model::finite(dist.clone(), k)),
            ModelSpec::TruncatedGmm { params, .. } => Ok(Model::TruncatedGmm(TruncatedGmm::new(params.clone())?)),
            ModelSpec::Minimax {
                k: mk,
                d,
                radius,
                sigma,
                delta,
                ..
            } => {
                if *mk != k {
                    return Err(Error::invalid(format!("minimax model has k = {mk} but k = {k} was requested")));
                }
                let sigma = match sigma {
                    SigmaRule::Fixed(s) => s.clone(),
                    SigmaRule::Random => SignVector::random(k, &mut rng_from(derive_seed(seed, &[0x5167]))),
                };
                let params = MinimaxParams::new(k, *d, *radius, sigma, delta.resolve(k, n))?;
                Ok(Model::Minimax(Minimax::new(params)?))
            }
        }
    }
}

/// One `key = value` entry with its 1-based line number and section.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Entry {
    pub line: usize,
    pub section: Option<String>,
    pub key: String,
    pub value: String,
}

/// Splits `key = value` text into entries. `#` starts a comment; `[name]`
/// opens a section.
pub(crate) fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut section = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(line, "unterminated section header"))?
                .trim();
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("expected 'key = value', got '{content}'")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::parse(line, "empty key"));
        }
        out.push(Entry {
            line,
            section: section.clone(),
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

/// Entries keyed by name; duplicates are an error.
pub(crate) struct Table {
    entries: BTreeMap<String, (usize, String)>,
    used: std::cell::RefCell<Vec<String>>,
    first_line: usize,
}

impl Table {
    pub fn new<'a>(entries: impl IntoIterator<Item = &'a Entry>) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut first_line = 0;
        for e in entries {
            if first_line == 0 {
                first_line = e.line;
            }
            if map.insert(e.key.clone(), (e.line, e.value.clone())).is_some() {
                return Err(Error::parse(e.line, format!("duplicate key '{}'", e.key)));
            }
        }
        Ok(Self {
            entries: map,
            used: Default::default(),
            first_line: first_line.max(1),
        })
    }

    pub fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.used.borrow_mut().push(key.to_string());
        self.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    pub fn required(&self, key: &str) -> Result<(usize, &str)> {
        self.raw(key)
            .ok_or_else(|| Error::parse(self.first_line, format!("missing key '{key}'")))
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::parse(line, format!("bad value for '{key}': {e}"))),
        }
    }

    pub fn required_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.required(key)?;
        Ok(self.parsed(key)?.expect("present"))
    }

    /// Fails on any key that was never looked up.
    pub fn reject_unknown(&self) -> Result<()> {
        let used = self.used.borrow();
        for (k, (line, _)) in &self.entries {
            if !used.iter().any(|u| u == k) {
                return Err(Error::parse(*line, format!("unknown key '{k}'")));
            }
        }
        Ok(())
    }
}

/// Parses whitespace- or comma-separated numbers.
pub(crate) fn parse_numbers(line: usize, s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(line, format!("bad number '{t}'")))
        })
        .collect()
}

/// Parses `;`-separated rows of numbers.
fn parse_rows(line: usize, s: &str) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|r| parse_numbers(line, r))
        .collect::<Result<_>>()?;
    if rows.iter().any(Vec::is_empty) {
        return Err(Error::parse(line, "empty row"));
    }
    Ok(rows)
}

fn parse_model_table(t: &Table) -> Result<ModelSpec> {
    let (fline, family) = t.required("family")?;
    let seed = t.parsed::<u64>("seed")?;
    let spec = match family {
        "finite" => {
            let (line, s) = t.required("support")?;
            let rows = parse_rows(line, s)?;
            let radius = t.parsed::<f64>("M")?;
            let weights = match t.raw("weights") {
                Some((wl, w)) => parse_numbers(wl, w)?,
                None => vec![1.0 / rows.len() as f64; rows.len()],
            };
            let dist = FiniteDistribution::new(&rows, weights, radius)
                .map_err(|e| Error::parse(line, e.to_string()))?;
            ModelSpec::Finite { dist, seed }
        }
        "tgmm" => {
            let (line, m) = t.required("means")?;
            let means = parse_rows(line, m)?;
            let k = means.len();
            let d = means[0].len();
            let radius: f64 = t.required_parsed("M")?;
            let weights = match t.raw("weights") {
                Some((wl, w)) => parse_numbers(wl, w)?,
                None => vec![1.0 / k as f64; k],
            };
            let covariances = match (t.raw("sigma"), t.raw("covariances")) {
                (Some(_), Some((cl, _))) => {
                    return Err(Error::parse(cl, "give either 'sigma' or 'covariances', not both"))
                }
                (Some((sl, s)), None) => {
                    let sigma: f64 = s
                        .parse()
                        .map_err(|e| Error::parse(sl, format!("bad value for 'sigma': {e}")))?;
                    if !(sigma > 0.0 && sigma.is_finite()) {
                        return Err(Error::parse(sl, "sigma must be positive"));
                    }
                    vec![DMatrix::identity(d, d) * (sigma * sigma); k]
                }
                (None, Some((cl, c))) => {
                    let rows = parse_rows(cl, c)?;
                    if rows.len() != k {
                        return Err(Error::parse(cl, format!("{} covariances for {k} means", rows.len())));
                    }
                    rows.into_iter()
                        .map(|r| {
                            if r.len() != d * d {
                                Err(Error::parse(cl, format!("covariance needs {} entries", d * d)))
                            } else {
                                Ok(DMatrix::from_row_slice(d, d, &r))
                            }
                        })
                        .collect::<Result<_>>()?
                }
                (None, None) => return Err(Error::parse(line, "missing 'sigma' or 'covariances'")),
            };
            let params = TruncatedGmmParams {
                means,
                covariances,
                weights,
                radius,
            };
            params.validate().map_err(|e| Error::parse(line, e.to_string()))?;
            ModelSpec::TruncatedGmm { params, seed }
        }
        "minimax" => {
            let k: usize = t.required_parsed("k")?;
            let d: usize = t.required_parsed("d")?;
            let radius: f64 = t.required_parsed("M")?;
            let sigma = match t.raw("sigma") {
                None => SigmaRule::Random,
                Some((_, "random")) => SigmaRule::Random,
                Some((sl, s)) => SigmaRule::Fixed(s.parse().map_err(|e: Error| Error::parse(sl, e.to_string()))?),
            };
            let delta = match t.raw("delta") {
                None | Some((_, "auto")) => DeltaRule::Auto,
                Some((dl, s)) => DeltaRule::Fixed(
                    s.parse()
                        .map_err(|e| Error::parse(dl, format!("bad value for 'delta': {e}")))?,
                ),
            };
            // Validate everything except the n-dependent tilt now.
            let probe_sigma = match &sigma {
                SigmaRule::Fixed(s) => s.clone(),
                SigmaRule::Random => SignVector::all_positive(k.max(1)),
            };
            let probe_delta = match delta {
                DeltaRule::Fixed(v) => v,
                DeltaRule::Auto => 0.5,
            };
            MinimaxParams::new(k, d, radius, probe_sigma, probe_delta)
                .and_then(Minimax::new)
                .map_err(|e| Error::parse(fline, e.to_string()))?;
            ModelSpec::Minimax {
                k,
                d,
                radius,
                sigma,
                delta,
                seed,
            }
        }
        other => {
            return Err(Error::parse(
                fline,
                format!("unknown family '{other}' (expected finite, tgmm or minimax)"),
            ))
        }
    };
    t.reject_unknown()?;
    Ok(spec)
}

/// Parses a model specification. Section headers other than `[model]` are
/// rejected; keys may also appear before any header.
pub fn parse_model_spec(text: &str) -> Result<ModelSpec> {
    let entries = parse_entries(text)?;
    if let Some(e) = entries
        .iter()
        .find(|e| e.section.as_deref().is_some_and(|s| s != "model"))
    {
        return Err(Error::parse(e.line, format!("unexpected section '{}'", e.section.as_deref().unwrap_or(""))));
    }
    parse_model_entries(&entries)
}

pub(crate) fn parse_model_entries(entries: &[Entry]) -> Result<ModelSpec> {
    parse_model_table(&Table::new(entries)?)
}

pub fn read_model_spec(path: &Path) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model_spec(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistributionModel;

    #[test]
    fn finite_spec() {
        let s = parse_model_spec("family = finite\nsupport = 0; 1; 10; 11  # four atoms\nM = 11\nseed = 3\n").unwrap();
        let ModelSpec::Finite { dist, seed } = &s else { panic!() };
        assert_eq!(dist.len(), 4);
        assert_eq!(dist.weights(), &[0.25; 4]);
        assert_eq!(dist.radius(), 11.0);
        assert_eq!(*seed, Some(3));
        let m = s.build(2, 100, 0).unwrap();
        assert_eq!(m.truth().unwrap().optimal_distortion, 0.25);
    }

    #[test]
    fn tgmm_spec() {
        let s = parse_model_spec("[model]\nfamily = tgmm\nmeans = -2 0; 2 0\nsigma = 0.25\nM = 8\n").unwrap();
        let m = s.build(2, 100, 0).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.radius(), 8.0);
        let s = parse_model_spec("family = tgmm\nmeans = 0 0\ncovariances = 1 0.5 0.5 2\nM = 5\n").unwrap();
        assert!(s.build(1, 10, 0).is_ok());
    }

    #[test]
    fn minimax_spec() {
        let s = parse_model_spec("family = minimax\nk = 2\nd = 1\nM = 1\nsigma = + -\ndelta = 0.5\n").unwrap();
        let Model::Minimax(m) = s.build(2, 10, 0).unwrap() else { panic!() };
        assert_eq!(m.delta(), 0.5);
        assert_eq!(m.sigma().signs(), &[1, -1]);
        assert!(s.is_fixed());

        let s = parse_model_spec("family = minimax\nk = 4\nd = 2\nM = 1\nsigma = random\ndelta = auto\n").unwrap();
        assert!(!s.is_fixed());
        let Model::Minimax(m) = s.build(4, 400, 9).unwrap() else { panic!() };
        assert_eq!(m.delta(), 0.05);
        assert!(s.build(3, 400, 9).is_err());
        assert_eq!(DeltaRule::Auto.resolve(4, 1), 1.0);
    }

    #[test]
    fn malformed_specs_report_lines() {
        let err = parse_model_spec("family = finite\nsupport = 0; x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_model_spec("family = finite\nsupport = 0; 1\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_model_spec("family = finite\nfamily = tgmm\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse_model_spec("family = cauchy\n").is_err());
        assert!(parse_model_spec("no equals sign\n").is_err());
        assert!(parse_model_spec("family = tgmm\nmeans = 3 0\nsigma = 1\nM = 4\n").is_err());
    }
}
