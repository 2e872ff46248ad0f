//! Search spaces, configurations, and the mapping between parameter values
//! and the discrete bins the policy acts on.
//!
//! Every parameter is discretized into `bins` half-open intervals
//! `[edge_i, edge_{i+1})`, with the upper domain edge mapped into the last bin.
//! Log-scale parameters use geometric edges. Integer parameters whose range
//! holds no more values than `bins` get exactly one bin per integer.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default discretization resolution for continuous and wide integer domains.
pub const DEFAULT_BINS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Continuous { lo: f64, hi: f64, log_scale: bool },
    Integer { lo: i64, hi: i64, log_scale: bool },
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Continuous,
    Integer,
    Categorical,
}

impl ParamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamKind::Continuous => "continuous",
            ParamKind::Integer => "integer",
            ParamKind::Categorical => "categorical",
        }
    }
}

/// One hyperparameter: a name, a typed domain and its discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    name: String,
    domain: Domain,
    bins: usize,
}

impl ParamSpec {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        Self::build(
            name.into(),
            Domain::Continuous {
                lo,
                hi,
                log_scale: false,
            },
            bins,
        )
    }

    pub fn log_continuous(name: impl Into<String>, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        Self::build(
            name.into(),
            Domain::Continuous {
                lo,
                hi,
                log_scale: true,
            },
            bins,
        )
    }

    pub fn integer(name: impl Into<String>, lo: i64, hi: i64, bins: usize) -> Result<Self> {
        Self::build(
            name.into(),
            Domain::Integer {
                lo,
                hi,
                log_scale: false,
            },
            bins,
        )
    }

    pub fn log_integer(name: impl Into<String>, lo: i64, hi: i64, bins: usize) -> Result<Self> {
        Self::build(
            name.into(),
            Domain::Integer {
                lo,
                hi,
                log_scale: true,
            },
            bins,
        )
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let categories: Vec<String> = categories.into_iter().map(Into::into).collect();
        let bins = categories.len();
        Self::build(name.into(), Domain::Categorical { categories }, bins)
    }

    fn build(name: String, domain: Domain, bins: usize) -> Result<Self> {
        if name.is_empty() {
            return Err(Error::InvalidSpace("parameter name is empty".into()));
        }
        let invalid = |reason: String| Error::InvalidSpace(format!("`{name}`: {reason}"));
        let bins = match &domain {
            Domain::Continuous { lo, hi, log_scale } => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(invalid("bounds must be finite".into()));
                }
                if lo >= hi {
                    return Err(invalid(format!("lo ({lo}) must be < hi ({hi})")));
                }
                if *log_scale && *lo <= 0.0 {
                    return Err(invalid("log-scale domain requires lo > 0".into()));
                }
                if bins < 2 {
                    return Err(invalid(format!("continuous parameters need at least 2 bins, got {bins}")));
                }
                bins
            }
            Domain::Integer { lo, hi, log_scale } => {
                if lo >= hi {
                    return Err(invalid(format!("lo ({lo}) must be < hi ({hi})")));
                }
                if *log_scale && *lo <= 0 {
                    return Err(invalid("log-scale domain requires lo > 0".into()));
                }
                if bins < 2 {
                    return Err(invalid(format!("integer parameters need at least 2 bins, got {bins}")));
                }
                let count = (hi - lo + 1) as usize;
                count.min(bins)
            }
            Domain::Categorical { categories } => {
                if categories.len() < 2 {
                    return Err(invalid("categorical parameters need at least 2 categories".into()));
                }
                for (i, c) in categories.iter().enumerate() {
                    if categories[..i].contains(c) {
                        return Err(invalid(format!("duplicate category `{c}`")));
                    }
                }
                if bins != categories.len() {
                    return Err(invalid("bins must equal the category count".into()));
                }
                bins
            }
        };
        let spec = ParamSpec { name, domain, bins };
        if let Domain::Integer { .. } = spec.domain {
            // Wide integer ranges are split into intervals; each must hold an integer.
            for i in 0..spec.bins {
                let (first, last) = spec.integer_bin_range(i);
                if first > last {
                    return Err(Error::InvalidSpace(format!(
                        "`{}`: bin {i} contains no integer value; reduce bins",
                        spec.name
                    )));
                }
            }
        }
        Ok(spec)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn kind(&self) -> ParamKind {
        match self.domain {
            Domain::Continuous { .. } => ParamKind::Continuous,
            Domain::Integer { .. } => ParamKind::Integer,
            Domain::Categorical { .. } => ParamKind::Categorical,
        }
    }

    fn one_bin_per_integer(&self) -> bool {
        match self.domain {
            Domain::Integer { lo, hi, .. } => (hi - lo + 1) as usize == self.bins,
            _ => false,
        }
    }

    /// Interval edge `i` in `0..=bins` of a continuous or wide-integer domain.
    /// Integer domains cover `[lo, hi + 1)`.
    fn edge(&self, i: usize) -> f64 {
        let (lo, hi, log_scale) = self.interval();
        if i == 0 {
            return lo;
        }
        if i == self.bins {
            return hi;
        }
        let frac = i as f64 / self.bins as f64;
        if log_scale {
            let (l0, l1) = (lo.log10(), hi.log10());
            10f64.powf(l0 + (l1 - l0) * frac)
        } else {
            lo + (hi - lo) * frac
        }
    }

    fn center(&self, i: usize) -> f64 {
        let (lo, hi, log_scale) = self.interval();
        let frac = (i as f64 + 0.5) / self.bins as f64;
        if log_scale {
            let (l0, l1) = (lo.log10(), hi.log10());
            10f64.powf(l0 + (l1 - l0) * frac)
        } else {
            lo + (hi - lo) * frac
        }
    }

    fn interval(&self) -> (f64, f64, bool) {
        match self.domain {
            Domain::Continuous { lo, hi, log_scale } => (lo, hi, log_scale),
            Domain::Integer { lo, hi, log_scale } => (lo as f64, hi as f64 + 1.0, log_scale),
            Domain::Categorical { .. } => unreachable!("categorical parameters have no interval"),
        }
    }

    /// Locates `x` among the half-open intervals; `x == hi` maps to the last bin.
    fn locate(&self, x: f64) -> usize {
        let (lo, hi, log_scale) = self.interval();
        let frac = if log_scale {
            (x.log10() - lo.log10()) / (hi.log10() - lo.log10())
        } else {
            (x - lo) / (hi - lo)
        };
        let last = self.bins - 1;
        let mut i = ((frac * self.bins as f64).floor().max(0.0) as usize).min(last);
        while i < last && x >= self.edge(i + 1) {
            i += 1;
        }
        while i > 0 && x < self.edge(i) {
            i -= 1;
        }
        i
    }

    /// Smallest and largest integer inside interval `i` of a wide integer domain.
    fn integer_bin_range(&self, i: usize) -> (i64, i64) {
        let Domain::Integer { hi, .. } = self.domain else {
            unreachable!()
        };
        let first = self.edge(i).ceil() as i64;
        let last = if i + 1 == self.bins {
            hi
        } else {
            (self.edge(i + 1).ceil() as i64) - 1
        };
        (first, last.min(hi))
    }

    /// Checks that `value` has the right type and lies inside the domain.
    pub fn check(&self, value: &ParamValue) -> Result<()> {
        match (&self.domain, value) {
            (Domain::Continuous { lo, hi, .. }, ParamValue::Real(v)) => {
                if !v.is_finite() {
                    Err(Error::value(&self.name, "value is not finite"))
                } else if v < lo || v > hi {
                    Err(Error::value(&self.name, format!("{} out of domain", self.name)))
                } else {
                    Ok(())
                }
            }
            (Domain::Integer { lo, hi, .. }, ParamValue::Int(v)) => {
                if v < lo || v > hi {
                    Err(Error::value(&self.name, format!("{} out of domain", self.name)))
                } else {
                    Ok(())
                }
            }
            (Domain::Categorical { categories }, ParamValue::Category(c)) => {
                if categories.contains(c) {
                    Ok(())
                } else {
                    Err(Error::value(&self.name, format!("unknown category `{c}`")))
                }
            }
            (_, other) => Err(Error::value(
                &self.name,
                format!("expected a {} value, got {other:?}", self.kind().as_str()),
            )),
        }
    }

    /// Index of the bin containing `value`.
    pub fn bin_index(&self, value: &ParamValue) -> Result<usize> {
        self.check(value)?;
        Ok(match (&self.domain, value) {
            (Domain::Continuous { .. }, ParamValue::Real(v)) => self.locate(*v),
            (Domain::Integer { lo, .. }, ParamValue::Int(v)) => {
                if self.one_bin_per_integer() {
                    (v - lo) as usize
                } else {
                    self.locate(*v as f64)
                }
            }
            (Domain::Categorical { categories }, ParamValue::Category(c)) => {
                categories.iter().position(|x| x == c).expect("checked above")
            }
            _ => unreachable!("checked above"),
        })
    }

    /// Representative value of bin `index`: the arithmetic (or geometric)
    /// center, the nearest in-bin integer, or the category label.
    pub fn bin_value(&self, index: usize) -> Result<ParamValue> {
        if index >= self.bins {
            return Err(Error::BinOutOfRange {
                name: self.name.clone(),
                index,
                bins: self.bins,
            });
        }
        Ok(match &self.domain {
            Domain::Continuous { .. } => ParamValue::Real(self.center(index)),
            Domain::Integer { lo, .. } => {
                if self.one_bin_per_integer() {
                    ParamValue::Int(lo + index as i64)
                } else {
                    let (first, last) = self.integer_bin_range(index);
                    ParamValue::Int((self.center(index).round() as i64).clamp(first, last))
                }
            }
            Domain::Categorical { categories } => ParamValue::Category(categories[index].clone()),
        })
    }
}

/// A single hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Category(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Real(v) => Some(*v),
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Category(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Category(c) => f.write_str(c),
        }
    }
}

/// One value per parameter, in the order of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub values: Vec<ParamValue>,
}

impl Configuration {
    pub fn new(values: Vec<ParamValue>) -> Self {
        Configuration { values }
    }
}

/// The ordered, non-empty list of parameters being optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    params: Vec<ParamSpec>,
    fingerprint: String,
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidSpace("search space has no parameters".into()));
        }
        for (i, p) in params.iter().enumerate() {
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidSpace(format!("duplicate parameter name `{}`", p.name)));
            }
        }
        let fingerprint = fingerprint(&params);
        Ok(SearchSpace {
            params,
            fingerprint,
        })
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn bins(&self) -> Vec<usize> {
        self.params.iter().map(ParamSpec::bins).collect()
    }

    /// Total number of bin tuples.
    pub fn cardinality(&self) -> usize {
        self.params.iter().map(ParamSpec::bins).product()
    }

    /// Succeeds iff `config` has one in-domain value per parameter; otherwise
    /// reports the first violation.
    pub fn validate(&self, config: &Configuration) -> Result<()> {
        if config.values.len() != self.params.len() {
            return Err(Error::Arity {
                expected: self.params.len(),
                got: config.values.len(),
            });
        }
        for (spec, value) in self.params.iter().zip(&config.values) {
            spec.check(value)?;
        }
        Ok(())
    }

    pub fn bin_indices(&self, config: &Configuration) -> Result<Vec<usize>> {
        self.validate(config)?;
        self.params
            .iter()
            .zip(&config.values)
            .map(|(spec, v)| spec.bin_index(v))
            .collect()
    }

    pub fn config_from_bins(&self, bins: &[usize]) -> Result<Configuration> {
        if bins.len() != self.params.len() {
            return Err(Error::Arity {
                expected: self.params.len(),
                got: bins.len(),
            });
        }
        let values = self
            .params
            .iter()
            .zip(bins)
            .map(|(spec, &b)| spec.bin_value(b))
            .collect::<Result<_>>()?;
        Ok(Configuration { values })
    }

    /// Replaces every value by the representative value of its bin.
    pub fn snap(&self, config: &Configuration) -> Result<Configuration> {
        let bins = self.bin_indices(config)?;
        self.config_from_bins(&bins)
    }

    /// Decodes a flat index in `0..cardinality()` into a bin tuple, first
    /// parameter most significant.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.params.len()];
        for (slot, p) in out.iter_mut().zip(&self.params).rev() {
            *slot = flat % p.bins;
            flat /= p.bins;
        }
        out
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawSpace = toml::from_str(text).map_err(|e| Error::InvalidSpace(e.to_string()))?;
        raw.into_space()
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let raw = RawSpace {
            params: self.params.iter().map(RawParam::from).collect(),
        };
        toml::to_string(&raw).expect("space serializes")
    }
}

fn fingerprint(params: &[ParamSpec]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.name.as_bytes());
        h.update([0u8]);
        h.update(p.kind().as_str().as_bytes());
        match &p.domain {
            Domain::Continuous { lo, hi, log_scale } => {
                h.update(lo.to_bits().to_le_bytes());
                h.update(hi.to_bits().to_le_bytes());
                h.update([*log_scale as u8]);
            }
            Domain::Integer { lo, hi, log_scale } => {
                h.update(lo.to_le_bytes());
                h.update(hi.to_le_bytes());
                h.update([*log_scale as u8]);
            }
            Domain::Categorical { categories } => {
                for c in categories {
                    h.update(c.as_bytes());
                    h.update([0u8]);
                }
            }
        }
        h.update((p.bins as u64).to_le_bytes());
    }
    h.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    params: Vec<RawParam>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParam {
    name: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_scale: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
}

impl From<&ParamSpec> for RawParam {
    fn from(p: &ParamSpec) -> Self {
        let mut raw = RawParam {
            name: p.name.clone(),
            kind: p.kind().as_str().to_string(),
            lo: None,
            hi: None,
            log_scale: None,
            bins: None,
            categories: None,
        };
        match &p.domain {
            Domain::Continuous { lo, hi, log_scale } => {
                raw.lo = Some(*lo);
                raw.hi = Some(*hi);
                raw.log_scale = Some(*log_scale);
                raw.bins = Some(p.bins);
            }
            Domain::Integer { lo, hi, log_scale } => {
                raw.lo = Some(*lo as f64);
                raw.hi = Some(*hi as f64);
                raw.log_scale = Some(*log_scale);
                raw.bins = Some(p.bins);
            }
            Domain::Categorical { categories } => raw.categories = Some(categories.clone()),
        }
        raw
    }
}

impl RawSpace {
    fn into_space(self) -> Result<SearchSpace> {
        let params = self
            .params
            .into_iter()
            .map(RawParam::into_spec)
            .collect::<Result<_>>()?;
        SearchSpace::new(params)
    }
}

impl RawParam {
    fn into_spec(self) -> Result<ParamSpec> {
        let err = |msg: &str| Error::InvalidSpace(format!("`{}`: {msg}", self.name));
        match self.kind.as_str() {
            "continuous" | "integer" => {
                if self.categories.is_some() {
                    return Err(err("`categories` is only valid for categorical parameters"));
                }
                let lo = self.lo.ok_or_else(|| err("missing `lo`"))?;
                let hi = self.hi.ok_or_else(|| err("missing `hi`"))?;
                let log_scale = self.log_scale.unwrap_or(false);
                let bins = self.bins.unwrap_or(DEFAULT_BINS);
                if self.kind == "continuous" {
                    let domain = Domain::Continuous { lo, hi, log_scale };
                    ParamSpec::build(self.name, domain, bins)
                } else {
                    if lo.fract() != 0.0 || hi.fract() != 0.0 {
                        return Err(err("integer bounds must be whole numbers"));
                    }
                    let domain = Domain::Integer {
                        lo: lo as i64,
                        hi: hi as i64,
                        log_scale,
                    };
                    ParamSpec::build(self.name, domain, bins)
                }
            }
            "categorical" => {
                if self.lo.is_some() || self.hi.is_some() || self.log_scale.is_some() {
                    return Err(err("categorical parameters take only `categories`"));
                }
                let categories = self.categories.clone().ok_or_else(|| err("missing `categories`"))?;
                if let Some(b) = self.bins {
                    if b != categories.len() {
                        return Err(err("bins must equal the category count"));
                    }
                }
                ParamSpec::categorical(self.name, categories)
            }
            other => Err(err(&format!("unknown kind `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::continuous("x", 0.0, 1.0, 16).unwrap()]).unwrap()
    }

    #[test]
    fn validate_examples() {
        let space = unit();
        assert!(space.validate(&Configuration::new(vec![ParamValue::Real(0.5)])).is_ok());
        let err = space
            .validate(&Configuration::new(vec![ParamValue::Real(1.5)]))
            .unwrap_err();
        assert!(err.to_string().contains("x out of domain"), "{err}");

        let two = SearchSpace::new(vec![
            ParamSpec::continuous("x", 0.0, 1.0, 4).unwrap(),
            ParamSpec::continuous("y", 0.0, 1.0, 4).unwrap(),
        ])
        .unwrap();
        let err = two
            .validate(&Configuration::new(vec![ParamValue::Real(0.5)]))
            .unwrap_err();
        assert!(err.to_string().contains("arity mismatch"), "{err}");
    }

    #[test]
    fn uniform_binning() {
        let p = ParamSpec::continuous("x", 0.0, 10.0, 10).unwrap();
        assert_eq!(p.bin_index(&ParamValue::Real(2.5)).unwrap(), 2);
        assert_eq!(p.bin_index(&ParamValue::Real(10.0)).unwrap(), 9);
        assert_eq!(p.bin_index(&ParamValue::Real(0.0)).unwrap(), 0);
        assert_eq!(p.bin_value(2).unwrap(), ParamValue::Real(2.5));
        assert!(p.bin_index(&ParamValue::Real(10.5)).is_err());
        assert!(p.bin_value(10).is_err());
    }

    #[test]
    fn geometric_binning() {
        // Edges 1e-4, 1e-3, 1e-2, 1e-1, 1e0.
        let p = ParamSpec::log_continuous("lr", 1e-4, 1.0, 4).unwrap();
        assert_eq!(p.bin_index(&ParamValue::Real(1e-3)).unwrap(), 1);
        assert_eq!(p.bin_index(&ParamValue::Real(9.99e-4)).unwrap(), 0);
        assert_eq!(p.bin_index(&ParamValue::Real(1.0)).unwrap(), 3);
        let c = p.bin_value(1).unwrap().as_f64().unwrap();
        assert!((c - 10f64.powf(-2.5)).abs() < 1e-15);
    }

    #[test]
    fn categorical_values() {
        let p = ParamSpec::categorical("opt", ["a", "b", "c"]).unwrap();
        assert_eq!(p.bins(), 3);
        assert_eq!(p.bin_value(1).unwrap(), ParamValue::Category("b".into()));
        assert_eq!(p.bin_index(&ParamValue::Category("c".into())).unwrap(), 2);
        assert!(p.bin_index(&ParamValue::Category("d".into())).is_err());
    }

    #[test]
    fn narrow_integer_gets_one_bin_per_value() {
        let p = ParamSpec::integer("depth", 2, 6, 16).unwrap();
        assert_eq!(p.bins(), 5);
        for (i, v) in (2..=6).enumerate() {
            assert_eq!(p.bin_index(&ParamValue::Int(v)).unwrap(), i);
            assert_eq!(p.bin_value(i).unwrap(), ParamValue::Int(v));
        }
    }

    #[test]
    fn wide_integer_roundtrips() {
        let p = ParamSpec::integer("n", 0, 99, 16).unwrap();
        assert_eq!(p.bins(), 16);
        for i in 0..16 {
            let v = p.bin_value(i).unwrap();
            assert_eq!(p.bin_index(&v).unwrap(), i);
        }
        assert_eq!(p.bin_index(&ParamValue::Int(99)).unwrap(), 15);
        let q = ParamSpec::log_integer("batch", 16, 1024, 6).unwrap();
        for i in 0..6 {
            assert_eq!(q.bin_index(&q.bin_value(i).unwrap()).unwrap(), i);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ParamSpec::continuous("x", 1.0, 1.0, 4).is_err());
        assert!(ParamSpec::log_continuous("x", 0.0, 1.0, 4).is_err());
        assert!(ParamSpec::continuous("x", 0.0, 1.0, 1).is_err());
        assert!(ParamSpec::categorical("c", ["a", "a"]).is_err());
        // 1..=1000 in 200 geometric bins leaves the lowest bins without an integer.
        assert!(ParamSpec::log_integer("n", 1, 1000, 200).is_err());
        let x = ParamSpec::continuous("x", 0.0, 1.0, 4).unwrap();
        assert!(SearchSpace::new(vec![x.clone(), x]).is_err());
        assert!(SearchSpace::new(vec![]).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = unit();
        let b = unit();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = SearchSpace::new(vec![ParamSpec::continuous("x", 0.0, 1.0, 8).unwrap()]).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn space_file_roundtrip_and_strictness() {
        let text = r#"
[[params]]
name = "lr"
kind = "continuous"
lo = 1e-4
hi = 1.0
log_scale = true
bins = 8

[[params]]
name = "layers"
kind = "integer"
lo = 1
hi = 4

[[params]]
name = "opt"
kind = "categorical"
categories = ["sgd", "adam"]
"#;
        let space = SearchSpace::from_toml_str(text).unwrap();
        assert_eq!(space.bins(), vec![8, 4, 2]);
        let again = SearchSpace::from_toml_str(&space.to_toml_string()).unwrap();
        assert_eq!(space, again);

        let unknown = "[[params]]\nname = \"x\"\nkind = \"continuous\"\nlo = 0\nhi = 1\nstep = 2\n";
        assert!(SearchSpace::from_toml_str(unknown).is_err());
        let bad_kind = "[[params]]\nname = \"x\"\nkind = \"real\"\nlo = 0\nhi = 1\n";
        assert!(SearchSpace::from_toml_str(bad_kind).is_err());
    }

    #[test]
    fn unflatten_enumerates_tuples() {
        let space = SearchSpace::new(vec![
            ParamSpec::continuous("x", 0.0, 1.0, 3).unwrap(),
            ParamSpec::continuous("y", 0.0, 1.0, 2).unwrap(),
        ])
        .unwrap();
        let all: Vec<_> = (0..space.cardinality()).map(|i| space.unflatten(i)).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1], vec![2, 0], vec![2, 1]]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn spec_strategy() -> impl Strategy<Value = ParamSpec> {
            prop_oneof![
                (-100.0f64..100.0, 0.001f64..50.0, 2usize..64)
                    .prop_map(|(lo, w, b)| ParamSpec::continuous("p", lo, lo + w, b).unwrap()),
                (1e-6f64..1.0, 1.5f64..1e4, 2usize..64)
                    .prop_map(|(lo, r, b)| ParamSpec::log_continuous("p", lo, lo * r, b).unwrap()),
                (-50i64..50, 1i64..500, 2usize..40)
                    .prop_map(|(lo, w, b)| ParamSpec::integer("p", lo, lo + w, b).unwrap()),
                (2usize..12).prop_map(|n| ParamSpec::categorical("p", (0..n).map(|i| format!("c{i}")))
                    .unwrap()),
            ]
        }

        proptest! {
            #[test]
            fn bin_roundtrip(spec in spec_strategy()) {
                for i in 0..spec.bins() {
                    let v = spec.bin_value(i).unwrap();
                    prop_assert_eq!(spec.bin_index(&v).unwrap(), i);
                }
            }

            #[test]
            fn snap_is_idempotent(lo in -10.0f64..10.0, w in 0.1f64..20.0, b in 2usize..40, t in 0.0f64..=1.0) {
                let space = SearchSpace::new(vec![ParamSpec::continuous("x", lo, lo + w, b).unwrap()]).unwrap();
                let x = (lo + w * t).min(lo + w);
                let c = Configuration::new(vec![ParamValue::Real(x)]);
                let once = space.snap(&c).unwrap();
                let twice = space.snap(&once).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
