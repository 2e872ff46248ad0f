//! Benchmark objectives: closed-form synthetic landscapes rescaled into
//! [0, 1] over their bin grid, and fully enumerated tabular objectives.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Configuration, ParamSpec, ParamValue, SearchSpace};

/// Noise level of the builtin noisy variants.
pub const NOISY_STD: f64 = 0.01;

type Function = Arc<dyn Fn(&Configuration) -> Result<f64> + Send + Sync>;

/// A complete lookup table over every bin tuple of a search space. Rows are
/// stored in [`SearchSpace::unflatten`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularObjective {
    space: SearchSpace,
    table: Vec<f64>,
}

impl TabularObjective {
    pub fn new(space: SearchSpace, table: Vec<f64>) -> Result<Self> {
        if table.len() != space.cardinality() {
            return Err(Error::Tabular(format!(
                "expected {} rows, got {}",
                space.cardinality(),
                table.len()
            )));
        }
        if let Some(i) = table.iter().position(|v| !v.is_finite()) {
            return Err(Error::Tabular(format!(
                "non-finite reward at {:?}",
                space.unflatten(i)
            )));
        }
        Ok(TabularObjective { space, table })
    }

    /// Builds a table from `(bins, reward)` rows in any order.
    pub fn from_rows(space: SearchSpace, rows: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let bins = space.bins();
        let mut table = vec![None; space.cardinality()];
        for (tuple, reward) in rows {
            if tuple.len() != bins.len() {
                return Err(Error::Tabular(format!(
                    "row {tuple:?} has {} bin indices, the space has {} parameters",
                    tuple.len(),
                    bins.len()
                )));
            }
            if let Some(p) = tuple.iter().zip(&bins).position(|(&t, &b)| t >= b) {
                return Err(Error::Tabular(format!(
                    "row {tuple:?}: bin {} out of range for parameter `{}`",
                    tuple[p],
                    space.params()[p].name()
                )));
            }
            if !reward.is_finite() {
                return Err(Error::Tabular(format!("non-finite reward at {tuple:?}")));
            }
            let flat = flatten(&bins, &tuple);
            if table[flat].is_some() {
                return Err(Error::Tabular(format!("duplicate row {tuple:?}")));
            }
            table[flat] = Some(reward);
        }
        if let Some(i) = table.iter().position(Option::is_none) {
            return Err(Error::Tabular(format!("missing row {:?}", space.unflatten(i))));
        }
        let table = table.into_iter().map(|v| v.expect("checked")).collect();
        Ok(TabularObjective { space, table })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn lookup(&self, bins: &[usize]) -> f64 {
        self.table[flatten(&self.space.bins(), bins)]
    }

    pub fn values(&self) -> &[f64] {
        &self.table
    }

    pub fn max(&self) -> f64 {
        self.table.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// File form: the space declaration, a `---` line, then
    /// `bin_1,...,bin_P,reward` rows.
    pub fn to_file_string(&self) -> String {
        let mut out = self.space.to_toml_string();
        out.push_str("---\n");
        for (i, v) in self.table.iter().enumerate() {
            for b in self.space.unflatten(i) {
                out.push_str(&format!("{b},"));
            }
            out.push_str(&format!("{v}\n"));
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let (header, body) = split_header(text).ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            message: "missing `---` line between space declaration and rows".into(),
        })?;
        let space = SearchSpace::from_toml_str(header)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(body.as_bytes());
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                path: origin.to_string(),
                message: e.to_string(),
            })?;
            let bad = |what: &str| Error::Parse {
                path: origin.to_string(),
                message: format!("row {}: {what}", line + 1),
            };
            let fields: Vec<&str> = rec.iter().collect();
            let Some((reward, tuple)) = fields.split_last() else {
                continue;
            };
            let reward: f64 = reward.parse().map_err(|_| bad("reward is not a number"))?;
            let tuple = tuple
                .iter()
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("bin index is not a non-negative integer"))?;
            rows.push((tuple, reward));
        }
        Self::from_rows(space, rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }
}

fn split_header(text: &str) -> Option<(&str, &str)> {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.trim() == "---" {
            return Some((&text[..offset], &text[offset + line.len()..]));
        }
        offset += line.len();
    }
    None
}

fn flatten(bins: &[usize], tuple: &[usize]) -> usize {
    tuple.iter().zip(bins).fold(0, |acc, (&t, &b)| acc * b + t)
}

/// Reads and validates a tabular objective file.
pub fn load_tabular(path: &Path) -> Result<TabularObjective> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    TabularObjective::parse(&text, &path.display().to_string())
}

#[derive(Clone)]
enum Landscape {
    Function(Function),
    Table(Arc<TabularObjective>),
}

/// A reward to maximize over a search space, with optional Gaussian
/// observation noise.
#[derive(Clone)]
pub struct Objective {
    name: String,
    space: SearchSpace,
    landscape: Landscape,
    /// Raw (min, max) over the bin grid; values are mapped to [0, 1].
    rescale: Option<(f64, f64)>,
    noise_std: f64,
    known_best: Option<f64>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("params", &self.space.len())
            .field("noise_std", &self.noise_std)
            .field("known_best", &self.known_best)
            .finish()
    }
}

impl Objective {
    /// An arbitrary function, used as is.
    pub fn from_fn<F>(name: impl Into<String>, space: SearchSpace, f: F) -> Self
    where
        F: Fn(&Configuration) -> Result<f64> + Send + Sync + 'static,
    {
        Objective {
            name: name.into(),
            space,
            landscape: Landscape::Function(Arc::new(f)),
            rescale: None,
            noise_std: 0.0,
            known_best: None,
        }
    }

    /// A function min-max rescaled into [0, 1] over the bin-center grid.
    /// Off-grid values outside the grid range are clamped.
    pub fn rescaled<F>(name: impl Into<String>, space: SearchSpace, f: F) -> Result<Self>
    where
        F: Fn(&Configuration) -> Result<f64> + Send + Sync + 'static,
    {
        let mut obj = Self::from_fn(name, space, f);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in obj.grid_values()? {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(hi > lo) {
            return Err(Error::Evaluation(format!("objective `{}` is constant over its grid", obj.name)));
        }
        obj.rescale = Some((lo, hi));
        obj.known_best = Some(1.0);
        Ok(obj)
    }

    pub fn tabular(name: impl Into<String>, table: TabularObjective) -> Self {
        Objective {
            name: name.into(),
            space: table.space.clone(),
            known_best: Some(table.max()),
            landscape: Landscape::Table(Arc::new(table)),
            rescale: None,
            noise_std: 0.0,
        }
    }

    pub fn with_noise(mut self, std: f64) -> Result<Self> {
        if !(std >= 0.0 && std.is_finite()) {
            return Err(Error::Config(format!("noise_std must be finite and >= 0, got {std}")));
        }
        self.noise_std = std;
        Ok(self)
    }

    pub fn with_known_best(mut self, best: f64) -> Self {
        self.known_best = Some(best);
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn known_best(&self) -> Option<f64> {
        self.known_best
    }

    /// Noise-free reward.
    pub fn base_value(&self, config: &Configuration) -> Result<f64> {
        self.space.validate(config)?;
        let raw = match &self.landscape {
            Landscape::Function(f) => f(config)?,
            Landscape::Table(t) => t.lookup(&self.space.bin_indices(config)?),
        };
        if !raw.is_finite() {
            return Err(Error::NonFiniteReward(raw));
        }
        Ok(match self.rescale {
            Some((lo, hi)) => ((raw - lo) / (hi - lo)).clamp(0.0, 1.0),
            None => raw,
        })
    }

    /// Observed reward: the base value plus seeded Gaussian noise. No
    /// randomness is drawn for noise-free objectives.
    pub fn evaluate(&self, config: &Configuration, rng: &mut impl Rng) -> Result<f64> {
        let base = self.base_value(config)?;
        if self.noise_std > 0.0 {
            let n = Normal::new(0.0, self.noise_std).expect("validated std");
            Ok(base + n.sample(rng))
        } else {
            Ok(base)
        }
    }

    fn grid_values(&self) -> Result<Vec<f64>> {
        (0..self.space.cardinality())
            .map(|i| {
                let c = self.space.config_from_bins(&self.space.unflatten(i))?;
                match &self.landscape {
                    Landscape::Function(f) => f(&c),
                    Landscape::Table(t) => Ok(t.values()[i]),
                }
            })
            .collect()
    }

    /// Noise-free rewards of every bin tuple, in [`SearchSpace::unflatten`]
    /// order.
    pub fn enumerate(&self) -> Result<Vec<f64>> {
        (0..self.space.cardinality())
            .map(|i| self.base_value(&self.space.config_from_bins(&self.space.unflatten(i))?))
            .collect()
    }
}

/// A uniformly random bin tuple, as a configuration of bin values.
pub fn uniform_config(space: &SearchSpace, rng: &mut impl Rng) -> Result<Configuration> {
    let bins: Vec<usize> = space.bins().iter().map(|&b| rng.random_range(0..b)).collect();
    space.config_from_bins(&bins)
}

/// Summary statistic of a random-search reference sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    #[default]
    Best,
    Mean,
    Median,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Best => "best",
            Statistic::Mean => "mean",
            Statistic::Median => "median",
        }
    }

    pub fn apply(self, values: &[f64]) -> Result<f64> {
        if values.is_empty() {
            return Err(Error::Metric("statistic of an empty sample".into()));
        }
        Ok(match self {
            Statistic::Best => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Statistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Statistic::Median => crate::metrics::median(values).expect("non-empty"),
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best" => Ok(Statistic::Best),
            "mean" => Ok(Statistic::Mean),
            "median" => Ok(Statistic::Median),
            _ => Err(Error::Config(format!("unknown statistic `{s}` (expected best, mean or median)"))),
        }
    }
}

/// `y_rand`: the statistic of `n` uniformly sampled configurations.
pub fn random_search_reference(objective: &Objective, n: usize, statistic: Statistic, rng: &mut impl Rng) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("reference sample size must be at least 1".into()));
    }
    let values = (0..n)
        .map(|_| {
            let c = uniform_config(objective.space(), rng)?;
            objective.evaluate(&c, rng)
        })
        .collect::<Result<Vec<f64>>>()?;
    statistic.apply(&values)
}

fn real(c: &Configuration, i: usize) -> f64 {
    c.values[i].as_f64().expect("numeric parameter")
}

fn sphere() -> Result<Objective> {
    let space = SearchSpace::new(vec![
        ParamSpec::continuous("x", -1.0, 1.0, 63)?,
        ParamSpec::continuous("y", -1.0, 1.0, 63)?,
    ])?;
    Objective::rescaled("sphere2d", space, |c| {
        let (x, y) = (real(c, 0), real(c, 1));
        Ok(-(x * x + y * y))
    })
}

/// The Branin function; global minimum 0.397887 at (-pi, 12.275),
/// (pi, 2.275) and (9.42478, 2.475).
pub fn branin_raw(x1: f64, x2: f64) -> f64 {
    use std::f64::consts::PI;
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

fn branin() -> Result<Objective> {
    let space = SearchSpace::new(vec![
        ParamSpec::continuous("x1", -5.0, 10.0, 64)?,
        ParamSpec::continuous("x2", 0.0, 15.0, 64)?,
    ])?;
    Objective::rescaled("branin", space, |c| Ok(-branin_raw(real(c, 0), real(c, 1))))
}

fn training_bowl() -> Result<Objective> {
    let space = SearchSpace::new(vec![
        ParamSpec::log_continuous("learning_rate", 1e-4, 1.0, 16)?,
        ParamSpec::continuous("momentum", 0.0, 1.0, 16)?,
        ParamSpec::continuous("dropout", 0.0, 0.5, 16)?,
        ParamSpec::continuous("warmup", 0.0, 0.5, 16)?,
    ])?;
    Objective::rescaled("train4d", space, |c| {
        let lr = (real(c, 0).log10() + 2.5) / 1.5;
        let m = (real(c, 1) - 0.85) / 0.5;
        let d = (real(c, 2) - 0.15) / 0.3;
        let w = (real(c, 3) - 0.1) / 0.4;
        // Mild coupling: high momentum prefers a smaller learning rate.
        let coupling = 0.3 * lr * m;
        Ok(-(lr * lr + m * m + d * d + w * w + coupling))
    })
}

fn basins() -> Result<Objective> {
    let space = SearchSpace::new(vec![
        ParamSpec::categorical("basin", ["a", "b", "c"])?,
        ParamSpec::continuous("x", 0.0, 1.0, 32)?,
        ParamSpec::continuous("y", 0.0, 1.0, 32)?,
    ])?;
    // (height, center, width) per categorical choice.
    const BASINS: [(f64, (f64, f64), f64); 3] = [(0.55, (0.2, 0.75), 0.3), (0.8, (0.75, 0.3), 0.22), (1.0, (0.45, 0.55), 0.15)];
    Objective::rescaled("basins_mixed", space, |c| {
        let k = category(c, 0, &["a", "b", "c"]);
        let (h, (cx, cy), w) = BASINS[k];
        let (x, y) = (real(c, 1), real(c, 2));
        let r2 = (x - cx).powi(2) + (y - cy).powi(2);
        Ok(h * (-r2 / (2.0 * w * w)).exp())
    })
}

fn staircase() -> Result<Objective> {
    let levels = 64;
    let space = SearchSpace::new(vec![ParamSpec::integer("level", 0, levels as i64 - 1, levels)?])?;
    let table = (0..levels).map(|i| i as f64 / (levels - 1) as f64).collect();
    Ok(Objective::tabular("staircase", TabularObjective::new(space, table)?))
}

fn deceptive() -> Result<Objective> {
    let n = 32usize;
    let space = SearchSpace::new(vec![
        ParamSpec::integer("i", 0, n as i64 - 1, n)?,
        ParamSpec::integer("j", 0, n as i64 - 1, n)?,
    ])?;
    // A broad local hill near one corner and a narrower, higher peak near
    // the opposite one.
    let bump = |i: f64, j: f64, ci: f64, cj: f64, w: f64| (-((i - ci).powi(2) + (j - cj).powi(2)) / (2.0 * w * w)).exp();
    let table = (0..n * n)
        .map(|k| {
            let (i, j) = ((k / n) as f64, (k % n) as f64);
            let local = 0.75 * bump(i, j, 6.0, 7.0, 7.0);
            let global = bump(i, j, 25.0, 24.0, 3.5);
            local.max(global)
        })
        .collect();
    Ok(Objective::tabular("deceptive", TabularObjective::new(space, table)?))
}

fn sphere6d() -> Result<Objective> {
    let space = SearchSpace::new(
        (0..6)
            .map(|i| ParamSpec::continuous(format!("x{i}"), -1.0, 1.0, 9))
            .collect::<Result<_>>()?,
    )?;
    // Shifted optimum: coordinates alternate between -0.25, 0 and 0.25.
    Objective::rescaled("sphere6d", space, |c| {
        Ok(-(0..6)
            .map(|i| {
                let x = real(c, i) - 0.25 * ((i % 3) as f64 - 1.0);
                x * x
            })
            .sum::<f64>())
    })
}

const OPTIMIZERS: [&str; 3] = ["sgd", "adam", "rmsprop"];

fn category(c: &Configuration, i: usize, names: &[&str]) -> usize {
    match &c.values[i] {
        ParamValue::Category(s) => names.iter().position(|n| n == s).expect("validated"),
        _ => unreachable!("validated categorical"),
    }
}

fn pipeline() -> Result<Objective> {
    let space = SearchSpace::new(vec![
        ParamSpec::categorical("optimizer", OPTIMIZERS)?,
        ParamSpec::log_continuous("learning_rate", 1e-5, 1.0, 12)?,
        ParamSpec::log_integer("batch_size", 8, 1024, 8)?,
        ParamSpec::continuous("dropout", 0.0, 0.7, 8)?,
        ParamSpec::integer("layers", 1, 8, 8)?,
    ])?;
    // The best learning rate and batch size depend on the optimizer.
    Objective::rescaled("pipeline5d", space, |c| {
        let o = category(c, 0, &OPTIMIZERS);
        let lr = (real(c, 1).log10() - [-1.0, -3.0, -2.5][o]) / 1.5;
        let b = (real(c, 2).log2() - 6.0 - o as f64) / 2.5;
        let d = (real(c, 3) - 0.3) / 0.3;
        let l = (real(c, 4) - 4.0) / 3.0;
        Ok([0.85, 1.0, 0.93][o] * (-(lr * lr + b * b + d * d + l * l)).exp())
    })
}

const FEATURE_WEIGHTS: [f64; 12] = [0.3, -0.2, 0.25, 0.15, -0.1, 0.2, -0.25, 0.1, 0.05, -0.15, 0.12, -0.05];

fn features() -> Result<Objective> {
    let space = SearchSpace::new(
        (0..12)
            .map(|i| ParamSpec::categorical(format!("f{i}"), ["off", "on"]))
            .collect::<Result<_>>()?,
    )?;
    Objective::rescaled("features12", space, |c| {
        let on: Vec<f64> = (0..12).map(|i| category(c, i, &["off", "on"]) as f64).collect();
        let linear: f64 = FEATURE_WEIGHTS.iter().zip(&on).map(|(w, x)| w * x).sum();
        // Two interactions: a synergy and a redundancy.
        Ok(linear + 0.15 * on[0] * on[2] - 0.2 * on[3] * on[5])
    })
}

fn rastrigin() -> Result<Objective> {
    let space = SearchSpace::new(
        (0..4)
            .map(|i| ParamSpec::continuous(format!("x{i}"), -5.12, 5.12, 16))
            .collect::<Result<_>>()?,
    )?;
    Objective::rescaled("rastrigin4d", space, |c| {
        use std::f64::consts::PI;
        Ok(-(0..4)
            .map(|i| {
                let x = real(c, i);
                x * x - 10.0 * (2.0 * PI * x).cos() + 10.0
            })
            .sum::<f64>())
    })
}

fn with_noisy(base: Vec<Objective>) -> Vec<Objective> {
    let noisy: Vec<Objective> = base
        .iter()
        .map(|o| {
            let name = format!("{}_noisy", o.name());
            o.clone().with_noise(NOISY_STD).expect("valid std").renamed(name)
        })
        .collect();
    base.into_iter().chain(noisy).collect()
}

type Builder = fn() -> Result<Objective>;

const SUITE: [Builder; 6] = [sphere6d, pipeline, features, rastrigin, training_bowl, basins];
const EXTRAS: [Builder; 4] = [sphere, branin, staircase, deceptive];

fn build(fs: &[Builder]) -> Vec<Objective> {
    fs.iter().map(|f| f().expect("builtin objectives are well formed")).collect()
}

/// The deterministic suite objectives followed by their noisy variants.
pub fn builtin_suite() -> Vec<Objective> {
    with_noisy(build(&SUITE))
}

/// Low-dimensional objectives available by name but outside the suite.
pub fn builtin_extras() -> Vec<Objective> {
    with_noisy(build(&EXTRAS))
}

pub fn builtin_names() -> Vec<String> {
    builtin_suite().iter().chain(&builtin_extras()).map(|o| o.name().to_string()).collect()
}

/// Looks up a builtin objective by name.
pub fn builtin(name: &str) -> Option<Objective> {
    let base = name.strip_suffix("_noisy").unwrap_or(name);
    SUITE
        .iter()
        .chain(&EXTRAS)
        .map(|f| f().expect("builtin objectives are well formed"))
        .find(|o| o.name() == base)
        .map(|o| if base == name { o } else { with_noisy(vec![o]).pop().expect("noisy variant") })
}

/// Memoizes builtin construction for callers resolving many names.
pub fn builtin_map() -> HashMap<String, Objective> {
    builtin_suite().into_iter().chain(builtin_extras()).map(|o| (o.name().to_string(), o)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(values: Vec<ParamValue>) -> Configuration {
        Configuration::new(values)
    }

    #[test]
    fn suite_shape() {
        let suite = builtin_suite();
        assert_eq!(suite.len(), 12);
        assert_eq!(suite.iter().filter(|o| o.noise_std() == 0.0).count(), 6);
        assert!(suite[6..].iter().all(|o| o.noise_std() == NOISY_STD));
        let names = builtin_names();
        let mut uniq = names.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), names.len());
        assert!(builtin("branin_noisy").is_some());
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn known_best_matches_enumeration_and_range() {
        // Independent oracle: brute-force every bin tuple.
        for o in builtin_suite() {
            let vals = o.enumerate().unwrap();
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!((max - o.known_best().unwrap()).abs() <= 1e-9, "{}", o.name());
            assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)), "{}", o.name());
        }
    }

    #[test]
    fn sphere_peaks_at_origin() {
        let o = builtin("sphere2d").unwrap();
        let v = o.base_value(&cfg(vec![ParamValue::Real(0.0), ParamValue::Real(0.0)])).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn branin_rescaled_optimum() {
        let o = builtin("branin").unwrap();
        // Oracle: rescaling constants recomputed from the closed form on the
        // bin-center grid.
        let centers = |lo: f64, hi: f64| (0..64).map(move |i| lo + (hi - lo) * (i as f64 + 0.5) / 64.0);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in centers(-5.0, 10.0) {
            for b in centers(0.0, 15.0) {
                let v = -branin_raw(a, b);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let at = |x1: f64, x2: f64| o.base_value(&cfg(vec![ParamValue::Real(x1), ParamValue::Real(x2)])).unwrap();
        let expected = ((-0.397887 - lo) / (hi - lo)).min(1.0);
        assert!((at(std::f64::consts::PI, 2.275) - expected).abs() < 1e-6);
        assert!((at(std::f64::consts::PI, 2.275) - 1.0).abs() < 1e-3);
        assert!((branin_raw(std::f64::consts::PI, 2.275) - 0.397887).abs() < 1e-6);
    }

    #[test]
    fn basins_have_three_levels() {
        let o = builtin("basins_mixed").unwrap();
        let best = |k: &str| {
            (0..32 * 32)
                .map(|i| {
                    let c = cfg(vec![
                        ParamValue::Category(k.into()),
                        o.space().params()[1].bin_value(i / 32).unwrap(),
                        o.space().params()[2].bin_value(i % 32).unwrap(),
                    ]);
                    o.base_value(&c).unwrap()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let (a, b, c) = (best("a"), best("b"), best("c"));
        assert!(a < b && b < c);
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn staircase_is_monotone_and_deceptive_has_two_peaks() {
        let s = builtin("staircase").unwrap().enumerate().unwrap();
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        let d = builtin("deceptive").unwrap().enumerate().unwrap();
        let argmax = (0..d.len()).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        assert_eq!((argmax / 32, argmax % 32), (25, 24));
        // The local hill dominates the lower-left quadrant.
        assert!(d[6 * 32 + 7] > 0.7 && d[6 * 32 + 7] < d[argmax]);
    }

    #[test]
    fn evaluation_is_pure_and_noise_is_seeded() {
        let o = builtin("sphere2d_noisy").unwrap();
        let c = o.space().config_from_bins(&[10, 40]).unwrap();
        let a = o.evaluate(&c, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = o.evaluate(&c, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a, o.base_value(&c).unwrap());
        let clean = builtin("sphere2d").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let before = rng.clone();
        clean.evaluate(&c, &mut rng).unwrap();
        assert_eq!(rng, before);
    }

    #[test]
    fn invalid_config_rejected() {
        let o = builtin("sphere2d").unwrap();
        assert!(o.base_value(&cfg(vec![ParamValue::Real(0.0)])).is_err());
        assert!(o.base_value(&cfg(vec![ParamValue::Real(3.0), ParamValue::Real(0.0)])).is_err());
    }

    fn small_space() -> SearchSpace {
        SearchSpace::new(vec![
            ParamSpec::continuous("a", 0.0, 1.0, 4).unwrap(),
            ParamSpec::categorical("b", ["p", "q", "r", "s"]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn tabular_file_roundtrip_and_lookup() {
        let rows: Vec<_> = (0..16).map(|i| (vec![i / 4, i % 4], i as f64 * 0.1)).collect();
        let t = TabularObjective::from_rows(small_space(), rows).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.table");
        t.save(&path).unwrap();
        let back = load_tabular(&path).unwrap();
        assert_eq!(back, t);
        let o = Objective::tabular("t", back);
        let c = o.space().config_from_bins(&[2, 3]).unwrap();
        assert_eq!(o.base_value(&c).unwrap(), 11.0 * 0.1);
    }

    #[test]
    fn tabular_validation_errors() {
        let mut rows: Vec<_> = (0..16).map(|i| (vec![i / 4, i % 4], 0.5)).collect();
        rows.remove(6);
        let e = TabularObjective::from_rows(small_space(), rows.clone()).unwrap_err();
        assert!(e.to_string().contains("missing row [1, 2]"), "{e}");
        rows.push((vec![0, 0], 0.1));
        let e = TabularObjective::from_rows(small_space(), rows.clone()).unwrap_err();
        assert!(e.to_string().contains("duplicate row [0, 0]"), "{e}");
        let mut rows: Vec<_> = (0..16).map(|i| (vec![i / 4, i % 4], 0.5)).collect();
        rows[3].1 = f64::NAN;
        assert!(TabularObjective::from_rows(small_space(), rows).is_err());
        let rows: Vec<_> = (0..16).map(|i| (vec![i / 4, i % 4, 0], 0.5)).collect();
        assert!(TabularObjective::from_rows(small_space(), rows).is_err());

        let text = format!("{}---\n0,0,0.5\n0,9,0.5\n", small_space().to_toml_string());
        assert!(TabularObjective::parse(&text, "x").unwrap_err().to_string().contains("out of range"));
        assert!(TabularObjective::parse("no separator", "x").is_err());
        assert!(matches!(
            load_tabular(Path::new("/nonexistent/table.txt")),
            Err(Error::FileNotFound(_))
        ));
    }

    #[test]
    fn reference_statistics() {
        let space = small_space();
        let o = Objective::from_fn("const", space, |_| Ok(0.3));
        for s in [Statistic::Best, Statistic::Mean, Statistic::Median] {
            let v = random_search_reference(&o, 50, s, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert!((v - 0.3).abs() < 1e-15);
        }
        let st = builtin("staircase").unwrap();
        let a = random_search_reference(&st, 640, Statistic::Best, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = random_search_reference(&st, 640, Statistic::Best, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, 1.0);
        assert_eq!(Statistic::Median.apply(&[3.0, 1.0, 2.0, 10.0]).unwrap(), 2.5);
        assert!("max".parse::<Statistic>().is_err());
        assert!(random_search_reference(&st, 0, Statistic::Best, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn staircase_reference_hits_top_with_high_probability() {
        // Simulated coupon-collector bound: n = 10 * |table| draws.
        let st = builtin("staircase").unwrap();
        let hits = (0..200u64)
            .filter(|&s| random_search_reference(&st, 640, Statistic::Best, &mut ChaCha8Rng::seed_from_u64(s)).unwrap() == 1.0)
            .count();
        assert!(hits as f64 / 200.0 > 0.99);
    }
}
