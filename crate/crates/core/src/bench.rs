//! Instance generators, lower bounds on the optimum, and experiment reports.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::feasibility::{feasible, OracleConfig, Verdict};
use crate::engine::{empirical_ratio, parse_trace, Engine, GroupCount};
use crate::params::{builtin, ParameterInstance};
use crate::rational::{big_volume, BigRational};
use crate::{Error, Rational, Result};

/// Offset added to critical sizes so they land just inside their interval.
pub fn critical_epsilon() -> Rational {
    Rational::new(1, 10_000)
}

/// Largest instance for which [`exact_opt`] is offered.
pub const EXACT_OPT_MAX_ITEMS: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "path")]
pub enum GeneratorKind {
    /// Round-robin over `1/k + ε`, rounded to four decimals, for `k = 2..=K`.
    AdversarialHarmonic,
    /// Sizes `j / 10^6` with `j` uniform in `1..=10^6`.
    Uniform,
    /// Interval infima plus `ε`, with the interval chosen uniformly.
    MixedCritical,
    /// Sizes read from a trace file.
    File(PathBuf),
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adversarial-harmonic" => Ok(Self::AdversarialHarmonic),
            "uniform" => Ok(Self::Uniform),
            "mixed-critical" => Ok(Self::MixedCritical),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(Self::File(PathBuf::from(path))),
                _ => Err(Error::InvalidParams(format!(
                    "unknown generator `{s}` (expected adversarial-harmonic, uniform, mixed-critical or file:<path>)"
                ))),
            },
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AdversarialHarmonic => f.write_str("adversarial-harmonic"),
            Self::Uniform => f.write_str("uniform"),
            Self::MixedCritical => f.write_str("mixed-critical"),
            Self::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GeneratorSpec {
    #[serde(serialize_with = "display")]
    pub kind: GeneratorKind,
    /// Item count; ignored for file input.
    pub n: usize,
    pub seed: u64,
    pub d: usize,
}

fn display<T: fmt::Display, S: serde::Serializer>(value: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(value)
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, seed: u64, d: usize) -> Self {
        Self { kind, n, seed, d }
    }
}

/// Produces the item sequence; a pure function of the generator settings and the input file.
pub fn generate(spec: &GeneratorSpec) -> Result<Vec<Rational>> {
    if spec.n == 0 && !matches!(spec.kind, GeneratorKind::File(_)) {
        return Err(Error::InvalidParams("generator needs n >= 1".into()));
    }
    let eps = critical_epsilon();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(match &spec.kind {
        GeneratorKind::AdversarialHarmonic => {
            let top = adversarial_depth(spec.n);
            // Four-decimal sizes: rounding `1/k + ε` keeps them at least `ε/2` above `1/k`.
            let scale = Rational::from_integer(10_000);
            (2..=top)
                .cycle()
                .take(spec.n)
                .map(|k| ((Rational::new(1, k) + eps) * scale).round() / scale)
                .collect()
        }
        GeneratorKind::Uniform => {
            (0..spec.n).map(|_| Rational::new(rng.gen_range(1..=1_000_000), 1_000_000)).collect()
        }
        GeneratorKind::MixedCritical => {
            let params = builtin(spec.d)?;
            let infima: Vec<Rational> = (2..=params.small_type() + 1).map(|i| params.t(i) + eps).collect();
            (0..spec.n).map(|_| infima[rng.gen_range(0..infima.len())]).collect()
        }
        GeneratorKind::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let trace = parse_trace(&text)?;
            if let Some(d) = trace.d.filter(|&d| d != spec.d) {
                return Err(Error::DimensionMismatch { expected: spec.d, actual: d });
            }
            trace.sizes
        }
    })
}

/// Largest `k` used by the adversarial generator: short runs cycle over the
/// biggest sizes only, long runs reach down to `1/11 + ε`.
fn adversarial_depth(n: usize) -> i128 {
    (1 + i128::from(n.ilog2())).min(11)
}

/// `max(⌈Σ s^d⌉, #{s > 1/2})`; items above one half pairwise conflict on every axis.
pub fn opt_lower_bound(sizes: &[Rational], d: usize) -> u64 {
    let volume: BigRational = sizes.iter().map(|s| big_volume(s, d)).sum();
    let by_volume = volume.ceil().to_integer();
    let by_volume = u64::try_from(by_volume).unwrap_or(u64::MAX);
    let half = Rational::new(1, 2);
    let by_conflict = sizes.iter().filter(|s| **s > half).count() as u64;
    by_volume.max(by_conflict)
}

/// Exact optimum for at most [`EXACT_OPT_MAX_ITEMS`] items; `None` when the oracle gave up.
pub fn exact_opt(sizes: &[Rational], d: usize, cfg: &OracleConfig) -> Result<Option<u64>> {
    if sizes.len() > EXACT_OPT_MAX_ITEMS {
        return Err(Error::InvalidParams(format!(
            "exact optimum is offered for at most {EXACT_OPT_MAX_ITEMS} items, got {}",
            sizes.len()
        )));
    }
    if sizes.is_empty() {
        return Ok(Some(0));
    }
    let mut items = sizes.to_vec();
    items.sort_by(|a, b| b.cmp(a));
    let mut search = Partition { d, cfg, memo: HashMap::new(), capped: false };
    for bins in opt_lower_bound(&items, d).max(1)..=items.len() as u64 {
        let mut contents = Vec::new();
        if search.fill(&items, &mut contents, bins as usize)? {
            return Ok((!search.capped).then_some(bins));
        }
    }
    Ok((!search.capped).then_some(items.len() as u64))
}

struct Partition<'a> {
    d: usize,
    cfg: &'a OracleConfig,
    memo: HashMap<Vec<Rational>, bool>,
    capped: bool,
}

impl Partition<'_> {
    fn fits(&mut self, bin: &[Rational]) -> Result<bool> {
        if let Some(&known) = self.memo.get(bin) {
            return Ok(known);
        }
        let report = feasible(bin, self.d, self.cfg)?;
        self.capped |= report.verdict == Verdict::Cap;
        let ok = report.verdict == Verdict::Feasible;
        self.memo.insert(bin.to_vec(), ok);
        Ok(ok)
    }

    /// Places the remaining items (sorted descending) into at most `limit` bins.
    fn fill(&mut self, rest: &[Rational], contents: &mut Vec<Vec<Rational>>, limit: usize) -> Result<bool> {
        let Some((item, rest)) = rest.split_first() else {
            return Ok(true);
        };
        for b in 0..contents.len() {
            // Bins with equal contents are interchangeable.
            if contents[..b].contains(&contents[b]) {
                continue;
            }
            contents[b].push(*item);
            let candidate = contents[b].clone();
            if self.fits(&candidate)? && self.fill(rest, contents, limit)? {
                return Ok(true);
            }
            contents[b].pop();
        }
        if contents.len() < limit {
            contents.push(vec![*item]);
            if self.fill(rest, contents, limit)? {
                return Ok(true);
            }
            contents.pop();
        }
        Ok(false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub generator: GeneratorSpec,
    pub params: String,
    pub items: usize,
    /// Bins used by the online algorithm.
    pub bins: usize,
    pub lower_bound: u64,
    pub ratio: f64,
    pub exact_opt: Option<u64>,
    pub bins_by_group: BTreeMap<String, GroupCount>,
    pub max_open_small: usize,
    pub max_open_bi_per_group: usize,
    pub breaches: Vec<String>,
    pub wall_ms: f64,
    pub note: &'static str,
}

/// One line of a batch summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub generator: String,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub bins: usize,
    pub lower_bound: u64,
    pub exact_opt: Option<u64>,
    pub ratio: f64,
    pub wall_ms: f64,
}

impl ExperimentReport {
    pub fn summary(&self) -> SummaryRow {
        SummaryRow {
            generator: self.generator.kind.to_string(),
            d: self.generator.d,
            n: self.items,
            seed: self.generator.seed,
            bins: self.bins,
            lower_bound: self.lower_bound,
            exact_opt: self.exact_opt,
            ratio: self.ratio,
            wall_ms: self.wall_ms,
        }
    }
}

/// Generates the instance, packs it online, and compares against the lower bound.
pub fn run_experiment(params: &ParameterInstance, spec: &GeneratorSpec, with_exact_opt: bool) -> Result<ExperimentReport> {
    if params.d != spec.d {
        return Err(Error::DimensionMismatch { expected: params.d, actual: spec.d });
    }
    let started = Instant::now();
    let sizes = generate(spec)?;
    let mut engine = Engine::counting_only(params)?;
    for size in &sizes {
        engine.push(*size)?;
    }
    let report = engine.report();
    let lower_bound = opt_lower_bound(&sizes, spec.d);
    let exact_opt = if with_exact_opt { exact_opt(&sizes, spec.d, &OracleConfig::default())? } else { None };
    let reference = exact_opt.unwrap_or(lower_bound);
    let ratio = if sizes.is_empty() { f64::one() } else { empirical_ratio(&report, reference) };
    Ok(ExperimentReport {
        generator: spec.clone(),
        params: params.name.clone(),
        items: sizes.len(),
        bins: report.total_bins,
        lower_bound,
        ratio,
        exact_opt,
        bins_by_group: report.bins_by_group,
        max_open_small: report.max_open_small,
        max_open_bi_per_group: report.max_open_bi_per_group,
        breaches: report.breaches,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        note: "ratio divides by a lower bound on the optimum (or the exact optimum when computed), so it over-estimates the true ratio",
    })
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "generator: {} n={} d={} seed={}", self.generator.kind, self.generator.n, self.generator.d, self.generator.seed)?;
        writeln!(f, "params: {}", self.params)?;
        writeln!(f, "items: {}", self.items)?;
        writeln!(f, "bins: {}", self.bins)?;
        writeln!(f, "lower bound: {}", self.lower_bound)?;
        if let Some(opt) = self.exact_opt {
            writeln!(f, "exact optimum: {opt}")?;
        }
        writeln!(f, "ratio: {:.4}", self.ratio)?;
        writeln!(f, "groups:")?;
        for (group, count) in &self.bins_by_group {
            writeln!(f, "  {group:<12} open {:>6}  closed {:>8}", count.open, count.closed)?;
        }
        writeln!(f, "max open small bins: {}", self.max_open_small)?;
        writeln!(f, "max open bi bins per group: {}", self.max_open_bi_per_group)?;
        writeln!(f, "wall time: {:.1} ms", self.wall_ms)?;
        write!(f, "note: {}", self.note)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn adversarial_prefix() {
        let sizes = generate(&GeneratorSpec::new(GeneratorKind::AdversarialHarmonic, 4, 0, 2)).unwrap();
        assert_eq!(sizes, vec![q(5001, 10000), q(3334, 10000), q(5001, 10000), q(3334, 10000)]);
        let long = generate(&GeneratorSpec::new(GeneratorKind::AdversarialHarmonic, 5000, 0, 2)).unwrap();
        assert_eq!(long.iter().min(), Some(&q(910, 10000)));
        assert!((2..=11).all(|k| long.iter().any(|s| *s > q(1, k) && *s < q(1, k) + critical_epsilon() * 2)));
    }

    #[test]
    fn generators_are_replayable() {
        for kind in [GeneratorKind::Uniform, GeneratorKind::MixedCritical] {
            let spec = GeneratorSpec::new(kind, 50, 7, 3);
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        }
        let one = GeneratorSpec::new(GeneratorKind::Uniform, 1, 42, 2);
        assert_eq!(generate(&one).unwrap().len(), 1);
    }

    #[test]
    fn lower_bound_examples() {
        assert_eq!(opt_lower_bound(&vec![q(6, 10); 10], 2), 10);
        assert_eq!(opt_lower_bound(&vec![q(1, 4); 32], 2), 2);
        let sizes = generate(&GeneratorSpec::new(GeneratorKind::AdversarialHarmonic, 1000, 0, 2)).unwrap();
        let volume: f64 = sizes.iter().map(|s| crate::rational::to_f64(s).powi(2)).sum();
        let big = sizes.iter().filter(|s| **s > q(1, 2)).count() as u64;
        assert_eq!(opt_lower_bound(&sizes, 2), (volume.ceil() as u64).max(big));
    }

    #[test]
    fn exact_optimum_small_cases() {
        let cfg = OracleConfig::default();
        assert_eq!(exact_opt(&[q(6, 10), q(45, 100)], 2, &cfg).unwrap(), Some(2));
        assert_eq!(exact_opt(&[q(1, 2); 5], 2, &cfg).unwrap(), Some(2));
        assert_eq!(exact_opt(&[q(34, 100); 9], 2, &cfg).unwrap(), Some(3));
        assert!(exact_opt(&[q(1, 10); 13], 2, &cfg).is_err());
    }

    #[test]
    fn single_type_trace_has_ratio_one() {
        let params = builtin(2).unwrap();
        let dir = std::env::temp_dir().join(format!("hyperpack-bench-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ones.trace");
        std::fs::write(&path, "0.9\n".repeat(20)).unwrap();
        let spec = GeneratorSpec::new(GeneratorKind::File(path), 0, 0, 2);
        let report = run_experiment(&params, &spec, false).unwrap();
        assert_eq!(report.bins, 20);
        assert_eq!(report.ratio, 1.0);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
