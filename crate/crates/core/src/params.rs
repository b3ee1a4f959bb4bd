//! Parameter schema of the harmonic packer: interval boundaries, red
//! fractions, reserved-space levels and the level map, plus the derived
//! per-type quantities.
//!
//! Types are numbered from 1. Type `N + 1` is the small type.

use std::fmt;
use std::path::Path;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::{parse_rational, pow, render};
use crate::{Error, Rational, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParameterInstance {
    pub name: String,
    pub d: usize,
    /// Items of side at most `1/m` are small.
    pub m: u32,
    /// `t[0] = t_1 = 1 > t[1] > ... > t[N] = 1/m`.
    pub t: Vec<Rational>,
    /// Red fraction per large type, `alpha[i - 1] = α_i`.
    pub alpha: Vec<Rational>,
    /// Reserved-space levels `Δ_1 < ... < Δ_K`.
    pub delta: Vec<Rational>,
    /// Level index per large type; 0 means the type never hosts reds.
    pub phi: Vec<usize>,
    /// Types allowed to take red roles. `None` means every type with `t_i <= Δ_K`.
    pub red_eligible: Option<Vec<usize>>,
    /// Inclusive ranges of red types grouped into one analysis case each.
    pub red_cases: Option<Vec<(usize, usize)>>,
    /// Promised red-acceptance lists per level (index 0 is `Δ_1`), checked by `validate`.
    pub accepted: Option<Vec<Vec<usize>>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DerivedType {
    pub index: usize,
    pub beta: u64,
    pub delta: Rational,
    pub gamma: u64,
    /// Red items of this type held per bin; zero when the type is never coloured red.
    pub theta: u64,
    /// Cells of the red boundary shell, `β^d - (β - γ)^d`.
    pub shell_cells: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParamViolation {
    Shape { reason: String },
    Dimension { d: usize },
    Boundaries { reason: String },
    DeltaOrder,
    PhiRange { index: usize, phi: usize },
    PhiDelta { index: usize },
    AlphaRange { index: usize },
    Alpha { index: usize },
    RedIneligible { index: usize },
    Pairing { level: usize, red_type: usize },
    CasePartition { reason: String },
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamViolation::Shape { reason } => write!(f, "shape: {reason}"),
            ParamViolation::Dimension { d } => write!(f, "dimension {d} must be at least 2"),
            ParamViolation::Boundaries { reason } => write!(f, "boundaries: {reason}"),
            ParamViolation::DeltaOrder => write!(f, "Delta must satisfy 0 < Delta_1 < ... < Delta_K < 1/2"),
            ParamViolation::PhiRange { index, phi } => write!(f, "phi({index}) = {phi} is out of range"),
            ParamViolation::PhiDelta { index } => write!(f, "phi-delta: Delta_phi({index}) exceeds delta_{index}"),
            ParamViolation::AlphaRange { index } => write!(f, "alpha_{index} is outside [0, 1]"),
            ParamViolation::Alpha { index } => write!(f, "alpha: alpha_{index} > 0 but t_{index} > Delta_K"),
            ParamViolation::RedIneligible { index } => write!(f, "alpha_{index} > 0 but type {index} has no red slots"),
            ParamViolation::Pairing { level, red_type } => {
                write!(f, "pairing: red type {red_type} is promised for level {level} but gamma*t exceeds Delta_{level}")
            }
            ParamViolation::CasePartition { reason } => write!(f, "case partition: {reason}"),
        }
    }
}

impl ParameterInstance {
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn k(&self) -> usize {
        self.delta.len()
    }

    pub fn small_type(&self) -> usize {
        self.n() + 1
    }

    /// `t_i` for `1 <= i <= N + 1`; `t_{N+2} = 0`.
    pub fn t(&self, i: usize) -> Rational {
        if i == self.n() + 2 {
            Rational::zero()
        } else {
            self.t[i - 1]
        }
    }

    pub fn alpha(&self, i: usize) -> Rational {
        self.alpha[i - 1]
    }

    pub fn phi(&self, i: usize) -> usize {
        self.phi[i - 1]
    }

    /// `Δ_k`, with `Δ_0 = 0`.
    pub fn delta_level(&self, k: usize) -> Rational {
        if k == 0 {
            Rational::zero()
        } else {
            self.delta[k - 1]
        }
    }

    pub fn delta_max(&self) -> Rational {
        self.delta.last().copied().unwrap_or_else(Rational::zero)
    }

    pub fn is_red_eligible(&self, i: usize) -> bool {
        self.red_eligible.as_ref().is_none_or(|set| set.contains(&i))
    }

    /// Types with a positive red fraction.
    pub fn red_types(&self) -> Vec<usize> {
        (1..=self.n()).filter(|&i| self.alpha(i) > Rational::zero()).collect()
    }

    /// Volume charged per unit of small-item volume: `(M+1)^d / (M^d - 1)`.
    pub fn small_density(&self) -> Rational {
        let m = i128::from(self.m);
        let d = self.d as u32;
        Rational::new((m + 1).pow(d), m.pow(d) - 1)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamFile = serde_json::from_str(text)?;
        file.into_instance()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ParamFile::from_instance(self)).expect("parameter file serializes")
    }

    /// Resolves `builtin:square`, `builtin:cube` or a path to a parameter file.
    pub fn load(source: &str) -> Result<Self> {
        match source {
            "builtin:square" => builtin(2),
            "builtin:cube" => builtin(3),
            other if other.starts_with("builtin:") => {
                Err(Error::InvalidParams(format!("unknown builtin `{other}` (use builtin:square or builtin:cube)")))
            }
            path => Self::from_json(&std::fs::read_to_string(Path::new(path))?),
        }
    }
}

/// Type of an item of side `size`: the unique `j` with `t_{j+1} < size <= t_j`,
/// or `N + 1` for small items.
pub fn type_of(params: &ParameterInstance, size: &Rational) -> Result<usize> {
    if *size <= Rational::zero() || *size > Rational::one() {
        return Err(Error::InvalidSize { size: render(size) });
    }
    // t is strictly decreasing, so the number of boundaries >= size picks the interval.
    let above = params.t.partition_point(|t| t >= size);
    Ok(above.min(params.small_type()))
}

pub fn derive(params: &ParameterInstance) -> Vec<DerivedType> {
    let d = params.d as u32;
    let delta_1 = params.delta_level(1);
    let delta_k = params.delta_max();
    (1..=params.n())
        .map(|i| {
            let t = params.t(i);
            let beta = (Rational::one() / t).floor().to_integer() as u64;
            let delta = Rational::one() - t * Rational::from_integer(beta as i128);
            let gamma = if t > delta_k || !params.is_red_eligible(i) {
                0
            } else {
                ((delta_1 / t).floor().to_integer() as u64).max(1)
            };
            let shell_cells = beta.pow(d) - (beta - gamma.min(beta)).pow(d);
            let theta = if params.alpha(i) > Rational::zero() { shell_cells } else { 0 };
            DerivedType { index: i, beta, delta, gamma, theta, shell_cells }
        })
        .collect()
}

/// Whether blue type `blue` bins can host reds of type `red`: `γ_red t_red <= Δ_φ(blue)`.
pub fn admits(params: &ParameterInstance, derived: &[DerivedType], blue: usize, red: usize) -> bool {
    let level = params.phi(blue);
    let g = derived[red - 1].gamma;
    level != 0 && g > 0 && Rational::from_integer(g as i128) * params.t(red) <= params.delta_level(level)
}

/// Red types a bin at level `level` can accept, by the admissibility inequality.
pub fn accepted_reds(params: &ParameterInstance, derived: &[DerivedType], level: usize) -> Vec<usize> {
    let cap = params.delta_level(level);
    (1..=params.n())
        .filter(|&j| {
            let g = derived[j - 1].gamma;
            g > 0 && Rational::from_integer(g as i128) * params.t(j) <= cap
        })
        .collect()
}

pub fn validate(params: &ParameterInstance) -> Vec<ParamViolation> {
    let mut out = Vec::new();
    let n = params.n();
    let k = params.k();
    if params.d < 2 {
        out.push(ParamViolation::Dimension { d: params.d });
    }
    if params.t.len() != n + 1 || params.phi.len() != n || n == 0 || k == 0 || params.m == 0 {
        out.push(ParamViolation::Shape {
            reason: format!("expected |t| = N+1, |phi| = N, N >= 1, K >= 1 (N = {n}, K = {k}, |t| = {}, |phi| = {})", params.t.len(), params.phi.len()),
        });
        return out;
    }
    if params.t[0] != Rational::one() {
        out.push(ParamViolation::Boundaries { reason: "t_1 must be 1".into() });
    }
    if params.t[n] != Rational::new(1, i128::from(params.m)) {
        out.push(ParamViolation::Boundaries { reason: format!("t_(N+1) must be 1/{}", params.m) });
    }
    if params.t.windows(2).any(|w| w[0] <= w[1]) {
        out.push(ParamViolation::Boundaries { reason: "t must be strictly decreasing".into() });
    }
    let half = Rational::new(1, 2);
    let delta_ok = params.delta[0] > Rational::zero()
        && params.delta.windows(2).all(|w| w[0] < w[1])
        && params.delta_max() < half;
    if !delta_ok {
        out.push(ParamViolation::DeltaOrder);
    }
    let derived = derive(params);
    for i in 1..=n {
        let phi = params.phi(i);
        if phi > k {
            out.push(ParamViolation::PhiRange { index: i, phi });
            continue;
        }
        if phi != 0 && params.delta_level(phi) > derived[i - 1].delta {
            out.push(ParamViolation::PhiDelta { index: i });
        }
        let a = params.alpha(i);
        if a < Rational::zero() || a > Rational::one() {
            out.push(ParamViolation::AlphaRange { index: i });
        }
        if a > Rational::zero() {
            if params.t(i) > params.delta_max() {
                out.push(ParamViolation::Alpha { index: i });
            } else if derived[i - 1].gamma == 0 {
                out.push(ParamViolation::RedIneligible { index: i });
            }
        }
    }
    if let Some(promised) = &params.accepted {
        for (idx, reds) in promised.iter().enumerate() {
            let level = idx + 1;
            if level > k {
                out.push(ParamViolation::Shape { reason: format!("accepted table has level {level} > K") });
                continue;
            }
            let cap = params.delta_level(level);
            for &j in reds {
                let ok = (1..=n).contains(&j) && {
                    let g = derived[j - 1].gamma;
                    g > 0 && Rational::from_integer(g as i128) * params.t(j) <= cap
                };
                if !ok {
                    out.push(ParamViolation::Pairing { level, red_type: j });
                }
            }
        }
    }
    if let Some(cases) = &params.red_cases {
        let reds = params.red_types();
        for &j in &reds {
            let hits = cases.iter().filter(|(lo, hi)| (*lo..=*hi).contains(&j)).count();
            if hits != 1 {
                out.push(ParamViolation::CasePartition { reason: format!("red type {j} is covered by {hits} cases") });
            }
        }
        for &(lo, hi) in cases {
            if lo > hi || !reds.iter().any(|j| (lo..=hi).contains(j)) {
                out.push(ParamViolation::CasePartition { reason: format!("range {lo}..={hi} holds no red type") });
            }
        }
    }
    out
}

fn q(text: &str) -> Rational {
    parse_rational(text).expect("builtin literal")
}

const BUILTIN_T: [&str; 17] = [
    "1", "0.7", "0.65", "0.6", "0.5", "0.4", "0.35", "1/3", "0.3", "1/4", "1/5", "1/6", "1/7", "1/8", "1/9", "0.1", "1/11",
];
const BUILTIN_PHI: [usize; 16] = [0, 2, 3, 4, 0, 1, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0];
const ALPHA_SQUARE: [&str; 16] = [
    "0", "0", "0", "0", "0", "0.12", "0.2", "0", "0.2546", "0.2096", "0.15", "0.1", "0.1", "0.1", "0.1", "0.05",
];
const ALPHA_CUBE: [&str; 16] = [
    "0", "0", "0", "0", "0", "0.12", "0.2", "0", "0.325", "0.2096", "0.15", "0", "0", "0", "0", "0",
];

/// The two shipped instances: `d = 2` (squares) and `d = 3` (cubes).
pub fn builtin(d: usize) -> Result<ParameterInstance> {
    let (name, alpha) = match d {
        2 => ("builtin:square", ALPHA_SQUARE),
        3 => ("builtin:cube", ALPHA_CUBE),
        other => return Err(Error::UnsupportedDimension(other)),
    };
    let mut eligible = vec![6, 7];
    eligible.extend(9..=16);
    Ok(ParameterInstance {
        name: name.to_string(),
        d,
        m: 11,
        t: BUILTIN_T.iter().map(|s| q(s)).collect(),
        alpha: alpha.iter().map(|s| q(s)).collect(),
        delta: ["0.2", "0.3", "0.35", "0.4"].iter().map(|s| q(s)).collect(),
        phi: BUILTIN_PHI.to_vec(),
        red_eligible: Some(eligible),
        red_cases: Some(vec![(6, 6), (7, 7), (9, 16)]),
        accepted: Some(vec![
            (11..=16).collect(),
            (9..=16).collect(),
            std::iter::once(7).chain(9..=16).collect(),
            [6, 7].into_iter().chain(9..=16).collect(),
        ]),
    })
}

/// A number in a parameter file: either a JSON string (`"1/3"`, `"0.2546"`) or a JSON number.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Literal {
    Text(String),
    Number(serde_json::Number),
}

impl Literal {
    fn value(&self) -> Result<Rational> {
        match self {
            Literal::Text(s) => parse_rational(s),
            Literal::Number(n) => parse_rational(&n.to_string()),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    d: usize,
    #[serde(rename = "M")]
    m: u32,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    t: Vec<Literal>,
    alpha: Vec<Literal>,
    #[serde(rename = "Delta")]
    delta: Vec<Literal>,
    phi: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    red_eligible: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cases: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    accepted: Option<Vec<Vec<usize>>>,
}

impl ParamFile {
    fn into_instance(self) -> Result<ParameterInstance> {
        let parse = |v: &[Literal]| v.iter().map(Literal::value).collect::<Result<Vec<_>>>();
        let inst = ParameterInstance {
            name: self.name.unwrap_or_else(|| "file".to_string()),
            d: self.d,
            m: self.m,
            t: parse(&self.t)?,
            alpha: parse(&self.alpha)?,
            delta: parse(&self.delta)?,
            phi: self.phi,
            red_eligible: self.red_eligible,
            red_cases: self.cases.map(|c| c.into_iter().map(|[lo, hi]| (lo, hi)).collect()),
            accepted: self.accepted,
        };
        if inst.n() != self.n || inst.k() != self.k {
            return Err(Error::InvalidParams(format!(
                "declared N = {}, K = {} but alpha has {} entries and Delta has {}",
                self.n,
                self.k,
                inst.n(),
                inst.k()
            )));
        }
        Ok(inst)
    }

    fn from_instance(p: &ParameterInstance) -> Self {
        let lits = |v: &[Rational]| v.iter().map(|r| Literal::Text(render(r))).collect();
        ParamFile {
            name: Some(p.name.clone()),
            d: p.d,
            m: p.m,
            n: p.n(),
            k: p.k(),
            t: lits(&p.t),
            alpha: lits(&p.alpha),
            delta: lits(&p.delta),
            phi: p.phi.clone(),
            red_eligible: p.red_eligible.clone(),
            cases: p.red_cases.as_ref().map(|c| c.iter().map(|&(lo, hi)| [lo, hi]).collect()),
            accepted: p.accepted.clone(),
        }
    }
}

/// `x^d` for an exact side length.
pub fn volume(side: &Rational, d: usize) -> Rational {
    pow(side, d)
}
