//! Maximizes each case's weighting function over feasible item sets.
//!
//! Large types whose interval infimum is at least a threshold are enumerated
//! by count; every other item (including small ones) is charged as a fluid at
//! the highest density any of them can reach. For a count vector `m`, with
//! items of type `i` just above `t_{i+1}`, the case value is
//!
//! `min over subcases of  Σ m_i w_i + fluid · (1 - Σ m_i t_{i+1}^d)`,
//!
//! an upper bound on the weight of any feasible set with those counts.
//! Candidates surviving cheap necessary conditions are visited in decreasing
//! value and the first one the exact oracle accepts is the maximum.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::feasibility::{feasible_above, Coord, OracleConfig, Verdict};
use crate::analysis::weights::WeightSystem;
use crate::params::ParameterInstance;
use crate::rational::{pow, rendered, to_f64};
use crate::{Error, Rational, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    pub oracle: OracleConfig,
    /// Types with `t_{i+1}` at or above this are enumerated; the rest are fluid.
    pub enumerate_down_to: Rational,
    /// Largest lattice used by the counting test that filters candidates.
    pub grid_steps: i128,
    /// Oracle queries run side by side.
    pub batch: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { oracle: OracleConfig::default(), enumerate_down_to: Rational::new(1, 4), grid_steps: 12, batch: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseBound {
    pub case: usize,
    #[serde(serialize_with = "rendered::one")]
    pub value: Rational,
    pub value_f64: f64,
    /// Nonzero counts of the maximizing set, keyed by type.
    pub witness: BTreeMap<usize, u32>,
    /// Anchors found by the oracle for the witness, items in increasing type order.
    pub witness_placement: Option<Vec<Vec<Coord>>>,
    /// False when the oracle gave up on some candidate that was kept as feasible.
    pub certified: bool,
    pub candidates: usize,
    pub oracle_calls: usize,
    pub refuted: usize,
    pub capped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundResult {
    pub params: String,
    pub d: usize,
    pub cases: Vec<CaseBound>,
    #[serde(serialize_with = "rendered::one")]
    pub p: Rational,
    pub p_f64: f64,
    pub certified: bool,
}

/// One candidate count vector with its value numerator over the case's common denominator.
#[derive(Clone, Debug)]
struct Candidate {
    value: i128,
    counts: Vec<u32>,
}

struct CaseModel {
    /// Enumerated types, as type indices.
    types: Vec<usize>,
    /// Per subcase: constant term and per-type coefficient, scaled by `denominator`.
    forms: Vec<(i128, Vec<i128>)>,
    denominator: i128,
}

impl CaseModel {
    fn value(&self, counts: &[u32]) -> i128 {
        self.forms
            .iter()
            .map(|(base, coef)| base + coef.iter().zip(counts).map(|(c, &m)| c * i128::from(m)).sum::<i128>())
            .min()
            .expect("at least one subcase")
    }
}

fn overflow() -> Error {
    Error::Invariant("weight denominators overflow the exact search".into())
}

fn critical_types(params: &ParameterInstance, cfg: &SearchConfig) -> Vec<usize> {
    (1..=params.n()).filter(|&i| params.t(i + 1) >= cfg.enumerate_down_to).collect()
}

/// Highest density among types above `last` and the small type.
fn fluid(ws: &WeightSystem, case: usize, subcase: usize, after: usize) -> Result<Rational> {
    let params = ws.params();
    (after + 1..=params.small_type())
        .map(|i| ws.type_efficiency(case, subcase, i))
        .try_fold(Rational::zero(), |acc, e| Ok(acc.max(e?)))
}

fn model(ws: &WeightSystem, case: usize, types: &[usize]) -> Result<CaseModel> {
    let params = ws.params();
    let last = types.iter().copied().max().unwrap_or(0);
    let subcases = ws.case(case)?.subcases.len();
    let mut rows: Vec<(Rational, Vec<Rational>)> = Vec::new();
    for sub in 1..=subcases {
        let f = fluid(ws, case, sub, last)?;
        let coef = types
            .iter()
            .map(|&i| Ok(ws.type_weight(case, sub, i)? - f * pow(&params.t(i + 1), params.d)))
            .collect::<Result<Vec<_>>>()?;
        rows.push((f, coef));
    }
    let mut denominator = 1i128;
    for (f, coef) in &rows {
        for r in std::iter::once(f).chain(coef) {
            denominator = denominator.checked_mul(r.denom() / denominator.gcd(r.denom())).ok_or_else(overflow)?;
        }
    }
    let scale = |r: &Rational| -> Result<i128> {
        r.numer().checked_mul(denominator / r.denom()).ok_or_else(overflow)
    };
    let forms = rows
        .iter()
        .map(|(f, coef)| Ok((scale(f)?, coef.iter().map(scale).collect::<Result<Vec<_>>>()?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CaseModel { types: types.to_vec(), forms, denominator })
}

/// Necessary conditions shared by every case: volume and lattice-point counts.
struct Filter {
    /// Scaled volume per enumerated type and the (exclusive) budget.
    volume: Vec<i128>,
    volume_budget: i128,
    /// Per lattice: capacity and per-type point usage.
    lattices: Vec<(i128, Vec<i128>)>,
    caps: Vec<u32>,
}

impl Filter {
    fn new(params: &ParameterInstance, types: &[usize], grid_steps: i128) -> Result<Self> {
        let d = params.d;
        let vols: Vec<Rational> = types.iter().map(|&i| pow(&params.t(i + 1), d)).collect();
        let denom = vols.iter().fold(1i128, |acc, v| acc.lcm(v.denom()));
        let volume = vols.iter().map(|v| v.numer() * (denom / v.denom())).collect();
        // Items are strictly larger than t_{i+1}: per axis at most ⌈1/t⌉ - 1 fit.
        let caps = types
            .iter()
            .map(|&i| {
                let per_axis = (Rational::one() / params.t(i + 1)).ceil().to_integer() - 1;
                u32::try_from(per_axis.max(0).pow(d as u32)).map_err(|_| overflow())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut lattices = Vec::new();
        let mut ks = vec![2i128; d];
        'outer: loop {
            let capacity: i128 = ks.iter().map(|k| k - 1).product();
            let usage = types
                .iter()
                .map(|&i| {
                    let t = params.t(i + 1);
                    ks.iter().map(|&k| (t * k).floor().to_integer().min(k - 1)).product()
                })
                .collect();
            lattices.push((capacity, usage));
            let mut axis = d;
            loop {
                if axis == 0 {
                    break 'outer;
                }
                axis -= 1;
                if ks[axis] < grid_steps {
                    ks[axis] += 1;
                    let v = ks[axis];
                    ks[axis + 1..].iter_mut().for_each(|k| *k = v);
                    break;
                }
            }
        }
        Ok(Self { volume, volume_budget: denom, lattices, caps })
    }

    /// Every count vector passing the filter, in lexicographic order.
    fn enumerate(&self) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let mut counts = vec![0u32; self.caps.len()];
        let mut used = vec![0i128; self.lattices.len()];
        self.walk(0, 0, &mut counts, &mut used, &mut out);
        out
    }

    fn walk(&self, at: usize, volume: i128, counts: &mut Vec<u32>, used: &mut Vec<i128>, out: &mut Vec<Vec<u32>>) {
        if at == counts.len() {
            out.push(counts.clone());
            return;
        }
        let saved = used.clone();
        let mut vol = volume;
        let mut m = 0u32;
        loop {
            counts[at] = m;
            self.walk(at + 1, vol, counts, used, out);
            m += 1;
            if m > self.caps[at] {
                break;
            }
            vol += self.volume[at];
            // Items strictly exceed their infimum, so the volume must stay below one.
            if vol >= self.volume_budget {
                break;
            }
            let mut ok = true;
            for (u, (capacity, usage)) in used.iter_mut().zip(&self.lattices) {
                *u += usage[at];
                ok &= *u <= *capacity;
            }
            if !ok {
                break;
            }
        }
        counts[at] = 0;
        *used = saved;
    }
}

/// Refuted count vectors; any superset of one is infeasible too.
#[derive(Default)]
struct Refuted(Vec<Vec<u32>>);

impl Refuted {
    fn covers(&self, counts: &[u32]) -> bool {
        self.0.iter().any(|s| s.iter().zip(counts).all(|(x, y)| x <= y))
    }
}

fn sizes_for(params: &ParameterInstance, types: &[usize], counts: &[u32]) -> Vec<Rational> {
    types
        .iter()
        .zip(counts)
        .flat_map(|(&i, &m)| std::iter::repeat_n(params.t(i + 1), m as usize))
        .collect()
}

fn nonzero(types: &[usize], counts: &[u32]) -> BTreeMap<usize, u32> {
    types.iter().zip(counts).filter(|(_, &m)| m > 0).map(|(&i, &m)| (i, m)).collect()
}

pub fn case_bound(ws: &WeightSystem, case: usize, cfg: &SearchConfig) -> Result<CaseBound> {
    let params = ws.params();
    let types = critical_types(params, cfg);
    let model = model(ws, case, &types)?;
    let filter = Filter::new(params, &types, cfg.grid_steps)?;
    let mut candidates: Vec<Candidate> = filter
        .enumerate()
        .into_iter()
        .map(|counts| Candidate { value: model.value(&counts), counts })
        .collect();
    candidates.sort_by(|a, b| b.value.cmp(&a.value).then_with(|| a.counts.cmp(&b.counts)));
    log::debug!("case {case}: {} candidates", candidates.len());

    let mut refuted = Refuted::default();
    let mut stats = Stats::default();
    let mut next = 0;
    while next < candidates.len() {
        // Skip supersets of refuted sets, then query the oracle on a batch of open candidates.
        let mut batch = Vec::new();
        while next < candidates.len() && batch.len() < cfg.batch.max(1) {
            if !refuted.covers(&candidates[next].counts) {
                batch.push(next);
            }
            next += 1;
        }
        let reports = batch
            .par_iter()
            .map(|&idx| feasible_above(&sizes_for(params, &types, &candidates[idx].counts), params.d, &cfg.oracle))
            .collect::<Result<Vec<_>>>()?;
        stats.calls += reports.len();
        for (&idx, report) in batch.iter().zip(reports) {
            if report.verdict == Verdict::Infeasible {
                stats.refuted += 1;
                refuted.0.push(candidates[idx].counts.clone());
                continue;
            }
            if report.verdict == Verdict::Cap {
                stats.capped += 1;
                log::warn!("case {case}: oracle cap on {:?}", nonzero(&types, &candidates[idx].counts));
            }
            return Ok(finish(case, &model, &candidates[idx], report.placement, candidates.len(), stats));
        }
    }
    Err(Error::Invariant(format!("case {case}: no feasible candidate, not even the empty set")))
}

#[derive(Clone, Copy, Debug, Default)]
struct Stats {
    calls: usize,
    refuted: usize,
    capped: usize,
}

fn finish(
    case: usize,
    model: &CaseModel,
    best: &Candidate,
    placement: Option<Vec<Vec<Coord>>>,
    candidates: usize,
    stats: Stats,
) -> CaseBound {
    let value = Rational::new(best.value, model.denominator);
    CaseBound {
        case,
        value,
        value_f64: to_f64(&value),
        witness: nonzero(&model.types, &best.counts),
        witness_placement: placement,
        certified: stats.capped == 0,
        candidates,
        oracle_calls: stats.calls,
        refuted: stats.refuted,
        capped: stats.capped,
    }
}

/// Maximum over all cases; by the weighting argument this bounds the asymptotic ratio.
pub fn overall_bound(params: &ParameterInstance, cfg: &SearchConfig) -> Result<BoundResult> {
    let ws = WeightSystem::new(params)?;
    let cases = (1..=ws.cases().len())
        .into_par_iter()
        .map(|case| case_bound(&ws, case, cfg))
        .collect::<Result<Vec<_>>>()?;
    let p = cases.iter().map(|c| c.value).max().unwrap_or_else(Rational::zero);
    Ok(BoundResult {
        params: params.name.clone(),
        d: params.d,
        certified: cases.iter().all(|c| c.certified),
        cases,
        p,
        p_f64: to_f64(&p),
    })
}

/// Value of a hand-picked count vector, with the fluid taken over every type
/// beyond the largest pinned one.
pub fn evaluate_witness(ws: &WeightSystem, case: usize, counts: &BTreeMap<usize, u32>) -> Result<Rational> {
    let params = ws.params();
    let last = counts.keys().copied().max().unwrap_or(0);
    let subcases = ws.case(case)?.subcases.len();
    let mut best: Option<Rational> = None;
    for sub in 1..=subcases {
        let f = fluid(ws, case, sub, last)?;
        let mut value = f;
        for (&i, &m) in counts {
            let m = Rational::from_integer(i128::from(m));
            value += m * (ws.type_weight(case, sub, i)? - f * pow(&params.t(i + 1), params.d));
        }
        best = Some(best.map_or(value, |b: Rational| b.min(value)));
    }
    best.ok_or(Error::UnknownCase { case, subcase: 1 })
}
