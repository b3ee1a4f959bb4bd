//! Weighting functions derived from a parameter instance.
//!
//! Case 1 charges every large item its blue share `(1 - α_i)/β_i^d`. Every
//! further case corresponds to a range of red types that may sit in bins still
//! waiting for a blue partner. While such bins exist, no bin of a blue type
//! that could have absorbed them is waiting for reds either, which gives two
//! ways to count: drop the blue share of those blocked types and charge every
//! red share (first subcase), or keep all blue shares and charge only the red
//! shares of types up to the range's end (second subcase).
//!
//! Small items are charged by volume at `(M+1)^d/(M^d-1)`.

use num_traits::Zero;
use serde::Serialize;

use crate::params::{derive, type_of, DerivedType, ParameterInstance};
use crate::rational::{pow, rendered};
use crate::{Error, Rational, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Subcase {
    /// Weight per large type, index `i - 1`.
    #[serde(serialize_with = "rendered::many")]
    pub weights: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WeightCase {
    /// 1-based case number.
    pub index: usize,
    /// Red types whose waiting bins define this case; `None` for the all-blue case.
    pub red_range: Option<(usize, usize)>,
    /// Types whose blue share the first subcase drops.
    pub blocked: Vec<usize>,
    pub subcases: Vec<Subcase>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub type_index: usize,
    #[serde(serialize_with = "rendered::one")]
    pub lower: Rational,
    #[serde(serialize_with = "rendered::one")]
    pub upper: Rational,
    #[serde(serialize_with = "rendered::one")]
    pub weight: Rational,
    /// Weight over the volume of the interval infimum; for the small type, the volume rate.
    #[serde(serialize_with = "rendered::one")]
    pub efficiency: Rational,
}

#[derive(Clone, Debug)]
pub struct WeightSystem {
    params: ParameterInstance,
    derived: Vec<DerivedType>,
    cases: Vec<WeightCase>,
}

impl WeightSystem {
    pub fn new(params: &ParameterInstance) -> Result<Self> {
        let derived = derive(params);
        let mut cases = vec![WeightCase {
            index: 1,
            red_range: None,
            blocked: Vec::new(),
            subcases: vec![Subcase { weights: (1..=params.n()).map(|i| blue_share(params, &derived, i)).collect() }],
        }];
        for (lo, hi) in red_ranges(params) {
            cases.push(range_case(params, &derived, cases.len() + 1, lo, hi)?);
        }
        Ok(Self { params: params.clone(), derived, cases })
    }

    pub fn params(&self) -> &ParameterInstance {
        &self.params
    }

    pub fn derived(&self) -> &[DerivedType] {
        &self.derived
    }

    pub fn cases(&self) -> &[WeightCase] {
        &self.cases
    }

    pub fn case(&self, case: usize) -> Result<&WeightCase> {
        case.checked_sub(1)
            .and_then(|c| self.cases.get(c))
            .ok_or(Error::UnknownCase { case, subcase: 0 })
    }

    fn subcase(&self, case: usize, subcase: usize) -> Result<&Subcase> {
        self.case(case)?
            .subcases
            .get(subcase.wrapping_sub(1))
            .ok_or(Error::UnknownCase { case, subcase })
    }

    /// Constant weight of a large type.
    pub fn type_weight(&self, case: usize, subcase: usize, type_index: usize) -> Result<Rational> {
        Ok(self.subcase(case, subcase)?.weights[type_index - 1])
    }

    pub fn weight(&self, case: usize, subcase: usize, size: &Rational) -> Result<Rational> {
        let ty = type_of(&self.params, size)?;
        if ty == self.params.small_type() {
            self.subcase(case, subcase)?;
            Ok(pow(size, self.params.d) * self.params.small_density())
        } else {
            self.type_weight(case, subcase, ty)
        }
    }

    pub fn efficiency(&self, case: usize, subcase: usize, size: &Rational) -> Result<Rational> {
        Ok(self.weight(case, subcase, size)? / pow(size, self.params.d))
    }

    /// Per-type density ceiling: weight over the infimum volume `t_{i+1}^d`.
    pub fn type_efficiency(&self, case: usize, subcase: usize, type_index: usize) -> Result<Rational> {
        if type_index == self.params.small_type() {
            self.subcase(case, subcase)?;
            return Ok(self.params.small_density());
        }
        Ok(self.type_weight(case, subcase, type_index)? / pow(&self.params.t(type_index + 1), self.params.d))
    }

    pub fn table(&self, case: usize, subcase: usize) -> Result<Vec<TableRow>> {
        (1..=self.params.small_type())
            .map(|i| {
                let small = i == self.params.small_type();
                Ok(TableRow {
                    type_index: i,
                    lower: self.params.t(i + 1),
                    upper: self.params.t(i),
                    weight: if small { self.params.small_density() } else { self.type_weight(case, subcase, i)? },
                    efficiency: self.type_efficiency(case, subcase, i)?,
                })
            })
            .collect()
    }
}

fn blue_share(params: &ParameterInstance, derived: &[DerivedType], i: usize) -> Rational {
    let cells = pow(&Rational::from_integer(derived[i - 1].beta as i128), params.d);
    (Rational::from_integer(1) - params.alpha(i)) / cells
}

fn red_share(params: &ParameterInstance, derived: &[DerivedType], i: usize) -> Rational {
    let a = params.alpha(i);
    if a > Rational::zero() {
        a / Rational::from_integer(derived[i - 1].theta as i128)
    } else {
        Rational::zero()
    }
}

/// Explicit case ranges, or one range spanning every red type.
fn red_ranges(params: &ParameterInstance) -> Vec<(usize, usize)> {
    if let Some(ranges) = &params.red_cases {
        return ranges.clone();
    }
    let reds = params.red_types();
    match (reds.first(), reds.last()) {
        (Some(&lo), Some(&hi)) => vec![(lo, hi)],
        _ => Vec::new(),
    }
}

fn range_case(params: &ParameterInstance, derived: &[DerivedType], index: usize, lo: usize, hi: usize) -> Result<WeightCase> {
    let reds: Vec<usize> = params.red_types().into_iter().filter(|j| (lo..=hi).contains(j)).collect();
    if reds.is_empty() {
        return Err(Error::InvalidParams(format!("case range {lo}..={hi} holds no red type")));
    }
    // A blue type is blocked when every red type of the range fits its reserve.
    let blocked: Vec<usize> = (1..=params.n())
        .filter(|&i| reds.iter().all(|&e| crate::params::admits(params, derived, i, e)))
        .collect();
    let first = Subcase {
        weights: (1..=params.n())
            .map(|i| {
                let blue = if blocked.contains(&i) { Rational::zero() } else { blue_share(params, derived, i) };
                blue + red_share(params, derived, i)
            })
            .collect(),
    };
    let second = Subcase {
        weights: (1..=params.n())
            .map(|i| {
                let red = if i <= hi { red_share(params, derived, i) } else { Rational::zero() };
                blue_share(params, derived, i) + red
            })
            .collect(),
    };
    // The minimum over subcases ignores a second rule that never undercuts the first.
    let dominated = second.weights.iter().zip(&first.weights).all(|(b, a)| b >= a);
    let subcases = if dominated { vec![first] } else { vec![first, second] };
    Ok(WeightCase { index, red_range: Some((lo, hi)), blocked, subcases })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::builtin;
    use crate::rational::parse_rational;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn close(a: Rational, b: f64, tol: f64) -> bool {
        (crate::rational::to_f64(&a) - b).abs() <= tol
    }

    #[test]
    fn case_shapes() {
        let sq = WeightSystem::new(&builtin(2).unwrap()).unwrap();
        let shapes: Vec<usize> = sq.cases().iter().map(|c| c.subcases.len()).collect();
        assert_eq!(shapes, vec![1, 2, 2, 1]);
        assert_eq!(sq.case(2).unwrap().blocked, vec![4]);
        assert_eq!(sq.case(3).unwrap().blocked, vec![3, 4]);
        assert_eq!(sq.case(4).unwrap().blocked, vec![2, 3, 4, 7]);
        let cube = WeightSystem::new(&builtin(3).unwrap()).unwrap();
        assert_eq!(cube.cases().iter().map(|c| c.subcases.len()).collect::<Vec<_>>(), vec![1, 2, 2, 1]);
    }

    #[test]
    fn weight_examples() {
        let sq = WeightSystem::new(&builtin(2).unwrap()).unwrap();
        // Type 9 spans (1/4, 0.3].
        assert!(close(sq.weight(1, 1, &q("0.3")).unwrap(), 0.0829, 1e-4));
        assert_eq!(sq.weight(2, 1, &q("0.55")).unwrap(), Rational::zero());
        assert!(close(sq.type_efficiency(1, 1, 9).unwrap(), 1.3252, 1e-4));
        assert_eq!(sq.efficiency(1, 1, &q("0.05")).unwrap(), q("1.2"));
        assert_eq!(sq.type_weight(4, 1, 7).unwrap(), q("0.2") / 3);
        let cube = WeightSystem::new(&builtin(3).unwrap()).unwrap();
        assert!(close(cube.weight(2, 1, &q("0.3")).unwrap(), 0.04211, 5e-6));
        assert!(close(cube.type_efficiency(3, 1, 7).unwrap(), 3.472, 1e-3));
    }

    #[test]
    fn unknown_case_is_an_error() {
        let sq = WeightSystem::new(&builtin(2).unwrap()).unwrap();
        assert!(matches!(sq.weight(5, 1, &q("0.3")), Err(Error::UnknownCase { .. })));
        assert!(matches!(sq.weight(1, 2, &q("0.3")), Err(Error::UnknownCase { .. })));
    }

    #[test]
    fn weights_lie_in_unit_interval() {
        for d in [2, 3] {
            let ws = WeightSystem::new(&builtin(d).unwrap()).unwrap();
            for case in ws.cases() {
                for sub in &case.subcases {
                    assert!(sub.weights.iter().all(|w| *w >= Rational::zero() && *w <= Rational::from_integer(1)));
                }
            }
        }
    }

    #[test]
    fn all_blue_instance_has_one_case() {
        let mut p = builtin(2).unwrap();
        p.alpha.iter_mut().for_each(|a| *a = Rational::zero());
        p.red_cases = None;
        let ws = WeightSystem::new(&p).unwrap();
        assert_eq!(ws.cases().len(), 1);
    }
}
