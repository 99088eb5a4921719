//! Interval analysis over a Cartesian subdivision of the input box.

use num_traits::Signed;
use rayon::prelude::*;

use super::ia::{analyze_box, outcome_of, Model, Node, Stop};
use super::{argument_ranges, AnalysisError, AnalysisOutcome, AnalysisParams};
use crate::deadline::Deadline;
use crate::fpcore::FpCoreProgram;
use crate::numeric::{f64_to_rational, DInterval, Dyadic, Interval, Rational};

/// Endpoint magnitude ratio from which a sign-definite range splits geometrically.
const GEOMETRIC_RATIO: i64 = 1000;

fn geometric_points(lo: &Rational, hi: &Rational, k: u32) -> Option<Vec<Rational>> {
    let (a, b) = (crate::numeric::format::approx_f64(lo), crate::numeric::format::approx_f64(hi));
    let step = (b / a).ln() / k as f64;
    let mut pts = vec![lo.clone()];
    for i in 1..k {
        let q = f64_to_rational(a * (step * i as f64).exp())?;
        if &q <= pts.last().expect("non-empty") || &q >= hi {
            return None;
        }
        pts.push(q);
    }
    pts.push(hi.clone());
    Some(pts)
}

/// Splits `range` into `k` consecutive closed pieces that cover it.
pub fn split_range(range: &Interval, k: u32) -> Vec<Interval> {
    let (lo, hi) = (range.lo(), range.hi());
    if k <= 1 || lo == hi {
        return vec![range.clone()];
    }
    let ratio = Rational::from_integer(GEOMETRIC_RATIO.into());
    let pts = if lo.is_positive() && hi >= &(lo * &ratio) {
        geometric_points(lo, hi, k)
    } else if hi.is_negative() && lo <= &(hi * &ratio) {
        geometric_points(&-hi, &-lo, k).map(|p| p.into_iter().rev().map(|x| -x).collect())
    } else {
        None
    };
    let pts = pts.unwrap_or_else(|| {
        let w = (hi - lo) / Rational::from_integer(k.into());
        (0..=k).map(|i| lo + &w * Rational::from_integer(i.into())).collect()
    });
    pts.windows(2)
        .map(|w| Interval::new(w[0].clone(), w[1].clone()).expect("increasing split points"))
        .collect()
}

/// Per-variable split counts with product at most `max_boxes`. Counts shrink
/// one step at a time on the variable with the largest count, ties going to
/// the narrowest range and then to the later argument.
pub fn split_counts(ranges: &[Interval], k: u32, max_boxes: u64) -> Vec<u32> {
    let mut ks: Vec<u32> = ranges.iter().map(|r| if r.lo() == r.hi() { 1 } else { k }).collect();
    let total = |ks: &[u32]| ks.iter().try_fold(1u64, |acc, &x| acc.checked_mul(x as u64)).unwrap_or(u64::MAX);
    while total(&ks) > max_boxes {
        let top = *ks.iter().max().expect("non-empty when over budget");
        let mut pick: Option<usize> = None;
        for (i, r) in ranges.iter().enumerate() {
            if ks[i] != top {
                continue;
            }
            pick = match pick {
                Some(j) if ranges[j].width() < r.width() => Some(j),
                _ => Some(i),
            };
        }
        ks[pick.expect("some variable has the top count")] -= 1;
    }
    ks
}

pub fn analyze_subdiv(program: &FpCoreProgram, params: &AnalysisParams) -> Result<AnalysisOutcome, AnalysisError> {
    analyze_subdiv_with(program, params, &Deadline::from_budget(params.time_budget_ms))
}

pub fn analyze_subdiv_with(
    program: &FpCoreProgram,
    params: &AnalysisParams,
    deadline: &Deadline,
) -> Result<AnalysisOutcome, AnalysisError> {
    params.validate()?;
    let p = params.precision_bits;
    let ranges = argument_ranges(program)?;
    let ks = split_counts(&ranges, params.subdiv_per_var, params.max_boxes);
    let pieces: Vec<Vec<DInterval>> = ranges
        .iter()
        .zip(&ks)
        .map(|(r, &k)| split_range(r, k).iter().map(|s| s.to_dinterval(p)).collect())
        .collect();
    let n_boxes: usize = pieces.iter().map(Vec::len).product();
    let model = Model::new(params);

    // mixed radix, first argument most significant
    let box_at = |mut idx: usize| -> Vec<DInterval> {
        let mut b = vec![DInterval::zero(); pieces.len()];
        for (v, ps) in pieces.iter().enumerate().rev() {
            b[v] = ps[idx % ps.len()].clone();
            idx /= ps.len();
        }
        b
    };
    let results: Vec<Result<Node, Stop>> = (0..n_boxes)
        .into_par_iter()
        .map(|i| analyze_box(&model, &program.body, &program.args, &box_at(i), deadline))
        .collect();

    let mut worst: Option<Node> = None;
    for r in results {
        match r {
            Err(stop) => return Ok(stop.into_outcome()),
            Ok(n) => {
                worst = Some(match worst {
                    None => n,
                    Some(w) => Node {
                        real: w.real.hull(&n.real),
                        float: w.float.hull(&n.float),
                        err: Dyadic::max(&w.err, &n.err),
                    },
                });
            }
        }
    }
    let node = worst.expect("at least one box");
    Ok(outcome_of(&node))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{analyze_ia, AlarmKind};
    use crate::fpcore::parse_fpcore;
    use crate::numeric::rational;

    fn prog(src: &str) -> FpCoreProgram {
        parse_fpcore(src).unwrap().remove(0)
    }

    fn iv(lo: &str, hi: &str) -> Interval {
        Interval::new(rational(lo).unwrap(), rational(hi).unwrap()).unwrap()
    }

    #[test]
    fn equal_and_geometric_splits_cover_the_range() {
        let eq = split_range(&iv("0", "2"), 8);
        assert_eq!(eq.len(), 8);
        assert_eq!(eq[3], iv("3/4", "1"));
        let geo = split_range(&iv("1", "1e10"), 10);
        assert_eq!(geo.len(), 10);
        assert_eq!(geo[0].lo(), &rational("1").unwrap());
        assert_eq!(geo[9].hi(), &rational("1e10").unwrap());
        for w in geo.windows(2) {
            assert_eq!(w[0].hi(), w[1].lo());
        }
        // roughly one decade per piece
        let r = crate::numeric::format::approx_f64(geo[0].hi());
        assert!((r - 10.0).abs() < 1e-6, "{r}");
        let neg = split_range(&iv("-1e10", "-1"), 4);
        assert_eq!(neg[3].hi(), &rational("-1").unwrap());
        assert!(neg[3].width() < neg[0].width());
    }

    #[test]
    fn counts_respect_the_budget() {
        let ranges = vec![iv("0", "1"), iv("0", "100"), iv("0", "10"), iv("0", "10"), iv("0", "10")];
        let ks = split_counts(&ranges, 8, 4096);
        assert!(ks.iter().map(|&k| k as u64).product::<u64>() <= 4096);
        assert!(ks.iter().all(|&k| k <= ks[1]));
        assert!(ks[0] <= ks[2]);
        assert!(ks.iter().max().unwrap() - ks.iter().min().unwrap() <= 1);
        assert_eq!(split_counts(&[iv("1", "1"), iv("0", "1")], 8, 4096), vec![1, 8]);
    }

    #[test]
    fn subdivision_tightens_dependency() {
        let p = prog("(FPCore (x) :pre (<= 0 x 1) (- (* x x) x))");
        let params = AnalysisParams::default();
        let ia = analyze_ia(&p, &params).unwrap();
        let sd = analyze_subdiv(&p, &params).unwrap();
        assert!(sd.bound().unwrap() < ia.bound().unwrap());
    }

    #[test]
    fn pole_inside_a_box_alarms() {
        let p = prog("(FPCore (x) :pre (<= 0 x 2) (/ 1 (- x 1)))");
        let out = analyze_subdiv(&p, &AnalysisParams::default()).unwrap();
        assert_eq!(out.alarm(), Some(AlarmKind::Div0));
    }
}
