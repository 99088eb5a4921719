//! Greedy sample-driven search and genetic bound-driven search.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rules::{guards_hold, matching_rules, neighbors, rules_db, simplify, GuardMode, RewriteRule};
use crate::analysis::{analyze_portfolio_with, AlarmKind, AnalysisOutcome, AnalysisParams, Mode};
use crate::deadline::Deadline;
use crate::dynamic::{bits_between, eval_f64, ideal_values_until, sample_inputs, DynamicError, Ideal, SamplePlan, Samples};
use crate::fpcore::{Expr, FpCoreProgram, Precondition};
use crate::numeric::Rational;

/// Bits charged to a sample where the candidate evaluates to NaN or an infinity.
pub const INVALID_BITS: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyParams {
    pub max_iters: usize,
    pub neighbor_cap: usize,
    pub min_gain_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneticParams {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub elite: usize,
    pub mutation_attempts_per_child: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub greedy: GreedyParams,
    pub genetic: GeneticParams,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            greedy: GreedyParams { max_iters: 8, neighbor_cap: 1000, min_gain_bits: 0.1 },
            genetic: GeneticParams {
                population: 16,
                generations: 10,
                tournament: 4,
                elite: 2,
                mutation_attempts_per_child: 3,
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("program '{0}' has no precondition")]
    MissingPrecondition(String),
    #[error(transparent)]
    Sampling(#[from] DynamicError),
    #[error("invalid search parameters: {0}")]
    InvalidParams(&'static str),
    #[error("search exceeded its time budget")]
    Timeout,
}

impl SearchParams {
    pub fn validate(&self) -> Result<(), RewriteError> {
        let g = &self.genetic;
        if g.elite < 1 || g.population < g.elite {
            return Err(RewriteError::InvalidParams("population >= elite >= 1 is required"));
        }
        if g.tournament < 1 {
            return Err(RewriteError::InvalidParams("tournament size must be at least 1"));
        }
        Ok(())
    }
}

/// Score attached to a search state.
#[derive(Debug, Clone, PartialEq)]
pub enum Score {
    /// Mean bits of error on the fixed sample set.
    Sampled(f64),
    /// Portfolio bound; `None` when the analysis alarmed or timed out.
    Bound(Option<Rational>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub expr: Expr,
    pub score: Score,
    pub size: usize,
}

fn precondition_of(program: &FpCoreProgram) -> Result<Precondition, RewriteError> {
    program
        .precondition
        .as_ref()
        .and_then(|p| p.in_order(&program.args))
        .ok_or_else(|| RewriteError::MissingPrecondition(program.name.clone()))
}

/// Orders candidates by score, then node count, then printed form.
fn tie_key(e: &Expr) -> (usize, String) {
    (e.node_count(), e.to_string())
}

/// Fixed sample set with the input program's correctly rounded values.
struct Fixed {
    samples: Samples,
    ideals: Vec<(usize, f64)>,
}

impl Fixed {
    fn score(&self, e: &Expr) -> f64 {
        let sum: f64 = self
            .ideals
            .iter()
            .map(|&(i, ideal)| {
                let v = eval_f64(e, &self.samples.vars, &self.samples.points[i]);
                if v.valid {
                    bits_between(v.value, ideal)
                } else {
                    INVALID_BITS
                }
            })
            .sum();
        sum / self.ideals.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOutcome {
    pub program: FpCoreProgram,
    /// Score of the input followed by the score after each accepted step.
    pub history: Vec<Candidate>,
}

pub fn greedy_improve(program: &FpCoreProgram, plan: &SamplePlan, params: &SearchParams) -> Result<FpCoreProgram, RewriteError> {
    Ok(greedy_search(program, plan, params, &Deadline::none())?.program)
}

/// Hill climbing over unguarded rewrites on one seeded sample set. A
/// neighbor replaces the current program only if it gains more than
/// `min_gain_bits`.
pub fn greedy_search(
    program: &FpCoreProgram,
    plan: &SamplePlan,
    params: &SearchParams,
    deadline: &Deadline,
) -> Result<GreedyOutcome, RewriteError> {
    let pre = precondition_of(program)?;
    let samples = sample_inputs(&pre, plan)?;
    let ideals: Vec<(usize, f64)> = ideal_values_until(&program.body, &samples, deadline)
        .map_err(|_| RewriteError::Timeout)?
        .into_iter()
        .enumerate()
        .filter_map(|(i, id)| match id {
            Ideal::Value(x, _) => Some((i, x)),
            _ => None,
        })
        .collect();
    if ideals.is_empty() {
        return Err(DynamicError::NoValidSamples { n_total: samples.points.len(), n_invalid: 0, n_inconclusive: 0 }.into());
    }
    let fixed = Fixed { samples, ideals };
    let rules = rules_db();
    let g = &params.greedy;
    let mut cur = program.body.clone();
    let mut cur_score = fixed.score(&cur);
    let mut history = vec![Candidate { expr: cur.clone(), score: Score::Sampled(cur_score), size: cur.node_count() }];
    for _ in 0..g.max_iters {
        deadline.check().map_err(|_| RewriteError::Timeout)?;
        let mut cands = neighbors(&cur, &rules, GuardMode::Unguarded, &pre, g.neighbor_cap);
        let simplified: Vec<Expr> = cands.iter().map(simplify).collect();
        for s in simplified {
            if s != cur && !cands.contains(&s) {
                cands.push(s);
            }
        }
        let scored: Vec<(f64, Expr)> = cands
            .into_par_iter()
            .map(|c| deadline.check().map(|_| (fixed.score(&c), c)))
            .collect::<Result<_, _>>()
            .map_err(|_| RewriteError::Timeout)?;
        let best = scored.into_iter().min_by(|(sa, a), (sb, b)| sa.total_cmp(sb).then_with(|| tie_key(a).cmp(&tie_key(b))));
        match best {
            Some((s, e)) if cur_score - s > g.min_gain_bits => {
                cur = e;
                cur_score = s;
                history.push(Candidate { expr: cur.clone(), score: Score::Sampled(s), size: cur.node_count() });
            }
            _ => break,
        }
    }
    Ok(GreedyOutcome { program: program.with_body(cur), history })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneticOutcome {
    pub program: FpCoreProgram,
    /// Portfolio outcome of the returned program.
    pub outcome: AnalysisOutcome,
    /// Best-ever bound after initialization and after each generation.
    pub best_per_generation: Vec<Rational>,
    /// Set when the input alarms: no fitness signal exists and the input is
    /// returned unchanged.
    pub input_alarm: Option<AlarmKind>,
}

pub fn genetic_improve(program: &FpCoreProgram, params: &AnalysisParams, search: &SearchParams) -> Result<FpCoreProgram, RewriteError> {
    Ok(genetic_search(program, params, search, &Deadline::none())?.program)
}

type Fitness = Option<Rational>;

struct Evaluator<'a> {
    program: &'a FpCoreProgram,
    params: &'a AnalysisParams,
    deadline: &'a Deadline,
    cache: HashMap<Expr, (Fitness, AnalysisOutcome)>,
}

impl Evaluator<'_> {
    /// Scores every uncached expression in parallel.
    fn fill(&mut self, exprs: &[Expr]) -> Result<(), RewriteError> {
        let mut todo: Vec<&Expr> = exprs.iter().filter(|e| !self.cache.contains_key(*e)).collect();
        todo.sort_by_key(|e| tie_key(e));
        todo.dedup();
        let (program, params, deadline) = (self.program, self.params, self.deadline);
        let results: Vec<(Expr, AnalysisOutcome)> = todo
            .into_par_iter()
            .map(|e| {
                let out = analyze_portfolio_with(&program.with_body(e.clone()), params, &Mode::ALL, deadline)
                    .unwrap_or(AnalysisOutcome::Timeout);
                (e.clone(), out)
            })
            .collect();
        if self.deadline.expired() {
            return Err(RewriteError::Timeout);
        }
        for (e, out) in results {
            self.cache.insert(e, (out.bound().cloned(), out));
        }
        Ok(())
    }

    fn fitness(&self, e: &Expr) -> &Fitness {
        &self.cache[e].0
    }
}

/// `None` (alarm) ranks after every bound.
fn better(a: (&Fitness, &Expr), b: (&Fitness, &Expr)) -> std::cmp::Ordering {
    let fa = a.0.as_ref();
    let fb = b.0.as_ref();
    let ord = match (fa, fb) {
        (Some(x), Some(y)) => x.cmp(y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    };
    ord.then_with(|| tie_key(a.1).cmp(&tie_key(b.1)))
}

/// One random guarded rewrite; `None` after the allowed attempts fail.
fn mutate(e: &Expr, rules: &[RewriteRule], pre: &Precondition, attempts: usize, rng: &mut ChaCha8Rng) -> Option<Expr> {
    let paths = e.paths();
    for _ in 0..attempts {
        let path = &paths[rng.gen_range(0..paths.len())].0;
        let options = matching_rules(e, path, rules);
        if options.is_empty() {
            continue;
        }
        let (rule, new, b) = &options[rng.gen_range(0..options.len())];
        if guards_hold(rule, b, e, path, pre) {
            let cand = e.replaced_at(path, new.clone());
            if &cand != e {
                return Some(cand);
            }
        }
    }
    None
}

/// Mutation with tournament selection and elitism; fitness is the portfolio
/// bound. Returns the best program ever evaluated.
pub fn genetic_search(
    program: &FpCoreProgram,
    params: &AnalysisParams,
    search: &SearchParams,
    deadline: &Deadline,
) -> Result<GeneticOutcome, RewriteError> {
    search.validate()?;
    let pre = precondition_of(program)?;
    let g = &search.genetic;
    let rules = rules_db();
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let mut ev = Evaluator { program, params, deadline, cache: HashMap::new() };

    let input = program.body.clone();
    ev.fill(std::slice::from_ref(&input))?;
    let input_outcome = ev.cache[&input].1.clone();
    let Some(input_bound) = ev.fitness(&input).clone() else {
        return Ok(GeneticOutcome {
            program: program.clone(),
            input_alarm: input_outcome.alarm(),
            outcome: input_outcome,
            best_per_generation: Vec::new(),
        });
    };

    let mut population = vec![input.clone()];
    while population.len() < g.population {
        let m = mutate(&input, &rules, &pre, g.mutation_attempts_per_child, &mut rng).unwrap_or_else(|| input.clone());
        population.push(m);
    }
    ev.fill(&population)?;
    let mut best = (Some(input_bound), input.clone());
    let track = |pop: &[Expr], ev: &Evaluator, best: &mut (Fitness, Expr)| {
        for e in pop {
            if better((ev.fitness(e), e), (&best.0, &best.1)).is_lt() {
                *best = (ev.fitness(e).clone(), e.clone());
            }
        }
    };
    track(&population, &ev, &mut best);
    let mut history = vec![best.0.clone().expect("input bound")];

    for _ in 0..g.generations {
        deadline.check().map_err(|_| RewriteError::Timeout)?;
        let mut ranked = population.clone();
        ranked.sort_by(|a, b| better((ev.fitness(a), a), (ev.fitness(b), b)));
        let mut next: Vec<Expr> = ranked.iter().take(g.elite).cloned().collect();
        while next.len() < g.population {
            let parent = (0..g.tournament)
                .map(|_| population.choose(&mut rng).expect("non-empty population"))
                .min_by(|a, b| better((ev.fitness(a), a), (ev.fitness(b), b)))
                .expect("tournament size >= 1");
            let child = mutate(parent, &rules, &pre, g.mutation_attempts_per_child, &mut rng).unwrap_or_else(|| parent.clone());
            next.push(child);
        }
        ev.fill(&next)?;
        population = next;
        track(&population, &ev, &mut best);
        history.push(best.0.clone().expect("best is at least the input"));
    }

    let outcome = ev.cache[&best.1].1.clone();
    Ok(GeneticOutcome { program: program.with_body(best.1), outcome, best_per_generation: history, input_alarm: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::analyze_ia;
    use crate::fpcore::{parse_expr, parse_fpcore};

    fn prog(src: &str) -> FpCoreProgram {
        parse_fpcore(src).unwrap().remove(0)
    }

    fn small() -> SearchParams {
        let mut s = SearchParams::default();
        s.genetic.population = 10;
        s.genetic.generations = 8;
        s
    }

    #[test]
    fn greedy_finds_the_conjugate() {
        let p = prog("(FPCore (x) :pre (<= 1 x 1e10) (- (sqrt (+ x 1)) (sqrt x)))");
        let out = greedy_search(&p, &SamplePlan::new(2000, 1), &SearchParams::default(), &Deadline::none()).unwrap();
        assert_eq!(out.program.body, parse_expr("(/ 1 (+ (sqrt (+ x 1)) (sqrt x)))").unwrap());
        let scores: Vec<f64> = out
            .history
            .iter()
            .map(|c| match c.score {
                Score::Sampled(s) => s,
                _ => unreachable!(),
            })
            .collect();
        assert!(scores[0] >= 10.0 && *scores.last().unwrap() <= 1.0, "{scores:?}");
        assert!(scores.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn greedy_keeps_an_optimal_program() {
        let p = prog("(FPCore (x y) :pre (and (<= 1 x 2) (<= 1 y 2)) (+ x y))");
        assert_eq!(greedy_improve(&p, &SamplePlan::new(500, 1), &SearchParams::default()).unwrap(), p);
    }

    #[test]
    fn genetic_factors_a_common_term() {
        let p = prog("(FPCore (x y) :pre (and (<= 1 x 2) (<= 1 y 2)) (- (* x x) (* x y)))");
        let params = AnalysisParams::default();
        let out = genetic_search(&p, &params, &small(), &Deadline::none()).unwrap();
        let before = analyze_ia(&p, &params).unwrap().bound().cloned().unwrap();
        let factored = analyze_ia(&p.with_body(parse_expr("(* x (- x y))").unwrap()), &params).unwrap().bound().cloned().unwrap();
        assert!(factored < before);
        let got = out.outcome.bound().cloned().unwrap();
        assert!(got <= factored, "{} vs {}", out.program.body, factored);
        assert!(out.best_per_generation.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn genetic_is_deterministic_and_keeps_alarming_inputs() {
        let p = prog("(FPCore (x y) :pre (and (<= 1 x 2) (<= 1 y 2)) (+ (* x y) (* x x)))");
        let params = AnalysisParams::default();
        let a = genetic_improve(&p, &params, &small()).unwrap();
        let b = genetic_improve(&p, &params, &small()).unwrap();
        assert_eq!(a, b);
        let bad = prog("(FPCore (x) :pre (<= 0 x 2) (/ 1 (- x 1)))");
        let out = genetic_search(&bad, &params, &small(), &Deadline::none()).unwrap();
        assert_eq!(out.program, bad);
        assert_eq!(out.input_alarm, Some(AlarmKind::Div0));
    }

    #[test]
    fn invalid_params() {
        let mut s = SearchParams::default();
        s.genetic.elite = 0;
        let p = prog("(FPCore (x) :pre (<= 1 x 2) x)");
        assert!(matches!(genetic_improve(&p, &AnalysisParams::default(), &s), Err(RewriteError::InvalidParams(_))));
    }
}
