//! Property tests over random straight-line programs and the fixture corpus.

use std::collections::BTreeMap;
use std::path::PathBuf;

use proptest::prelude::*;

use fpv_core::analysis::{analyze_ia, analyze_portfolio, analyze_subdiv, AnalysisOutcome, AnalysisParams, Mode};
use fpv_core::deadline::Deadline;
use fpv_core::dynamic::SamplePlan;
use fpv_core::fpcore::{emit_fpcore, parse_fpcore, BinaryOp, Expr, FpCoreProgram};
use fpv_core::numeric::{eval_real, Rational};
use fpv_core::pipeline::{run_pipeline, RunConfig};
use fpv_core::rewrite::{genetic_search, greedy_search, neighbors, rules_db, GuardMode, SearchParams};

const PRE: &str = "(and (<= 1 x 2) (<= -1 y 3))";

fn body() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![Just("x".to_string()), Just("y".to_string()), Just("0.1".to_string()), Just("3".to_string())];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("(+ {a} {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("(- {a} {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("(* {a} {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("(/ {a} {b})")),
            inner.clone().prop_map(|a| format!("(sqrt {a})")),
            inner.prop_map(|a| format!("(exp (- {a}))")),
        ]
    })
}

fn program(b: &str) -> FpCoreProgram {
    parse_fpcore(&format!("(FPCore (x y) :pre {PRE} {b})")).unwrap().remove(0)
}

fn fixtures() -> Vec<FpCoreProgram> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks");
    let mut files: Vec<PathBuf> =
        std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "fpcore")).collect();
    files.sort();
    files.iter().flat_map(|f| parse_fpcore(&std::fs::read_to_string(f).unwrap()).unwrap()).collect()
}

fn midpoint_env(p: &FpCoreProgram) -> BTreeMap<String, Rational> {
    let two = Rational::from_integer(2.into());
    p.precondition.as_ref().unwrap().ranges().iter().map(|(v, r)| (v.clone(), (r.lo() + r.hi()) / &two)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn doubling_unit_roundoff_never_tightens(b in body()) {
        let p = program(&b);
        let base = AnalysisParams::default();
        let mut coarse = base.clone();
        coarse.unit_roundoff = &base.unit_roundoff * Rational::from_integer(2.into());
        let fine = analyze_ia(&p, &base).unwrap();
        let rough = analyze_ia(&p, &coarse).unwrap();
        prop_assert_eq!(fine.alarm(), rough.alarm());
        if let (Some(f), Some(r)) = (fine.bound(), rough.bound()) {
            prop_assert!(f <= r);
        }
    }

    #[test]
    fn subdivision_refines_and_portfolio_is_the_minimum(b in body()) {
        let p = program(&b);
        let params = AnalysisParams { subdiv_per_var: 4, max_boxes: 64, ..AnalysisParams::default() };
        let ia = analyze_ia(&p, &params).unwrap();
        let sd = analyze_subdiv(&p, &params).unwrap();
        let pf = analyze_portfolio(&p, &params, &Mode::ALL).unwrap();
        if let (Some(a), Some(s)) = (ia.bound(), sd.bound()) {
            prop_assert!(s <= a);
            prop_assert_eq!(pf.bound(), Some(std::cmp::min(a, s)));
        }
    }

    #[test]
    fn alarms_point_at_partial_operations(b in body()) {
        let p = program(&b);
        if let AnalysisOutcome::Alarm { path, .. } = analyze_ia(&p, &AnalysisParams::default()).unwrap() {
            let node = p.body.at(&path).expect("alarm path indexes the body");
            let partial = matches!(
                node,
                Expr::Binary(BinaryOp::Div | BinaryOp::Pow, _, _) | Expr::Unary(_, _) | Expr::If(..)
            );
            prop_assert!(partial, "{} at {:?}", node, path);
        }
    }

    #[test]
    fn guarded_neighbors_keep_variables_and_value(b in body()) {
        let p = program(&b);
        let pre = p.precondition.clone().unwrap();
        let env = midpoint_env(&p);
        let before = eval_real(&p.body, &env, 80);
        let vars = p.body.free_vars();
        for n in neighbors(&p.body, &rules_db(), GuardMode::Guarded, &pre, 200) {
            prop_assert!(n.free_vars().iter().all(|v| vars.contains(v)), "{}", n);
            if let (Ok(l), Ok(r)) = (&before, eval_real(&n, &env, 80)) {
                if l.conclusive && r.conclusive {
                    let (a, c) = (&l.enclosure, &r.enclosure);
                    prop_assert!(a.hi() >= c.lo() && c.hi() >= a.lo(), "{} vs {}", p.body, n);
                }
            }
        }
    }

    #[test]
    fn emitted_programs_parse_back(b in body()) {
        let p = program(&b);
        let again = parse_fpcore(&emit_fpcore(&p)).unwrap().remove(0);
        prop_assert_eq!(again.body, p.body);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn searches_are_monotone_and_deterministic(seed in 0u64..1000) {
        let fixtures = fixtures();
        let p = fixtures.iter().find(|p| p.name == "doppler1").unwrap();
        let mut search = SearchParams::default();
        search.genetic.population = 6;
        search.genetic.generations = 4;
        search.genetic.seed = seed;
        let params = AnalysisParams::default();
        let g = genetic_search(p, &params, &search, &Deadline::none()).unwrap();
        prop_assert!(g.best_per_generation.windows(2).all(|w| w[1] <= w[0]));
        let again = genetic_search(p, &params, &search, &Deadline::none()).unwrap();
        prop_assert_eq!(&g.program.body, &again.program.body);

        let plan = SamplePlan::new(512, seed);
        let h = greedy_search(p, &plan, &search, &Deadline::none()).unwrap();
        let scores: Vec<f64> = h.history.iter().map(|c| match c.score {
            fpv_core::rewrite::Score::Sampled(s) => s,
            _ => unreachable!("greedy scores by sampling"),
        }).collect();
        prop_assert!(scores.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(h.program.body, greedy_search(p, &plan, &search, &Deadline::none()).unwrap().program.body);
    }

    #[test]
    fn rows_report_the_minimum_of_their_outcomes(b in body()) {
        let mut config = RunConfig::default();
        config.samples = 256;
        let row = run_pipeline(&program(&b), &config);
        for (best, map) in [(&row.best_src, &row.bounds_src), (&row.best_res, &row.bounds_res)] {
            let min = map.values().filter_map(AnalysisOutcome::bound).min();
            prop_assert_eq!(best.as_ref().map(|e| &e.abs_err), min);
        }
        prop_assert_eq!(row.improvement_ratio.is_some(), row.best_src.is_some() && row.best_res.is_some());
    }
}

#[test]
fn fixtures_round_trip() {
    for p in fixtures() {
        let again = parse_fpcore(&emit_fpcore(&p)).unwrap().remove(0);
        assert_eq!(again, p, "{}", p.name);
    }
}
