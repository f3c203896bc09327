use super::oracle::brute_force_front;
use super::*;
use crate::dove::{plan_full_factorial, ExperimentPlan, PlanMethod, PlanParams, PlannedRun};
use crate::hyperspace::TargetIndicator;
use crate::runner::{evaluate_in_memory, SimFailure};
use crate::surrogate::{fit, fit_polynomial, ModelSpec};

fn tv(v: &[f64]) -> TargetVector {
    TargetVector(v.to_vec())
}

const MIN2: [Orientation; 2] = [Orientation::Minimize, Orientation::Minimize];

#[test]
fn dominance_examples() {
    assert!(dominates(&tv(&[1.0, 1.0]), &tv(&[2.0, 2.0]), &MIN2).unwrap());
    assert!(!dominates(&tv(&[1.0, 2.0]), &tv(&[2.0, 1.0]), &MIN2).unwrap());
    assert!(!dominates(&tv(&[2.0, 1.0]), &tv(&[1.0, 2.0]), &MIN2).unwrap());
    assert!(!dominates(&tv(&[1.0, 2.0]), &tv(&[1.0, 2.0]), &MIN2).unwrap());
    let mixed = [Orientation::Minimize, Orientation::Maximize];
    assert!(dominates(&tv(&[1.0, 5.0]), &tv(&[1.0, 4.0]), &mixed).unwrap());
    assert!(matches!(
        dominates(&tv(&[1.0]), &tv(&[1.0, 2.0]), &MIN2),
        Err(AnalysisError::Arity { expected: 2, found: 1 })
    ));
}

fn two_target_space(orient_b: Orientation) -> HyperSpace {
    HyperSpace::new(
        vec![Variable::continuous("a", 0.0, 10.0), Variable::continuous("b", -10.0, 10.0)],
        vec![Variable::categorical("road", &["urban", "highway"])],
        vec![TargetIndicator::new("a", Orientation::Minimize), TargetIndicator::new("b", orient_b)],
    )
}

fn explicit_plan(space: &HyperSpace, rows: &[(f64, f64, &str)]) -> ExperimentPlan {
    ExperimentPlan {
        space_hash: space.hash(),
        method: PlanMethod::Imported,
        seed: 0,
        params: PlanParams::default(),
        runs: rows
            .iter()
            .enumerate()
            .map(|(i, &(a, b, road))| PlannedRun {
                run_id: i,
                design: DesignPoint(vec![Value::Real(a), Value::Real(b)]),
                use_case: UseCasePoint(vec![road.into()]),
            })
            .collect(),
    }
}

fn echo_store(space: &HyperSpace, rows: &[(f64, f64, &str)]) -> ResultStore {
    let plan = explicit_plan(space, rows);
    evaluate_in_memory(space, &plan, &crate::runner::EchoSimulator::new(space)).unwrap()
}

fn member_ids(f: &ParetoFront) -> Vec<usize> {
    f.members.iter().map(|m| m.id).collect()
}

#[test]
fn observed_front_examples() {
    let s = two_target_space(Orientation::Minimize);
    let rows = [(1.0, 3.0, "urban"), (2.0, 2.0, "urban"), (3.0, 1.0, "urban"), (2.0, 3.0, "urban")];
    let f = pareto_front_observed(&echo_store(&s, &rows), &Selection::all(), None).unwrap();
    assert_eq!(member_ids(&f), vec![0, 1, 2]);
    assert!(f.use_case.is_none());

    let f = pareto_front_observed(&echo_store(&s, &rows[..1]), &Selection::all(), None).unwrap();
    assert_eq!(member_ids(&f), vec![0]);

    let dup = [(2.0, 2.0, "urban"), (1.0, 1.0, "urban"), (1.0, 1.0, "urban")];
    let f = pareto_front_observed(&echo_store(&s, &dup), &Selection::all(), None).unwrap();
    assert_eq!(member_ids(&f), vec![1]);
}

#[test]
fn selection_filters_use_cases() {
    let s = two_target_space(Orientation::Minimize);
    let rows = [(1.0, 3.0, "urban"), (0.5, 0.5, "highway"), (3.0, 1.0, "urban")];
    let store = echo_store(&s, &rows);
    let urban = Selection::all().with("road", "urban");
    assert_eq!(member_ids(&pareto_front_observed(&store, &urban, None).unwrap()), vec![0, 2]);
    assert_eq!(member_ids(&pareto_front_observed(&store, &Selection::all(), None).unwrap()), vec![1]);
    let near = Selection::all().with("a", 1.0 + 5e-9);
    assert_eq!(member_ids(&pareto_front_observed(&store, &near, None).unwrap()), vec![0]);
    let far = Selection::all().with("a", 1.1);
    assert!(matches!(pareto_front_observed(&store, &far, None), Err(AnalysisError::EmptySelection)));
    let unknown = Selection::all().with("zz", 1.0);
    assert!(matches!(pareto_front_observed(&store, &unknown, None), Err(AnalysisError::UnknownVariable(_))));
    let only_a = ["a".to_owned()];
    let f = pareto_front_observed(&store, &urban, Some(&only_a)).unwrap();
    assert_eq!(member_ids(&f), vec![0]);
    assert_eq!(f.members[0].targets.0, vec![1.0]);
}

#[test]
fn flipping_orientation_and_negating_preserves_membership() {
    let rows: Vec<(f64, f64, &str)> = (0..40)
        .map(|i| {
            let a = (i * 7 % 11) as f64 * 0.9;
            let b = ((i * 13) % 17) as f64 - 8.0;
            (a, b, "urban")
        })
        .collect();
    let s = two_target_space(Orientation::Minimize);
    let f1 = pareto_front_observed(&echo_store(&s, &rows), &Selection::all(), None).unwrap();
    let flipped = two_target_space(Orientation::Maximize);
    let negated: Vec<(f64, f64, &str)> = rows.iter().map(|&(a, b, r)| (a, -b, r)).collect();
    let f2 = pareto_front_observed(&echo_store(&flipped, &negated), &Selection::all(), None).unwrap();
    assert_eq!(member_ids(&f1), member_ids(&f2));
}

fn unit_space(names: &[&str], targets: &[&str]) -> HyperSpace {
    HyperSpace::new(
        names.iter().map(|n| Variable::continuous(n, 0.0, 1.0)).collect(),
        vec![],
        targets.iter().map(|t| TargetIndicator::new(t, Orientation::Minimize)).collect(),
    )
}

fn store_of<F>(space: &HyperSpace, plan: &ExperimentPlan, f: F) -> ResultStore
where
    F: Fn(&[Value]) -> Vec<f64> + Send + Sync,
{
    let sim = move |d: &DesignPoint, u: &UseCasePoint| -> Result<TargetVector, SimFailure> {
        let all: Vec<Value> = d.0.iter().chain(&u.0).cloned().collect();
        Ok(TargetVector(f(&all)))
    };
    evaluate_in_memory(space, plan, &sim).unwrap()
}

#[test]
fn surrogate_front_of_monotone_model_is_favourable_bound() {
    let s = unit_space(&["x"], &["t"]);
    let plan = plan_full_factorial(&s, 6, 100).unwrap();
    let store = store_of(&s, &plan, |v| vec![v[0].as_real().unwrap()]);
    let m = fit_polynomial(&store, 1).unwrap();
    let f = pareto_front_surrogate(&m, &s, &UseCasePoint::default(), &DesignGrid::default(), None).unwrap();
    assert_eq!(f.members.len(), 1);
    assert_eq!(f.members[0].design.0[0], Value::Real(0.0));
    assert_eq!(f.evaluated, 21);
}

#[test]
fn single_target_front_keeps_all_ties() {
    let s = HyperSpace::new(
        vec![Variable::continuous("x", 0.0, 1.0), Variable::categorical("c", &["p", "q"])],
        vec![],
        vec![TargetIndicator::new("t", Orientation::Minimize)],
    );
    let plan = plan_full_factorial(&s, 5, 100).unwrap();
    let store = store_of(&s, &plan, |v| vec![1.0 + v[0].as_real().unwrap()]);
    let m = fit_polynomial(&store, 1).unwrap();
    let f = pareto_front_surrogate(&m, &s, &UseCasePoint::default(), &DesignGrid::default(), None).unwrap();
    let labels: Vec<&Value> = f.members.iter().map(|m| &m.design.0[1]).collect();
    assert_eq!(labels, vec![&Value::from("p"), &Value::from("q")]);
    assert!(f.members.iter().all(|m| m.design.0[0] == Value::Real(0.0)));
}

#[test]
fn surrogate_front_on_thousand_point_grid_matches_oracle() {
    let s = unit_space(&["x", "y", "z"], &["t1", "t2"]);
    let plan = plan_full_factorial(&s, 4, 1000).unwrap();
    let store = store_of(&s, &plan, |v| {
        let (x, y, z) = (v[0].as_real().unwrap(), v[1].as_real().unwrap(), v[2].as_real().unwrap());
        vec![x + 0.5 * y * z, (1.0 - x).powi(2) + (y - 0.3).powi(2) + 0.2 * z]
    });
    let m = fit_polynomial(&store, 2).unwrap();
    let grid = DesignGrid { levels: 10, ..DesignGrid::default() };
    let u = UseCasePoint::default();
    let f = pareto_front_surrogate(&m, &s, &u, &grid, None).unwrap();
    assert_eq!(f.evaluated, 1000);
    let points = design_grid(&s, Some(&m), &grid, &u).unwrap();
    let preds: Vec<Vec<f64>> = points.iter().map(|d| m.predict(&s, d, &u).unwrap().targets.0).collect();
    let keys: Vec<usize> = (0..preds.len()).collect();
    assert_eq!(member_ids(&f), brute_force_front(&preds, &keys));
    let tight = DesignGrid { levels: 10, cap: 999, ..DesignGrid::default() };
    assert!(matches!(
        pareto_front_surrogate(&m, &s, &u, &tight, None),
        Err(AnalysisError::GridTooLarge { size: 1000, cap: 999 })
    ));
}

#[test]
fn tradeoff_table_examples() {
    let s = two_target_space(Orientation::Minimize);
    let rows = [(3.0, 1.0, "urban"), (1.0, 3.0, "urban"), (2.0, 2.0, "urban")];
    let f = pareto_front_observed(&echo_store(&s, &rows), &Selection::all(), None).unwrap();
    let t = tradeoff_table(&f);
    let a: Vec<f64> = t.iter().map(|r| r.targets[0]).collect();
    let b: Vec<f64> = t.iter().map(|r| r.targets[1]).collect();
    assert!(a.windows(2).all(|w| w[0] < w[1]));
    assert!(b.windows(2).all(|w| w[0] > w[1]));
    assert!(t[0].exchange_rates.is_empty());
    assert_eq!(t[1].exchange_rates, vec![Some(-1.0)]);
    assert_eq!(t[2].exchange_rates, vec![Some(-1.0)]);
    let single = pareto_front_observed(&echo_store(&s, &rows[..1]), &Selection::all(), None).unwrap();
    assert!(tradeoff_table(&single)[0].exchange_rates.is_empty());
    let csv = export::tradeoff_csv(&f, &t);
    assert_eq!(csv.lines().next().unwrap(), "rank,id,a,b,d(b)/d(a)");
    assert_eq!(csv.lines().nth(1).unwrap(), "0,1,1,3,");
}

fn toy_space() -> HyperSpace {
    HyperSpace::new(
        vec![Variable::discrete("y", &[1.0, 2.0, 4.0]), Variable::categorical("c", &["A", "B"])],
        vec![Variable::continuous("x", 0.0, 2.0)],
        vec![TargetIndicator::new("t", Orientation::Minimize)],
    )
}

fn toy_target(y: f64, c: &str, x: f64) -> f64 {
    let base = x * x - y * x + 0.5 * y;
    if c == "B" {
        base + 1.0
    } else {
        base
    }
}

fn toy_values(v: &[Value]) -> Vec<f64> {
    vec![toy_target(v[0].as_real().unwrap(), v[1].as_label().unwrap(), v[2].as_real().unwrap())]
}

#[test]
fn store_envelope_equals_exhaustive_enumeration() {
    let s = toy_space();
    let plan = plan_full_factorial(&s, 5, 1000).unwrap();
    let store = store_of(&s, &plan, toy_values);
    let grid = [0.0, 0.5, 1.0, 1.5, 2.0];
    let env = potential_envelope(EnvelopeSource::Store(&store), "x", &grid, "t", Some("c"), 0, 0).unwrap();
    for (g, c) in ["A", "B"].iter().enumerate() {
        for (i, &x) in grid.iter().enumerate() {
            let vals: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|&y| toy_target(y, c, x)).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(env.lower[g][i], Some(lo));
            assert_eq!(env.upper[g][i], Some(hi));
            assert_eq!(env.count[g][i], 3);
            assert!(env.best(g, i) <= env.worst(g, i));
        }
    }
    let csv = export::envelope_csv(&env);
    assert_eq!(csv.lines().next().unwrap(), "group,x,lower,upper,best,worst,count");
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn model_envelope_shift_and_constancy() {
    let s = toy_space();
    let plan = plan_full_factorial(&s, 7, 1000).unwrap();
    let store = store_of(&s, &plan, toy_values);
    let m = fit(&store, &ModelSpec::polynomial(2)).unwrap();
    let grid = [0.0, 0.4, 1.3, 2.0];
    let src = || EnvelopeSource::Model { model: &m, space: &s };
    let env = potential_envelope(src(), "x", &grid, "t", Some("c"), 64, 3).unwrap();
    assert_eq!(env.samples, 64);
    for i in 0..grid.len() {
        let (la, lb) = (env.lower[0][i].unwrap(), env.lower[1][i].unwrap());
        let (ua, ub) = (env.upper[0][i].unwrap(), env.upper[1][i].unwrap());
        assert!((lb - la - 1.0).abs() < 1e-9 && (ub - ua - 1.0).abs() < 1e-9);
        assert!(la <= ua);
    }
    let again = potential_envelope(src(), "x", &grid, "t", Some("c"), 64, 3).unwrap();
    assert_eq!(env, again);

    // Target independent of the sweep variable: flat bands.
    let flat_store = store_of(&s, &plan, |v| vec![v[0].as_real().unwrap()]);
    let fm = fit(&flat_store, &ModelSpec::polynomial(1)).unwrap();
    let env =
        potential_envelope(EnvelopeSource::Model { model: &fm, space: &s }, "x", &grid, "t", None, 32, 1).unwrap();
    for i in 1..grid.len() {
        assert!((env.lower[0][i].unwrap() - env.lower[0][0].unwrap()).abs() < 1e-9);
        assert!((env.upper[0][i].unwrap() - env.upper[0][0].unwrap()).abs() < 1e-9);
    }
    assert!(env.upper[0][0].unwrap() - env.lower[0][0].unwrap() > 1.0);

    // No residual inputs: best equals worst.
    let lone = unit_space(&["x"], &["t"]);
    let lone_plan = plan_full_factorial(&lone, 5, 100).unwrap();
    let lone_store = store_of(&lone, &lone_plan, |_| vec![2.0]);
    let lm = fit_polynomial(&lone_store, 1).unwrap();
    let env =
        potential_envelope(EnvelopeSource::Model { model: &lm, space: &lone }, "x", &[0.0, 1.0], "t", None, 16, 0)
            .unwrap();
    assert_eq!(env.best(0, 0), env.worst(0, 0));
    assert!(matches!(
        potential_envelope(EnvelopeSource::Store(&store), "nope", &grid, "t", None, 0, 0),
        Err(AnalysisError::UnknownVariable(_))
    ));
    assert!(matches!(
        potential_envelope(EnvelopeSource::Store(&store), "x", &grid, "nope", None, 0, 0),
        Err(AnalysisError::UnknownTarget(_))
    ));
}

#[test]
fn front_csv_layout() {
    let s = two_target_space(Orientation::Minimize);
    let rows = [(1.0, 3.0, "urban"), (2.0, 2.0, "highway")];
    let f = pareto_front_observed(&echo_store(&s, &rows), &Selection::all(), None).unwrap();
    let csv = export::front_csv(&f, Some(&s));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "id,a,b,road,a,b");
    assert_eq!(lines[1], "0,1,3,\"urban\",1,3");
    let svg = plot::fronts_svg("t", &[(1.0, 3.0), (2.0, 2.0)], &[("all".into(), &f)]);
    assert!(svg.contains("<polyline"));
}
