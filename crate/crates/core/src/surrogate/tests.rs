use super::*;
use crate::benchmarks::branin;
use crate::dove::{plan_lhs, ExperimentPlan, PlanMethod, PlanParams, PlannedRun};
use crate::hyperspace::{Orientation, TargetIndicator, Variable};
use crate::runner::{evaluate_in_memory, SimFailure};

fn unit_space(dims: usize) -> HyperSpace {
    HyperSpace::new(
        (1..=dims).map(|i| Variable::continuous(&format!("d{i}"), 0.0, 1.0)).collect(),
        vec![],
        vec![TargetIndicator::new("t", Orientation::Minimize)],
    )
}

fn store_from<F>(space: &HyperSpace, plan: &ExperimentPlan, f: F) -> ResultStore
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    let sim = move |d: &DesignPoint, _: &UseCasePoint| -> Result<TargetVector, SimFailure> {
        let x: Vec<f64> = d.0.iter().map(|v| v.as_real().unwrap()).collect();
        Ok(TargetVector(vec![f(&x)]))
    };
    evaluate_in_memory(space, plan, &sim).unwrap()
}

fn explicit_plan(space: &HyperSpace, points: &[Vec<f64>]) -> ExperimentPlan {
    ExperimentPlan {
        space_hash: space.hash(),
        method: PlanMethod::Imported,
        seed: 0,
        params: PlanParams::default(),
        runs: points
            .iter()
            .enumerate()
            .map(|(i, p)| PlannedRun {
                run_id: i,
                design: DesignPoint(p.iter().map(|&v| Value::Real(v)).collect()),
                use_case: UseCasePoint::default(),
            })
            .collect(),
    }
}

fn at(model: &SurrogateModel, space: &HyperSpace, x: &[f64]) -> Prediction {
    let d = DesignPoint(x.iter().map(|&v| Value::Real(v)).collect());
    model.predict(space, &d, &UseCasePoint::default()).unwrap()
}

#[test]
fn linear_data_recovered_exactly() {
    let s = unit_space(1);
    let plan = plan_lhs(&s, 8, 3).unwrap();
    let store = store_from(&s, &plan, |x| 2.0 + 3.0 * x[0]);
    let m = fit_polynomial(&store, 1).unwrap();
    for x in [0.0f64, 0.37, 0.8, 1.0] {
        let p = at(&m, &s, &[x]);
        let want = 2.0 + 3.0 * x;
        assert!((p.targets.0[0] - want).abs() <= 1e-8 * want.abs());
    }
    assert!((m.segments[0].reports[0].r_squared - 1.0).abs() < 1e-12);
}

#[test]
fn constant_data_has_zero_loocv() {
    let s = unit_space(1);
    let plan = plan_lhs(&s, 10, 4).unwrap();
    let store = store_from(&s, &plan, |_| 5.0);
    let m = fit_polynomial(&store, 2).unwrap();
    let r = &m.segments[0].reports[0];
    assert!(r.loocv_rmse.unwrap() <= 1e-10);
    assert!((at(&m, &s, &[0.3]).targets.0[0] - 5.0).abs() < 1e-12);
}

/// Gaussian elimination with partial pivoting on the normal equations. Kept
/// deliberately separate from the QR route used by the library.
fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let m = rows[0].len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..m {
            for j in 0..m {
                a[i][j] += r[i] * r[j];
            }
            a[i][m] += r[i] * yi;
        }
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(row);
            for (x, p) in bottom[0][col..=m].iter_mut().zip(&top[col][col..=m]) {
                *x -= f * p;
            }
        }
    }
    let mut beta = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|j| a[i][j] * beta[j]).sum();
        beta[i] = (a[i][m] - s) / a[i][i];
    }
    beta
}

/// Full quartic basis in `(2u - 1, 2v - 1)`, built independently of the feature map.
fn quartic_row(u: f64, v: f64) -> Vec<f64> {
    let (a, b) = (2.0 * u - 1.0, 2.0 * v - 1.0);
    let mut row = Vec::new();
    for i in 0..=4 {
        for j in 0..=(4 - i) {
            row.push(a.powi(i) * b.powi(j));
        }
    }
    row
}

fn branin_store(n: usize, seed: u64) -> (HyperSpace, ResultStore) {
    let s = unit_space(2);
    let plan = plan_lhs(&s, n, seed).unwrap();
    let store = store_from(&s, &plan, |x| branin(x[0], x[1]));
    (s, store)
}

/// LOOCV RMSE of the quartic Branin fit, n = 40, LHS seed 1. Frozen from the
/// first run after agreement with the normal-equations oracle below.
const BRANIN_P4_LOOCV: f64 = 10.3639729595418;

#[test]
fn branin_quartic_matches_independent_least_squares() {
    let (s, store) = branin_store(40, 1);
    let m = fit_polynomial(&store, 4).unwrap();
    let rows = training_rows(&store);
    let pts: Vec<(f64, f64)> =
        rows.iter().map(|r| (r.design.0[0].as_real().unwrap(), r.design.0[1].as_real().unwrap())).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.targets[0]).collect();
    let x: Vec<Vec<f64>> = pts.iter().map(|&(u, v)| quartic_row(u, v)).collect();
    let beta = normal_equations(&x, &y);
    let range = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);
    for i in 0..=10 {
        for j in 0..=10 {
            let (u, v) = (i as f64 / 10.0, j as f64 / 10.0);
            let oracle: f64 = quartic_row(u, v).iter().zip(&beta).map(|(a, b)| a * b).sum();
            let got = at(&m, &s, &[u, v]).targets.0[0];
            assert!((got - oracle).abs() < 1e-7 * range, "({u},{v}): {got} vs {oracle}");
        }
    }
    // Explicit leave-one-out refits through the oracle.
    let mut press = 0.0;
    for i in 0..x.len() {
        let xs: Vec<Vec<f64>> = (0..x.len()).filter(|&k| k != i).map(|k| x[k].clone()).collect();
        let ys: Vec<f64> = (0..x.len()).filter(|&k| k != i).map(|k| y[k]).collect();
        let b = normal_equations(&xs, &ys);
        let pred: f64 = x[i].iter().zip(&b).map(|(a, c)| a * c).sum();
        press += (y[i] - pred).powi(2);
    }
    let oracle_loocv = (press / x.len() as f64).sqrt();
    let loocv = m.segments[0].reports[0].loocv_rmse.unwrap();
    assert!((loocv - oracle_loocv).abs() < 1e-6 * oracle_loocv, "{loocv} vs {oracle_loocv}");
    assert!((loocv - BRANIN_P4_LOOCV).abs() < 1e-9 * BRANIN_P4_LOOCV, "golden drifted: {loocv}");
}

#[test]
fn residuals_orthogonal_to_columns() {
    let (_, store) = branin_store(40, 7);
    let m = fit_polynomial(&store, 3).unwrap();
    let seg = &m.segments[0];
    let TargetFit::Polynomial { coefficients } = &seg.fits[0] else { panic!() };
    let rows = training_rows(&store);
    let xs: Vec<Vec<f64>> = rows.iter().map(|r| seg.features.polynomial_row(&r.values())).collect();
    let e: Vec<f64> = rows.iter().zip(&xs).map(|(r, x)| r.targets[0] - polynomial::dot(coefficients, x)).collect();
    let scale: f64 = e.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    for j in 0..coefficients.len() {
        let g: f64 = xs.iter().zip(&e).map(|(x, ei)| x[j] * ei).sum();
        assert!(g.abs() < 1e-8 * scale, "column {j}: {g}");
    }
}

#[test]
fn exact_family_gives_unit_r_squared() {
    for p in 1..=4u32 {
        let (s, _) = branin_store(2, 1);
        let plan = plan_lhs(&s, 40, 11).unwrap();
        let store = store_from(&s, &plan, move |x| {
            (0..=p as i32).map(|k| (k as f64 + 1.0) * x[0].powi(k) * x[1].powi(p as i32 - k)).sum::<f64>() - 0.5
        });
        let m = fit_polynomial(&store, p).unwrap();
        assert!((m.segments[0].reports[0].r_squared - 1.0).abs() < 1e-10, "p={p}");
    }
}

#[test]
fn intercept_at_scaled_origin() {
    let (s, store) = branin_store(30, 2);
    let m = fit_polynomial(&store, 2).unwrap();
    let TargetFit::Polynomial { coefficients } = &m.segments[0].fits[0] else { panic!() };
    assert_eq!(at(&m, &s, &[0.5, 0.5]).targets.0[0], coefficients[0]);
}

#[test]
fn extrapolation_flag_and_space_mismatch() {
    let s = unit_space(1);
    let plan = explicit_plan(&s, &[vec![0.2], vec![0.4], vec![0.6], vec![0.8]]);
    let store = store_from(&s, &plan, |x| x[0] * x[0]);
    let m = fit_polynomial(&store, 2).unwrap();
    assert!(!at(&m, &s, &[0.5]).extrapolated);
    let outside = at(&m, &s, &[0.95]);
    assert!(outside.extrapolated);
    assert!((outside.targets.0[0] - 0.9025).abs() < 1e-12);
    let other = unit_space(2);
    let d = DesignPoint(vec![Value::Real(0.5), Value::Real(0.5)]);
    assert!(matches!(m.predict(&other, &d, &UseCasePoint::default()), Err(PredictError::SpaceMismatch { .. })));
}

#[test]
fn sample_size_and_collinearity_errors() {
    let s = unit_space(2);
    let plan = plan_lhs(&s, 5, 1).unwrap();
    let store = store_from(&s, &plan, |x| x[0]);
    let err = fit_polynomial(&store, 2).unwrap_err().to_string();
    assert!(err.contains("6 ok records required") && err.contains("5 available"), "{err}");

    let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0, i as f64 / 7.0]).collect();
    let plan = explicit_plan(&s, &pts);
    let store = store_from(&s, &plan, |x| x[0]);
    let err = fit_polynomial(&store, 1).unwrap_err().to_string();
    assert!(err.contains("`d2` is collinear with `1`, `d1`") || err.contains("`d2` is collinear with `d1`"), "{err}");
}

fn sine_models() -> (HyperSpace, SurrogateModel, SurrogateModel) {
    let s = unit_space(1);
    let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
    let plan = explicit_plan(&s, &pts);
    let store = store_from(&s, &plan, |x| (2.0 * std::f64::consts::PI * x[0]).sin());
    let k = fit_kriging(&store, KrigingOptions { nugget: 1e-10, ..Default::default() }).unwrap();
    let p = fit_polynomial(&store, 2).unwrap();
    (s, k, p)
}

#[test]
fn kriging_interpolates_and_reports_variance() {
    let (s, k, _) = sine_models();
    for i in 0..8 {
        let x = i as f64 / 7.0;
        let p = at(&k, &s, &[x]);
        let want = (2.0 * std::f64::consts::PI * x).sin();
        assert!((p.targets.0[0] - want).abs() <= 1e-6 * 2.0);
        assert!(p.variance.as_ref().unwrap()[0] <= 1e-8);
    }
    // Midpoint between training inputs is the point farthest from the data.
    let v_far = at(&k, &s, &[1.0 / 14.0]).variance.unwrap()[0];
    let v_train = at(&k, &s, &[0.0]).variance.unwrap()[0];
    assert!(v_far > v_train);
    let r = &k.segments[0].reports[0];
    assert!(r.p_value.is_none() && r.f_statistic.is_none());
    assert!(r.loocv_rmse.unwrap() >= 0.0);
}

#[test]
fn kriging_beats_quadratic_on_sine() {
    let (s, k, p) = sine_models();
    let worst = |m: &SurrogateModel| {
        (0..100)
            .map(|i| {
                let x = (i as f64 + 0.5) / 100.0;
                (at(m, &s, &[x]).targets.0[0] - (2.0 * std::f64::consts::PI * x).sin()).abs()
            })
            .fold(0.0, f64::max)
    };
    assert!(worst(&k) < worst(&p), "{} vs {}", worst(&k), worst(&p));
}

#[test]
fn json_round_trip_is_bit_exact() {
    let (s, k, p) = sine_models();
    for m in [k, p] {
        let back = SurrogateModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        for i in 0..50 {
            let x = [i as f64 / 49.0];
            let a = at(&m, &s, &x);
            let b = at(&back, &s, &x);
            assert_eq!(a.targets.0[0].to_bits(), b.targets.0[0].to_bits());
        }
    }
}

#[test]
fn cross_validation_properties() {
    let s = unit_space(2);
    let plan = plan_lhs(&s, 12, 5).unwrap();
    let store = store_from(&s, &plan, |x| 1.0 - 2.0 * x[0] + 0.5 * x[1]);
    let spec = ModelSpec::polynomial(1);
    let a = cross_validate(&store, &spec, 4, 1).unwrap();
    let b = cross_validate(&store, &spec, 4, 99).unwrap();
    assert!(a.rmse[0] < 1e-8 && b.rmse[0] < 1e-8);

    let (_, store) = branin_store(20, 3);
    let spec = ModelSpec::polynomial(2);
    let cv = cross_validate(&store, &spec, 20, 8).unwrap();
    let m = fit(&store, &spec).unwrap();
    let analytic = m.segments[0].reports[0].loocv_rmse.unwrap();
    assert!((cv.rmse[0] - analytic).abs() < 1e-8 * analytic.max(1.0));
    assert!(cross_validate(&store, &spec, 1, 0).is_err());
    assert!(cross_validate(&store, &spec, 21, 0).is_err());
}

#[test]
fn loocv_improves_with_more_samples() {
    let loocv = |n: usize| {
        let (_, store) = branin_store(n, 21);
        fit_kriging(&store, KrigingOptions::default()).unwrap().loocv_rmse()[0].unwrap()
    };
    let (small, large) = (loocv(16), loocv(64));
    assert!(large < small, "{large} >= {small}");
}

#[test]
fn predictions_are_deterministic() {
    let (_, store) = branin_store(24, 4);
    let a = fit_kriging(&store, KrigingOptions::default()).unwrap();
    let b = fit_kriging(&store, KrigingOptions::default()).unwrap();
    assert_eq!(a, b);
}

fn categorical_space() -> HyperSpace {
    HyperSpace::new(
        vec![
            Variable::continuous("x", 0.0, 1.0),
            Variable::categorical("alt", &["A1", "A2"]),
            Variable::continuous("g2", 1.0, 2.0).active_when("alt", "A2"),
        ],
        vec![],
        vec![TargetIndicator::new("t", Orientation::Minimize)],
    )
}

#[test]
fn per_category_and_joint_fits() {
    let s = categorical_space();
    let plan = plan_lhs(&s, 40, 9).unwrap();
    let sim = |d: &DesignPoint, _: &UseCasePoint| -> Result<TargetVector, SimFailure> {
        let x = d.0[0].as_real().unwrap();
        let t = match d.0[1].as_label().unwrap() {
            "A1" => 1.0 + x,
            _ => 3.0 - x + d.0[2].as_real().unwrap(),
        };
        Ok(TargetVector(vec![t]))
    };
    let store = evaluate_in_memory(&s, &plan, &sim).unwrap();
    let per = fit_polynomial(&store, 1).unwrap();
    assert_eq!(per.segments.len(), 2);
    assert_eq!(per.segments[0].features.numeric.len(), 1);
    assert_eq!(per.segments[1].features.numeric.len(), 2);
    let joint = fit(&store, &ModelSpec::polynomial(2).joint()).unwrap();
    assert_eq!(joint.segments.len(), 1);
    for m in [&per, &joint] {
        let d = DesignPoint(vec![Value::Real(0.25), "A2".into(), Value::Real(1.5)]);
        let p = m.predict(&s, &d, &UseCasePoint::default()).unwrap();
        assert!((p.targets.0[0] - 4.25).abs() < 1e-9, "{:?}", p.targets);
        let d = DesignPoint(vec![Value::Real(0.25), "A1".into(), Value::Real(1.0)]);
        let p = m.predict(&s, &d, &UseCasePoint::default()).unwrap();
        assert!((p.targets.0[0] - 1.25).abs() < 1e-9);
    }
}
