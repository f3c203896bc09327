//! Plan, simulate, fit and compare the two FEV drivetrain topologies.
//!
//! cargo run --release -p hse-core --example fev_study

use hse_core::analysis::{pareto_front_observed, Selection};
use hse_core::dove::plan_maximin_lhs;
use hse_core::exemplars::{fev_space, FevSimulator};
use hse_core::runner::evaluate_in_memory;
use hse_core::surrogate::fit_polynomial;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = fev_space();
    let plan = plan_maximin_lhs(&space, 128, 7, 20)?;
    let store = evaluate_in_memory(&space, &plan, &FevSimulator::default())?;

    let model = fit_polynomial(&store, 2)?;
    println!("worst LOOCV RMSE / range: {:?}", model.accuracy_fraction());

    for topology in ["A1", "A2"] {
        let front = pareto_front_observed(&store, &Selection::all().with("topology", topology), None)?;
        println!("{topology}: {} of {} runs on the front", front.members.len(), front.evaluated);
        for m in &front.members {
            println!("  run {:3}  t_a50 {:.3} s  E_c {:.3} kWh/100km", m.id, m.targets.0[0], m.targets.0[1]);
        }
    }
    Ok(())
}
