//! CSV renderings of fronts, trade-off tables and envelopes.
//!
//! * front: `id,<design names>,<use-case names>,<target names>`
//! * trade-off: `rank,id,<target names>,d(<t_b>)/d(<t_a>)...`
//! * envelope: `group,<sweep name>,lower,upper,best,worst,count`; empty cells
//!   where a grid value has no evaluation.

use std::fmt::Write as _;

use super::{Envelope, ParetoFront, TradeoffRow};
use crate::dove::csv_cell;
use crate::hyperspace::HyperSpace;
use crate::util::{fmt_f64, quote_csv};

fn header(cells: impl IntoIterator<Item = String>) -> String {
    cells
        .into_iter()
        .map(|c| if c.contains([',', '"', '\n']) { quote_csv(&c) } else { c })
        .collect::<Vec<_>>()
        .join(",")
}

/// Front CSV with the space's variable names. Fronts over configurations use
/// a single `label` column instead.
pub fn front_csv(front: &ParetoFront, space: Option<&HyperSpace>) -> String {
    let (design, use_case): (Vec<String>, Vec<String>) = match space {
        Some(s) => {
            (s.design.iter().map(|v| v.name.clone()).collect(), s.use_case.iter().map(|v| v.name.clone()).collect())
        }
        None => (vec!["label".to_owned()], Vec::new()),
    };
    let mut out =
        header(std::iter::once("id".to_owned()).chain(design).chain(use_case).chain(front.targets.iter().cloned()));
    out.push('\n');
    for m in &front.members {
        let mut cells = vec![m.id.to_string()];
        cells.extend(m.design.0.iter().chain(&m.use_case.0).map(csv_cell));
        cells.extend(m.targets.0.iter().map(|v| fmt_f64(*v)));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn tradeoff_csv(front: &ParetoFront, rows: &[TradeoffRow]) -> String {
    let first = &front.targets[0];
    let rates = front.targets[1..].iter().map(|b| format!("d({b})/d({first})"));
    let mut out =
        header(["rank".to_owned(), "id".to_owned()].into_iter().chain(front.targets.iter().cloned()).chain(rates));
    out.push('\n');
    for (rank, r) in rows.iter().enumerate() {
        let mut cells = vec![rank.to_string(), r.id.to_string()];
        cells.extend(r.targets.iter().map(|v| fmt_f64(*v)));
        if r.exchange_rates.is_empty() {
            cells.extend(std::iter::repeat_n(String::new(), front.targets.len() - 1));
        } else {
            cells.extend(r.exchange_rates.iter().map(|v| v.map(fmt_f64).unwrap_or_default()));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn envelope_csv(env: &Envelope) -> String {
    let mut out = header(
        ["group", env.sweep.as_str(), "lower", "upper", "best", "worst", "count"].into_iter().map(str::to_owned),
    );
    out.push('\n');
    let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for (g, label) in env.groups.iter().enumerate() {
        for (i, x) in env.grid.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                quote_csv(label),
                fmt_f64(*x),
                cell(env.lower[g][i]),
                cell(env.upper[g][i]),
                cell(env.best(g, i)),
                cell(env.worst(g, i)),
                env.count[g][i]
            );
        }
    }
    out
}
