//! Dominance and non-dominated filtering on cost vectors (every coordinate minimized).

use std::cmp::Ordering;

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates_cost(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Indices of the non-dominated rows of `costs`, ascending.
///
/// Rows with equal cost vectors are mutually non-dominated and all kept,
/// except exact repeats (equal `keys` as well), of which only the lowest index
/// survives.
pub fn front_indices<K: PartialEq>(costs: &[Vec<f64>], keys: &[K]) -> Vec<usize> {
    assert_eq!(costs.len(), keys.len());
    if costs.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&i, &j| lex(&costs[i], &costs[j]).then(i.cmp(&j)));
    // Runs of equal cost vectors in sorted order.
    let mut groups: Vec<&[usize]> = Vec::new();
    let mut start = 0;
    for p in 1..=order.len() {
        if p == order.len() || lex(&costs[order[p]], &costs[order[start]]).is_ne() {
            groups.push(&order[start..p]);
            start = p;
        }
    }
    let k = costs[0].len();
    let mut kept_groups: Vec<&[usize]> = Vec::new();
    if k == 2 {
        // Lexicographic order: a group survives iff its second cost beats every
        // earlier survivor's.
        let mut best = f64::INFINITY;
        for g in groups {
            let c = costs[g[0]][1];
            if c < best {
                best = c;
                kept_groups.push(g);
            }
        }
    } else {
        // Any dominator precedes its victim lexicographically.
        let mut front: Vec<&[f64]> = Vec::new();
        for g in groups {
            let c = &costs[g[0]];
            if !front.iter().any(|f| dominates_cost(f, c)) {
                front.push(c);
                kept_groups.push(g);
            }
        }
    }
    let mut out = Vec::new();
    for g in kept_groups {
        let mut reps: Vec<usize> = Vec::new();
        for &i in g {
            if !reps.iter().any(|&r| keys[r] == keys[i]) {
                reps.push(i);
            }
        }
        out.extend(reps);
    }
    out.sort_unstable();
    out
}
