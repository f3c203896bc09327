//! Quadratic reference filter, kept simple on purpose so faster front
//! algorithms can be checked against it.

/// Indices `i` such that no row dominates row `i` and no lower index repeats
/// row `i` exactly (same cost vector and key).
pub fn brute_force_front<K: PartialEq>(costs: &[Vec<f64>], keys: &[K]) -> Vec<usize> {
    let n = costs.len();
    (0..n)
        .filter(|&i| {
            (0..n).all(|j| {
                let dominated = costs[j].iter().zip(&costs[i]).all(|(a, b)| a <= b)
                    && costs[j].iter().zip(&costs[i]).any(|(a, b)| a < b);
                let earlier_repeat = j < i && costs[j] == costs[i] && keys[j] == keys[i];
                !dominated && !earlier_repeat
            })
        })
        .collect()
}
