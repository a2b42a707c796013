use serde::{Deserialize, Serialize};

/// Free-parameter count of a model against the number of distinct
/// univariate and bivariate margin probabilities the data can pin down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterCount {
    pub count: usize,
    pub bound: usize,
    pub identifiable: bool,
}

/// Count the parameters of a `(G, Q)` model over variables with `categories`.
///
/// Panics if `Q` is outside `1..=P` or a category count is below 3.
pub fn count_parameters(
    n_vars: usize,
    n_signal: usize,
    n_components: usize,
    categories: &[usize],
) -> ParameterCount {
    let (p, q, g) = (n_vars, n_signal, n_components);
    assert!(q >= 1 && q <= p, "Q must lie in 1..=P");
    assert!(g >= 1, "G must be positive");
    assert_eq!(categories.len(), p, "one category count per variable");
    assert!(
        categories.iter().all(|&c| c >= 3),
        "categories must be >= 3"
    );
    let noise = p - q;
    let count = (g - 1)
        + (q * (q + 1) / 2 + q * noise)
        + (g - 1) * q * (q + 1) / 2
        + (noise * (noise + 1) / 2 + q * noise)
        + g * q
        + noise
        + (categories.iter().sum::<usize>() - 3 * p);
    let free: Vec<usize> = categories.iter().map(|c| c - 1).collect();
    let mut bound: usize = free.iter().sum();
    for i in 0..p {
        for j in i + 1..p {
            bound += free[i] * free[j];
        }
    }
    ParameterCount {
        count,
        bound,
        identifiable: count <= bound,
    }
}
