use super::store::euclidean;
use super::transport::{lookup, solve_transport};
use super::{EmbeddingError, EmbeddingStore, NBowDoc};

/// Word mover's distance: cost of the optimal transport plan between the two
/// bags of words under euclidean ground distance.
pub fn wmd(a: &NBowDoc, b: &NBowDoc, store: &EmbeddingStore) -> Result<f64, EmbeddingError> {
    Ok(solve_transport(a, b, store)?.cost)
}

/// Relaxed lower bound on [`wmd`]: drop one marginal constraint so every
/// word ships all its mass to its nearest counterpart, in both directions,
/// and keep the larger of the two sums.
pub fn wmd_lower_bound(
    a: &NBowDoc,
    b: &NBowDoc,
    store: &EmbeddingStore,
) -> Result<f64, EmbeddingError> {
    let xs = lookup(a, store)?;
    let ys = lookup(b, store)?;
    let one_sided = |from: &[&[f64]], weights: &[f64], to: &[&[f64]]| -> f64 {
        from.iter()
            .zip(weights)
            .map(|(x, w)| {
                let nearest = to.iter().map(|y| euclidean(x, y)).fold(f64::INFINITY, f64::min);
                w * nearest
            })
            .sum()
    };
    let forward = one_sided(&xs, a.weights(), &ys);
    let backward = one_sided(&ys, b.weights(), &xs);
    Ok(forward.max(backward))
}
