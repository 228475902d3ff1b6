use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::rng::{keyed, Stream};

/// `per_round` distinct ids out of `0..total`, uniform without replacement,
/// sorted ascending. The draw depends only on `(seed, round)`.
pub fn sample_clients(round: usize, total: usize, per_round: usize, seed: u64) -> Result<Vec<usize>> {
    if per_round == 0 || per_round > total {
        return Err(Error::Argument(format!(
            "cannot sample {per_round} of {total} clients"
        )));
    }
    let mut rng = keyed(Stream::ClientSampling, &[seed, round as u64]);
    let mut ids = sample(&mut rng, total, per_round).into_vec();
    ids.sort_unstable();
    Ok(ids)
}
