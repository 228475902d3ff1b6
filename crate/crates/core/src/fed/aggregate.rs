//! Weighted aggregation of client uploads into a pseudo-gradient.

use std::collections::BTreeMap;

use crate::bn_strategy::BnStrategy;
use crate::error::{Error, Result};
use crate::model::{GroupKind, ModelState};

/// What one client sends to the server: its shared groups and sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub shared: ModelState,
    pub num_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoGradient {
    /// `sum_k p_k (w_k - w)` per shared group.
    pub delta: BTreeMap<String, Vec<f64>>,
    /// `sum_k p_k w_k` per shared group, accumulated in the same order.
    pub average: BTreeMap<String, Vec<f64>>,
    pub kinds: BTreeMap<String, GroupKind>,
    /// Sum of the participating sample counts.
    pub total_weight: f64,
}

/// Client weights `p_k = n_k / n`, or `1 / K'` when `uniform`, summed in
/// ascending client-id order whatever the order of `updates`.
pub fn aggregate(
    updates: &[ClientUpdate],
    global: &ModelState,
    strategy: BnStrategy,
    uniform: bool,
) -> Result<PseudoGradient> {
    if updates.is_empty() {
        return Err(Error::Argument("aggregation needs at least one update".into()));
    }
    let mut sorted: Vec<&ClientUpdate> = updates.iter().collect();
    sorted.sort_by_key(|u| u.client_id);
    if let Some(w) = sorted.windows(2).find(|w| w[0].client_id == w[1].client_id) {
        return Err(Error::Consistency(format!("client {} uploaded twice", w[0].client_id)));
    }
    let names: Vec<&str> = global.names().collect();
    for (name, g) in global.iter() {
        if strategy.is_private(g.kind) {
            return Err(Error::Consistency(format!("server model holds private group {name:?}")));
        }
    }
    for u in &sorted {
        let theirs: Vec<&str> = u.shared.names().collect();
        if theirs != names {
            return Err(Error::Consistency(format!(
                "client {} uploaded groups {theirs:?}, expected {names:?}",
                u.client_id
            )));
        }
    }
    let total_weight: f64 = sorted.iter().map(|u| u.num_samples as f64).sum();
    if !(total_weight > 0.0) {
        return Err(Error::Argument("uploads carry no samples".into()));
    }
    let weights: Vec<f64> = sorted
        .iter()
        .map(|u| {
            if uniform {
                1.0 / sorted.len() as f64
            } else {
                u.num_samples as f64 / total_weight
            }
        })
        .collect();
    let mut delta = BTreeMap::new();
    let mut average = BTreeMap::new();
    let mut kinds = BTreeMap::new();
    for (name, g) in global.iter() {
        let mut d = vec![0.0; g.data.len()];
        let mut a = vec![0.0; g.data.len()];
        for (u, &p) in sorted.iter().zip(&weights) {
            let w = u.shared.group(name)?;
            if w.len() != d.len() {
                return Err(Error::Consistency(format!(
                    "client {} group {name:?} has {} values, expected {}",
                    u.client_id,
                    w.len(),
                    d.len()
                )));
            }
            for i in 0..d.len() {
                d[i] += p * (w[i] - g.data[i]);
                a[i] += p * w[i];
            }
        }
        delta.insert(name.to_string(), d);
        average.insert(name.to_string(), a);
        kinds.insert(name.to_string(), g.kind);
    }
    Ok(PseudoGradient {
        delta,
        average,
        kinds,
        total_weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> ModelState {
        let mut m = ModelState::new();
        m.insert("w".into(), GroupKind::Weight, vec![v]);
        m
    }

    fn update(id: usize, v: f64, n: usize) -> ClientUpdate {
        ClientUpdate {
            client_id: id,
            shared: scalar(v),
            num_samples: n,
        }
    }

    #[test]
    fn weighted_mean_of_two_scalars() {
        let pg = aggregate(&[update(0, 2.0, 10), update(1, 6.0, 30)], &scalar(0.0), BnStrategy::ShareAll, false).unwrap();
        assert_eq!(pg.delta["w"], vec![5.0]);
        assert_eq!(pg.total_weight, 40.0);
        let pg = aggregate(&[update(0, 2.0, 10), update(1, 6.0, 30)], &scalar(0.0), BnStrategy::ShareAll, true).unwrap();
        assert_eq!(pg.delta["w"], vec![4.0]);
    }

    #[test]
    fn single_client_and_fixed_point() {
        let pg = aggregate(&[update(3, 1.25, 7)], &scalar(0.5), BnStrategy::ShareAll, false).unwrap();
        assert_eq!(pg.delta["w"], vec![0.75]);
        assert_eq!(pg.average["w"], vec![1.25]);
        let pg = aggregate(&[update(0, 0.5, 7), update(1, 0.5, 3)], &scalar(0.5), BnStrategy::ShareAll, false).unwrap();
        assert_eq!(pg.delta["w"], vec![0.0]);
    }

    #[test]
    fn input_order_does_not_matter() {
        let ups = [update(4, 0.1, 3), update(1, 0.7, 5), update(2, 0.3, 11)];
        let mut rev = ups.clone();
        rev.reverse();
        let a = aggregate(&ups, &scalar(0.2), BnStrategy::ShareAll, false).unwrap();
        let b = aggregate(&rev, &scalar(0.2), BnStrategy::ShareAll, false).unwrap();
        assert_eq!(a.delta["w"][0].to_bits(), b.delta["w"][0].to_bits());
    }

    #[test]
    fn duplicates_and_private_groups_are_rejected() {
        let dup = aggregate(&[update(1, 0.0, 1), update(1, 1.0, 1)], &scalar(0.0), BnStrategy::ShareAll, false);
        assert!(matches!(dup, Err(Error::Consistency(_))));
        let mut with_stat = scalar(0.0);
        with_stat.insert("bn0.stat".into(), GroupKind::BnStat, vec![0.0, 1.0]);
        let up = ClientUpdate { client_id: 0, shared: with_stat.clone(), num_samples: 1 };
        assert!(matches!(aggregate(&[up], &with_stat, BnStrategy::SiloBn, false), Err(Error::Consistency(_))));
        let extra = ClientUpdate { client_id: 0, shared: with_stat, num_samples: 1 };
        assert!(matches!(aggregate(&[extra], &scalar(0.0), BnStrategy::SiloBn, false), Err(Error::Consistency(_))));
    }
}
