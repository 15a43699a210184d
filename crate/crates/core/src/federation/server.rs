use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::ClientUpdate;
use crate::model::ModelParams;
use crate::{Error, Result};

/// `N_i / Σ N` for every update.
pub fn aggregation_weights(updates: &[ClientUpdate]) -> Result<Vec<f64>> {
    if updates.is_empty() {
        return Err(Error::Contract("aggregation needs at least one update".into()));
    }
    if let Some(u) = updates.iter().find(|u| u.n_samples == 0) {
        return Err(Error::Contract(format!("domain {} reported zero samples", u.domain_id)));
    }
    let total: usize = updates.iter().map(|u| u.n_samples).sum();
    Ok(updates
        .iter()
        .map(|u| u.n_samples as f64 / total as f64)
        .collect())
}

/// Sample-weighted mean of the uploaded models, coordinate by coordinate.
pub fn aggregate(updates: &[ClientUpdate]) -> Result<ModelParams> {
    let weights = aggregation_weights(updates)?;
    let first = &updates[0].params;
    if let Some(u) = updates.iter().find(|u| !u.params.same_shape(first)) {
        return Err(Error::Contract(format!(
            "domain {} uploaded arch {:?}/{} classes, expected {:?}/{}",
            u.domain_id,
            u.params.arch(),
            u.params.classes(),
            first.arch(),
            first.classes()
        )));
    }
    let mut acc = vec![0.0; ModelParams::param_count(first.arch(), first.classes())];
    for (u, w) in updates.iter().zip(&weights) {
        for (a, v) in acc.iter_mut().zip(u.params.flatten()) {
            *a += w * v;
        }
    }
    ModelParams::unflatten(first.arch(), first.classes(), &acc)
}
