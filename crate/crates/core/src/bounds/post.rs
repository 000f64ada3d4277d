//! Pointwise post-processing of bounding trajectories.

use crate::bundle::{BundleError, Role, RunMetadata, SeriesKey, TrajectoryBundle};

/// Tightens each node's bounds with the simplex constraint:
///
/// ```text
/// lower_c <- max{lower_c, 1 - sum_{c' != c} upper_c'}
/// upper_c <- min{upper_c, 1 - sum_{c' != c} lower_c'}
/// ```
///
/// All compartments of a node are updated simultaneously from the input values.
pub fn eliminate_impossible(bundle: &TrajectoryBundle) -> Result<TrajectoryBundle, BundleError> {
    let n = bundle.node_count();
    let nc = bundle.compartments().len();
    let len = bundle.grid().len();
    let mut meta = bundle.metadata.clone();
    meta.label = format!("{}+eliminated", meta.label);
    meta.extra.insert("post".into(), serde_json::json!("eliminate_impossible"));
    let mut out = TrajectoryBundle::new(bundle.grid().to_vec(), bundle.compartments().to_vec(), n, meta);
    for i in 0..n {
        let mut ups = Vec::with_capacity(nc);
        let mut los = Vec::with_capacity(nc);
        for c in 0..nc {
            ups.push(bundle.require(i, c, Role::Upper)?);
            los.push(bundle.require(i, c, Role::Lower)?);
        }
        for c in 0..nc {
            let mut new_up = Vec::with_capacity(len);
            let mut new_lo = Vec::with_capacity(len);
            for k in 0..len {
                let mut sum_up = 0.0;
                let mut sum_lo = 0.0;
                for o in (0..nc).filter(|&o| o != c) {
                    sum_up += ups[o][k];
                    sum_lo += los[o][k];
                }
                new_lo.push(los[c][k].max(1.0 - sum_up));
                new_up.push(ups[c][k].min(1.0 - sum_lo));
            }
            out.insert(SeriesKey::new(i, c, Role::Upper), new_up)?;
            out.insert(SeriesKey::new(i, c, Role::Lower), new_lo)?;
        }
    }
    Ok(out)
}

/// Pointwise minimum of the uppers and maximum of the lowers.
pub fn combine_bounds(bundles: &[&TrajectoryBundle]) -> Result<TrajectoryBundle, BundleError> {
    let first = *bundles.first().ok_or(BundleError::SeriesMismatch)?;
    let index = |b: &TrajectoryBundle| -> Vec<(usize, usize)> {
        b.keys()
            .filter(|k| k.role == Role::Upper)
            .map(|k| (k.node, k.compartment))
            .collect()
    };
    let keys = index(first);
    for b in &bundles[1..] {
        first.same_shape(b)?;
        if index(b) != keys {
            return Err(BundleError::SeriesMismatch);
        }
    }
    let mut meta = RunMetadata::labeled("combined");
    meta.model_hash = first.metadata.model_hash.clone();
    meta.extra.insert(
        "inputs".into(),
        serde_json::json!(bundles.iter().map(|b| b.metadata.label.clone()).collect::<Vec<_>>()),
    );
    let mut out = TrajectoryBundle::new(
        first.grid().to_vec(),
        first.compartments().to_vec(),
        first.node_count(),
        meta,
    );
    for &(i, c) in &keys {
        let mut up = first.require(i, c, Role::Upper)?.to_vec();
        let mut lo = first.require(i, c, Role::Lower)?.to_vec();
        for b in &bundles[1..] {
            for (u, v) in up.iter_mut().zip(b.require(i, c, Role::Upper)?) {
                *u = u.min(*v);
            }
            for (l, v) in lo.iter_mut().zip(b.require(i, c, Role::Lower)?) {
                *l = l.max(*v);
            }
        }
        out.insert(SeriesKey::new(i, c, Role::Upper), up)?;
        out.insert(SeriesKey::new(i, c, Role::Lower), lo)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_compartment(up: [f64; 2], lo: [f64; 2]) -> TrajectoryBundle {
        let mut b = TrajectoryBundle::new(vec![0.0], vec!["S".into(), "I".into()], 1, RunMetadata::labeled("x"));
        for c in 0..2 {
            b.insert(SeriesKey::new(0, c, Role::Upper), vec![up[c]]).unwrap();
            b.insert(SeriesKey::new(0, c, Role::Lower), vec![lo[c]]).unwrap();
        }
        b
    }

    #[test]
    fn two_compartment_formula() {
        let b = two_compartment([0.9, 0.5], [0.2, 0.05]);
        let e = eliminate_impossible(&b).unwrap();
        assert_eq!(e.get(0, 0, Role::Lower).unwrap()[0], 0.5);
        assert_eq!(e.get(0, 0, Role::Upper).unwrap()[0], 0.9);
        assert_eq!(e.get(0, 1, Role::Upper).unwrap()[0], 0.5);
        assert!((e.get(0, 1, Role::Lower).unwrap()[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_when_uppers_sum_to_one() {
        let b = two_compartment([0.25, 0.75], [0.25, 0.75]);
        let e = eliminate_impossible(&b).unwrap();
        for c in 0..2 {
            assert_eq!(e.get(0, c, Role::Upper), b.get(0, c, Role::Upper));
            assert_eq!(e.get(0, c, Role::Lower), b.get(0, c, Role::Lower));
        }
    }

    #[test]
    fn missing_series_is_reported() {
        let b = TrajectoryBundle::new(vec![0.0], vec!["S".into()], 1, RunMetadata::labeled("x"));
        assert!(matches!(eliminate_impossible(&b), Err(BundleError::MissingSeries { .. })));
    }

    #[test]
    fn combine_takes_best_of_each() {
        let a = two_compartment([0.5, 0.6], [0.0, 0.1]);
        let b = two_compartment([0.9, 0.9], [0.3, 0.4]);
        let c = combine_bounds(&[&a, &b]).unwrap();
        assert_eq!(c.get(0, 0, Role::Upper).unwrap()[0], 0.5);
        assert_eq!(c.get(0, 1, Role::Lower).unwrap()[0], 0.4);
        let one = combine_bounds(&[&a]).unwrap();
        assert_eq!(one.get(0, 1, Role::Upper), a.get(0, 1, Role::Upper));
        let other_grid = TrajectoryBundle::new(vec![1.0], vec!["S".into(), "I".into()], 1, RunMetadata::labeled("y"));
        assert_eq!(combine_bounds(&[&a, &other_grid]).unwrap_err(), BundleError::GridMismatch);
    }
}
