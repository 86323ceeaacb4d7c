use crate::linalg::Matrix;

/// Block soft-thresholding: `v · max(‖v‖ − t, 0) / ‖v‖`, with an exact zero
/// vector whenever `‖v‖ ≤ t`.
pub fn prox_group(v: &[f64], threshold: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    prox_group_in_place(&mut out, threshold);
    out
}

/// In-place [`prox_group`]; returns the norm before shrinkage.
pub fn prox_group_in_place(v: &mut [f64], threshold: f64) -> f64 {
    assert!(threshold.is_finite() && threshold >= 0.0, "threshold must be finite and non-negative");
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if threshold == 0.0 {
        return norm;
    }
    if norm <= threshold {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        let keep = norm - threshold;
        v.iter_mut().for_each(|x| *x = *x * keep / norm);
    }
    norm
}

/// Apply [`prox_group`] to every column; returns the pre-shrinkage norms.
pub fn prox_columns(m: &mut Matrix, threshold: f64) -> Vec<f64> {
    (0..m.cols())
        .map(|j| {
            let mut col = m.column(j);
            let norm = prox_group_in_place(&mut col, threshold);
            m.set_column(j, &col);
            norm
        })
        .collect()
}
