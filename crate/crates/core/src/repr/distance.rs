use nalgebra::DMatrix;

/// Subtracts the per-column mean from every row.
pub fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    if n == 0 {
        return x.clone();
    }
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|v| *v -= mean);
    }
    out
}

pub(crate) fn norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `1 - cos(u, v)`. A zero vector has similarity 0 with everything, so the
/// distance is 1.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    cosine_distance_with_norms(u, v, norm(u), norm(v))
}

/// Same as [`cosine_distance`] with precomputed norms. Bitwise identical to
/// it when the norms come from [`norm`].
pub(crate) fn cosine_distance_with_norms(u: &[f64], v: &[f64], nu: f64, nv: f64) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let sim = (dot / (nu * nv)).clamp(-1.0, 1.0);
    1.0 - sim
}
