use crate::numerics::Matrix;

/// Linear interpolation along time to `target_len` rows.
///
/// Output row `t` samples input position `t (T' - 1) / (target_len - 1)`.
/// Both endpoints are preserved exactly; `target_len == 1` returns row 0.
pub fn resample_linear(features: &Matrix, target_len: usize) -> Matrix {
    let src_len = features.rows();
    let d = features.cols();
    assert!(
        src_len >= 1 && target_len >= 1,
        "resample_linear needs non-empty sequences"
    );
    if target_len == src_len {
        return features.clone();
    }
    let mut out = Matrix::zeros(target_len, d);
    if target_len == 1 {
        out.row_mut(0).copy_from_slice(features.row(0));
        return out;
    }
    let denom = (target_len - 1) as f64;
    for t in 0..target_len {
        let pos = (t * (src_len - 1)) as f64 / denom;
        let lo = (pos.floor() as usize).min(src_len - 1);
        let hi = (lo + 1).min(src_len - 1);
        let frac = pos - lo as f64;
        let (a, b) = (features.row(lo), features.row(hi));
        for (j, dst) in out.row_mut(t).iter_mut().enumerate() {
            let (x, y) = (a[j], b[j]);
            let v = x + frac * (y - x);
            *dst = v.clamp(x.min(y), x.max(y));
        }
    }
    out
}
