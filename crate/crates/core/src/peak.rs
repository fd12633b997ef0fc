//! Peak detection over a scale grid.

/// Scale at which `values` is largest, ties going to the smallest scale.
/// Missing (`None`) and NaN entries are ignored; `None` if nothing is left.
pub fn peak_beta(betas: &[u32], values: &[Option<f64>]) -> Option<u32> {
    debug_assert_eq!(betas.len(), values.len());
    let mut best: Option<(u32, f64)> = None;
    for (&b, v) in betas.iter().zip(values) {
        let Some(v) = v.filter(|v| !v.is_nan()) else { continue };
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((b, v));
        }
    }
    best.map(|(b, _)| b)
}
