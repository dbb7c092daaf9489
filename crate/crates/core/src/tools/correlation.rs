//! Pearson correlation of close prices between two instruments.

use crate::market::{Candle, InstrumentKey, MarketStore, WindowSpec};

use super::ToolError;

/// Close prices at timestamps present in both slices. Never interpolates.
pub fn align_closes(a: &[Candle], b: &[Candle]) -> (Vec<f64>, Vec<f64>) {
    let (mut i, mut j) = (0, 0);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].timestamp.cmp(&b[j].timestamp) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                xs.push(a[i].close);
                ys.push(b[j].close);
                i += 1;
                j += 1;
            }
        }
    }
    (xs, ys)
}

/// Pearson r, accumulated with single-pass co-moment updates and clamped to `[-1, 1]`.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, ToolError> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return Err(ToolError::AlignmentFailure { aligned: n });
    }
    let (mut mean_x, mut mean_y) = (0.0, 0.0);
    let (mut m2_x, mut m2_y, mut c_xy) = (0.0, 0.0, 0.0);
    for (k, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let count = (k + 1) as f64;
        let dx = x - mean_x;
        mean_x += dx / count;
        let dy = y - mean_y;
        mean_y += dy / count;
        m2_x += dx * (x - mean_x);
        m2_y += dy * (y - mean_y);
        c_xy += dx * (y - mean_y);
    }
    if m2_x <= 0.0 {
        return Err(ToolError::ZeroVariance { side: "a" });
    }
    if m2_y <= 0.0 {
        return Err(ToolError::ZeroVariance { side: "b" });
    }
    Ok((c_xy / (m2_x.sqrt() * m2_y.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation of two instruments' closes over the same window.
///
/// Serves both `correlation_between_tokens` (two bases, one venue) and
/// `correlation_between_exchanges` (one pair, two venues).
pub fn correlation_between(
    store: &MarketStore,
    a: &InstrumentKey,
    b: &InstrumentKey,
    window: &WindowSpec,
    as_of: i64,
) -> Result<f64, ToolError> {
    let slice_a = store.query_window(a, window, as_of)?;
    let slice_b = store.query_window(b, window, as_of)?;
    let (xs, ys) = align_closes(slice_a, slice_b);
    pearson(&xs, &ys)
}
