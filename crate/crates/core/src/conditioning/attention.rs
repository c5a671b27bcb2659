use nalgebra::DMatrix;

use super::{AttentionWeights, ConditioningError, TokenSequence, WindowConfig};
use crate::metrics::FeatureMap;

/// Output of an attention call together with its row-stochastic weights
/// (`queries x keys`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    pub output: TokenSequence,
    pub weights: DMatrix<f64>,
}

/// Splits the spatial grid into non-overlapping `w x w` windows.
///
/// Windows are ordered row-major over the window grid, tokens row-major
/// inside each window; each token is the `C`-channel vector at its position.
pub fn window_partition(fm: &FeatureMap, cfg: WindowConfig) -> Result<Vec<TokenSequence>, ConditioningError> {
    let (h, w, c) = (fm.height(), fm.width(), fm.channels());
    let ws = cfg.window_size;
    if ws == 0 || h % ws != 0 || w % ws != 0 {
        return Err(ConditioningError::NonDivisible {
            window: ws,
            height: h,
            width: w,
        });
    }
    let mut windows = Vec::with_capacity((h / ws) * (w / ws));
    for wy in 0..h / ws {
        for wx in 0..w / ws {
            let mut values = Vec::with_capacity(ws * ws * c);
            for y in wy * ws..(wy + 1) * ws {
                for x in wx * ws..(wx + 1) * ws {
                    values.extend(fm.token(y, x));
                }
            }
            windows.push(TokenSequence::from_rows(ws * ws, c, &values)?);
        }
    }
    Ok(windows)
}

fn attend(
    queries: &TokenSequence,
    keys: &TokenSequence,
    weights: &AttentionWeights,
) -> Result<AttentionTrace, ConditioningError> {
    let d = weights.dim();
    for dim in [queries.dim(), keys.dim()] {
        if dim != d {
            return Err(ConditioningError::DimMismatch { expected: d, got: dim });
        }
    }
    let q = queries.matrix() * &weights.wq;
    let k = keys.matrix() * &weights.wk;
    let v = keys.matrix() * &weights.wv;
    let mut scores = q * k.transpose() / (d as f64).sqrt();
    for mut row in scores.row_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(ConditioningError::NonFinite("attention scores".into()));
        }
        row.apply(|s| *s = (*s - max).exp());
        let total: f64 = row.sum();
        row /= total;
    }
    let output = &scores * v;
    if output.iter().any(|x| !x.is_finite()) {
        return Err(ConditioningError::NonFinite("attention output".into()));
    }
    Ok(AttentionTrace {
        output: TokenSequence(output),
        weights: scores,
    })
}

/// Unmasked softmax self-attention over one window.
pub fn window_attention(
    tokens: &TokenSequence,
    weights: &AttentionWeights,
) -> Result<TokenSequence, ConditioningError> {
    Ok(attend(tokens, tokens, weights)?.output)
}

pub fn window_attention_traced(
    tokens: &TokenSequence,
    weights: &AttentionWeights,
) -> Result<AttentionTrace, ConditioningError> {
    attend(tokens, tokens, weights)
}

/// Per-window attention with outputs concatenated in window order.
/// Windows never see each other.
pub fn style_encode(
    fm: &FeatureMap,
    cfg: WindowConfig,
    weights: &AttentionWeights,
) -> Result<TokenSequence, ConditioningError> {
    let windows = window_partition(fm, cfg)?;
    let per_window = windows.first().map_or(0, TokenSequence::len);
    let mut out = DMatrix::zeros(windows.len() * per_window, fm.channels());
    for (i, window) in windows.iter().enumerate() {
        let encoded = window_attention(window, weights)?;
        out.rows_mut(i * per_window, per_window).copy_from(encoded.matrix());
    }
    TokenSequence::new(out)
}

/// `softmax((query·Wq)(condition·Wk)ᵀ / √d) · (condition·Wv)`.
pub fn cross_attention(
    query: &TokenSequence,
    condition: &TokenSequence,
    weights: &AttentionWeights,
) -> Result<TokenSequence, ConditioningError> {
    Ok(attend(query, condition, weights)?.output)
}

pub fn cross_attention_traced(
    query: &TokenSequence,
    condition: &TokenSequence,
    weights: &AttentionWeights,
) -> Result<AttentionTrace, ConditioningError> {
    attend(query, condition, weights)
}
