use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-log softmax(logits)[target]` and its gradient `softmax - onehot`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::domain(format!(
            "target class {target} out of range for {} logits",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite logits"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Shannon entropy `-sum w ln w` (with `0 ln 0 = 0`) and its gradient
/// `-(ln w + 1)`. Zero weights use the smallest positive normal in the
/// gradient so it stays finite.
pub fn attention_entropy(weights: &[f64]) -> Result<(f64, Vec<f64>)> {
    if let Some(w) = weights.iter().find(|&&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::domain(format!("attention weight {w} is not a probability")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("attention weights sum to {total}, not 1")));
    }
    let value = -weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * w.ln())
        .sum::<f64>();
    let grad = weights
        .iter()
        .map(|&w| -(w.max(f64::MIN_POSITIVE).ln() + 1.0))
        .collect();
    Ok((value, grad))
}
