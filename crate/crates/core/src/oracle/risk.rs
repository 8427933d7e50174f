use crate::error::{invalid, Error, Result};

/// Lower tail statistics of a return distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskStats {
    pub alpha: f64,
    /// Empirical alpha-quantile.
    pub quantile: f64,
    /// Mean of the samples at or below the quantile.
    pub cvar: f64,
}

/// 1-based rank `ceil(alpha n)` clamped to `[1, n]`. Products that land within rounding
/// of an integer are treated as that integer, so `0.1 * 100` is rank 10.
pub fn lower_rank(alpha: f64, n: usize) -> usize {
    let x = alpha * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.abs().max(1.0) { r } else { x.ceil() };
    (k.max(1.0) as usize).min(n)
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Empirical quantile with lower interpolation: the order statistic of rank
/// `ceil(alpha n)`.
pub fn quantile_lower(samples: &[f64], alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("{alpha} not in [0, 1]")));
    }
    let s = sorted_finite(samples)?;
    Ok(s[lower_rank(alpha, s.len()) - 1])
}

/// Conditional value at risk: `E[x | x <= Q_alpha(x)]`.
pub fn cvar(samples: &[f64], alpha: f64) -> Result<RiskStats> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("{alpha} not in (0, 1)")));
    }
    let s = sorted_finite(samples)?;
    let quantile = s[lower_rank(alpha, s.len()) - 1];
    let tail: Vec<f64> = s.iter().copied().take_while(|&v| v <= quantile).collect();
    Ok(RiskStats {
        alpha,
        quantile,
        cvar: tail.iter().sum::<f64>() / tail.len() as f64,
    })
}
