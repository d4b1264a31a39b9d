use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance below which a correlation is reported as degenerate.
pub const DEGENERATE_VARIANCE: f64 = 1e-15;

pub fn mse(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Contract(format!(
            "mse over {} predictions and {} labels",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Contract("mse of empty sequences".into()));
    }
    let sum: f64 = pred.iter().zip(gt).map(|(p, g)| (p - g) * (p - g)).sum();
    Ok(sum / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    /// Set when either input has (near-)zero variance; `value` is then 0.
    pub degenerate: bool,
}

/// Pearson correlation.
pub fn pcc(pred: &[f64], gt: &[f64]) -> Result<Correlation> {
    if pred.len() != gt.len() {
        return Err(Error::Contract(format!(
            "pcc over {} predictions and {} labels",
            pred.len(),
            gt.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::Contract("pcc needs at least two points".into()));
    }
    let n = pred.len() as f64;
    let mx = pred.iter().sum::<f64>() / n;
    let my = gt.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pred.iter().zip(gt) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx / n < DEGENERATE_VARIANCE || syy / n < DEGENERATE_VARIANCE {
        return Ok(Correlation {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Correlation {
        value: sxy / (sxx * syy).sqrt(),
        degenerate: false,
    })
}
