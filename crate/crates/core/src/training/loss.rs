use crate::error::{Error, Result};
use crate::numcore::{Graph, Tensor2, Var};

/// Clip labels of one mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipBatch {
    pub labels: Vec<f64>,
}

/// Per-clip labels of `m` windows, each of the same length `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    pub labels: Vec<Vec<f64>>,
}

impl WindowBatch {
    pub fn window_len(&self) -> Result<usize> {
        let len = self
            .labels
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Contract("empty window batch".into()))?;
        if len == 0 || self.labels.iter().any(|w| w.len() != len) {
            return Err(Error::Contract("windows in a batch must share one non-zero length".into()));
        }
        Ok(len)
    }
}

/// `(1/m)·Σ_j (y_j − G_j)²`.
pub fn clip_loss(batch: &ClipBatch, predictions: &[f64]) -> Result<f64> {
    let m = batch.labels.len();
    if m == 0 || predictions.len() != m {
        return Err(Error::Contract(format!(
            "clip loss over {} predictions and {m} labels",
            predictions.len()
        )));
    }
    let mut sum = 0.0;
    for (y, g) in predictions.iter().zip(&batch.labels) {
        sum += (y - g) * (y - g);
    }
    Ok(sum / m as f64)
}

/// `(1/(m·L))·Σ_j Σ_i (y_j^i − G_j^i)²`.
pub fn window_loss(batch: &WindowBatch, predictions: &[Vec<f64>]) -> Result<f64> {
    let len = batch.window_len()?;
    if predictions.len() != batch.labels.len() || predictions.iter().any(|p| p.len() != len) {
        return Err(Error::Contract("window predictions do not match the batch shape".into()));
    }
    let mut sum = 0.0;
    for (pw, gw) in predictions.iter().zip(&batch.labels) {
        for (y, g) in pw.iter().zip(gw) {
            sum += (y - g) * (y - g);
        }
    }
    Ok(sum / (batch.labels.len() * len) as f64)
}

/// Tape form of the clip loss for a `1 × m` prediction row.
pub fn clip_loss_on_tape(g: &mut Graph, pred: Var, labels: &[f64]) -> Result<Var> {
    if g.shape(pred) != (1, labels.len()) {
        return Err(Error::dim("clip loss", (1, labels.len()), g.shape(pred)));
    }
    let target = g.constant(Tensor2::from_vec(1, labels.len(), labels.to_vec())?);
    g.mse(pred, target)
}

/// Tape form of the window loss; `preds[i]` is the `1 × m` row for window
/// position `i`, `labels[j][i]` the label of window `j` at position `i`.
pub fn window_loss_on_tape(g: &mut Graph, preds: &[Var], labels: &[Vec<f64>]) -> Result<Var> {
    let len = WindowBatch {
        labels: labels.to_vec(),
    }
    .window_len()?;
    if preds.len() != len {
        return Err(Error::Contract("window prediction count differs from window length".into()));
    }
    let stacked = g.concat_rows(preds)?;
    let m = labels.len();
    let mut target = Tensor2::zeros(len, m);
    for (j, w) in labels.iter().enumerate() {
        for (i, &y) in w.iter().enumerate() {
            target.set(i, j, y);
        }
    }
    let t = g.constant(target);
    g.mse(stacked, t)
}
