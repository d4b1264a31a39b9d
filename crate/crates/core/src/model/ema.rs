/// Exponential moving average `ema_i = β·ema_{i−1} + (1 − β)·y_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmaSmoother {
    beta: f64,
    ema: Option<f64>,
}

impl EmaSmoother {
    pub fn new(beta: f64) -> Option<Self> {
        (0.0..1.0).contains(&beta).then_some(Self { beta, ema: None })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_state(mut self, ema: f64) -> Self {
        self.ema = Some(ema);
        self
    }

    pub fn state(&self) -> Option<f64> {
        self.ema
    }

    /// Feeds one value. With no prior state the value itself becomes the
    /// state.
    pub fn push(&mut self, y: f64) -> f64 {
        let next = match self.ema {
            None => y,
            Some(_) if self.beta == 0.0 => y,
            Some(prev) => {
                // Increment form keeps constant inputs exactly fixed; the
                // clamp pins the result between its two convex endpoints.
                let v = prev + (1.0 - self.beta) * (y - prev);
                v.clamp(prev.min(y), prev.max(y))
            }
        };
        self.ema = Some(next);
        next
    }
}

/// Smooths `raw` starting from `ema_0 = init`; one output per input.
pub fn ema_smooth(raw: &[f64], beta: f64, init: f64) -> Option<Vec<f64>> {
    let mut s = EmaSmoother::new(beta)?.with_state(init);
    Some(raw.iter().map(|&y| s.push(y)).collect())
}

/// Smooths with the first raw value as the initial state, so the first
/// output equals the first input.
pub fn ema_from_first(raw: &[f64], beta: f64) -> Option<Vec<f64>> {
    match raw.first() {
        None => EmaSmoother::new(beta).map(|_| Vec::new()),
        Some(&first) => ema_smooth(raw, beta, first),
    }
}
