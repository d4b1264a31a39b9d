//! Dense layers and two-layer bidirectional LSTM stacks.
//!
//! Layers hold only parameter names and sizes; values live in a
//! [`ParamStore`]. Activations are batched column-wise: an input of width
//! `d` for `m` samples is a `d × m` tensor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Graph, ParamStore, Rng, Tensor2, Trainable, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

fn uniform_init(rng: &mut Rng, rows: usize, cols: usize) -> Tensor2 {
    let bound = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform_range(-bound, bound))
        .collect();
    Tensor2::from_vec(rows, cols, data).expect("sized by construction")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub name: String,
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(name: impl Into<String>, input: usize, output: usize, activation: Activation) -> Self {
        Self {
            name: name.into(),
            input,
            output,
            activation,
        }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.W", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.b", self.name)
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut Rng) -> Result<()> {
        store.set(&self.weight_name(), uniform_init(rng, self.output, self.input))?;
        store.set(&self.bias_name(), Tensor2::zeros(self.output, 1))
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let (rows, _) = g.shape(x);
        if rows != self.input {
            return Err(Error::dim("dense_forward", (self.output, self.input), g.shape(x)));
        }
        let w = g.param(&self.weight_name())?;
        let b = g.param(&self.bias_name())?;
        let wx = g.matmul(w, x)?;
        let z = g.add_column(wx, b)?;
        match self.activation {
            Activation::Tanh => g.tanh(z),
            Activation::Identity => Ok(z),
        }
    }

    /// Evaluates the layer on a single input vector.
    pub fn eval(&self, store: &ParamStore, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = Graph::new(store, Trainable::None);
        let xv = g.constant(Tensor2::column(x));
        let y = self.forward(&mut g, xv)?;
        Ok(g.value(y).data().to_vec())
    }
}

const GATES: [&str; 4] = ["i", "f", "o", "g"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub name: String,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(name: impl Into<String>, input: usize, hidden: usize) -> Self {
        Self {
            name: name.into(),
            input,
            hidden,
        }
    }

    fn pname(&self, kind: &str, gate: &str) -> String {
        format!("{}.{kind}_{gate}", self.name)
    }

    pub fn param_names(&self) -> Vec<String> {
        ["W", "U", "b"]
            .iter()
            .flat_map(|k| GATES.iter().map(move |g| self.pname(k, g)))
            .collect()
    }

    /// Uniform(±1/√fan_in) weights, forget bias 1, other biases 0.
    pub fn init(&self, store: &mut ParamStore, rng: &mut Rng) -> Result<()> {
        for gate in GATES {
            store.set(&self.pname("W", gate), uniform_init(rng, self.hidden, self.input))?;
        }
        for gate in GATES {
            store.set(&self.pname("U", gate), uniform_init(rng, self.hidden, self.hidden))?;
        }
        for gate in GATES {
            let fill = if gate == "f" { 1.0 } else { 0.0 };
            store.set(&self.pname("b", gate), Tensor2::filled(self.hidden, 1, fill))?;
        }
        Ok(())
    }

    fn gate(&self, g: &mut Graph, gate: &str, x: Var, h: Var) -> Result<Var> {
        let w = g.param(&self.pname("W", gate))?;
        let u = g.param(&self.pname("U", gate))?;
        let b = g.param(&self.pname("b", gate))?;
        let wx = g.matmul(w, x)?;
        let uh = g.matmul(u, h)?;
        let s = g.add(wx, uh)?;
        g.add_column(s, b)
    }

    /// One recurrence step; returns `(h_t, c_t)`.
    pub fn step(&self, g: &mut Graph, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
        let (xr, m) = g.shape(x);
        if xr != self.input {
            return Err(Error::dim("lstm_step input", (self.input, m), g.shape(x)));
        }
        for state in [h_prev, c_prev] {
            if g.shape(state) != (self.hidden, m) {
                return Err(Error::dim("lstm_step state", (self.hidden, m), g.shape(state)));
            }
        }
        let zi = self.gate(g, "i", x, h_prev)?;
        let i = g.sigmoid(zi)?;
        let zf = self.gate(g, "f", x, h_prev)?;
        let f = g.sigmoid(zf)?;
        let zo = self.gate(g, "o", x, h_prev)?;
        let o = g.sigmoid(zo)?;
        let zg = self.gate(g, "g", x, h_prev)?;
        let cand = g.tanh(zg)?;
        let keep = g.mul(f, c_prev)?;
        let write = g.mul(i, cand)?;
        let c = g.add(keep, write)?;
        let tc = g.tanh(c)?;
        let h = g.mul(o, tc)?;
        Ok((h, c))
    }

    /// Single-sample step on plain vectors.
    pub fn eval_step(
        &self,
        store: &ParamStore,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut g = Graph::new(store, Trainable::None);
        let xv = g.constant(Tensor2::column(x));
        let hv = g.constant(Tensor2::column(h_prev));
        let cv = g.constant(Tensor2::column(c_prev));
        let (h, c) = self.step(&mut g, xv, hv, cv)?;
        Ok((g.value(h).data().to_vec(), g.value(c).data().to_vec()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLayer {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

/// Two stacked bidirectional LSTM layers with per-direction width `hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmStack {
    pub name: String,
    pub input: usize,
    pub hidden: usize,
    pub layers: [BiLayer; 2],
}

impl BiLstmStack {
    pub fn new(name: impl Into<String>, input: usize, hidden: usize) -> Self {
        let name = name.into();
        let layer = |k: usize, width: usize| BiLayer {
            forward: LstmCell::new(format!("{name}.l{k}.fwd"), width, hidden),
            backward: LstmCell::new(format!("{name}.l{k}.bwd"), width, hidden),
        };
        let layers = [layer(0, input), layer(1, 2 * hidden)];
        Self {
            name,
            input,
            hidden,
            layers,
        }
    }

    pub fn output_width(&self) -> usize {
        2 * self.hidden
    }

    pub fn cells(&self) -> impl Iterator<Item = &LstmCell> {
        self.layers.iter().flat_map(|l| [&l.forward, &l.backward])
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut Rng) -> Result<()> {
        for cell in self.cells() {
            cell.init(store, rng)?;
        }
        Ok(())
    }

    fn run_direction(g: &mut Graph, cell: &LstmCell, xs: &[Var], reverse: bool) -> Result<Vec<Var>> {
        let m = g.shape(xs[0]).1;
        let mut h = g.constant(Tensor2::zeros(cell.hidden, m));
        let mut c = g.constant(Tensor2::zeros(cell.hidden, m));
        let mut out = vec![h; xs.len()];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..xs.len()).rev())
        } else {
            Box::new(0..xs.len())
        };
        for t in order {
            (h, c) = cell.step(g, xs[t], h, c)?;
            out[t] = h;
        }
        Ok(out)
    }

    fn check_input(&self, g: &Graph, xs: &[Var]) -> Result<()> {
        let first = xs
            .first()
            .ok_or_else(|| Error::Input("bidirectional LSTM needs at least one step".into()))?;
        let m = g.shape(*first).1;
        for &x in xs {
            if g.shape(x) != (self.input, m) {
                return Err(Error::dim("bilstm input", (self.input, m), g.shape(x)));
            }
        }
        Ok(())
    }

    /// Runs both layers; returns layer-2 per-direction hidden sequences.
    fn run(&self, g: &mut Graph, xs: &[Var]) -> Result<(Vec<Var>, Vec<Var>)> {
        self.check_input(g, xs)?;
        let f1 = Self::run_direction(g, &self.layers[0].forward, xs, false)?;
        let b1 = Self::run_direction(g, &self.layers[0].backward, xs, true)?;
        let mid = f1
            .iter()
            .zip(&b1)
            .map(|(&f, &b)| g.concat_rows(&[f, b]))
            .collect::<Result<Vec<_>>>()?;
        let f2 = Self::run_direction(g, &self.layers[1].forward, &mid, false)?;
        let b2 = Self::run_direction(g, &self.layers[1].backward, &mid, true)?;
        Ok((f2, b2))
    }

    /// Clip summary: layer-2 forward hidden at the last step concatenated
    /// with layer-2 backward hidden at the first step (`2H × m`).
    pub fn encode(&self, g: &mut Graph, xs: &[Var]) -> Result<Var> {
        let (f2, b2) = self.run(g, xs)?;
        g.concat_rows(&[*f2.last().unwrap(), b2[0]])
    }

    /// Per-step layer-2 outputs, each `2H × m`.
    pub fn sequence(&self, g: &mut Graph, xs: &[Var]) -> Result<Vec<Var>> {
        let (f2, b2) = self.run(g, xs)?;
        f2.iter()
            .zip(&b2)
            .map(|(&f, &b)| g.concat_rows(&[f, b]))
            .collect()
    }

    /// Encodes one `T × D` sequence (one row per step).
    pub fn eval_encode(&self, store: &ParamStore, seq: &Tensor2) -> Result<Vec<f64>> {
        if seq.rows() == 0 {
            return Err(Error::Input("empty sequence".into()));
        }
        if seq.cols() != self.input {
            return Err(Error::dim("bilstm_encode", (seq.rows(), self.input), seq.shape()));
        }
        let mut g = Graph::new(store, Trainable::None);
        let xs: Vec<Var> = (0..seq.rows())
            .map(|t| g.constant(Tensor2::column(seq.row(t))))
            .collect();
        let out = self.encode(&mut g, &xs)?;
        Ok(g.value(out).data().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::sigmoid;

    #[test]
    fn dense_identity() {
        let layer = DenseLayer::new("d", 2, 2, Activation::Identity);
        let mut s = ParamStore::new();
        s.insert(layer.weight_name(), Tensor2::identity(2)).unwrap();
        s.insert(layer.bias_name(), Tensor2::zeros(2, 1)).unwrap();
        assert_eq!(layer.eval(&s, &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn dense_tanh_hand_value() {
        let layer = DenseLayer::new("d", 2, 1, Activation::Tanh);
        let mut s = ParamStore::new();
        s.insert(layer.weight_name(), Tensor2::from_vec(1, 2, vec![1.0, 1.0]).unwrap()).unwrap();
        s.insert(layer.bias_name(), Tensor2::filled(1, 1, 0.5)).unwrap();
        let y = layer.eval(&s, &[0.25, 0.25]).unwrap();
        assert!((y[0] - 1.0f64.tanh()).abs() < 1e-15);
        assert!((y[0] - 0.7616).abs() < 1e-4);
    }

    #[test]
    fn dense_rejects_wrong_width() {
        let layer = DenseLayer::new("d", 2, 1, Activation::Tanh);
        let mut s = ParamStore::new();
        layer.init(&mut s, &mut Rng::new(1)).unwrap();
        assert!(matches!(layer.eval(&s, &[1.0, 2.0, 3.0]), Err(Error::Dimension { .. })));
    }

    fn zero_cell(input: usize, hidden: usize) -> (LstmCell, ParamStore) {
        let cell = LstmCell::new("c", input, hidden);
        let mut s = ParamStore::new();
        cell.init(&mut s, &mut Rng::new(0)).unwrap();
        for (_, p) in s.iter_mut() {
            p.value.data_mut().fill(0.0);
        }
        (cell, s)
    }

    #[test]
    fn lstm_zero_everything_gives_zero_state() {
        let (cell, s) = zero_cell(2, 3);
        let (h, c) = cell.eval_step(&s, &[0.0; 2], &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
    }

    #[test]
    fn saturated_forget_gate_passes_cell_state() {
        let (cell, mut s) = zero_cell(1, 1);
        s.set("c.b_f", Tensor2::filled(1, 1, 10.0)).unwrap();
        let (_, c) = cell.eval_step(&s, &[0.0], &[0.0], &[1.0]).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-4);
        assert!((c[0] - sigmoid(10.0)).abs() < 1e-15);
    }

    #[test]
    fn lstm_rejects_wrong_state_length() {
        let (cell, s) = zero_cell(2, 3);
        assert!(cell.eval_step(&s, &[0.0; 2], &[0.0; 2], &[0.0; 3]).is_err());
    }

    #[test]
    fn forget_bias_initialised_to_one() {
        let cell = LstmCell::new("c", 3, 2);
        let mut s = ParamStore::new();
        cell.init(&mut s, &mut Rng::new(9)).unwrap();
        assert_eq!(s.value("c.b_f").unwrap().data(), &[1.0, 1.0]);
        assert_eq!(s.value("c.b_i").unwrap().data(), &[0.0, 0.0]);
        let bound = 1.0 / 3f64.sqrt();
        assert!(s.value("c.W_g").unwrap().max_abs() <= bound);
    }

    #[test]
    fn bilstm_rejects_empty_and_wrong_width() {
        let stack = BiLstmStack::new("s", 3, 2);
        let mut s = ParamStore::new();
        stack.init(&mut s, &mut Rng::new(4)).unwrap();
        assert!(matches!(
            stack.eval_encode(&s, &Tensor2::zeros(0, 3)),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            stack.eval_encode(&s, &Tensor2::zeros(4, 2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn bilstm_output_width_independent_of_length() {
        let stack = BiLstmStack::new("s", 3, 5);
        let mut s = ParamStore::new();
        stack.init(&mut s, &mut Rng::new(4)).unwrap();
        for t in [1, 2, 7] {
            let out = stack.eval_encode(&s, &Tensor2::filled(t, 3, 0.3)).unwrap();
            assert_eq!(out.len(), 10);
            assert!(out.iter().all(|v| v.abs() < 1.0));
        }
    }
}
