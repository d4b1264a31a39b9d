//! Central-difference verification of tape gradients.

use super::{Graph, ParamStore, Tensor2, Trainable, Var};
use crate::error::{Error, Result};

/// Per-parameter analytic gradients from one backward pass.
pub fn analytic_gradients<F>(loss_fn: &F, store: &ParamStore) -> Result<Vec<(String, Tensor2)>>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let mut scratch = store.clone();
    scratch.zero_grad();
    let mut g = Graph::new(store, Trainable::All);
    let loss = loss_fn(&mut g)?;
    check_finite(g.value(loss).get(0, 0))?;
    for (name, grad) in g.gradients(loss)? {
        scratch.accumulate(&name, &grad)?;
    }
    Ok(scratch
        .iter()
        .map(|(n, p)| (n.to_string(), p.grad.clone()))
        .collect())
}

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("loss evaluated to {v}")))
    }
}

fn eval_loss<F>(loss_fn: &F, store: &ParamStore) -> Result<f64>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let mut g = Graph::new(store, Trainable::None);
    let loss = loss_fn(&mut g)?;
    check_finite(g.value(loss).get(0, 0))
}

/// Central differences `(L(θ+ε) − L(θ−ε)) / 2ε` for every entry.
pub fn numeric_gradients<F>(loss_fn: &F, store: &ParamStore, eps: f64) -> Result<Vec<(String, Tensor2)>>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(Error::Contract(format!("perturbation must be positive, got {eps}")));
    }
    let mut work = store.clone();
    let names: Vec<String> = store.names().map(str::to_string).collect();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let (rows, cols) = store.value(&name)?.shape();
        let mut grad = Tensor2::zeros(rows, cols);
        for i in 0..rows * cols {
            let orig = work.value(&name)?.data()[i];
            work.get_mut(&name).unwrap().value.data_mut()[i] = orig + eps;
            let plus = eval_loss(loss_fn, &work)?;
            work.get_mut(&name).unwrap().value.data_mut()[i] = orig - eps;
            let minus = eval_loss(loss_fn, &work)?;
            work.get_mut(&name).unwrap().value.data_mut()[i] = orig;
            grad.data_mut()[i] = (plus - minus) / (2.0 * eps);
        }
        out.push((name, grad));
    }
    Ok(out)
}

/// `max |a − n| / max(|a|, |n|, 1e−12)` over all entries.
pub fn max_relative_error(analytic: &[(String, Tensor2)], numeric: &[(String, Tensor2)]) -> Result<f64> {
    if analytic.len() != numeric.len() {
        return Err(Error::Contract("gradient sets cover different parameters".into()));
    }
    let mut worst = 0.0f64;
    for ((na, a), (nn, n)) in analytic.iter().zip(numeric) {
        if na != nn || a.shape() != n.shape() {
            return Err(Error::Contract(format!("gradient mismatch for {na} / {nn}")));
        }
        for (&x, &y) in a.data().iter().zip(n.data()) {
            let denom = x.abs().max(y.abs()).max(1e-12);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    Ok(worst)
}

/// Maximum relative error between tape gradients and central differences.
pub fn grad_check<F>(loss_fn: F, store: &ParamStore, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let numeric = numeric_gradients(&loss_fn, store, eps)?;
    let analytic = analytic_gradients(&loss_fn, store)?;
    max_relative_error(&analytic, &numeric)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_of_squares(g: &mut Graph) -> Result<Var> {
        let theta = g.param("theta")?;
        let sq = g.mul(theta, theta)?;
        let m = g.mean(sq)?;
        g.scale(m, 2.0)
    }

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("theta", Tensor2::column(&[1.0, 2.0])).unwrap();
        s
    }

    #[test]
    fn exact_for_quadratic() {
        let err = grad_check(sum_of_squares, &store(), 1e-5).unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn detects_a_corrupted_gradient() {
        let s = store();
        let numeric = numeric_gradients(&sum_of_squares, &s, 1e-5).unwrap();
        let mut analytic = analytic_gradients(&sum_of_squares, &s).unwrap();
        analytic[0].1.data_mut()[1] *= 2.0;
        let err = max_relative_error(&analytic, &numeric).unwrap();
        assert!(err > 0.3, "{err}");
    }

    #[test]
    fn rejects_bad_eps_and_non_finite_loss() {
        assert!(grad_check(sum_of_squares, &store(), 0.0).is_err());
        let blowup = |g: &mut Graph| -> Result<Var> {
            let t = g.param("theta")?;
            let k = g.constant(Tensor2::column(&[f64::NAN, 0.0]));
            let p = g.add(t, k)?;
            g.mean(p)
        };
        assert!(matches!(grad_check(blowup, &store(), 1e-5), Err(Error::Numeric(_))));
    }
}
