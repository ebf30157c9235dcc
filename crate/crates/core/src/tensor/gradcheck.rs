use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences and returns the largest
/// `|analytic − numeric| / max(1, |analytic|)` over every parameter entry.
///
/// `f` receives a fresh graph and one variable per entry of `params` and
/// must return a scalar. Runs in `f64` only.
pub fn grad_check<F>(f: F, params: &[Tensor<f64>], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    if eps.is_nan() || eps <= 0.0 || eps.is_infinite() {
        return Err(Error::InvalidEps(eps));
    }

    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let loss = f(&mut g, &vars)?;
    g.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| g.grad(v).map_or_else(|| vec![0.0; p.len()], <[f64]>::to_vec))
        .collect();

    let eval = |ps: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ps.iter().map(|p| g.leaf(p.clone())).collect();
        let out = f(&mut g, &vars)?;
        let v = g.value(out);
        if v.len() != 1 {
            return Err(Error::NotScalar(v.shape().to_vec()));
        }
        Ok(v.data()[0])
    };

    let mut work: Vec<Tensor<f64>> = params.to_vec();
    let mut worst = 0.0f64;
    for (pi, grads) in analytic.iter().enumerate() {
        for (ei, &a) in grads.iter().enumerate() {
            let orig = work[pi].data()[ei];
            work[pi].data_mut()[ei] = orig + eps;
            let up = eval(&work)?;
            work[pi].data_mut()[ei] = orig - eps;
            let down = eval(&work)?;
            work[pi].data_mut()[ei] = orig;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}
