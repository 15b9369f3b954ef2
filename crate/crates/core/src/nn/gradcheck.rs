use super::tape::{Tape, Tensor, Var};
use crate::error::Result;

/// Worst relative disagreement between the tape gradient and central finite
/// differences over every coordinate of `params`.
///
/// `f` must build a scalar on an eval tape; it is rerun once per perturbation.
pub fn grad_check<F>(params: &[Tensor<f64>], h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::eval();
        let vars: Vec<Var> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.scalar(out))
    };

    let mut tape = Tape::eval();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut work: Vec<Tensor<f64>> = params.to_vec();
    let mut worst = 0.0f64;
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; params[pi].values.len()]);
        for (j, a) in analytic.iter().enumerate() {
            let orig = work[pi].values[j];
            work[pi].values[j] = orig + h;
            let up = eval(&work)?;
            work[pi].values[j] = orig - h;
            let down = eval(&work)?;
            work[pi].values[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let den = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / den);
        }
    }
    Ok(worst)
}
