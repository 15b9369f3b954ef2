use serde::{Deserialize, Serialize};

use super::real::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for a fixed list of parameter arrays.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            m: sizes.iter().map(|n| vec![0.0; *n]).collect(),
            v: sizes.iter().map(|n| vec![0.0; *n]).collect(),
        }
    }

    /// One bias-corrected update. `names` only feeds the error message.
    ///
    /// A non-finite gradient aborts before any parameter is touched.
    pub fn step<T: Real>(&mut self, params: &mut [&mut [T]], grads: &[&[T]], names: &[&str]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "adam: {} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != p.len() {
                return Err(Error::Dimension(format!("adam: slot {i} size mismatch")));
            }
            if let Some(j) = g.iter().position(|x| !x.is_finite()) {
                let name = names.get(i).copied().unwrap_or("?");
                return Err(Error::Numeric(format!(
                    "non-finite gradient at step {} in `{name}`[{j}] = {:?}",
                    self.step + 1,
                    g[j]
                )));
            }
        }
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            for (j, (pv, gv)) in p.iter_mut().zip(g.iter()).enumerate() {
                let gv = gv.to_f64();
                let m = &mut self.m[i][j];
                let v = &mut self.v[i][j];
                *m = c.beta1 * *m + (1.0 - c.beta1) * gv;
                *v = c.beta2 * *v + (1.0 - c.beta2) * gv * gv;
                let update = c.lr * (*m / bc1) / ((*v / bc2).sqrt() + c.eps);
                *pv = T::from_f64(pv.to_f64() - update);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut st = AdamState::new(AdamConfig::default(), &[3]);
        let mut p = vec![1.0f32, -2.0, 0.5];
        let before = p.clone();
        st.step(&mut [&mut p[..]], &[&[0.0f32; 3][..]], &["p"]).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let cfg = AdamConfig { lr: 1e-3, ..AdamConfig::default() };
        for g in [3.7f64, -0.02, 250.0] {
            let mut st = AdamState::new(cfg, &[1]);
            let mut p = [0.0f64];
            st.step(&mut [&mut p[..]], &[&[g][..]], &["x"]).unwrap();
            assert!((p[0] + cfg.lr * g.signum()).abs() < 1e-9, "g={g} p={}", p[0]);
        }
    }

    #[test]
    fn converges_on_shifted_parabola() {
        let mut st = AdamState::new(AdamConfig { lr: 0.1, ..AdamConfig::default() }, &[1]);
        let mut x = [0.0f64];
        for _ in 0..200 {
            let g = [2.0 * (x[0] - 3.0)];
            st.step(&mut [&mut x[..]], &[&g[..]], &["x"]).unwrap();
        }
        assert!((x[0] - 3.0).abs() < 0.1, "x = {}", x[0]);
    }

    #[test]
    fn nan_gradient_aborts_untouched() {
        let mut st = AdamState::new(AdamConfig::default(), &[2]);
        let mut p = [1.0f32, 2.0];
        let err = st.step(&mut [&mut p[..]], &[&[0.5, f32::NAN][..]], &["w"]).unwrap_err();
        assert!(matches!(err, Error::Numeric(ref m) if m.contains("`w`[1]")), "{err}");
        assert_eq!(p, [1.0, 2.0]);
        assert_eq!(st.step, 0);
    }
}
