//! Derivative-free minimisation (Nelder–Mead simplex).

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub trace: Vec<Evaluation>,
}

#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub initial_step: f64,
    pub max_evaluations: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tolerance: f64,
    /// ... and the simplex diameter falls below this.
    pub x_tolerance: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { initial_step: 0.5, max_evaluations: 400, f_tolerance: 1e-9, x_tolerance: 1e-7 }
    }
}

impl NelderMead {
    /// Minimise `f` from `x0`. Non-finite values are treated as `+∞`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut trace = Vec::new();
        let mut eval = |x: &[f64], trace: &mut Vec<Evaluation>| {
            let v = f(x);
            let v = if v.is_finite() { v } else { f64::INFINITY };
            trace.push(Evaluation { x: x.to_vec(), value: v });
            v
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = eval(x0, &mut trace);
        simplex.push((x0.to_vec(), v0));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += self.initial_step;
            let v = eval(&x, &mut trace);
            simplex.push((x, v));
        }
        let mut converged = false;
        while trace.len() < self.max_evaluations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            let diameter = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if best.is_finite() && (worst - best).abs() <= self.f_tolerance && diameter <= self.x_tolerance {
                converged = true;
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (w - c)).collect()
            };
            let xr = along(-1.0);
            let fr = eval(&xr, &mut trace);
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = eval(&xe, &mut trace);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let x = along(-0.5);
                    let v = eval(&x, &mut trace);
                    (x, v)
                } else {
                    let x = along(0.5);
                    let v = eval(&x, &mut trace);
                    (x, v)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for item in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> =
                            x_best.iter().zip(&item.0).map(|(b, p)| b + 0.5 * (p - b)).collect();
                        let v = eval(&x, &mut trace);
                        *item = (x, v);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum { x, value, evaluations: trace.len(), converged, trace }
    }
}
