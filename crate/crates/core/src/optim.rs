//! Nelder–Mead simplex minimization.

use crate::{Result, SgError};

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMead {
    /// Stop when every vertex is within this distance (max norm) of the best.
    pub diameter_tol: f64,
    pub max_iter: usize,
    /// Box constraints; iterates leaving the box are reflected back into it.
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { diameter_tol: 1e-8, max_iter: 2000, bounds: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NelderMead {
    fn project(&self, x: &mut [f64]) {
        if let Some((lo, hi)) = &self.bounds {
            for n in 0..x.len() {
                if x[n] < lo[n] {
                    x[n] = lo[n] + (lo[n] - x[n]);
                }
                if x[n] > hi[n] {
                    x[n] = hi[n] - (x[n] - hi[n]);
                }
                x[n] = x[n].clamp(lo[n], hi[n]);
            }
        }
    }

    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, start: &[f64]) -> Result<Minimum> {
        let dim = start.len();
        if dim == 0 {
            return Err(SgError::Parameter("cannot minimize over zero variables".into()));
        }
        if let Some((lo, hi)) = &self.bounds {
            if lo.len() != dim || hi.len() != dim {
                return Err(SgError::DimensionMismatch { expected: dim, got: lo.len().min(hi.len()) });
            }
            for n in 0..dim {
                if !(lo[n] < hi[n]) {
                    return Err(SgError::Domain { a: lo[n], b: hi[n] });
                }
            }
        }
        let mut x0 = start.to_vec();
        self.project(&mut x0);
        let f0 = f(&x0);
        if !f0.is_finite() {
            return Err(SgError::Numerical(format!("objective is not finite at the starting point {x0:?}")));
        }
        let mut simplex = vec![(x0.clone(), f0)];
        for n in 0..dim {
            let step = match &self.bounds {
                Some((lo, hi)) => 0.05 * (hi[n] - lo[n]),
                None => 0.05 * x0[n].abs().max(1.0),
            };
            let mut x = x0.clone();
            x[n] += step;
            if let Some((_, hi)) = &self.bounds {
                if x[n] > hi[n] {
                    x[n] = x0[n] - step;
                }
            }
            self.project(&mut x);
            let v = f(&x);
            simplex.push((x, v));
        }
        let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
        let mut iterations = 0;
        let mut converged = false;
        let point = |c: &[f64], d: &[f64], t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = c.iter().zip(d).map(|(a, b)| a + t * (b - a)).collect();
            self.project(&mut x);
            x
        };
        while iterations < self.max_iter {
            simplex.sort_by(|a, b| key(a.1).total_cmp(&key(b.1)));
            let best = &simplex[0].0;
            let diameter = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if diameter < self.diameter_tol {
                converged = true;
                break;
            }
            iterations += 1;
            let mut centroid = vec![0.0; dim];
            for (x, _) in &simplex[..dim] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / dim as f64;
                }
            }
            let worst = simplex[dim].clone();
            let xr = point(&centroid, &worst.0, -1.0);
            let fr = f(&xr);
            if key(fr) < key(simplex[0].1) {
                let xe = point(&centroid, &worst.0, -2.0);
                let fe = f(&xe);
                simplex[dim] = if key(fe) < key(fr) { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if key(fr) < key(simplex[dim - 1].1) {
                simplex[dim] = (xr, fr);
                continue;
            }
            let (xc, fc) = if key(fr) < key(worst.1) {
                let xc = point(&centroid, &worst.0, -0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = point(&centroid, &worst.0, 0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if key(fc) < key(worst.1.min(fr)) {
                simplex[dim] = (xc, fc);
                continue;
            }
            let b = simplex[0].0.clone();
            for (x, v) in simplex.iter_mut().skip(1) {
                *x = point(&b, x, 0.5);
                *v = f(x);
            }
        }
        simplex.sort_by(|a, b| key(a.1).total_cmp(&key(b.1)));
        let (x, value) = simplex.swap_remove(0);
        Ok(Minimum { x, value, iterations, converged })
    }
}

/// Nelder–Mead with default settings.
pub fn minimize(f: impl Fn(&[f64]) -> f64, start: &[f64]) -> Result<Minimum> {
    NelderMead::default().minimize(f, start)
}
