//! Probability distributions of the random inputs and their orthogonal
//! polynomial recurrences.

use serde::{Deserialize, Serialize};

use crate::{Result, SgError};

/// Distribution of one random input, together with its support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Uniform {
        a: f64,
        b: f64,
    },
    Normal {
        mu: f64,
        sigma: f64,
    },
    Exponential {
        lambda: f64,
    },
    /// Density proportional to `y^alpha * exp(-beta * y)` on `[0, inf)`.
    Gamma {
        alpha: f64,
        beta: f64,
    },
    /// Density proportional to `(y-a)^alpha * (b-y)^beta` on `[a, b]`.
    Beta {
        a: f64,
        b: f64,
        alpha: f64,
        beta: f64,
    },
}

impl Distribution {
    pub fn uniform(a: f64, b: f64) -> Self {
        Distribution::Uniform { a, b }
    }

    pub fn normal(mu: f64, sigma: f64) -> Self {
        Distribution::Normal { mu, sigma }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        match *self {
            Distribution::Uniform { a, b } => {
                if !(finite(a) && finite(b) && a < b) {
                    return Err(SgError::Domain { a, b });
                }
            }
            Distribution::Normal { mu, sigma } => {
                if !(finite(mu) && finite(sigma) && sigma > 0.0) {
                    return Err(SgError::Parameter(format!("normal requires sigma > 0, got {sigma}")));
                }
            }
            Distribution::Exponential { lambda } => {
                if !(finite(lambda) && lambda > 0.0) {
                    return Err(SgError::Parameter(format!("exponential requires lambda > 0, got {lambda}")));
                }
            }
            Distribution::Gamma { alpha, beta } => {
                if !(finite(alpha) && finite(beta) && alpha > -1.0 && beta > 0.0) {
                    return Err(SgError::Parameter(format!(
                        "gamma requires alpha > -1 and beta > 0, got alpha={alpha}, beta={beta}"
                    )));
                }
            }
            Distribution::Beta { a, b, alpha, beta } => {
                if !(finite(a) && finite(b) && a < b) {
                    return Err(SgError::Domain { a, b });
                }
                if !(finite(alpha) && finite(beta) && alpha > -1.0 && beta > -1.0) {
                    return Err(SgError::Parameter(format!(
                        "beta requires alpha, beta > -1, got alpha={alpha}, beta={beta}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Support of the density; unbounded ends are infinite.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Uniform { a, b } | Distribution::Beta { a, b, .. } => (a, b),
            Distribution::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Distribution::Exponential { .. } | Distribution::Gamma { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn is_bounded(&self) -> bool {
        let (lo, hi) = self.support();
        lo.is_finite() && hi.is_finite()
    }

    /// Natural log of the density; `-inf` outside the support.
    pub fn ln_pdf(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y < lo || y > hi {
            return f64::NEG_INFINITY;
        }
        match *self {
            Distribution::Uniform { a, b } => -(b - a).ln(),
            Distribution::Normal { mu, sigma } => {
                let z = (y - mu) / sigma;
                -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            Distribution::Exponential { lambda } => lambda.ln() - lambda * y,
            Distribution::Gamma { alpha, beta } => {
                (alpha + 1.0) * beta.ln() - ln_gamma(alpha + 1.0) + alpha * y.ln() - beta * y
            }
            Distribution::Beta { a, b, alpha, beta } => {
                ln_gamma(alpha + beta + 2.0)
                    - ln_gamma(alpha + 1.0)
                    - ln_gamma(beta + 1.0)
                    - (alpha + beta + 1.0) * (b - a).ln()
                    + alpha * (y - a).ln()
                    + beta * (b - y).ln()
            }
        }
    }

    /// Derivative of [`Distribution::ln_pdf`] inside the support.
    pub fn d_ln_pdf(&self, y: f64) -> f64 {
        match *self {
            Distribution::Uniform { .. } => 0.0,
            Distribution::Normal { mu, sigma } => -(y - mu) / (sigma * sigma),
            Distribution::Exponential { lambda } => -lambda,
            Distribution::Gamma { alpha, beta } => alpha / y - beta,
            Distribution::Beta { a, b, alpha, beta } => alpha / (y - a) - beta / (b - y),
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.ln_pdf(y).exp()
    }

    /// Monic three-term recurrence coefficients `(alpha_k, beta_k)`,
    /// `k = 0..n`, of the polynomials orthogonal against this density:
    /// `p_{k+1}(y) = (y - alpha_k) p_k(y) - beta_k p_{k-1}(y)`.
    /// `beta_0` is the total mass, i.e. 1.
    pub fn recurrence(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut alpha = Vec::with_capacity(n);
        let mut beta = Vec::with_capacity(n);
        for k in 0..n {
            let kf = k as f64;
            let (ak, bk) = match *self {
                Distribution::Uniform { a, b } => {
                    let h = 0.5 * (b - a);
                    let bk = if k == 0 { 1.0 } else { h * h * kf * kf / (4.0 * kf * kf - 1.0) };
                    (0.5 * (a + b), bk)
                }
                Distribution::Normal { mu, sigma } => (mu, if k == 0 { 1.0 } else { kf * sigma * sigma }),
                Distribution::Exponential { lambda } => {
                    ((2.0 * kf + 1.0) / lambda, if k == 0 { 1.0 } else { kf * kf / (lambda * lambda) })
                }
                Distribution::Gamma { alpha: al, beta: be } => {
                    ((2.0 * kf + al + 1.0) / be, if k == 0 { 1.0 } else { kf * (kf + al) / (be * be) })
                }
                Distribution::Beta { a, b, alpha: al, beta: be } => {
                    // (y-a)^al (b-y)^be maps to the Jacobi weight (1-x)^be (1+x)^al
                    let (aj, bj) = jacobi_recurrence(k, be, al);
                    let c = 0.5 * (a + b);
                    let h = 0.5 * (b - a);
                    (c + h * aj, if k == 0 { 1.0 } else { h * h * bj })
                }
            };
            alpha.push(ak);
            beta.push(bk);
        }
        (alpha, beta)
    }
}

/// Monic recurrence of the Jacobi polynomials for the weight
/// `(1-x)^p (1+x)^q` on `[-1, 1]`; `beta_0` is left to the caller.
pub(crate) fn jacobi_recurrence(k: usize, p: f64, q: f64) -> (f64, f64) {
    let kf = k as f64;
    let s = 2.0 * kf + p + q;
    let alpha = if k == 0 { (q - p) / (p + q + 2.0) } else { (q * q - p * p) / (s * (s + 2.0)) };
    let beta = match k {
        0 => 1.0,
        1 => 4.0 * (1.0 + p) * (1.0 + q) / ((2.0 + p + q).powi(2) * (3.0 + p + q)),
        _ => 4.0 * kf * (kf + p) * (kf + q) * (kf + p + q) / (s * s * (s + 1.0) * (s - 1.0)),
    };
    (alpha, beta)
}

/// Lanczos approximation of `ln Γ(x)` for `x > 0` (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}
