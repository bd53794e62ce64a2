use serde::{Deserialize, Serialize};

use super::{
    cc_knots, gauss_knots, gk_knots, leja_knots, midpoint_knots, trap_knots, weighted_leja_knots, Distribution,
    LejaVariant, Rule1D, WeightedLejaVariant,
};
use crate::levels::LevelMap;
use crate::{Result, SgError};

/// A univariate knot generator bound to its distribution and interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KnotFamily {
    Gauss { dist: Distribution },
    ClenshawCurtis { a: f64, b: f64 },
    Leja { a: f64, b: f64, variant: LejaVariant },
    WeightedLeja { dist: Distribution, variant: WeightedLejaVariant },
    Trap { a: f64, b: f64 },
    Midpoint { a: f64, b: f64 },
    GenzKeister { mu: f64, sigma: f64 },
}

impl KnotFamily {
    /// Gauss–Legendre on `[a, b]`.
    pub fn gauss_uniform(a: f64, b: f64) -> Self {
        KnotFamily::Gauss { dist: Distribution::uniform(a, b) }
    }

    pub fn rule(&self, count: usize) -> Result<Rule1D> {
        match *self {
            KnotFamily::Gauss { dist } => gauss_knots(&dist, count),
            KnotFamily::ClenshawCurtis { a, b } => cc_knots(count, a, b),
            KnotFamily::Leja { a, b, variant } => leja_knots(count, a, b, variant),
            KnotFamily::WeightedLeja { dist, variant } => weighted_leja_knots(count, &dist, variant),
            KnotFamily::Trap { a, b } => trap_knots(count, a, b),
            KnotFamily::Midpoint { a, b } => midpoint_knots(count, a, b),
            KnotFamily::GenzKeister { mu, sigma } => {
                Distribution::normal(mu, sigma).validate()?;
                let r = gk_knots(count)?;
                Ok(Rule1D { nodes: r.nodes.iter().map(|&t| mu + sigma * t).collect(), weights: r.weights })
            }
        }
    }

    /// Density the weights are normalized against.
    pub fn distribution(&self) -> Distribution {
        match *self {
            KnotFamily::Gauss { dist } | KnotFamily::WeightedLeja { dist, .. } => dist,
            KnotFamily::ClenshawCurtis { a, b }
            | KnotFamily::Leja { a, b, .. }
            | KnotFamily::Trap { a, b }
            | KnotFamily::Midpoint { a, b } => Distribution::uniform(a, b),
            KnotFamily::GenzKeister { mu, sigma } => Distribution::normal(mu, sigma),
        }
    }

    /// Whether consecutive levels of `map` produce nested node sets.
    pub fn nested_with(&self, map: LevelMap) -> bool {
        use LevelMap::*;
        match *self {
            KnotFamily::Gauss { .. } => false,
            KnotFamily::Leja { variant: LejaVariant::Symmetric, .. }
            | KnotFamily::WeightedLeja { variant: WeightedLejaVariant::Symmetric, .. } => {
                matches!(map, TwoStep | Doubling)
            }
            KnotFamily::Leja { .. } | KnotFamily::WeightedLeja { .. } => matches!(map, Linear | TwoStep | Doubling),
            KnotFamily::ClenshawCurtis { .. } | KnotFamily::Trap { .. } => map == Doubling,
            KnotFamily::Midpoint { .. } => map == Tripling,
            KnotFamily::GenzKeister { .. } => map == Gk,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KnotFamily::Gauss { .. } => "gauss",
            KnotFamily::ClenshawCurtis { .. } => "clenshaw_curtis",
            KnotFamily::Leja { .. } => "leja",
            KnotFamily::WeightedLeja { .. } => "weighted_leja",
            KnotFamily::Trap { .. } => "trap",
            KnotFamily::Midpoint { .. } => "midpoint",
            KnotFamily::GenzKeister { .. } => "genz_keister",
        }
    }

    /// The level map under which the family is nested, or linear.
    pub fn default_level_map(&self) -> LevelMap {
        match *self {
            KnotFamily::ClenshawCurtis { .. } | KnotFamily::Trap { .. } => LevelMap::Doubling,
            KnotFamily::Midpoint { .. } => LevelMap::Tripling,
            KnotFamily::GenzKeister { .. } => LevelMap::Gk,
            KnotFamily::Leja { variant: LejaVariant::Symmetric, .. }
            | KnotFamily::WeightedLeja { variant: WeightedLejaVariant::Symmetric, .. } => LevelMap::TwoStep,
            _ => LevelMap::Linear,
        }
    }

    /// Family from a short name and its two parameters: the interval `(a, b)`
    /// for uniform families, `(mu, sigma)` for the normal ones.
    ///
    /// Names: `cc`, `leja`, `leja_sym`, `leja_pdisk`, `gauss`, `gauss_normal`,
    /// `wleja`, `wleja_sym`, `wleja_normal`, `wleja_normal_sym`, `trap`,
    /// `midpoint`, `gk`.
    pub fn from_name(name: &str, p: f64, q: f64) -> Result<Self> {
        let fam = match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "cc" | "clenshaw_curtis" => KnotFamily::ClenshawCurtis { a: p, b: q },
            "leja" => KnotFamily::Leja { a: p, b: q, variant: LejaVariant::Standard },
            "leja_sym" => KnotFamily::Leja { a: p, b: q, variant: LejaVariant::Symmetric },
            "leja_pdisk" => KnotFamily::Leja { a: p, b: q, variant: LejaVariant::PDisk },
            "gauss" | "gauss_legendre" => KnotFamily::gauss_uniform(p, q),
            "gauss_normal" | "gauss_hermite" => KnotFamily::Gauss { dist: Distribution::normal(p, q) },
            "wleja" => {
                KnotFamily::WeightedLeja { dist: Distribution::uniform(p, q), variant: WeightedLejaVariant::Standard }
            }
            "wleja_sym" => {
                KnotFamily::WeightedLeja { dist: Distribution::uniform(p, q), variant: WeightedLejaVariant::Symmetric }
            }
            "wleja_normal" => {
                KnotFamily::WeightedLeja { dist: Distribution::normal(p, q), variant: WeightedLejaVariant::Standard }
            }
            "wleja_normal_sym" => {
                KnotFamily::WeightedLeja { dist: Distribution::normal(p, q), variant: WeightedLejaVariant::Symmetric }
            }
            "trap" => KnotFamily::Trap { a: p, b: q },
            "midpoint" => KnotFamily::Midpoint { a: p, b: q },
            "gk" | "genz_keister" => KnotFamily::GenzKeister { mu: p, sigma: q },
            other => return Err(SgError::Config(format!("unknown knot family '{other}'"))),
        };
        fam.distribution().validate()?;
        Ok(fam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moment(dist: &Distribution, k: i32) -> f64 {
        // closed forms for E[y^k]
        match *dist {
            Distribution::Uniform { a, b } => (b.powi(k + 1) - a.powi(k + 1)) / ((k + 1) as f64 * (b - a)),
            Distribution::Normal { mu, sigma } => {
                // binomial expansion over central moments
                let mut s = 0.0;
                for j in (0..=k).step_by(2) {
                    let dfact: f64 = (1..j).step_by(2).map(|v| v as f64).product();
                    s += binom(k, j) * mu.powi(k - j) * sigma.powi(j) * dfact;
                }
                s
            }
            Distribution::Exponential { lambda } => (1..=k).map(|v| v as f64).product::<f64>() / lambda.powi(k),
            Distribution::Gamma { alpha, beta } => (1..=k).map(|v| alpha + v as f64).product::<f64>() / beta.powi(k),
            Distribution::Beta { a, b, alpha, beta } => {
                // y = a + (b-a) x, x ~ Beta(alpha+1, beta+1)
                let mut s = 0.0;
                for j in 0..=k {
                    let ex: f64 = (0..j).map(|r| (alpha + 1.0 + r as f64) / (alpha + beta + 2.0 + r as f64)).product();
                    s += binom(k, j) * a.powi(k - j) * (b - a).powi(j) * ex;
                }
                s
            }
        }
    }

    fn binom(n: i32, k: i32) -> f64 {
        (0..k).map(|j| (n - j) as f64 / (j + 1) as f64).product()
    }

    fn all_dists() -> Vec<Distribution> {
        vec![
            Distribution::uniform(-1.0, 3.0),
            Distribution::normal(0.5, 2.0),
            Distribution::Exponential { lambda: 1.5 },
            Distribution::Gamma { alpha: 1.5, beta: 2.0 },
            Distribution::Beta { a: -1.0, b: 2.0, alpha: 2.0, beta: 0.5 },
        ]
    }

    #[test]
    fn gauss_exactness_all_distributions() {
        for dist in all_dists() {
            for k in 1..=8usize {
                let r = KnotFamily::Gauss { dist }.rule(k).unwrap();
                for deg in 0..=(2 * k as i32 - 1) {
                    let exact = moment(&dist, deg);
                    let q = r.integrate(|x| x.powi(deg));
                    assert!(
                        (q - exact).abs() <= 1e-10 * exact.abs().max(1.0),
                        "{dist:?} k={k} deg={deg}: {q} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn pdf_integrates_to_one_on_bounded_supports() {
        for dist in [Distribution::uniform(-1.0, 3.0), Distribution::Beta { a: 0.0, b: 2.0, alpha: 2.0, beta: 3.0 }] {
            let (a, b) = dist.support();
            let r = super::super::gauss_knots(&Distribution::uniform(a, b), 40).unwrap();
            let total = (b - a) * r.integrate(|y| dist.pdf(y));
            assert!((total - 1.0).abs() < 1e-10, "{dist:?}: {total}");
        }
    }

    fn families() -> Vec<KnotFamily> {
        let n = Distribution::normal(0.0, 1.0);
        vec![
            KnotFamily::gauss_uniform(0.0, 1.0),
            KnotFamily::ClenshawCurtis { a: 0.0, b: 1.0 },
            KnotFamily::Leja { a: 0.0, b: 1.0, variant: LejaVariant::Standard },
            KnotFamily::Leja { a: 0.0, b: 1.0, variant: LejaVariant::Symmetric },
            KnotFamily::Leja { a: 0.0, b: 1.0, variant: LejaVariant::PDisk },
            KnotFamily::WeightedLeja { dist: n, variant: WeightedLejaVariant::Standard },
            KnotFamily::WeightedLeja { dist: n, variant: WeightedLejaVariant::Symmetric },
            KnotFamily::WeightedLeja {
                dist: Distribution::Exponential { lambda: 1.0 },
                variant: WeightedLejaVariant::Standard,
            },
            KnotFamily::WeightedLeja {
                dist: Distribution::Gamma { alpha: 1.0, beta: 1.0 },
                variant: WeightedLejaVariant::Standard,
            },
            KnotFamily::WeightedLeja {
                dist: Distribution::Beta { a: 0.0, b: 1.0, alpha: 1.0, beta: 1.0 },
                variant: WeightedLejaVariant::Symmetric,
            },
            KnotFamily::Trap { a: 0.0, b: 1.0 },
            KnotFamily::Midpoint { a: 0.0, b: 1.0 },
        ]
    }

    #[test]
    fn weights_sum_to_one_up_to_ten_knots() {
        for fam in families() {
            for k in 1..=10 {
                let r = fam.rule(k).unwrap();
                assert_eq!(r.len(), k);
                assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{fam:?} k={k}");
                let (lo, hi) = r.nodes.iter().fold((f64::MAX, f64::MIN), |(l, h), &t| (l.min(t), h.max(t)));
                let mut s = r.nodes.clone();
                s.sort_by(f64::total_cmp);
                for w in s.windows(2) {
                    assert!(w[1] - w[0] > 1e-14 * (hi - lo), "{fam:?} k={k}");
                }
            }
        }
        for k in [1, 3, 9] {
            let r = KnotFamily::GenzKeister { mu: 0.0, sigma: 1.0 }.rule(k).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    fn contains(fine: &[f64], t: f64) -> bool {
        fine.iter().any(|&s| (s - t).abs() <= 1e-12)
    }

    #[test]
    fn nestedness_table() {
        let mut fams = families();
        fams.push(KnotFamily::GenzKeister { mu: 1.0, sigma: 2.0 });
        let maps = [LevelMap::Linear, LevelMap::TwoStep, LevelMap::Doubling, LevelMap::Tripling, LevelMap::Gk];
        for fam in &fams {
            for map in maps {
                if !fam.nested_with(map) {
                    continue;
                }
                for i in 1..=4 {
                    let coarse = fam.rule(map.apply(i).unwrap()).unwrap();
                    let fine = fam.rule(map.apply(i + 1).unwrap()).unwrap();
                    for &t in &coarse.nodes {
                        assert!(contains(&fine.nodes, t), "{fam:?} {map:?} level {i}: {t}");
                    }
                }
            }
        }
        assert!(!KnotFamily::gauss_uniform(0.0, 1.0).nested_with(LevelMap::Doubling));
        let g3 = KnotFamily::gauss_uniform(0.0, 1.0).rule(3).unwrap();
        let g2 = KnotFamily::gauss_uniform(0.0, 1.0).rule(2).unwrap();
        assert!(!g2.nodes.iter().all(|&t| contains(&g3.nodes, t)));
    }

    #[test]
    fn affine_covariance() {
        let (a, b) = (-2.0, 5.0);
        for (unit, general) in [
            (KnotFamily::gauss_uniform(0.0, 1.0), KnotFamily::gauss_uniform(a, b)),
            (KnotFamily::ClenshawCurtis { a: 0.0, b: 1.0 }, KnotFamily::ClenshawCurtis { a, b }),
            (
                KnotFamily::Leja { a: 0.0, b: 1.0, variant: LejaVariant::Standard },
                KnotFamily::Leja { a, b, variant: LejaVariant::Standard },
            ),
            (KnotFamily::Trap { a: 0.0, b: 1.0 }, KnotFamily::Trap { a, b }),
            (KnotFamily::Midpoint { a: 0.0, b: 1.0 }, KnotFamily::Midpoint { a, b }),
        ] {
            for k in 1..=9 {
                let u = unit.rule(k).unwrap();
                let g = general.rule(k).unwrap();
                for j in 0..k {
                    assert!((g.nodes[j] - (a + (b - a) * u.nodes[j])).abs() < 1e-12 * (b - a), "{general:?}");
                    assert!((g.weights[j] - u.weights[j]).abs() < 1e-12, "{general:?}");
                }
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        for fam in families() {
            let s = serde_json::to_string(&fam).unwrap();
            let back: KnotFamily = serde_json::from_str(&s).unwrap();
            assert_eq!(back, fam);
        }
    }
}
