//! Gauss-Legendre rules on the unit interval and temporal rules.

use std::str::FromStr;

/// n-point Gauss-Legendre rule mapped to [0, 1]; weights sum to 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// Tensor-product Gauss rule on the reference square.
#[derive(Clone, Debug)]
pub struct QuadRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub n1d: usize,
}

impl QuadRule {
    pub fn gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for b in 0..n {
            for a in 0..n {
                points.push([x[a], x[b]]);
                weights.push(w[a] * w[b]);
            }
        }
        QuadRule { points, weights, n1d: n }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Temporal quadrature on one interval, in normalized time `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeRule {
    Midpoint,
    RightBox,
    Simpson,
    Gauss2,
}

impl TimeRule {
    /// `(tau, weight)` pairs with weights summing to 1.
    pub fn points(self) -> Vec<(f64, f64)> {
        match self {
            TimeRule::Midpoint => vec![(0.5, 1.0)],
            TimeRule::RightBox => vec![(1.0, 1.0)],
            TimeRule::Simpson => vec![(0.0, 1.0 / 6.0), (0.5, 4.0 / 6.0), (1.0, 1.0 / 6.0)],
            TimeRule::Gauss2 => {
                let d = 0.5 / 3f64.sqrt();
                vec![(0.5 - d, 0.5), (0.5 + d, 0.5)]
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeRule::Midpoint => "midpoint",
            TimeRule::RightBox => "rightbox",
            TimeRule::Simpson => "simpson",
            TimeRule::Gauss2 => "gauss2",
        }
    }
}

impl FromStr for TimeRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "midpoint" => Ok(TimeRule::Midpoint),
            "rightbox" => Ok(TimeRule::RightBox),
            "simpson" => Ok(TimeRule::Simpson),
            "gauss2" => Ok(TimeRule::Gauss2),
            _ => Err(format!("unknown temporal rule '{s}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_two_point_nodes() {
        let (x, w) = gauss_legendre(2);
        let d = 0.5 / 3f64.sqrt();
        assert!((x[0] - (0.5 - d)).abs() < 1e-15);
        assert!((x[1] - (0.5 + d)).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gauss_exactness() {
        for n in 1..=6 {
            let (x, w) = gauss_legendre(n);
            for p in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn tensor_rule_integrates_cubic_product() {
        let q = QuadRule::gauss(2);
        let v: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0].powi(3) * p[1].powi(3)).sum();
        assert!(((v - 1.0 / 16.0) / (1.0 / 16.0)).abs() < 1e-14);
    }

    #[test]
    fn time_rules_sum_to_one() {
        for r in [TimeRule::Midpoint, TimeRule::RightBox, TimeRule::Simpson, TimeRule::Gauss2] {
            let s: f64 = r.points().iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-15);
            assert_eq!(r.name().parse::<TimeRule>().unwrap(), r);
        }
    }
}
