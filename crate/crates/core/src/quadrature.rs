//! Gaussian quadrature rules.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ wᵢ f(xᵢ)
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// The same rule mapped affinely from [-1, 1] onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> Rule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Rule {
            nodes: self.nodes.iter().map(|x| mid + half * x).collect(),
            weights: self.weights.iter().map(|w| w * half).collect(),
        }
    }
}

/// n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Usage("Gauss-Legendre rule needs at least one node".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(Rule { nodes, weights })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Largest node count accepted for Gauss–Hermite rules.
pub const MAX_HERMITE_NODES: usize = 512;

/// n-point Gauss–Hermite rule for the standard normal weight e^(−x²/2)/√(2π).
/// Weights sum to one.
pub fn gauss_hermite_standard_normal(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Usage("Gauss-Hermite rule needs at least one node".into()));
    }
    if n > MAX_HERMITE_NODES {
        return Err(Error::Usage(format!(
            "Gauss-Hermite rule limited to {MAX_HERMITE_NODES} nodes, got {n}"
        )));
    }
    if n == 1 {
        return Ok(Rule {
            nodes: vec![0.0],
            weights: vec![1.0],
        });
    }
    // Golub–Welsch: Jacobi matrix of the probabilists' Hermite recurrence
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // enforce exact symmetry of the rule
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Ok(Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_exact_for_polynomials() {
        for n in [1, 2, 5, 16, 33, 128] {
            let rule = gauss_legendre(n).unwrap();
            for deg in 0..(2 * n).min(40) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got = rule.integrate(|x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg} got {got}");
            }
        }
    }

    #[test]
    fn legendre_mapped_exponential() {
        let rule = gauss_legendre(24).unwrap().mapped(0.0, 3.0);
        let got = rule.integrate(|x| (-x).exp());
        assert!((got - (1.0 - (-3.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn hermite_moments() {
        for n in [2, 3, 8, 64, 200] {
            let rule = gauss_hermite_standard_normal(n).unwrap();
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let m2 = rule.integrate(|x| x * x);
            assert!((m2 - 1.0).abs() < 1e-12, "n={n} m2={m2}");
            if n >= 3 {
                let m4 = rule.integrate(|x| x.powi(4));
                assert!((m4 - 3.0).abs() < 1e-11, "n={n} m4={m4}");
            }
            assert!(rule.integrate(|x| x.powi(3)).abs() < 1e-13);
        }
    }

    #[test]
    fn hermite_limits() {
        assert!(matches!(gauss_hermite_standard_normal(0), Err(Error::Usage(_))));
        assert!(matches!(gauss_hermite_standard_normal(513), Err(Error::Usage(_))));
        assert!(gauss_hermite_standard_normal(512).is_ok());
        let one = gauss_hermite_standard_normal(1).unwrap();
        assert_eq!(one.nodes, vec![0.0]);
        assert_eq!(one.weights, vec![1.0]);
    }
}
