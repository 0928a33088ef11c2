//! Gauss–Hermite rules for the weight `exp(−x²)` and expectation values under
//! normal distributions.

use crate::error::OracleError;

/// Nodes and weights of an `n`-point rule, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes are eigenvalues of the Jacobi matrix (zero diagonal, off-diagonal
    /// `sqrt(k/2)`), isolated by Sturm-sequence bisection and polished by Newton
    /// steps on the orthonormal recurrence; weights follow from the derivative.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Hermite order must be positive");
        let n = order;
        let nf = n as f64;
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let bound = (2.0 * nf + 1.0).sqrt() + 1.0;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for k in 0..n {
            // k-th smallest eigenvalue: count(x) > k
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if eigenvalues_below(n, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let mut z = 0.5 * (lo + hi);
            for _ in 0..3 {
                let (p1, p2) = hermite_pair(n, z, pim4);
                let deriv = (2.0 * nf).sqrt() * p2;
                if deriv != 0.0 {
                    z -= p1 / deriv;
                }
            }
            let (_, p2) = hermite_pair(n, z, pim4);
            let deriv = (2.0 * nf).sqrt() * p2;
            nodes.push(z);
            weights.push(2.0 / (deriv * deriv));
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        // exact symmetry
        for i in 0..n / 2 {
            let (a, b) = (
                0.5 * (nodes[n - 1 - i] - nodes[i]),
                0.5 * (weights[i] + weights[n - 1 - i]),
            );
            nodes[i] = -a;
            nodes[n - 1 - i] = a;
            weights[i] = b;
            weights[n - 1 - i] = b;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ f(x) exp(−x²) dx`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// `E[f(X)]` for `X ~ N(mean, sd²)`.
    pub fn expect(&self, mean: f64, sd: f64, f: impl Fn(f64) -> f64) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sd;
        self.integrate(|x| f(mean + scale * x)) / std::f64::consts::PI.sqrt()
    }

    /// `E[f(X, Y)]` for independent `X ~ N(mx, sx²)`, `Y ~ N(my, sy²)`.
    pub fn expect_2d(
        &self,
        (mx, sx): (f64, f64),
        (my, sy): (f64, f64),
        f: impl Fn(f64, f64) -> f64,
    ) -> f64 {
        let (ax, ay) = (std::f64::consts::SQRT_2 * sx, std::f64::consts::SQRT_2 * sy);
        let mut total = 0.0;
        for (&u, &wu) in self.nodes.iter().zip(&self.weights) {
            let x = mx + ax * u;
            let row: f64 = self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(&v, &wv)| wv * f(x, my + ay * v))
                .sum();
            total += wu * row;
        }
        total / std::f64::consts::PI
    }
}

/// Number of eigenvalues of the `n × n` Jacobi matrix below `x` (Sturm count).
fn eigenvalues_below(n: usize, x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for k in 0..n {
        let b2 = if k == 0 { 0.0 } else { 0.5 * k as f64 };
        d = -x - if k == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * x.abs().max(1.0);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Orthonormal Hermite function values `(h_n(z), h_{n−1}(z))` without the Gaussian factor.
fn hermite_pair(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// A base rule and its doubled-order companion, for convergence checks.
#[derive(Debug, Clone)]
pub struct RulePair {
    pub base: GaussHermite,
    pub doubled: GaussHermite,
    /// Largest relative change tolerated between the two orders.
    pub tol: f64,
}

impl RulePair {
    pub fn new(order: usize, tol: f64) -> Self {
        Self {
            base: GaussHermite::new(order),
            doubled: GaussHermite::new(2 * order),
            tol,
        }
    }

    /// Evaluates `f` with both rules and returns the higher-order value.
    pub fn converged(
        &self,
        quantity: &'static str,
        f: impl Fn(&GaussHermite) -> f64,
    ) -> Result<f64, OracleError> {
        let lo = f(&self.base);
        let hi = f(&self.doubled);
        let change = relative_change(lo, hi);
        if !(change <= self.tol) || !hi.is_finite() {
            return Err(OracleError::NotConverged { quantity, change });
        }
        Ok(hi)
    }
}

pub(crate) fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
