//! Gauss–Legendre rules and composite panel helpers.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Tricomi initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared rule, built once per process for each order.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static RULES: OnceLock<RwLock<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let rules = RULES.get_or_init(|| RwLock::new(HashMap::new()));
        if let Some(r) = rules.read().expect("rule cache poisoned").get(&n) {
            return r.clone();
        }
        let mut w = rules.write().expect("rule cache poisoned");
        w.entry(n).or_insert_with(|| Arc::new(GaussLegendre::new(n))).clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = if n == 0 {
        0.0
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p, dp)
}

/// Composite rule over consecutive breakpoints.
pub fn composite(breaks: &[f64], per_panel: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::cached(per_panel);
    breaks
        .windows(2)
        .flat_map(|w| rule.mapped(w[0], w[1]).collect::<Vec<_>>())
        .collect()
}

/// Breakpoints on `[a, b]` whose panels shrink geometrically towards both
/// ends (ratio 1/2 per panel), `panels >= 2`.
pub fn endpoint_clustered_breaks(a: f64, b: f64, panels: usize) -> Vec<f64> {
    assert!(panels >= 2);
    let left = panels / 2;
    let right = panels - left;
    let mid = 0.5 * (a + b);
    let mut out = Vec::with_capacity(panels + 1);
    out.push(a);
    for j in (0..left).rev() {
        out.push(a + (mid - a) * 0.5f64.powi(j as i32));
    }
    for j in 1..right {
        out.push(b - (b - mid) * 0.5f64.powi(j as i32));
    }
    out.push(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        for n in [1usize, 2, 5, 16, 64] {
            let rule = GaussLegendre::new(n);
            for deg in 0..(2 * n) {
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} deg={deg} {got} {want}");
            }
        }
    }

    #[test]
    fn clustered_breaks_are_monotone() {
        for panels in 2..12 {
            let b = endpoint_clustered_breaks(0.0, 1.0, panels);
            assert_eq!(b.len(), panels + 1, "{b:?}");
            assert_eq!(b[0], 0.0);
            assert_eq!(*b.last().unwrap(), 1.0);
            assert!(b.windows(2).all(|w| w[1] > w[0]));
        }
        let pts = composite(&endpoint_clustered_breaks(0.0, 1.0, 8), 16);
        let s: f64 = pts.iter().map(|(x, w)| w * x.sqrt()).sum();
        assert!((s - 2.0 / 3.0).abs() < 1e-6);
    }
}
