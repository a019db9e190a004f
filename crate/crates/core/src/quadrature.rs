//! Composite 16-point Gauss-Legendre quadrature.

use std::sync::OnceLock;

const ORDER: usize = 16;

/// Widest panel the composite rule will use, in the integration variable.
pub const MAX_PANEL: f64 = 0.5;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        let n = ORDER as f64;
        for i in 0..ORDER {
            // Newton on P_n from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(ORDER, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(ORDER, x);
            if d != 0.0 {
                dp = d;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        Rule { nodes, weights }
    })
}

/// Legendre polynomial P_n(x) and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// ∫ₐᵇ f, split into equal panels no wider than [`MAX_PANEL`]. Reversed
/// limits give the negated integral.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let panels = ((b - a).abs() / MAX_PANEL).ceil().max(1.0) as usize;
    let width = (b - a) / panels as f64;
    let rule = rule();
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * width;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        let panel: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum();
        total += half * panel;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let r = rule();
        let sum: f64 = r.weights.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        assert!(r.nodes.iter().all(|x| x.abs() < 1.0));
    }

    #[test]
    fn exact_for_degree_31() {
        let got = integrate(|x| x.powi(31) + x.powi(30), -1.0, 1.0);
        assert!((got - 2.0 / 31.0).abs() < 1e-14, "{got}");
    }

    #[test]
    fn smooth_periodic_integrand() {
        let got = integrate(f64::cos, 0.0, 7.0);
        assert!((got - 7.0_f64.sin()).abs() < 1e-14);
        let back = integrate(f64::cos, 7.0, 0.0);
        assert_eq!(got, -back);
        assert_eq!(integrate(f64::cos, 1.0, 1.0), 0.0);
    }
}
