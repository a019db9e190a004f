//! Classical fixed-step fourth-order Runge-Kutta.

/// A first-order system `ẏ = F(t, y)` over a flat state vector.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn derivative(&self, t: f64, y: &[f64], dydt: &mut [f64]);
}

/// RK4 stepper with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k: [Vec<f64>; 4],
    probe: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            probe: vec![0.0; dim],
        }
    }

    /// Advances `y` from `t` to `t + dt` in place.
    pub fn step<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, y: &mut [f64], dt: f64) {
        let n = y.len();
        debug_assert_eq!(n, sys.dim());
        let [k1, k2, k3, k4] = &mut self.k;
        let probe = &mut self.probe;

        sys.derivative(t, y, k1);
        for i in 0..n {
            probe[i] = y[i] + 0.5 * dt * k1[i];
        }
        sys.derivative(t + 0.5 * dt, probe, k2);
        for i in 0..n {
            probe[i] = y[i] + 0.5 * dt * k2[i];
        }
        sys.derivative(t + 0.5 * dt, probe, k3);
        for i in 0..n {
            probe[i] = y[i] + dt * k3[i];
        }
        sys.derivative(t + dt, probe, k4);
        for i in 0..n {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Closure adapter, mostly for tests and oracles.
pub struct FnSystem<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn derivative(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        (self.f)(t, y, dydt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic_error(dt: f64) -> f64 {
        let sys = FnSystem {
            dim: 2,
            f: |_t: f64, y: &[f64], d: &mut [f64]| {
                d[0] = y[1];
                d[1] = -y[0];
            },
        };
        let mut rk = Rk4::new(2);
        let mut y = [1.0, 0.0];
        let steps = (2.0 / dt).round() as usize;
        for k in 0..steps {
            rk.step(&sys, k as f64 * dt, &mut y, dt);
        }
        (y[0] - 2.0_f64.cos()).abs()
    }

    #[test]
    fn fourth_order() {
        let ratio = harmonic_error(0.1) / harmonic_error(0.05);
        assert!((14.0..18.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn time_dependent_quadrature_is_exact_for_cubics() {
        let sys = FnSystem {
            dim: 1,
            f: |t: f64, _y: &[f64], d: &mut [f64]| d[0] = 3.0 * t * t,
        };
        let mut rk = Rk4::new(1);
        let mut y = [0.0];
        rk.step(&sys, 0.0, &mut y, 2.0);
        assert!((y[0] - 8.0).abs() < 1e-14);
    }
}
