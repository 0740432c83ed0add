use serde::{Deserialize, Serialize};

/// Adamax, the infinity-norm variant of Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adamax {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    u: Vec<f64>,
}

impl Adamax {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n],
            u: vec![0.0; n],
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update; `params` and `grads` must both yield exactly `n` values.
    pub fn step<'a>(
        &mut self,
        params: impl Iterator<Item = &'a mut f64>,
        grads: impl Iterator<Item = f64>,
    ) {
        self.t += 1;
        let rate = self.lr / (1.0 - self.beta1.powi(self.t as i32));
        let mut seen = 0;
        for (((p, g), m), u) in params
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.u.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *u = (self.beta2 * *u).max(g.abs());
            *p -= rate * *m / (*u + self.eps);
            seen += 1;
        }
        debug_assert_eq!(seen, self.m.len());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        // m = 0.1 g, u = |g|, bias correction 1 / 0.1 -> step = lr * sign(g)
        let mut opt = Adamax::new(2, 0.01);
        let mut p = [1.0, 1.0];
        opt.step(p.iter_mut(), [3.0, -0.5].into_iter());
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] - 1.01).abs() < 1e-9);
    }

    #[test]
    fn matches_hand_iteration() {
        let mut opt = Adamax::new(1, 0.1);
        let mut p = [0.0];
        let g = [1.0, -2.0, 0.5];
        let (mut m, mut u, mut x) = (0.0f64, 0.0f64, 0.0f64);
        for (t, &gt) in g.iter().enumerate() {
            opt.step(p.iter_mut(), [gt].into_iter());
            m = 0.9 * m + 0.1 * gt;
            u = (0.999 * u).max(gt.abs());
            x -= 0.1 / (1.0 - 0.9f64.powi(t as i32 + 1)) * m / (u + 1e-8);
            assert!((p[0] - x).abs() < 1e-12);
        }
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut opt = Adamax::new(2, 0.05);
        let mut p = [3.0, -4.0];
        for _ in 0..2000 {
            let g = [2.0 * p[0], 8.0 * p[1]];
            opt.step(p.iter_mut(), g.into_iter());
        }
        assert!(p[0].abs() < 1e-2 && p[1].abs() < 1e-2, "{p:?}");
    }
}
