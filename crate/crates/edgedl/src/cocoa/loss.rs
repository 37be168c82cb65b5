//! Per-example losses with the label folded in, and their conjugates.
//!
//! `loss(a, y)` is `l_n(a)` for a prediction `a = x_n^T w`. The dual works
//! with `l_n^*(-alpha_n)`, so the kit exposes that composition and its
//! derivative in `alpha` directly.

/// Logistic loss keeps its dual variables strictly inside this margin of
/// the domain boundary, where the conjugate's slope is infinite.
const LOGISTIC_EDGE: f64 = 1e-12;

/// Loss family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKit {
    /// `ln(1 + exp(-y a))`, labels in {-1, +1}; 1/4-smooth.
    #[default]
    Logistic,
    /// `(a - y)^2 / 2`; 1-smooth.
    Squared,
}

impl LossKit {
    /// `mu` such that the loss is `1/mu`-smooth.
    pub fn mu(self) -> f64 {
        match self {
            LossKit::Logistic => 4.0,
            LossKit::Squared => 1.0,
        }
    }

    pub fn loss(self, a: f64, y: f64) -> f64 {
        match self {
            LossKit::Logistic => softplus(-y * a),
            LossKit::Squared => 0.5 * (a - y) * (a - y),
        }
    }

    /// `d loss / d a`.
    pub fn loss_grad(self, a: f64, y: f64) -> f64 {
        match self {
            LossKit::Logistic => -y * sigmoid(-y * a),
            LossKit::Squared => a - y,
        }
    }

    /// Convex conjugate `l^*(b)`; `+inf` outside its domain.
    pub fn conjugate(self, b: f64, y: f64) -> f64 {
        match self {
            LossKit::Logistic => neg_entropy(-b * y),
            LossKit::Squared => 0.5 * b * b + b * y,
        }
    }

    /// `l^*(-alpha)`.
    pub fn conj_neg(self, alpha: f64, y: f64) -> f64 {
        self.conjugate(-alpha, y)
    }

    /// `d l^*(-alpha) / d alpha`.
    pub fn conj_neg_grad(self, alpha: f64, y: f64) -> f64 {
        match self {
            LossKit::Logistic => {
                let s = alpha * y;
                y * (s / (1.0 - s)).ln()
            }
            LossKit::Squared => alpha - y,
        }
    }

    /// Smallest curvature of `l^*(-alpha)` in `alpha`; equals `mu`.
    pub fn conj_curvature(self) -> f64 {
        self.mu()
    }

    /// A feasible dual starting point.
    pub fn initial_dual(self, y: f64) -> f64 {
        match self {
            LossKit::Logistic => 0.5 * y,
            LossKit::Squared => 0.0,
        }
    }

    /// Pulls `alpha` back into the interior of the conjugate's domain.
    pub fn project(self, alpha: f64, y: f64) -> f64 {
        match self {
            LossKit::Logistic => y * (alpha * y).clamp(LOGISTIC_EDGE, 1.0 - LOGISTIC_EDGE),
            LossKit::Squared => alpha,
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `s ln s + (1 - s) ln(1 - s)` on `[0, 1]`.
fn neg_entropy(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return f64::INFINITY;
    }
    let xlx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    xlx(s) + xlx(1.0 - s)
}

#[cfg(test)]
mod test {
    use super::*;

    #[test]
    fn fenchel_young_equality_at_pairs() {
        for kit in [LossKit::Logistic, LossKit::Squared] {
            for &y in &[-1.0, 1.0] {
                for i in -20..=20 {
                    let a = i as f64 * 0.37;
                    let b = kit.loss_grad(a, y);
                    let gap = kit.loss(a, y) + kit.conjugate(b, y) - a * b;
                    assert!(gap.abs() < 1e-8, "{kit:?} a={a} y={y}: {gap}");
                }
            }
        }
    }

    #[test]
    fn fenchel_young_inequality_off_pairs() {
        for kit in [LossKit::Logistic, LossKit::Squared] {
            for i in -10..=10 {
                for j in -10..=10 {
                    let (a, b) = (i as f64 * 0.5, j as f64 * 0.1);
                    assert!(kit.loss(a, 1.0) + kit.conjugate(b, 1.0) >= a * b - 1e-12);
                }
            }
        }
    }

    #[test]
    fn logistic_conjugate_domain() {
        assert_eq!(LossKit::Logistic.conjugate(0.5, 1.0), f64::INFINITY);
        assert_eq!(LossKit::Logistic.conjugate(0.0, 1.0), 0.0);
        assert!((LossKit::Logistic.conj_neg(0.5, 1.0) - (0.5f64).ln()).abs() < 1e-15);
        assert_eq!(LossKit::Logistic.project(-2.0, -1.0), -(1.0 - 1e-12));
    }

    #[test]
    fn conjugate_gradients_match_differences() {
        let h = 1e-6;
        for kit in [LossKit::Logistic, LossKit::Squared] {
            for &(alpha, y) in &[(0.3, 1.0), (-0.7, -1.0), (0.05, 1.0)] {
                let fd = (kit.conj_neg(alpha + h, y) - kit.conj_neg(alpha - h, y)) / (2.0 * h);
                assert!((fd - kit.conj_neg_grad(alpha, y)).abs() < 1e-6, "{kit:?}");
            }
        }
    }

    #[test]
    fn stable_for_large_margins() {
        assert!((LossKit::Logistic.loss(800.0, 1.0)).abs() < 1e-300);
        assert!((LossKit::Logistic.loss(-800.0, 1.0) - 800.0).abs() < 1e-9);
        assert_eq!(LossKit::Logistic.loss_grad(-800.0, 1.0), -1.0);
    }
}
