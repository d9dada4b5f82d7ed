//! Gamma and Gauss hypergeometric evaluations used by the kernel.

use std::f64::consts::PI;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// 1/Γ(x), zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        0.0
    } else {
        1.0 / libm::tgamma(x)
    }
}

/// Volume of the unit ball in ℝ^N.
pub fn unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    PI.powf(h) / gamma(h + 1.0)
}

fn is_nonpositive_int(x: f64) -> bool {
    x <= 0.0 && (x - x.round()).abs() < 1e-14
}

/// Power series of 2F1(a, b; c; z), |z| < 1.
pub fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..2000 {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// 2F1(a, b; c; z) on [0, 1) for parameters where c - a - b is not close
/// to an integer (or the series terminates). Returns `None` when the
/// connection formula would be singular.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Option<f64> {
    hyp2f1_zw(a, b, c, z, 1.0 - z)
}

/// As [`hyp2f1`], with w = 1 − z supplied by the caller to full relative accuracy.
pub fn hyp2f1_zw(a: f64, b: f64, c: f64, z: f64, w: f64) -> Option<f64> {
    Hyp2F1::new(a, b, c).eval(z, w)
}

/// 2F1(a, b; c; ·) with the connection coefficients around z = 1 precomputed.
#[derive(Debug, Clone, Copy)]
pub struct Hyp2F1 {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    g1: f64,
    g2: f64,
    terminating: bool,
    connection: bool,
}

impl Hyp2F1 {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        let d = c - a - b;
        let terminating = is_nonpositive_int(a) || is_nonpositive_int(b);
        let connection = (d - d.round()).abs() >= 1e-3;
        let (g1, g2) = if connection {
            (
                gamma(c) * gamma(d) * rgamma(c - a) * rgamma(c - b),
                gamma(c) * gamma(-d) * rgamma(a) * rgamma(b),
            )
        } else {
            (0.0, 0.0)
        };
        Hyp2F1 {
            a,
            b,
            c,
            d,
            g1,
            g2,
            terminating,
            connection,
        }
    }

    /// Value at z with w = 1 − z supplied to full relative accuracy.
    pub fn eval(&self, z: f64, w: f64) -> Option<f64> {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        if self.terminating || z <= 0.5 {
            return Some(hyp2f1_series(a, b, c, z));
        }
        if !self.connection {
            return None;
        }
        let t1 = if self.g1 == 0.0 {
            0.0
        } else {
            self.g1 * hyp2f1_series(a, b, 1.0 - d, w)
        };
        let t2 = if self.g2 == 0.0 {
            0.0
        } else {
            self.g2 * w.powf(d) * hyp2f1_series(c - a, c - b, 1.0 + d, w)
        };
        Some(t1 + t2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(5.0) - 24.0).abs() < 1e-12);
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-3.0), 0.0);
    }

    #[test]
    fn hyp2f1_elementary() {
        // 2F1(1,1;2;z) = -ln(1-z)/z
        for &z in &[0.1, 0.4, 0.7, 0.95] {
            let exact = -(1.0f64 - z).ln() / z;
            // c - a - b = 0 is integral: connection formula refuses
            if z > 0.5 {
                assert!(hyp2f1(1.0, 1.0, 2.0, z).is_none());
            } else {
                assert!((hyp2f1(1.0, 1.0, 2.0, z).unwrap() - exact).abs() < 1e-13);
            }
        }
        // 2F1(a,b;b;z) = (1-z)^{-a}
        for &z in &[0.2, 0.6, 0.9, 0.99] {
            let v = hyp2f1(0.3, 0.45, 0.45, z).unwrap();
            assert!((v - (1.0f64 - z).powf(-0.3)).abs() < 1e-11 * v, "z={z}");
        }
    }
}
