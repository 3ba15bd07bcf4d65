//! Value, gradient and Hessian of a scalar function of θ.

/// How many derivatives to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

/// Second-order expansion. `hess` is row-major `d x d` and stays empty
/// unless the Hessian was requested; `grad` likewise for gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, d: usize, order: Order) -> Jet {
        Jet {
            value,
            grad: if order >= Order::Gradient { vec![0.0; d] } else { Vec::new() },
            hess: if order >= Order::Hessian { vec![0.0; d * d] } else { Vec::new() },
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn order(&self) -> Order {
        if !self.hess.is_empty() {
            Order::Hessian
        } else if !self.grad.is_empty() {
            Order::Gradient
        } else {
            Order::Value
        }
    }

    /// `exp` of this jet.
    pub fn exp(&self) -> Jet {
        let v = self.value.exp();
        let d = self.grad.len();
        let grad = self.grad.iter().map(|g| v * g).collect();
        let mut hess = Vec::new();
        if !self.hess.is_empty() {
            hess = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    hess[a * d + b] = v * (self.hess[a * d + b] + self.grad[a] * self.grad[b]);
                }
            }
        }
        Jet { value: v, grad, hess }
    }

    /// Natural log of this jet. A non-positive value yields `-inf` with
    /// zeroed derivatives.
    pub fn ln(&self) -> Jet {
        let d = self.grad.len();
        if self.value <= 0.0 {
            let mut j = Jet::constant(f64::NEG_INFINITY, d, self.order());
            j.value = f64::NEG_INFINITY;
            return j;
        }
        let inv = 1.0 / self.value;
        let grad: Vec<f64> = self.grad.iter().map(|g| g * inv).collect();
        let mut hess = Vec::new();
        if !self.hess.is_empty() {
            hess = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    hess[a * d + b] = self.hess[a * d + b] * inv - grad[a] * grad[b];
                }
            }
        }
        Jet { value: self.value.ln(), grad, hess }
    }

    pub fn neg(mut self) -> Jet {
        self.value = -self.value;
        self.grad.iter_mut().for_each(|g| *g = -*g);
        self.hess.iter_mut().for_each(|h| *h = -*h);
        self
    }

    /// `self += w * other`.
    pub fn add_scaled(&mut self, w: f64, other: &Jet) {
        self.value += w * other.value;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += w * b;
        }
        for (a, b) in self.hess.iter_mut().zip(&other.hess) {
            *a += w * b;
        }
    }

    /// Product rule.
    pub fn mul(&self, other: &Jet) -> Jet {
        let d = self.grad.len();
        let (p, q) = (self.value, other.value);
        let grad = self
            .grad
            .iter()
            .zip(&other.grad)
            .map(|(a, b)| p * b + q * a)
            .collect();
        let mut hess = Vec::new();
        if !self.hess.is_empty() {
            hess = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    hess[a * d + b] = p * other.hess[a * d + b]
                        + q * self.hess[a * d + b]
                        + self.grad[a] * other.grad[b]
                        + other.grad[a] * self.grad[b];
                }
            }
        }
        Jet { value: p * q, grad, hess }
    }
}

/// `out += w * u v^T` for a row-major `d x d` buffer.
#[inline]
pub(crate) fn add_outer(out: &mut [f64], w: f64, u: &[f64], v: &[f64]) {
    let d = u.len();
    for a in 0..d {
        let wa = w * u[a];
        if wa == 0.0 {
            continue;
        }
        let row = &mut out[a * d..(a + 1) * d];
        for b in 0..d {
            row[b] += wa * v[b];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Jet {
        Jet { value: 0.3, grad: vec![1.0, -2.0], hess: vec![0.5, 0.1, 0.1, -0.4] }
    }

    #[test]
    fn exp_then_ln_roundtrips() {
        let j = sample();
        let back = j.exp().ln();
        assert!((back.value - j.value).abs() < 1e-14);
        for (a, b) in back.grad.iter().zip(&j.grad) {
            assert!((a - b).abs() < 1e-13);
        }
        for (a, b) in back.hess.iter().zip(&j.hess) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn product_rule_on_squares() {
        let j = sample();
        let sq = j.mul(&j);
        assert!((sq.value - 0.09).abs() < 1e-15);
        assert_eq!(sq.grad, vec![0.6, -1.2]);
        // 2 (f H + g g^T)
        assert!((sq.hess[0] - 2.0 * (0.3 * 0.5 + 1.0)).abs() < 1e-14);
        assert!((sq.hess[1] - 2.0 * (0.3 * 0.1 - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn ln_of_zero_is_sentinel() {
        let j = Jet::constant(0.0, 3, Order::Hessian).ln();
        assert_eq!(j.value, f64::NEG_INFINITY);
        assert!(j.grad.iter().all(|g| *g == 0.0));
    }
}
