//! Execution costs `L(rho)` and the associated Hamiltonian
//! `H(p) = sup_{|rho| <= rho_max} p rho - L(rho)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A convex, even execution-cost function of the participation rate.
///
/// Implementors must satisfy `L(0) = 0`, evenness, monotonicity on the
/// positive half-line, strict convexity and superlinear growth. The default
/// Hamiltonian uses a golden-section search and only relies on those
/// properties.
pub trait CostFunction: Send + Sync {
    fn cost(&self, rho: f64) -> f64;

    fn hamiltonian(&self, p: f64, rho_max: f64) -> Hamiltonian {
        hamiltonian_golden(self, p, rho_max)
    }
}

/// Value of the Hamiltonian and a maximising participation rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hamiltonian {
    pub value: f64,
    pub argmax: f64,
}

/// `L(rho) = eta |rho|^(1 + cost_exponent) + psi |rho|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionCost {
    pub eta: f64,
    pub cost_exponent: f64,
    pub psi: f64,
}

impl ExecutionCost {
    pub fn new(eta: f64, cost_exponent: f64, psi: f64) -> Result<Self> {
        let c = Self {
            eta,
            cost_exponent,
            psi,
        };
        c.validate()?;
        Ok(c)
    }

    /// eta = 0.1, exponent 0.75, no proportional cost.
    pub fn reference() -> Self {
        Self {
            eta: 0.1,
            cost_exponent: 0.75,
            psi: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", "must be >= 0"));
        }
        if !(self.cost_exponent > 0.0 && self.cost_exponent.is_finite()) {
            return Err(Error::invalid("cost_exponent", "must be > 0"));
        }
        if !(self.psi >= 0.0 && self.psi.is_finite()) {
            return Err(Error::invalid("psi", "must be >= 0"));
        }
        Ok(())
    }

    #[inline]
    pub fn exec_cost(&self, rho: f64) -> f64 {
        let a = rho.abs();
        if a == 0.0 {
            return 0.0;
        }
        self.eta * a.powf(1.0 + self.cost_exponent) + self.psi * a
    }
}

impl CostFunction for ExecutionCost {
    #[inline]
    fn cost(&self, rho: f64) -> f64 {
        self.exec_cost(rho)
    }

    fn hamiltonian(&self, p: f64, rho_max: f64) -> Hamiltonian {
        let a = p.abs();
        if a <= self.psi || rho_max <= 0.0 {
            return Hamiltonian {
                value: 0.0,
                argmax: 0.0,
            };
        }
        let rho = if self.eta == 0.0 {
            // Linear cost: bang-bang at the participation cap.
            rho_max
        } else {
            ((a - self.psi) / (self.eta * (1.0 + self.cost_exponent)))
                .powf(1.0 / self.cost_exponent)
                .min(rho_max)
        };
        if !rho.is_finite() {
            return Hamiltonian {
                value: f64::INFINITY,
                argmax: p.signum() * f64::INFINITY,
            };
        }
        Hamiltonian {
            value: (a * rho - self.exec_cost(rho)).max(0.0),
            argmax: p.signum() * rho,
        }
    }
}

const GOLDEN_TOL: f64 = 1e-10;

/// Golden-section maximisation of `p rho - L(rho)` on `|rho| <= rho_max`.
///
/// The objective is concave, so the maximiser has the sign of `p` and the
/// search only covers `[0, min(rho_max, B)]` on that side, where `B` is a
/// point beyond which `L(rho)/rho > |p|`.
pub fn hamiltonian_golden<C: CostFunction + ?Sized>(l: &C, p: f64, rho_max: f64) -> Hamiltonian {
    let a = p.abs();
    if a == 0.0 || rho_max <= 0.0 {
        return Hamiltonian {
            value: 0.0,
            argmax: 0.0,
        };
    }
    let mut hi = 1.0_f64;
    while hi < rho_max && l.cost(hi) <= a * hi {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    let hi = hi.min(rho_max);
    let f = |rho: f64| a * rho - l.cost(rho);
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut up) = (0.0, hi);
    let mut x1 = up - inv_phi * (up - lo);
    let mut x2 = lo + inv_phi * (up - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while up - lo > GOLDEN_TOL * (1.0 + up.abs()) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (up - lo);
            f2 = f(x2);
        } else {
            up = x2;
            x2 = x1;
            f2 = f1;
            x1 = up - inv_phi * (up - lo);
            f1 = f(x1);
        }
    }
    let mut best = 0.5 * (lo + up);
    let mut value = f(best);
    // The search interval is closed: check both ends explicitly.
    for cand in [0.0, hi] {
        let v = f(cand);
        if v > value {
            value = v;
            best = cand;
        }
    }
    Hamiltonian {
        value: value.max(0.0),
        argmax: p.signum() * best,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Quartic;
    impl CostFunction for Quartic {
        fn cost(&self, rho: f64) -> f64 {
            0.5 * rho.powi(4) + 0.1 * rho * rho
        }
    }

    #[test]
    fn exec_cost_examples() {
        let l = ExecutionCost::reference();
        assert_eq!(l.exec_cost(0.0), 0.0);
        assert_relative_eq!(l.exec_cost(1.0), 0.1, max_relative = 1e-15);
        // 0.1 * 0.5^1.75 evaluated as 0.1 * exp(1.75 ln 0.5)
        let oracle = 0.1 * (1.75 * 0.5_f64.ln()).exp();
        assert_relative_eq!(l.exec_cost(0.5), oracle, max_relative = 1e-14);
        assert_relative_eq!(l.exec_cost(0.5), 0.029730177875068, max_relative = 1e-12);
        assert_eq!(l.exec_cost(-0.3), l.exec_cost(0.3));
    }

    #[test]
    fn hamiltonian_examples() {
        let l = ExecutionCost::new(0.1, 1.0, 0.0).unwrap();
        let h = l.hamiltonian(0.0, f64::INFINITY);
        assert_eq!((h.value, h.argmax), (0.0, 0.0));
        let h = l.hamiltonian(0.2, f64::INFINITY);
        assert_relative_eq!(h.value, 0.1, max_relative = 1e-14);
        assert_relative_eq!(h.argmax, 1.0, max_relative = 1e-14);
        let h = l.hamiltonian(0.2, 0.5);
        assert_relative_eq!(h.value, 0.075, max_relative = 1e-14);
        assert_relative_eq!(h.argmax, 0.5, max_relative = 1e-14);
        let h = l.hamiltonian(-0.2, 0.5);
        assert_relative_eq!(h.argmax, -0.5, max_relative = 1e-14);
    }

    #[test]
    fn proportional_cost_dead_zone() {
        let l = ExecutionCost::new(0.1, 0.75, 0.05).unwrap();
        assert_eq!(l.hamiltonian(0.04, 5.0).argmax, 0.0);
        assert_eq!(l.hamiltonian(-0.05, 5.0).value, 0.0);
        let h = l.hamiltonian(0.3, 5.0);
        let expected = (0.25 / (0.1 * 1.75_f64)).powf(1.0 / 0.75);
        assert_relative_eq!(h.argmax, expected, max_relative = 1e-14);
    }

    #[test]
    fn golden_matches_closed_form() {
        let l = ExecutionCost::new(0.1, 0.75, 0.02).unwrap();
        for &p in &[-1.3, -0.2, 0.01, 0.07, 0.5, 2.0] {
            for &rm in &[0.3, 5.0, f64::INFINITY] {
                let a = l.hamiltonian(p, rm);
                let b = hamiltonian_golden(&l, p, rm);
                assert_relative_eq!(a.value, b.value, max_relative = 1e-9, epsilon = 1e-14);
                assert!((a.argmax - b.argmax).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn golden_fallback_for_generic_cost() {
        // H(p) for 0.5 rho^4 + 0.1 rho^2 at p = 1: stationarity 2 rho^3 + 0.2 rho = 1.
        let h = Quartic.hamiltonian(1.0, f64::INFINITY);
        let r = h.argmax;
        assert!((2.0 * r.powi(3) + 0.2 * r - 1.0).abs() < 1e-8);
        assert_eq!(Quartic.hamiltonian(-1.0, 10.0).argmax, -r);
        let capped = Quartic.hamiltonian(1.0, 0.1);
        assert!((capped.argmax - 0.1).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ExecutionCost::new(-0.1, 0.75, 0.0).is_err());
        assert!(ExecutionCost::new(0.1, 0.0, 0.0).is_err());
        assert!(ExecutionCost::new(0.1, 0.75, -1.0).is_err());
    }
}
