use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

pub type Q = Ratio<i64>;

fn q(a: i64, b: i64) -> Q {
    Ratio::new(a, b)
}

/// Exponents attached to the critical exponent p = n(n+1), in exact arithmetic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentTable {
    pub n: i64,
    pub p: Q,
    pub r: Q,
    /// Hyperplane exponent (n−3)/2 + 2/n − 2/(n²(n+1)).
    pub a_mt: Q,
    /// Tube exponent (n−2) + 2/(n(n+1)).
    pub a_tube: Q,
    pub e_t: Q,
    pub e_l: Q,
    pub e_s: Q,
    pub e_p: Q,
    /// Lower bound for the slab family as printed: −(n+1)/2 + 2/n − 2/(n(n+1)).
    pub sharp_l_as_stated: Q,
    /// The same bound from −(n+1)/(2r) + 1/(nr): −(n+1)/2 + 2/n − 2/(n²(n+1)).
    pub sharp_l_derived: Q,
    /// Lower bound for the tube family: −1 + 2/(n(n+1)).
    pub sharp_p: Q,
    /// Lower bound for the hyperplane family: −(n+1)/2 + 1/n.
    pub sharp_s: Q,
}

impl ExponentTable {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "dimension must be at least 2");
        let n = n as i64;
        let p = q(n * (n + 1), 1);
        let r = p / (p - q(2, 1));
        let one = q(1, 1);
        let e_t = -q(n + 1, 2) / r;
        let e_l = e_t + one / (q(n, 1) * r);
        ExponentTable {
            n,
            p,
            r,
            a_mt: q(n - 3, 2) + q(2, n) - q(2, n * n * (n + 1)),
            a_tube: q(n - 2, 1) + q(2, n * (n + 1)),
            e_t,
            e_l,
            e_s: e_l,
            e_p: -one / r,
            sharp_l_as_stated: -q(n + 1, 2) + q(2, n) - q(2, n * (n + 1)),
            sharp_l_derived: -q(n + 1, 2) + q(2, n) - q(2, n * n * (n + 1)),
            sharp_p: -one + q(2, n * (n + 1)),
            sharp_s: -q(n + 1, 2) + q(1, n),
        }
    }

    /// 1/r, as used for powers of masses.
    pub fn inv_r(&self) -> f64 {
        to_f64(Q::from_integer(1) / self.r)
    }

    pub fn summary(&self) -> ExponentSummary {
        ExponentSummary {
            n: self.n as usize,
            p: to_f64(self.p),
            r: to_f64(self.r),
            a_mt: to_f64(self.a_mt),
            a_tube: to_f64(self.a_tube),
            e_t: to_f64(self.e_t),
            e_l: to_f64(self.e_l),
            e_s: to_f64(self.e_s),
            e_p: to_f64(self.e_p),
        }
    }
}

pub fn to_f64(x: Q) -> f64 {
    x.to_f64().expect("finite")
}

/// Floating-point view for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSummary {
    pub n: usize,
    pub p: f64,
    pub r: f64,
    pub a_mt: f64,
    pub a_tube: f64,
    pub e_t: f64,
    pub e_l: f64,
    pub e_s: f64,
    pub e_p: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_values() {
        let t = ExponentTable::new(2);
        assert_eq!(t.p, q(6, 1));
        assert_eq!(t.r, q(3, 2));
        assert_eq!(t.a_mt, q(1, 3));
        assert_eq!(t.a_tube, q(1, 3));
        assert_eq!(t.e_t, q(-1, 1));
        assert_eq!(t.e_p, q(-2, 3));
        assert_eq!(t.e_l, q(-2, 3));
    }

    #[test]
    fn transfer_identities() {
        for n in 2..=6 {
            let t = ExponentTable::new(n);
            assert_eq!(q(n as i64 - 1, 1) + t.e_l, t.a_mt);
            assert_eq!(q(n as i64 - 1, 1) + t.e_p, t.a_tube);
            assert_eq!(t.sharp_l_derived, t.e_l);
        }
    }

    #[test]
    fn printed_slab_bound_differs_from_the_derived_one() {
        let t = ExponentTable::new(3);
        assert_eq!(t.sharp_l_as_stated, q(-3, 2));
        assert_eq!(t.sharp_l_derived, q(-25, 18));
    }
}
