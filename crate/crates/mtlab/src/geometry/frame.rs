use crate::error::Result;
use crate::geometry::curve::CurveSpec;
use crate::linalg::{dot, norm};
use crate::scalar::Real;

/// Orthonormal Serret–Frenet frame at a parameter value.
#[derive(Clone, Debug)]
pub struct FrenetFrame<T> {
    pub xi: T,
    /// e[0] is the tangent, e[n-1] the final direction.
    pub e: Vec<Vec<T>>,
}

impl<T: Real> FrenetFrame<T> {
    pub fn orthonormality_residual(&self) -> T {
        let n = self.e.len();
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { T::one() } else { T::zero() };
                worst = worst.max((dot(&self.e[i], &self.e[j]) - want).abs());
            }
        }
        worst
    }
}

/// Gram–Schmidt of (Γ', …, Γ⁽ⁿ⁾). Each e_j has positive inner product with Γ⁽ʲ⁾.
pub fn frenet_frame<T: Real>(curve: &CurveSpec<T>, t: T) -> Result<FrenetFrame<T>> {
    curve.check_well_curved(t)?;
    let mut e: Vec<Vec<T>> = Vec::with_capacity(curve.n);
    for j in 1..=curve.n {
        let mut v = curve.derivative(j, t);
        // two passes of modified Gram–Schmidt keep f32 frames orthonormal
        for _ in 0..2 {
            for u in &e {
                let c = dot(&v, u);
                for (vk, &uk) in v.iter_mut().zip(u) {
                    *vk = *vk - c * uk;
                }
            }
        }
        let len = norm(&v);
        e.push(v.into_iter().map(|x| x / len).collect());
    }
    Ok(FrenetFrame { xi: t, e })
}
