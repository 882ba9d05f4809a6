use nalgebra::DMatrix;

use super::function::{Side, Tomogram};
use super::rep::{klm_phase, Representation};
use crate::error::{invalid, Error, Result};
use crate::group::GroupElement;
use crate::ops::{min_hermitian_eigenvalue, C64};

pub const MAX_KLM_POINTS: usize = 128;

/// Smallest eigenvalue of the twisted Gram matrix `f(g_j^-1 g_k) phi(g_j, g_k)`.
///
/// Nonnegative (up to rounding) whenever `f` is the tomogram of a positive operator.
pub fn klm_check(rep: &Representation, f: &Tomogram, points: &[GroupElement]) -> Result<f64> {
    if rep.klm_residual().is_none() {
        return Err(Error::Unsupported("twisted Gram phase failed its calibration for this representation".into()));
    }
    if f.side() != Side::FourierWigner || f.source() != rep.descriptor() {
        return invalid("KLM check needs a Fourier-Wigner tomogram of this representation");
    }
    if points.is_empty() || points.len() > MAX_KLM_POINTS {
        return invalid(format!("KLM check takes 1..={MAX_KLM_POINTS} points, got {}", points.len()));
    }
    let ctx = rep.context();
    for g in points {
        ctx.check(g)?;
    }
    let n = points.len();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (j, gj) in points.iter().enumerate() {
        let inv = ctx.inverse(gj)?;
        for (k, gk) in points.iter().enumerate() {
            let diff = ctx.compose(&inv, gk)?;
            let value = f
                .value_at(&diff)
                .ok_or_else(|| Error::InvalidInput(format!("tomogram not sampled at {diff:?}")))?;
            m[(j, k)] = value * klm_phase(&ctx, gj, gk)?;
        }
    }
    Ok(min_hermitian_eigenvalue(&m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupContext;
    use crate::ops::{random_density, Operator};
    use crate::weyl::fw_transform;
    use rand::Rng;

    fn random_points(ctx: &GroupContext, n: usize, seed: u64) -> Vec<GroupElement> {
        let d = ctx.modulus().unwrap() as i64;
        let mut rng = crate::ops::seeded_rng(seed);
        (0..n).map(|_| ctx.element(rng.random_range(0..d), rng.random_range(0..d)).unwrap()).collect()
    }

    #[test]
    fn states_are_klm_positive() {
        let rep = Representation::discrete_weyl(5).unwrap();
        let pts = random_points(&rep.context(), 32, 11);
        for seed in 0..5 {
            let f = fw_transform(&rep, random_density(5, seed).unwrap().operator()).unwrap();
            assert!(klm_check(&rep, &f, &pts).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn non_state_is_detected() {
        let rep = Representation::discrete_weyl(3).unwrap();
        let a = Operator::from_real_diagonal(&[1.0, -1.0, 1.0]).unwrap();
        let f = fw_transform(&rep, &a).unwrap();
        let all = rep.context().elements().unwrap();
        assert!(klm_check(&rep, &f, &all).unwrap() < -0.1);
    }

    #[test]
    fn single_identity_point() {
        let rep = Representation::discrete_weyl(3).unwrap();
        let f = fw_transform(&rep, random_density(3, 2).unwrap().operator()).unwrap();
        let e = rep.context().identity();
        let v = klm_check(&rep, &f, &[e]).unwrap();
        assert!((v - 1.0 / rep.duflo_moore()).abs() < 1e-14);
    }
}
