use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CVector;

/// Complex soft threshold: shrink the modulus by `theta`, keep the phase.
pub fn complex_soft_threshold(x: Complex64, theta: f64) -> Result<Complex64> {
    if !(theta >= 0.0) {
        return Err(Error::invalid(format!("threshold must be non-negative, got {theta}")));
    }
    Ok(shrink(x, theta))
}

#[inline]
pub(crate) fn shrink(x: Complex64, theta: f64) -> Complex64 {
    let m = x.norm();
    if m <= theta {
        Complex64::new(0.0, 0.0)
    } else {
        x * ((m - theta) / m)
    }
}

/// Soft threshold every entry except the `p` largest in modulus, which pass
/// unchanged. Ties in modulus go to the lower index.
pub fn support_selection_threshold(gamma: &CVector, theta: f64, p: usize) -> Result<CVector> {
    if p > gamma.len() {
        return Err(Error::invalid(format!(
            "support size {p} exceeds vector length {}",
            gamma.len()
        )));
    }
    if !(theta >= 0.0) {
        return Err(Error::invalid(format!("threshold must be non-negative, got {theta}")));
    }
    let mut keep = vec![false; gamma.len()];
    if p > 0 {
        let mut order: Vec<usize> = (0..gamma.len()).collect();
        order.sort_by(|&a, &b| gamma[b].norm().total_cmp(&gamma[a].norm()).then(a.cmp(&b)));
        for &i in &order[..p] {
            keep[i] = true;
        }
    }
    Ok(CVector::from_iterator(
        gamma.len(),
        gamma
            .iter()
            .zip(&keep)
            .map(|(&z, &k)| if k { z } else { shrink(z, theta) }),
    ))
}

/// Number of entries whose modulus exceeds `1e-6 ·` the largest modulus of
/// `reference`.
pub(crate) fn numeric_l0<'a, I>(values: I, reference_max: f64) -> usize
where
    I: IntoIterator<Item = &'a Complex64>,
{
    if reference_max == 0.0 {
        return 0;
    }
    let floor = 1e-6 * reference_max;
    values.into_iter().filter(|z| z.norm() > floor).count()
}

pub(crate) fn max_modulus(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
