//! Analytic reconstruction weights by generalized mutual-coherence
//! minimization.
//!
//! The weights are parameterized as `W = Gᴴ G R` with an `N × N` matrix `G`.
//! An auxiliary dictionary `D ≈ G R` with unit-norm columns is driven
//! towards a tight frame by projected gradient steps, and `G` is refit by
//! least squares after every step. All inner products are Hermitian.

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_deviation_sqr, matrix_digest, normalize_columns, pseudoinverse, CMatrix};
use crate::model::SteeringMatrix;

/// Generalized mutual coherence `max_{i≠j} |w_iᴴ r_j|` after rescaling each
/// `w_i` so that `w_iᴴ r_i = 1`.
pub fn mutual_coherence(w: &CMatrix, r: &CMatrix) -> Result<f64> {
    if w.shape() != r.shape() {
        return Err(Error::dims(format!(
            "weights are {:?} but the dictionary is {:?}",
            w.shape(),
            r.shape()
        )));
    }
    let cross = w.adjoint() * r;
    let l = cross.nrows();
    let mut mu: f64 = 0.0;
    for i in 0..l {
        let diag = cross[(i, i)];
        let scale = diag.norm();
        let reference = w.column(i).norm() * r.column(i).norm();
        if !(scale > 1e-12 * reference) || !scale.is_finite() {
            return Err(Error::numerical(format!(
                "weight column {i} is orthogonal to its atom; cannot rescale"
            )));
        }
        for j in 0..l {
            if i != j {
                mu = mu.max(cross[(i, j)].norm() / scale);
            }
        }
    }
    Ok(mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightOptConfig {
    pub zeta_init: f64,
    pub alpha_init: f64,
    pub shrink_factor: f64,
    /// Plateau test: `|f1(t) − f1(t−1)| ≤ rtol · max(1, f1(t))`.
    pub f1_plateau_rtol: f64,
    /// Stop test: `|f1 − f2| ≤ rtol · max(1, f1)`.
    pub f1_f2_match_rtol: f64,
    pub max_outer_iters: usize,
}

impl Default for WeightOptConfig {
    fn default() -> Self {
        Self {
            zeta_init: 0.1,
            alpha_init: 0.1,
            shrink_factor: 0.1,
            f1_plateau_rtol: 1e-6,
            f1_f2_match_rtol: 1e-3,
            max_outer_iters: 5000,
        }
    }
}

impl WeightOptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::invalid(format!(
                "shrink_factor must lie in (0, 1), got {}",
                self.shrink_factor
            )));
        }
        for (name, v) in [
            ("zeta_init", self.zeta_init),
            ("alpha_init", self.alpha_init),
            ("f1_plateau_rtol", self.f1_plateau_rtol),
            ("f1_f2_match_rtol", self.f1_f2_match_rtol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("max_outer_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WeightOptState {
    pub d: CMatrix,
    pub g: CMatrix,
    pub zeta: f64,
    pub alpha: f64,
    pub f1_history: Vec<f64>,
    pub f2_history: Vec<f64>,
}

impl WeightOptState {
    /// `D = R`, `G = I`.
    pub fn initial(r: &CMatrix, cfg: &WeightOptConfig) -> Self {
        let n = r.nrows();
        Self {
            d: r.clone(),
            g: CMatrix::identity(n, n),
            zeta: cfg.zeta_init,
            alpha: cfg.alpha_init,
            f1_history: Vec::new(),
            f2_history: Vec::new(),
        }
    }
}

/// One projected gradient step on `D` with `G` held fixed:
/// `D ← P(D − ζ D(DᴴD − I) − (ζ/α)(D − G R))`, `P` normalizing columns.
pub fn pgd_step_d(mut state: WeightOptState, r: &CMatrix) -> Result<WeightOptState> {
    if state.d.shape() != r.shape() || state.g.shape() != (r.nrows(), r.nrows()) {
        return Err(Error::dims("state does not match the dictionary shape"));
    }
    let zeta = Complex64::new(state.zeta, 0.0);
    let penalty = Complex64::new(state.zeta / state.alpha, 0.0);
    // D(DᴴD − I) = (D Dᴴ) D − D keeps the cost at O(N² L).
    let ddh = &state.d * state.d.adjoint();
    let curvature = &ddh * &state.d - &state.d;
    let gr = &state.g * r;
    let mut next = &state.d - curvature * zeta - (&state.d - gr) * penalty;
    normalize_columns(&mut next)
        .map_err(|e| Error::numerical(format!("projected gradient step collapsed a column: {e}")))?;
    state.d = next;
    Ok(state)
}

/// Least-squares refit `G = D R⁺`.
pub fn update_g(d: &CMatrix, r_pinv: &CMatrix) -> Result<CMatrix> {
    if d.ncols() != r_pinv.nrows() {
        return Err(Error::dims(format!(
            "D has {} columns but R⁺ has {} rows",
            d.ncols(),
            r_pinv.nrows()
        )));
    }
    Ok(d * r_pinv)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticWeights {
    #[serde(skip)]
    pub entries: CMatrix,
    /// SHA-256 of the dictionary the weights were computed for.
    pub source_matrix_digest: String,
    pub converged: bool,
    pub iterations: usize,
    pub config: WeightOptConfig,
    /// Index 0 holds the value for the initial `D = R`.
    pub f1_history: Vec<f64>,
    pub f2_history: Vec<f64>,
}

/// Rescale each column of `w` so that `diag(Wᴴ R) = 1`.
pub fn rescale_to_unit_diagonal(w: &mut CMatrix, r: &CMatrix) -> Result<()> {
    for j in 0..w.ncols() {
        let d = w.column(j).dotc(&r.column(j));
        if d.norm() == 0.0 || !d.norm().is_finite() {
            return Err(Error::numerical(format!(
                "weight column {j} is orthogonal to its atom; cannot rescale"
            )));
        }
        let scale = d.conj().inv();
        for z in w.column_mut(j).iter_mut() {
            *z *= scale;
        }
    }
    Ok(())
}

/// Minimize generalized mutual coherence by alternating `D` and `G` updates.
///
/// Step size and penalty weight shrink together whenever two consecutive
/// `f1 = ‖DᴴD − I‖²` values plateau; the loop stops once `f1` and
/// `f2 = ‖(GR)ᴴGR − I‖²` agree at such a plateau. Without convergence the
/// iterate with the lowest `f2` is returned and `converged` is false.
pub fn optimize_weights(r: &SteeringMatrix, cfg: &WeightOptConfig) -> Result<AnalyticWeights> {
    cfg.validate()?;
    let dict = if r.normalized {
        r.entries.clone()
    } else {
        r.normalized()?.entries
    };
    let r_pinv = pseudoinverse(&dict)?;
    let mut state = WeightOptState::initial(&dict, cfg);

    let f1_init = gram_deviation_sqr(&state.d);
    state.f1_history.push(f1_init);
    state.f2_history.push(gram_deviation_sqr(&(&state.g * &dict)));

    let mut converged = false;
    let mut iterations = 0;
    let mut best: Option<(f64, CMatrix)> = None;
    let mut prev_f1 = f1_init;
    for iter in 1..=cfg.max_outer_iters {
        iterations = iter;
        state = pgd_step_d(state, &dict)?;
        state.g = update_g(&state.d, &r_pinv)?;
        let gr = &state.g * &dict;
        let f1 = gram_deviation_sqr(&state.d);
        let f2 = gram_deviation_sqr(&gr);
        state.f1_history.push(f1);
        state.f2_history.push(f2);
        if !f1.is_finite() || !f2.is_finite() {
            return Err(Error::numerical(format!("objective became non-finite at iteration {iter}")));
        }
        if best.as_ref().is_none_or(|(b, _)| f2 < *b) {
            best = Some((f2, state.g.clone()));
        }
        if (f1 - prev_f1).abs() <= cfg.f1_plateau_rtol * f1.max(1.0) {
            state.zeta *= cfg.shrink_factor;
            state.alpha *= cfg.shrink_factor;
            if (f1 - f2).abs() <= cfg.f1_f2_match_rtol * f1.max(1.0) {
                converged = true;
                break;
            }
        }
        prev_f1 = f1;
    }

    let g = if converged {
        state.g
    } else {
        warn!(
            "weight optimization stopped at {} iterations without meeting the f1/f2 match test",
            iterations
        );
        best.map(|(_, g)| g).unwrap_or(state.g)
    };
    let mut w = g.adjoint() * &g * &dict;
    rescale_to_unit_diagonal(&mut w, &dict)?;
    Ok(AnalyticWeights {
        entries: w,
        source_matrix_digest: matrix_digest(&dict),
        converged,
        iterations,
        config: *cfg,
        f1_history: state.f1_history,
        f2_history: state.f2_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dft(n: usize) -> CMatrix {
        let scale = 1.0 / (n as f64).sqrt();
        CMatrix::from_fn(n, n, |i, j| Complex64::from_polar(scale, 2.0 * PI * (i * j) as f64 / n as f64))
    }

    #[test]
    fn unitary_dictionary_has_zero_coherence() {
        let u = dft(8);
        assert!(mutual_coherence(&u, &u).unwrap() < 1e-14);
    }

    #[test]
    fn duplicated_atom_has_unit_coherence() {
        let mut r = dft(4);
        let first = r.column(0).clone_owned();
        r.set_column(2, &first);
        assert!((mutual_coherence(&r, &r).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn coherence_rejects_orthogonal_weight_column() {
        let r = dft(4);
        let mut w = r.clone();
        let other = r.column(1).clone_owned();
        w.set_column(0, &other);
        assert!(mutual_coherence(&w, &r).is_err());
    }

    #[test]
    fn pgd_step_keeps_unitary_fixed_point() {
        let r = dft(6);
        let cfg = WeightOptConfig::default();
        let mut state = WeightOptState::initial(&r, &cfg);
        state.g = CMatrix::identity(6, 6);
        let next = pgd_step_d(state, &r).unwrap();
        assert!((next.d - &r).norm() < 1e-13);
    }

    #[test]
    fn update_g_examples() {
        let r = dft(5);
        let p = pseudoinverse(&r).unwrap();
        let g = update_g(&r, &p).unwrap();
        assert!((g - CMatrix::identity(5, 5)).norm() < 1e-12);
        let zero = update_g(&CMatrix::zeros(5, 5), &p).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn unitary_dictionary_is_already_optimal() {
        let r = dft(8);
        let steering = SteeringMatrix {
            entries: r.clone(),
            grid: crate::model::ParameterGrid::elevation_only((0..8).map(|i| i as f64).collect()).unwrap(),
            normalized: true,
        };
        let w = optimize_weights(&steering, &WeightOptConfig::default()).unwrap();
        assert!(w.converged);
        assert_eq!(w.iterations, 1);
        assert!(w.f1_history[1] < 1e-12 && w.f2_history[1] < 1e-12);
        assert!((w.entries - r).norm() < 1e-12);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = WeightOptConfig {
            shrink_factor: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = WeightOptConfig {
            zeta_init: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
