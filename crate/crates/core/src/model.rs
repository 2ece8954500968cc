//! Discrete multi-baseline, multi-temporal imaging model.
//!
//! A pixel's measurement vector is `g = R γ + ε`, where the steering matrix
//! `R` maps a reflectivity vector over the joint elevation × motion grid to
//! the `N` acquisitions:
//!
//! ```text
//! R[n, l(s, p_1..p_M)] = exp(+j 2π (ξ_n s + Σ_m η_{m,n} p_m))
//! ξ_n = 2 b_n / (λ r),   η_{m,n} = 2 τ_m(t_n) / λ
//! ```
//!
//! The flat column index runs with the elevation axis slowest, followed by
//! the motion axes in declaration order, so a contiguous column range is a
//! contiguous elevation interval spanning every motion hypothesis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{normalize_columns, CMatrix, CVector};

/// The physical description of an acquisition stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionGeometry {
    /// Orthogonal baselines in meters.
    pub baselines: Vec<f64>,
    /// Acquisition times in years relative to the master.
    pub times: Vec<f64>,
    /// Wavelength in meters.
    pub wavelength: f64,
    /// Slant range in meters.
    pub slant_range: f64,
    /// Incidence angle in degrees, only used to convert elevation to height.
    #[serde(default)]
    pub incidence_angle: Option<f64>,
}

impl AcquisitionGeometry {
    pub fn new(baselines: Vec<f64>, times: Vec<f64>, wavelength: f64, slant_range: f64) -> Result<Self> {
        let geo = Self {
            baselines,
            times,
            wavelength,
            slant_range,
            incidence_angle: None,
        };
        geo.validate()?;
        Ok(geo)
    }

    /// `n` baselines evenly spaced over `[min_baseline, max_baseline]`, all
    /// acquired at the master time.
    pub fn regular(
        n: usize,
        min_baseline: f64,
        max_baseline: f64,
        wavelength: f64,
        slant_range: f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("a stack needs at least two acquisitions"));
        }
        let step = (max_baseline - min_baseline) / (n - 1) as f64;
        let baselines = (0..n).map(|i| min_baseline + step * i as f64).collect();
        Self::new(baselines, vec![0.0; n], wavelength, slant_range)
    }

    pub fn with_times(mut self, times: Vec<f64>) -> Result<Self> {
        self.times = times;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.baselines.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "a stack needs at least two acquisitions, got {n}"
            )));
        }
        if self.times.len() != n {
            return Err(Error::dims(format!(
                "{n} baselines but {} acquisition times",
                self.times.len()
            )));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::invalid(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        if !(self.slant_range > 0.0 && self.slant_range.is_finite()) {
            return Err(Error::invalid(format!(
                "slant range must be positive, got {}",
                self.slant_range
            )));
        }
        if self.baselines.iter().chain(&self.times).any(|v| !v.is_finite()) {
            return Err(Error::invalid("baselines and times must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.baselines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.baselines.is_empty()
    }

    /// ξ_n = 2 b_n / (λ r), cycles per meter of elevation.
    pub fn elevation_frequencies(&self) -> Vec<f64> {
        let scale = 2.0 / (self.wavelength * self.slant_range);
        self.baselines.iter().map(|b| scale * b).collect()
    }

    /// Rayleigh elevation resolution `λ r / (2 Δb)`.
    pub fn rayleigh_resolution(&self) -> Result<f64> {
        let (lo, hi) = self
            .baselines
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| (lo.min(b), hi.max(b)));
        let span = hi - lo;
        if !(span > 0.0) {
            return Err(Error::invalid("baseline span is zero; elevation is unresolvable"));
        }
        Ok(self.wavelength * self.slant_range / (2.0 * span))
    }
}

/// One base function of the line-of-sight motion model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MotionTerm {
    /// τ(t) = t
    Linear,
    /// τ(t) = sin(2π (t − phase_offset) / period), times in years.
    Sinusoidal {
        #[serde(default = "default_period")]
        period: f64,
        #[serde(default)]
        phase_offset: f64,
    },
    /// τ(t_n) given per acquisition.
    Tabulated { values: Vec<f64> },
}

fn default_period() -> f64 {
    1.0
}

impl MotionTerm {
    pub fn seasonal() -> Self {
        MotionTerm::Sinusoidal {
            period: 1.0,
            phase_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionBasis {
    pub terms: Vec<MotionTerm>,
}

impl MotionBasis {
    /// No motion terms: plain elevation tomography.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(terms: Vec<MotionTerm>) -> Self {
        Self { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluate term `term_index` at time `t`. Tabulated terms look `t` up
    /// among `acquisition_times`.
    pub fn eval(&self, term_index: usize, t: f64, acquisition_times: &[f64]) -> Result<f64> {
        let term = self.terms.get(term_index).ok_or_else(|| {
            Error::invalid(format!(
                "motion term {term_index} out of range for a basis of {} terms",
                self.terms.len()
            ))
        })?;
        match term {
            MotionTerm::Linear => Ok(t),
            MotionTerm::Sinusoidal { period, phase_offset } => {
                Ok((2.0 * PI * (t - phase_offset) / period).sin())
            }
            MotionTerm::Tabulated { values } => {
                let n = acquisition_times
                    .iter()
                    .position(|&tn| tn == t)
                    .ok_or_else(|| Error::invalid(format!("time {t} is not an acquisition time")))?;
                values.get(n).copied().ok_or_else(|| {
                    Error::dims(format!(
                        "tabulated term has {} values, needs one per acquisition",
                        values.len()
                    ))
                })
            }
        }
    }

    pub fn validate(&self, geo: &AcquisitionGeometry) -> Result<()> {
        for (m, term) in self.terms.iter().enumerate() {
            match term {
                MotionTerm::Tabulated { values } if values.len() != geo.len() => {
                    return Err(Error::dims(format!(
                        "tabulated motion term {m} has {} values for {} acquisitions",
                        values.len(),
                        geo.len()
                    )))
                }
                MotionTerm::Sinusoidal { period, .. } if !(*period > 0.0 && period.is_finite()) => {
                    return Err(Error::invalid(format!("motion term {m} has non-positive period {period}")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Discretization of elevation and of every motion coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    /// Elevation samples in meters, strictly increasing.
    pub elevation: Vec<f64>,
    /// One axis per motion term, strictly increasing, in the term's unit.
    pub motion: Vec<Vec<f64>>,
}

impl ParameterGrid {
    pub fn new(elevation: Vec<f64>, motion: Vec<Vec<f64>>) -> Result<Self> {
        let grid = Self { elevation, motion };
        grid.validate()?;
        Ok(grid)
    }

    pub fn elevation_only(elevation: Vec<f64>) -> Result<Self> {
        Self::new(elevation, Vec::new())
    }

    pub fn validate(&self) -> Result<()> {
        check_axis("elevation", &self.elevation)?;
        for (m, axis) in self.motion.iter().enumerate() {
            check_axis(&format!("motion axis {m}"), axis)?;
        }
        Ok(())
    }

    /// Total number of grid points `L`.
    pub fn len(&self) -> usize {
        self.elevation.len() * self.motion_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of motion hypotheses per elevation sample.
    pub fn motion_len(&self) -> usize {
        self.motion.iter().map(Vec::len).product()
    }

    fn shape(&self) -> Vec<usize> {
        std::iter::once(self.elevation.len())
            .chain(self.motion.iter().map(Vec::len))
            .collect()
    }

    /// Multi-index (elevation first) to flat column index.
    pub fn flat_index(&self, multi: &[usize]) -> Result<usize> {
        let shape = self.shape();
        if multi.len() != shape.len() {
            return Err(Error::dims(format!(
                "multi-index has {} components, grid has {} axes",
                multi.len(),
                shape.len()
            )));
        }
        let mut flat = 0;
        for (&i, &n) in multi.iter().zip(&shape) {
            if i >= n {
                return Err(Error::invalid(format!("index {i} out of range for axis of length {n}")));
            }
            flat = flat * n + i;
        }
        Ok(flat)
    }

    pub fn multi_index(&self, flat: usize) -> Result<Vec<usize>> {
        if flat >= self.len() {
            return Err(Error::invalid(format!("flat index {flat} out of range for L = {}", self.len())));
        }
        let shape = self.shape();
        let mut out = vec![0; shape.len()];
        let mut rest = flat;
        for (slot, &n) in out.iter_mut().zip(&shape).rev() {
            *slot = rest % n;
            rest /= n;
        }
        Ok(out)
    }

    /// Grid coordinates (elevation, motion...) of a flat index.
    pub fn coordinates(&self, flat: usize) -> Result<(f64, Vec<f64>)> {
        let multi = self.multi_index(flat)?;
        let motion = self
            .motion
            .iter()
            .zip(&multi[1..])
            .map(|(axis, &i)| axis[i])
            .collect();
        Ok((self.elevation[multi[0]], motion))
    }

    /// Elevation sample spacing, assuming a regular axis.
    pub fn elevation_step(&self) -> Option<f64> {
        if self.elevation.len() < 2 {
            return None;
        }
        let n = self.elevation.len();
        Some((self.elevation[n - 1] - self.elevation[0]) / (n - 1) as f64)
    }

    /// Index of the elevation sample nearest to `s`.
    pub fn nearest_elevation(&self, s: f64) -> usize {
        nearest(&self.elevation, s)
    }

    pub fn nearest_motion(&self, axis: usize, value: f64) -> usize {
        nearest(&self.motion[axis], value)
    }
}

fn nearest(axis: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &a) in axis.iter().enumerate() {
        let d = (a - v).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::invalid(format!("{name} is empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{name} has non-finite values")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!("{name} is not strictly increasing")));
    }
    Ok(())
}

/// `n` evenly spaced samples over `[lo, hi]`, both ends included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + step * i as f64).collect()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteeringMatrix {
    pub entries: CMatrix,
    pub grid: ParameterGrid,
    pub normalized: bool,
}

impl SteeringMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn normalized(&self) -> Result<SteeringMatrix> {
        if self.normalized {
            return Ok(self.clone());
        }
        let mut entries = self.entries.clone();
        normalize_columns(&mut entries)?;
        Ok(SteeringMatrix {
            entries,
            grid: self.grid.clone(),
            normalized: true,
        })
    }
}

/// Per-acquisition phase frequencies: ξ_n and η_{m,n}.
struct PhaseModel {
    xi: Vec<f64>,
    eta: Vec<Vec<f64>>,
}

impl PhaseModel {
    fn new(geo: &AcquisitionGeometry, basis: &MotionBasis) -> Result<Self> {
        geo.validate()?;
        basis.validate(geo)?;
        let eta = (0..basis.len())
            .map(|m| {
                geo.times
                    .iter()
                    .map(|&t| Ok(2.0 * basis.eval(m, t, &geo.times)? / geo.wavelength))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            xi: geo.elevation_frequencies(),
            eta,
        })
    }

    fn phasor(&self, n: usize, s: f64, motion: &[f64]) -> Complex64 {
        let mut cycles = self.xi[n] * s;
        for (eta_m, p) in self.eta.iter().zip(motion) {
            cycles += eta_m[n] * p;
        }
        Complex64::from_polar(1.0, 2.0 * PI * cycles)
    }
}

/// Build the steering matrix over every grid point.
pub fn build_steering_matrix(
    geo: &AcquisitionGeometry,
    basis: &MotionBasis,
    grid: &ParameterGrid,
    normalize: bool,
) -> Result<SteeringMatrix> {
    grid.validate()?;
    if grid.motion.len() != basis.len() {
        return Err(Error::dims(format!(
            "grid has {} motion axes but the basis has {} terms",
            grid.motion.len(),
            basis.len()
        )));
    }
    let model = PhaseModel::new(geo, basis)?;
    let n_acq = geo.len();
    let l = grid.len();
    let mut entries = CMatrix::zeros(n_acq, l);
    for col in 0..l {
        let (s, motion) = grid.coordinates(col)?;
        for n in 0..n_acq {
            entries[(n, col)] = model.phasor(n, s, &motion);
        }
    }
    if normalize {
        normalize_columns(&mut entries)?;
    }
    Ok(SteeringMatrix {
        entries,
        grid: grid.clone(),
        normalized: normalize,
    })
}

/// Unnormalized steering vector at an arbitrary (possibly off-grid) point.
pub fn steering_vector(
    geo: &AcquisitionGeometry,
    basis: &MotionBasis,
    elevation: f64,
    motion: &[f64],
) -> Result<CVector> {
    if motion.len() != basis.len() {
        return Err(Error::dims(format!(
            "{} motion coefficients for a basis of {} terms",
            motion.len(),
            basis.len()
        )));
    }
    let model = PhaseModel::new(geo, basis)?;
    Ok(CVector::from_iterator(
        geo.len(),
        (0..geo.len()).map(|n| model.phasor(n, elevation, motion)),
    ))
}

/// Complex reflectivity over the flattened parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivityProfile {
    pub entries: CVector,
}

impl ReflectivityProfile {
    pub fn new(entries: CVector) -> Self {
        Self { entries }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            entries: CVector::zeros(len),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub entries: CVector,
    /// Signal-to-noise ratio used at synthesis; `+inf` for noiseless data.
    pub snr_db: f64,
}

impl MeasurementVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Add circular complex Gaussian noise to `signal` at the requested SNR
/// (mean per-sample signal power over complex noise variance).
pub fn add_noise<R: Rng + ?Sized>(signal: CVector, snr_db: f64, rng: &mut R) -> Result<MeasurementVector> {
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR is NaN"));
    }
    if snr_db == f64::INFINITY {
        return Ok(MeasurementVector {
            entries: signal,
            snr_db,
        });
    }
    let n = signal.len();
    let power = signal.norm_squared() / n as f64;
    if power == 0.0 {
        return Err(Error::invalid("cannot scale noise to a finite SNR for a zero signal"));
    }
    let variance = power / 10f64.powf(snr_db / 10.0);
    let sigma = (variance / 2.0).sqrt();
    let mut entries = signal;
    for z in entries.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z += Complex64::new(sigma * re, sigma * im);
    }
    Ok(MeasurementVector { entries, snr_db })
}

/// `g = R γ + ε`, deterministic for a given seed.
pub fn synthesize_measurements(
    r: &SteeringMatrix,
    gamma: &ReflectivityProfile,
    snr_db: f64,
    rng_seed: u64,
) -> Result<MeasurementVector> {
    if gamma.len() != r.cols() {
        return Err(Error::dims(format!(
            "profile has {} entries, steering matrix has {} columns",
            gamma.len(),
            r.cols()
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    add_noise(&r.entries * &gamma.entries, snr_db, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn benchmark_geometry() -> AcquisitionGeometry {
        AcquisitionGeometry::regular(25, -135.0, 135.0, 0.031, 697_000.0).unwrap()
    }

    #[test]
    fn motion_basis_examples() {
        let times = [0.0, 0.25];
        let lin = MotionBasis::new(vec![MotionTerm::Linear]);
        assert_eq!(lin.eval(0, 0.0, &times).unwrap(), 0.0);

        let sin = MotionBasis::new(vec![MotionTerm::Sinusoidal {
            period: 1.0,
            phase_offset: 0.0,
        }]);
        assert_relative_eq!(sin.eval(0, 0.25, &times).unwrap(), 1.0, epsilon = 1e-15);

        let shifted = MotionBasis::new(vec![MotionTerm::Sinusoidal {
            period: 1.0,
            phase_offset: 0.25,
        }]);
        assert_eq!(shifted.eval(0, 0.25, &times).unwrap(), 0.0);
    }

    #[test]
    fn motion_basis_errors() {
        let tab = MotionBasis::new(vec![MotionTerm::Tabulated { values: vec![1.0, 2.0] }]);
        assert_eq!(tab.eval(0, 0.25, &[0.0, 0.25]).unwrap(), 2.0);
        assert!(tab.eval(0, 0.5, &[0.0, 0.25]).is_err());
        assert!(tab.eval(1, 0.0, &[0.0, 0.25]).is_err());
    }

    #[test]
    fn geometry_rejects_bad_input() {
        assert!(AcquisitionGeometry::new(vec![0.0], vec![0.0], 0.03, 7e5).is_err());
        assert!(AcquisitionGeometry::new(vec![0.0, 1.0], vec![0.0], 0.03, 7e5).is_err());
        assert!(AcquisitionGeometry::new(vec![0.0, 1.0], vec![0.0, 0.1], -0.03, 7e5).is_err());
        assert!(AcquisitionGeometry::new(vec![0.0, f64::NAN], vec![0.0, 0.1], 0.03, 7e5).is_err());
    }

    #[test]
    fn rayleigh_resolution_values() {
        let geo = benchmark_geometry();
        let rho = geo.rayleigh_resolution().unwrap();
        assert!((rho - 40.01).abs() < 0.01, "rho = {rho}");

        let half_range = AcquisitionGeometry::regular(25, -135.0, 135.0, 0.031, 348_500.0).unwrap();
        assert!((half_range.rayleigh_resolution().unwrap() - 20.0).abs() < 0.01);

        let wide = AcquisitionGeometry::regular(25, -270.0, 270.0, 0.031, 697_000.0).unwrap();
        assert_relative_eq!(wide.rayleigh_resolution().unwrap(), rho / 2.0, max_relative = 1e-14);

        let flat = AcquisitionGeometry::new(vec![5.0, 5.0], vec![0.0, 0.0], 0.031, 7e5).unwrap();
        assert!(flat.rayleigh_resolution().is_err());
    }

    #[test]
    fn zero_baselines_give_unit_entries() {
        let geo = AcquisitionGeometry::new(vec![0.0; 4], vec![0.0; 4], 0.031, 7e5).unwrap();
        let basis = MotionBasis::new(vec![MotionTerm::Linear]);
        let grid = ParameterGrid::new(vec![-10.0, 0.0, 20.0], vec![vec![-1.0, 1.0]]).unwrap();
        let r = build_steering_matrix(&geo, &basis, &grid, false).unwrap();
        for z in r.entries.iter() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn single_baseline_phase_matches_hand_value() {
        let geo = AcquisitionGeometry::new(vec![135.0, 0.0], vec![0.0, 0.0], 0.031, 697_000.0).unwrap();
        let grid = ParameterGrid::elevation_only(vec![40.0]).unwrap();
        let r = build_steering_matrix(&geo, &MotionBasis::none(), &grid, false).unwrap();
        // 2*135*40 / (0.031*697000) = 0.49984...
        let cycles: f64 = 2.0 * 135.0 * 40.0 / (0.031 * 697_000.0);
        assert!((cycles - 0.49984).abs() < 1e-5);
        let expected = Complex64::from_polar(1.0, 2.0 * PI * cycles);
        assert!((r.entries[(0, 0)] - expected).norm() < 1e-12);
    }

    #[test]
    fn normalized_entries_have_modulus_one_fifth() {
        let geo = benchmark_geometry();
        let grid = ParameterGrid::elevation_only(linspace(-80.0, 80.0, 17)).unwrap();
        let r = build_steering_matrix(&geo, &MotionBasis::none(), &grid, true).unwrap();
        for z in r.entries.iter() {
            assert!((z.norm() - 0.2).abs() < 1e-14);
        }
        for col in r.entries.column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_between_basis_and_grid() {
        let geo = benchmark_geometry();
        let grid = ParameterGrid::elevation_only(vec![0.0, 1.0]).unwrap();
        let basis = MotionBasis::new(vec![MotionTerm::Linear]);
        assert!(build_steering_matrix(&geo, &basis, &grid, false).is_err());
    }

    #[test]
    fn grid_rejects_non_increasing_axis() {
        assert!(ParameterGrid::elevation_only(vec![0.0, 0.0]).is_err());
        assert!(ParameterGrid::new(vec![0.0], vec![vec![2.0, 1.0]]).is_err());
        assert!(ParameterGrid::elevation_only(vec![]).is_err());
    }

    #[test]
    fn noiseless_synthesis_is_exact() {
        let geo = benchmark_geometry();
        let grid = ParameterGrid::elevation_only(linspace(-60.0, 60.0, 31)).unwrap();
        let r = build_steering_matrix(&geo, &MotionBasis::none(), &grid, false).unwrap();
        let mut gamma = ReflectivityProfile::zeros(31);
        gamma.entries[7] = Complex64::new(0.5, -1.0);
        let g = synthesize_measurements(&r, &gamma, f64::INFINITY, 3).unwrap();
        assert_eq!(g.entries, &r.entries * &gamma.entries);
    }

    #[test]
    fn synthesis_is_deterministic_per_seed() {
        let geo = benchmark_geometry();
        let grid = ParameterGrid::elevation_only(linspace(-60.0, 60.0, 31)).unwrap();
        let r = build_steering_matrix(&geo, &MotionBasis::none(), &grid, false).unwrap();
        let mut gamma = ReflectivityProfile::zeros(31);
        gamma.entries[3] = Complex64::new(1.0, 0.0);
        let a = synthesize_measurements(&r, &gamma, 6.0, 11).unwrap();
        let b = synthesize_measurements(&r, &gamma, 6.0, 11).unwrap();
        let c = synthesize_measurements(&r, &gamma, 6.0, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_signal_with_finite_snr_is_rejected() {
        let geo = benchmark_geometry();
        let grid = ParameterGrid::elevation_only(vec![0.0, 1.0]).unwrap();
        let r = build_steering_matrix(&geo, &MotionBasis::none(), &grid, false).unwrap();
        let gamma = ReflectivityProfile::zeros(2);
        assert!(synthesize_measurements(&r, &gamma, 6.0, 0).is_err());
        assert!(synthesize_measurements(&r, &gamma, f64::INFINITY, 0).is_ok());
    }
}
