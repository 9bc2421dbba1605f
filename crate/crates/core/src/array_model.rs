//! Array geometry, steering vectors, snapshot synthesis and covariance
//! formation for uniform and sparse linear arrays.
//!
//! Sensor positions are 1-based indices into a virtual ULA of `m` elements
//! with spacing `d = spacing_ratio · λ`. The manifold uses the centered phase
//! reference `i − 1 − (m − 1)/2`, so `a(π/2)` is the all-ones vector.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{DoaError, Result};
use crate::linalg::{hermitian_defect, CMatrix, CVector, ZERO};
use crate::rng::{stream, StreamDomain};

/// Relative tolerance for Hermitian symmetry checks.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalue floor (relative to the largest magnitude) accepted as PSD.
pub const PSD_TOL: f64 = 1e-10;

/// A sparse (or full) linear array embedded in a virtual ULA.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    sensors: Vec<usize>,
    m: usize,
    spacing_ratio: f64,
    coarray_complete: bool,
}

impl ArrayGeometry {
    /// Builds a geometry from 1-based sensor indices. Indices must be strictly
    /// increasing and lie in `[1, m]`.
    pub fn new(sensors: Vec<usize>, m: usize, spacing_ratio: f64) -> Result<Self> {
        if sensors.is_empty() {
            return Err(DoaError::domain("sensor index set is empty"));
        }
        if m == 0 {
            return Err(DoaError::domain("virtual array size must be positive"));
        }
        if !(spacing_ratio.is_finite() && spacing_ratio > 0.0) {
            return Err(DoaError::domain(format!(
                "spacing ratio must be positive, got {spacing_ratio}"
            )));
        }
        for w in sensors.windows(2) {
            if w[1] <= w[0] {
                return Err(DoaError::domain(format!(
                    "sensor indices must be strictly increasing (saw {} then {})",
                    w[0], w[1]
                )));
            }
        }
        if sensors[0] < 1 || *sensors.last().unwrap() > m {
            return Err(DoaError::domain(format!(
                "sensor indices must lie in [1, {m}]"
            )));
        }
        let mut lags = vec![false; m];
        for &a in &sensors {
            for &b in &sensors {
                lags[a.abs_diff(b)] = true;
            }
        }
        let coarray_complete = lags.iter().all(|&l| l);
        Ok(Self {
            sensors,
            m,
            spacing_ratio,
            coarray_complete,
        })
    }

    /// Sparse array with `d = λ/2` whose virtual size is its largest index.
    pub fn sparse(sensors: &[usize]) -> Result<Self> {
        let m = sensors.iter().copied().max().unwrap_or(0);
        Self::new(sensors.to_vec(), m, 0.5)
    }

    /// Full half-wavelength ULA with `m` elements.
    pub fn ula(m: usize) -> Result<Self> {
        Self::new((1..=m).collect(), m, 0.5)
    }

    /// The 4-element minimum redundancy array `{1, 2, 5, 7}` (m = 7).
    pub fn mra4() -> Self {
        Self::new(vec![1, 2, 5, 7], 7, 0.5).expect("static geometry")
    }

    /// The 5-element minimum redundancy array `{1, 2, 5, 8, 10}` (m = 10).
    pub fn mra5() -> Self {
        Self::new(vec![1, 2, 5, 8, 10], 10, 0.5).expect("static geometry")
    }

    pub fn sensors(&self) -> &[usize] {
        &self.sensors
    }

    /// Virtual ULA size.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Physical sensor count.
    pub fn n(&self) -> usize {
        self.sensors.len()
    }

    pub fn spacing_ratio(&self) -> f64 {
        self.spacing_ratio
    }

    /// True iff the difference co-array covers every lag `0..m`.
    pub fn coarray_complete(&self) -> bool {
        self.coarray_complete
    }
}

/// Far-field narrowband sources seen by the array.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceScene {
    directions: Vec<f64>,
    powers: Vec<f64>,
    noise_power: f64,
    snapshots: usize,
}

impl SourceScene {
    pub fn new(
        directions: Vec<f64>,
        powers: Vec<f64>,
        noise_power: f64,
        snapshots: usize,
    ) -> Result<Self> {
        if directions.is_empty() {
            return Err(DoaError::domain("scene needs at least one source"));
        }
        if powers.len() != directions.len() {
            return Err(DoaError::dims(
                format!("{} powers", directions.len()),
                format!("{} powers", powers.len()),
            ));
        }
        for &theta in &directions {
            check_angle(theta)?;
        }
        for (i, a) in directions.iter().enumerate() {
            if directions[i + 1..].iter().any(|b| b == a) {
                return Err(DoaError::domain(
                    "source directions must be pairwise distinct",
                ));
            }
        }
        if powers.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(DoaError::domain("source powers must be strictly positive"));
        }
        if !(noise_power.is_finite() && noise_power >= 0.0) {
            return Err(DoaError::domain("noise power must be nonnegative"));
        }
        if snapshots == 0 {
            return Err(DoaError::domain("snapshot count must be positive"));
        }
        Ok(Self {
            directions,
            powers,
            noise_power,
            snapshots,
        })
    }

    /// Equal-power scene, `p_i = power` for every source.
    pub fn equal_power(
        directions: Vec<f64>,
        power: f64,
        noise_power: f64,
        snapshots: usize,
    ) -> Result<Self> {
        let powers = vec![power; directions.len()];
        Self::new(directions, powers, noise_power, snapshots)
    }

    pub fn directions(&self) -> &[f64] {
        &self.directions
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn k(&self) -> usize {
        self.directions.len()
    }
}

/// `T` snapshots received at the selected sensors, stored column-wise (`n × T`).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBatch {
    samples: CMatrix,
    geometry: ArrayGeometry,
    seed: Option<u64>,
}

impl SnapshotBatch {
    pub fn from_samples(samples: CMatrix, geometry: ArrayGeometry) -> Result<Self> {
        if samples.nrows() != geometry.n() {
            return Err(DoaError::dims(
                format!("{} rows", geometry.n()),
                format!("{} rows", samples.nrows()),
            ));
        }
        Ok(Self {
            samples,
            geometry,
            seed: None,
        })
    }

    pub fn samples(&self) -> &CMatrix {
        &self.samples
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn snapshots(&self) -> usize {
        self.samples.ncols()
    }

    /// Seed used by [`synthesize_snapshots`], if the batch came from it.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

/// Complex Hermitian matrix together with its definiteness flags.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    entries: CMatrix,
    psd: bool,
    pd: bool,
}

impl HermitianMatrix {
    /// Validates Hermitian symmetry (relative tolerance 1e-12) and classifies
    /// definiteness from the spectrum.
    pub fn new(entries: CMatrix) -> Result<Self> {
        crate::linalg::ensure_square(&entries, "Hermitian matrix")?;
        if entries
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(DoaError::domain("matrix has non-finite entries"));
        }
        let defect = hermitian_defect(&entries);
        if defect > HERMITIAN_TOL {
            return Err(DoaError::domain(format!(
                "matrix is not Hermitian (relative defect {defect:.3e})"
            )));
        }
        Ok(Self::classified(entries))
    }

    /// Symmetrizes `(A + Aᴴ)/2` first, then classifies.
    pub fn from_hermitian_part(entries: &CMatrix) -> Result<Self> {
        crate::linalg::ensure_square(entries, "Hermitian matrix")?;
        Ok(Self::classified(crate::linalg::hermitian_part(entries)))
    }

    pub(crate) fn classified(entries: CMatrix) -> Self {
        let eig = entries.clone().symmetric_eigenvalues();
        let max_abs = eig.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let psd = min >= -PSD_TOL * max_abs;
        let pd = min > 0.0;
        Self { entries, psd, pd }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_inner(self) -> CMatrix {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_psd(&self) -> bool {
        self.psd
    }

    pub fn is_pd(&self) -> bool {
        self.pd
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.entries.map(|z| z * c))
    }
}

fn check_angle(theta: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta) {
        return Err(DoaError::domain(format!(
            "direction {theta} rad outside [0, π]"
        )));
    }
    Ok(())
}

/// `[a(θ)]_i = exp(j·2π·(i − 1 − (m − 1)/2)·(d/λ)·cos θ)` for `i = 1..m`.
pub fn steering_vector(theta: f64, geometry: &ArrayGeometry) -> Result<CVector> {
    check_angle(theta)?;
    Ok(steering_unchecked(theta, geometry))
}

fn steering_unchecked(theta: f64, geometry: &ArrayGeometry) -> CVector {
    let m = geometry.m();
    let center = (m as f64 - 1.0) / 2.0;
    let k = 2.0 * PI * geometry.spacing_ratio() * theta.cos();
    CVector::from_fn(m, |i, _| {
        Complex64::from_polar(1.0, k * (i as f64 - center))
    })
}

/// Steering matrix `A(θ)` with one column per direction (`m × k`).
pub fn steering_matrix(directions: &[f64], geometry: &ArrayGeometry) -> Result<CMatrix> {
    let mut a = CMatrix::zeros(geometry.m(), directions.len());
    for (j, &theta) in directions.iter().enumerate() {
        a.set_column(j, &steering_vector(theta, geometry)?);
    }
    Ok(a)
}

/// Binary `n × m` selection matrix with `Γ[i, j] = 1` iff `e_i = j`.
pub fn selection_matrix(geometry: &ArrayGeometry) -> DMatrix<f64> {
    let mut gamma = DMatrix::zeros(geometry.n(), geometry.m());
    for (i, &e) in geometry.sensors().iter().enumerate() {
        gamma[(i, e - 1)] = 1.0;
    }
    gamma
}

fn complex_gaussian(rng: &mut ChaCha8Rng, std: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * std, im * std)
}

/// Draws `T` snapshots `y_S(t) = Γ(A s(t) + n(t))` with circularly-symmetric
/// Gaussian sources and noise, from the stream keyed by `seed`.
pub fn synthesize_snapshots(
    scene: &SourceScene,
    geometry: &ArrayGeometry,
    seed: u64,
) -> Result<SnapshotBatch> {
    let mut rng = stream(seed, StreamDomain::Snapshots, 0, 0);
    let mut batch = synthesize_with_rng(scene, geometry, &mut rng)?;
    batch.seed = Some(seed);
    Ok(batch)
}

/// Same as [`synthesize_snapshots`] but draws from a caller-owned stream.
pub fn synthesize_with_rng(
    scene: &SourceScene,
    geometry: &ArrayGeometry,
    rng: &mut ChaCha8Rng,
) -> Result<SnapshotBatch> {
    let a = steering_matrix(scene.directions(), geometry)?;
    let rows: Vec<usize> = geometry.sensors().iter().map(|e| e - 1).collect();
    let n = rows.len();
    let t_count = scene.snapshots();
    let source_std: Vec<f64> = scene.powers().iter().map(|p| (p / 2.0).sqrt()).collect();
    let noise_std = (scene.noise_power() / 2.0).sqrt();

    let mut samples = CMatrix::zeros(n, t_count);
    let mut s = vec![ZERO; scene.k()];
    for t in 0..t_count {
        for (si, std) in s.iter_mut().zip(&source_std) {
            *si = complex_gaussian(rng, *std);
        }
        for (i, &row) in rows.iter().enumerate() {
            let mut y = ZERO;
            for (j, sj) in s.iter().enumerate() {
                y += a[(row, j)] * sj;
            }
            y += complex_gaussian(rng, noise_std);
            samples[(i, t)] = y;
        }
    }
    Ok(SnapshotBatch {
        samples,
        geometry: geometry.clone(),
        seed: None,
    })
}

/// `(1/T) Σ y(t) y(t)ᴴ`, built to be exactly Hermitian.
pub fn sample_covariance(batch: &SnapshotBatch) -> Result<HermitianMatrix> {
    let y = batch.samples();
    let t_count = y.ncols();
    if t_count == 0 {
        return Err(DoaError::domain("sample covariance of an empty batch"));
    }
    let n = y.nrows();
    let mut r = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = ZERO;
            for t in 0..t_count {
                acc += y[(i, t)] * y[(j, t)].conj();
            }
            acc /= t_count as f64;
            if i == j {
                acc.im = 0.0;
            }
            r[(i, j)] = acc;
            r[(j, i)] = acc.conj();
        }
    }
    Ok(HermitianMatrix::classified(r))
}

/// Noiseless ULA covariance `R = A diag(p) Aᴴ` and the asymptotic SLA
/// covariance `R_S = Γ R Γᴴ + ηI`.
pub fn exact_covariances(
    scene: &SourceScene,
    geometry: &ArrayGeometry,
) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let a = steering_matrix(scene.directions(), geometry)?;
    let m = geometry.m();
    let mut r = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut acc = ZERO;
            for (s, &p) in scene.powers().iter().enumerate() {
                acc += a[(i, s)] * a[(j, s)].conj() * p;
            }
            if i == j {
                acc.im = 0.0;
            }
            r[(i, j)] = acc;
            r[(j, i)] = acc.conj();
        }
    }
    let sensors = geometry.sensors();
    let n = sensors.len();
    let mut rs = CMatrix::zeros(n, n);
    for (i, &ei) in sensors.iter().enumerate() {
        for (j, &ej) in sensors.iter().enumerate() {
            rs[(i, j)] = r[(ei - 1, ej - 1)];
        }
        rs[(i, i)] += scene.noise_power();
    }
    Ok((
        HermitianMatrix::classified(r),
        HermitianMatrix::classified(rs),
    ))
}
