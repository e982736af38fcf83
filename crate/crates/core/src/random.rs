//! Seedable random-variate generation and exact log-densities for the
//! distributions used by the samplers.
//!
//! All samplers take a `&mut RngHandle`. Handles are single-owner; parallel
//! chains derive independent handles with [`RngHandle::for_stream`].

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Seeded random stream. Same seed and call sequence give the same variates.
#[derive(Clone, Debug)]
pub struct RngHandle {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        Self::for_stream(seed, 0)
    }

    /// Independent stream `stream` under master seed `seed`, used to give
    /// each parallel chain its own handle.
    pub fn for_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Symmetric positive definite matrix together with its lower Cholesky factor.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl SpdMatrix {
    /// Checks symmetry (absolute tolerance 1e-10, relative to the largest
    /// entry when that exceeds one) and factorizes. A failed factorization is
    /// retried once with `1e-9 * trace / d` added to the diagonal.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::named(matrix, "matrix")
    }

    pub fn named(matrix: DMatrix<f64>, name: &str) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::not_spd(name));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::not_spd(name));
        }
        let scale = matrix.amax().max(1.0);
        let d = matrix.nrows();
        for i in 0..d {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::not_spd(name));
                }
            }
        }
        Self::factorize(symmetric_part(&matrix), name)
    }

    /// Symmetrizes `(m + mᵀ)/2` before checking; for matrices produced by
    /// products or inverses that carry round-off asymmetry.
    pub fn from_symmetrized(matrix: &DMatrix<f64>, name: &str) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::not_spd(name));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::not_spd(name));
        }
        Self::factorize(symmetric_part(matrix), name)
    }

    fn factorize(matrix: DMatrix<f64>, name: &str) -> Result<Self> {
        if let Some(chol) = matrix.clone().cholesky() {
            return Ok(Self {
                chol: chol.l(),
                matrix,
            });
        }
        let d = matrix.nrows();
        let jitter = 1e-9 * matrix.trace() / d as f64;
        if !(jitter > 0.0) {
            return Err(Error::not_spd(name));
        }
        let mut jittered = matrix;
        for i in 0..d {
            jittered[(i, i)] += jitter;
        }
        match jittered.clone().cholesky() {
            Some(chol) => Ok(Self {
                chol: chol.l(),
                matrix: jittered,
            }),
            None => Err(Error::not_spd(name)),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::scaled_identity(d, 1.0)
    }

    pub fn scaled_identity(d: usize, s: f64) -> Self {
        assert!(s > 0.0, "scale must be positive");
        Self {
            matrix: DMatrix::identity(d, d) * s,
            chol: DMatrix::identity(d, d) * s.sqrt(),
        }
    }

    pub fn diagonal(diag: &DVector<f64>) -> Result<Self> {
        if diag.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::not_spd("diagonal"));
        }
        Ok(Self {
            matrix: DMatrix::from_diagonal(diag),
            chol: DMatrix::from_diagonal(&diag.map(f64::sqrt)),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Lower-triangular `L` with `L Lᵀ = self`.
    pub fn cholesky_lower(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let d = self.dim();
        let linv = self
            .chol
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .expect("cholesky factor has a positive diagonal");
        symmetric_part(&(linv.transpose() * linv))
    }

    pub fn inverse_spd(&self) -> Result<SpdMatrix> {
        SpdMatrix::from_symmetrized(&self.inverse(), "inverse")
    }

    /// `c * self` for `c > 0`.
    pub fn scaled(&self, c: f64) -> SpdMatrix {
        assert!(c > 0.0 && c.is_finite(), "scale must be positive");
        Self {
            matrix: &self.matrix * c,
            chol: &self.chol * c.sqrt(),
        }
    }

    /// Solves `L y = v` for the Cholesky factor `L`.
    pub fn whiten(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol
            .solve_lower_triangular(v)
            .expect("cholesky factor has a positive diagonal")
    }

    /// `vᵀ self⁻¹ v`.
    pub fn inv_quad_form(&self, v: &DVector<f64>) -> f64 {
        self.whiten(v).norm_squared()
    }

    /// `tr(self⁻¹ m)`.
    pub fn trace_inv_product(&self, m: &DMatrix<f64>) -> f64 {
        (self.inverse() * m).trace()
    }
}

pub(crate) fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Draw from `N(mean, cov)` as `mean + L ε`.
pub fn sample_mvn(mean: &DVector<f64>, cov: &SpdMatrix, rng: &mut RngHandle) -> Result<DVector<f64>> {
    if cov.dim() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            found: cov.dim(),
        });
    }
    let eps = DVector::from_fn(mean.len(), |_, _| rng.standard_normal());
    Ok(mean + cov.cholesky_lower() * eps)
}

/// Gamma with shape `shape` and scale `scale` (mean `shape * scale`).
pub fn sample_gamma(shape: f64, scale: f64, rng: &mut RngHandle) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    check_positive("gamma scale", scale)?;
    let g = Gamma::new(shape, scale).map_err(|e| Error::domain(e.to_string()))?;
    Ok(g.sample(rng))
}

/// Log of a unit-scale gamma draw, accurate for small shapes where the draw
/// itself underflows.
fn sample_log_gamma_unit(shape: f64, rng: &mut RngHandle) -> Result<f64> {
    if shape >= 1.0 {
        return Ok(sample_gamma(shape, 1.0, rng)?.ln());
    }
    let g = sample_gamma(shape + 1.0, 1.0, rng)?;
    let u = 1.0 - rng.uniform();
    Ok(g.ln() + u.ln() / shape)
}

/// Inverse gamma with density proportional to `x^-(shape+1) exp(-scale/x)`.
pub fn sample_inverse_gamma(shape: f64, scale: f64, rng: &mut RngHandle) -> Result<f64> {
    check_positive("inverse-gamma shape", shape)?;
    check_positive("inverse-gamma scale", scale)?;
    Ok(1.0 / sample_gamma(shape, 1.0 / scale, rng)?)
}

pub fn sample_beta(a: f64, b: f64, rng: &mut RngHandle) -> Result<f64> {
    check_positive("beta a", a)?;
    check_positive("beta b", b)?;
    let beta = Beta::new(a, b).map_err(|e| Error::domain(e.to_string()))?;
    Ok(beta.sample(rng))
}

/// Dirichlet draw, normalized in log space so small concentrations cannot
/// underflow every coordinate to zero.
pub fn sample_dirichlet(concentrations: &[f64], rng: &mut RngHandle) -> Result<Vec<f64>> {
    if concentrations.is_empty() {
        return Err(Error::Empty("dirichlet concentrations"));
    }
    let logs = concentrations
        .iter()
        .map(|&c| {
            check_positive("dirichlet concentration", c)?;
            sample_log_gamma_unit(c, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let norm = log_sum_exp(&logs)?;
    let mut out: Vec<f64> = logs.iter().map(|l| (l - norm).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Ok(out)
}

/// Index drawn with probability proportional to `exp(log_weights[k])`.
pub fn sample_categorical(log_weights: &[f64], rng: &mut RngHandle) -> Result<usize> {
    let norm = log_sum_exp(log_weights)?;
    if norm == f64::NEG_INFINITY || norm.is_nan() {
        return Err(Error::domain("categorical weights have no finite entry"));
    }
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &w) in log_weights.iter().enumerate() {
        let p = (w - norm).exp();
        if p > 0.0 {
            last = k;
            acc += p;
            if u < acc {
                return Ok(k);
            }
        }
    }
    Ok(last)
}

/// Stable `log Σ exp(v_i)`. Returns `-inf` when every entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("log_sum_exp input"));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if max == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Wishart draw via the Bartlett decomposition: `L A Aᵀ Lᵀ` with
/// `A_ii² ~ χ²(dof - i)` and standard normal below the diagonal.
pub fn sample_wishart(dof: f64, scale: &SpdMatrix, rng: &mut RngHandle) -> Result<SpdMatrix> {
    let d = scale.dim();
    if !(dof > d as f64 - 1.0) {
        return Err(Error::domain(format!(
            "wishart degrees of freedom {dof} must exceed dimension - 1 = {}",
            d - 1
        )));
    }
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        a[(i, i)] = sample_gamma((dof - i as f64) / 2.0, 2.0, rng)?.sqrt();
        for j in 0..i {
            a[(i, j)] = rng.standard_normal();
        }
    }
    let la = scale.cholesky_lower() * a;
    SpdMatrix::from_symmetrized(&(&la * la.transpose()), "wishart draw")
}

/// Inverse-Wishart draw: a Wishart draw on the inverted scale, inverted.
pub fn sample_inverse_wishart(dof: f64, scale: &SpdMatrix, rng: &mut RngHandle) -> Result<SpdMatrix> {
    let inv_scale = scale.inverse_spd()?;
    let w = sample_wishart(dof, &inv_scale, rng)?;
    w.inverse_spd()
}

/// `log Γ_d(a)`.
pub fn ln_multigamma(d: usize, a: f64) -> f64 {
    let df = d as f64;
    df * (df - 1.0) / 4.0 * PI.ln() + (0..d).map(|j| ln_gamma(a - j as f64 / 2.0)).sum::<f64>()
}

pub fn logpdf_mvn(x: &DVector<f64>, mean: &DVector<f64>, cov: &SpdMatrix) -> f64 {
    let d = mean.len() as f64;
    let diff = x - mean;
    -0.5 * (d * LN_2PI + cov.log_det() + cov.inv_quad_form(&diff))
}

pub fn logpdf_inverse_wishart(x: &SpdMatrix, dof: f64, scale: &SpdMatrix) -> f64 {
    let d = scale.dim();
    if x.dim() != d || !(dof > d as f64 - 1.0) {
        return f64::NEG_INFINITY;
    }
    let df = d as f64;
    0.5 * dof * scale.log_det()
        - 0.5 * dof * df * std::f64::consts::LN_2
        - ln_multigamma(d, dof / 2.0)
        - 0.5 * (dof + df + 1.0) * x.log_det()
        - 0.5 * x.trace_inv_product(scale.matrix())
}

pub fn logpdf_inverse_gamma(x: f64, shape: f64, scale: f64) -> f64 {
    if !(x > 0.0) || !(shape > 0.0) || !(scale > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Gamma log-density with shape/scale parameterization.
pub fn logpdf_gamma(x: f64, shape: f64, scale: f64) -> f64 {
    if !(x > 0.0) || !(shape > 0.0) || !(scale > 0.0) {
        return f64::NEG_INFINITY;
    }
    -ln_gamma(shape) - shape * scale.ln() + (shape - 1.0) * x.ln() - x / scale
}

pub fn logpdf_dirichlet(x: &[f64], concentrations: &[f64]) -> f64 {
    if x.len() != concentrations.len() || concentrations.iter().any(|&c| !(c > 0.0)) {
        return f64::NEG_INFINITY;
    }
    if x.iter().any(|&p| !(p > 0.0)) || (x.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return f64::NEG_INFINITY;
    }
    let total: f64 = concentrations.iter().sum();
    ln_gamma(total) - concentrations.iter().map(|&c| ln_gamma(c)).sum::<f64>()
        + x.iter()
            .zip(concentrations)
            .map(|(p, c)| (c - 1.0) * p.ln())
            .sum::<f64>()
}
