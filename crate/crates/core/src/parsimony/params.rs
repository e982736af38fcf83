use nalgebra::{DMatrix, DVector};

use super::ModelFamily;
use crate::error::{Error, Result};
use crate::linalg::eigen_descending;
use crate::random::SpdMatrix;

/// Covariance blocks of a mixture. Shared pieces are held once; per-component
/// pieces are indexed like the means. For models with a reference volume the
/// first entry of `volumes` is 1.
#[derive(Clone, Debug, PartialEq)]
pub enum CovarianceParams {
    SphericalEqual {
        volume: f64,
    },
    SphericalFree {
        volumes: Vec<f64>,
    },
    DiagonalEqual {
        shape: DVector<f64>,
    },
    DiagonalFree {
        shape: DVector<f64>,
        volumes: Vec<f64>,
    },
    GeneralEqual {
        sigma: SpdMatrix,
    },
    GeneralScaleFree {
        sigma0: SpdMatrix,
        volumes: Vec<f64>,
    },
    GeneralOrientFree {
        shape: DVector<f64>,
        orientations: Vec<DMatrix<f64>>,
    },
    GeneralOrientScaleFree {
        shape: DVector<f64>,
        orientations: Vec<DMatrix<f64>>,
        volumes: Vec<f64>,
    },
    GeneralFull {
        sigmas: Vec<SpdMatrix>,
    },
}

impl CovarianceParams {
    pub fn model(&self) -> ModelFamily {
        match self {
            CovarianceParams::SphericalEqual { .. } => ModelFamily::SphericalEqual,
            CovarianceParams::SphericalFree { .. } => ModelFamily::SphericalFree,
            CovarianceParams::DiagonalEqual { .. } => ModelFamily::DiagonalEqual,
            CovarianceParams::DiagonalFree { .. } => ModelFamily::DiagonalFree,
            CovarianceParams::GeneralEqual { .. } => ModelFamily::GeneralEqual,
            CovarianceParams::GeneralScaleFree { .. } => ModelFamily::GeneralScaleFree,
            CovarianceParams::GeneralOrientFree { .. } => ModelFamily::GeneralOrientFree,
            CovarianceParams::GeneralOrientScaleFree { .. } => ModelFamily::GeneralOrientScaleFree,
            CovarianceParams::GeneralFull { .. } => ModelFamily::GeneralFull,
        }
    }

    /// Number of per-component entries, or `None` when every block is shared.
    fn local_len(&self) -> Option<usize> {
        match self {
            CovarianceParams::SphericalEqual { .. }
            | CovarianceParams::DiagonalEqual { .. }
            | CovarianceParams::GeneralEqual { .. } => None,
            CovarianceParams::SphericalFree { volumes }
            | CovarianceParams::DiagonalFree { volumes, .. }
            | CovarianceParams::GeneralScaleFree { volumes, .. } => Some(volumes.len()),
            CovarianceParams::GeneralOrientFree { orientations, .. } => Some(orientations.len()),
            CovarianceParams::GeneralOrientScaleFree { orientations, volumes, .. } => {
                if orientations.len() == volumes.len() {
                    Some(volumes.len())
                } else {
                    Some(usize::MAX)
                }
            }
            CovarianceParams::GeneralFull { sigmas } => Some(sigmas.len()),
        }
    }

    pub fn volumes(&self) -> Option<&[f64]> {
        match self {
            CovarianceParams::SphericalFree { volumes }
            | CovarianceParams::DiagonalFree { volumes, .. }
            | CovarianceParams::GeneralScaleFree { volumes, .. }
            | CovarianceParams::GeneralOrientScaleFree { volumes, .. } => Some(volumes),
            _ => None,
        }
    }

    fn local(&self, k: usize) -> LocalParams {
        match self {
            CovarianceParams::SphericalEqual { .. }
            | CovarianceParams::DiagonalEqual { .. }
            | CovarianceParams::GeneralEqual { .. } => LocalParams::None,
            CovarianceParams::SphericalFree { volumes }
            | CovarianceParams::DiagonalFree { volumes, .. }
            | CovarianceParams::GeneralScaleFree { volumes, .. } => LocalParams::Volume(volumes[k]),
            CovarianceParams::GeneralOrientFree { orientations, .. } => {
                LocalParams::Orientation(orientations[k].clone())
            }
            CovarianceParams::GeneralOrientScaleFree { orientations, volumes, .. } => LocalParams::OrientedVolume {
                orientation: orientations[k].clone(),
                volume: volumes[k],
            },
            CovarianceParams::GeneralFull { sigmas } => LocalParams::Covariance(sigmas[k].clone()),
        }
    }

    /// Covariance built from the shared blocks and one component's pieces.
    pub fn assemble(&self, local: &LocalParams, d: usize) -> Result<SpdMatrix> {
        let oriented = |shape: &DVector<f64>, rot: &DMatrix<f64>, c: f64| {
            let m = rot * DMatrix::from_diagonal(shape) * rot.transpose() * c;
            SpdMatrix::from_symmetrized(&m, "oriented covariance")
        };
        match (self, local) {
            (CovarianceParams::SphericalEqual { volume }, LocalParams::None) => {
                positive(*volume, "volume")?;
                Ok(SpdMatrix::scaled_identity(d, *volume))
            }
            (CovarianceParams::SphericalFree { .. }, LocalParams::Volume(v)) => {
                positive(*v, "volume")?;
                Ok(SpdMatrix::scaled_identity(d, *v))
            }
            (CovarianceParams::DiagonalEqual { shape }, LocalParams::None) => SpdMatrix::diagonal(shape),
            (CovarianceParams::DiagonalFree { shape, .. }, LocalParams::Volume(v)) => {
                positive(*v, "volume")?;
                SpdMatrix::diagonal(&(shape * *v))
            }
            (CovarianceParams::GeneralEqual { sigma }, LocalParams::None) => Ok(sigma.clone()),
            (CovarianceParams::GeneralScaleFree { sigma0, .. }, LocalParams::Volume(v)) => {
                positive(*v, "volume")?;
                Ok(sigma0.scaled(*v))
            }
            (CovarianceParams::GeneralOrientFree { shape, .. }, LocalParams::Orientation(rot)) => {
                oriented(shape, rot, 1.0)
            }
            (
                CovarianceParams::GeneralOrientScaleFree { shape, .. },
                LocalParams::OrientedVolume { orientation, volume },
            ) => {
                positive(*volume, "volume")?;
                oriented(shape, orientation, *volume)
            }
            (CovarianceParams::GeneralFull { .. }, LocalParams::Covariance(s)) => Ok(s.clone()),
            _ => Err(Error::domain("component pieces do not match the covariance structure")),
        }
    }

    fn remove(&mut self, k: usize) {
        match self {
            CovarianceParams::SphericalEqual { .. }
            | CovarianceParams::DiagonalEqual { .. }
            | CovarianceParams::GeneralEqual { .. } => {}
            CovarianceParams::SphericalFree { volumes }
            | CovarianceParams::DiagonalFree { volumes, .. }
            | CovarianceParams::GeneralScaleFree { volumes, .. } => {
                volumes.remove(k);
            }
            CovarianceParams::GeneralOrientFree { orientations, .. } => {
                orientations.remove(k);
            }
            CovarianceParams::GeneralOrientScaleFree { orientations, volumes, .. } => {
                orientations.remove(k);
                volumes.remove(k);
            }
            CovarianceParams::GeneralFull { sigmas } => {
                sigmas.remove(k);
            }
        }
    }

    fn push(&mut self, local: LocalParams) -> Result<()> {
        match (self, local) {
            (CovarianceParams::SphericalEqual { .. }, LocalParams::None)
            | (CovarianceParams::DiagonalEqual { .. }, LocalParams::None)
            | (CovarianceParams::GeneralEqual { .. }, LocalParams::None) => Ok(()),
            (CovarianceParams::SphericalFree { volumes }, LocalParams::Volume(v))
            | (CovarianceParams::DiagonalFree { volumes, .. }, LocalParams::Volume(v))
            | (CovarianceParams::GeneralScaleFree { volumes, .. }, LocalParams::Volume(v)) => {
                volumes.push(v);
                Ok(())
            }
            (CovarianceParams::GeneralOrientFree { orientations, .. }, LocalParams::Orientation(d)) => {
                orientations.push(d);
                Ok(())
            }
            (
                CovarianceParams::GeneralOrientScaleFree {
                    orientations, volumes, ..
                },
                LocalParams::OrientedVolume { orientation, volume },
            ) => {
                orientations.push(orientation);
                volumes.push(volume);
                Ok(())
            }
            (CovarianceParams::GeneralFull { sigmas }, LocalParams::Covariance(s)) => {
                sigmas.push(s);
                Ok(())
            }
            _ => Err(Error::domain("component pieces do not match the covariance structure")),
        }
    }

    /// Rescales so the first volume is 1, moving the factor into the shared
    /// block. Covariances are unchanged. Returns the factor applied.
    fn normalize_reference(&mut self) -> f64 {
        let (volumes, c) = match self {
            CovarianceParams::DiagonalFree { shape, volumes } | CovarianceParams::GeneralOrientScaleFree { shape, volumes, .. } => {
                let Some(&c) = volumes.first() else { return 1.0 };
                if c == 1.0 {
                    return 1.0;
                }
                *shape *= c;
                (volumes, c)
            }
            CovarianceParams::GeneralScaleFree { sigma0, volumes } => {
                let Some(&c) = volumes.first() else { return 1.0 };
                if c == 1.0 {
                    return 1.0;
                }
                *sigma0 = sigma0.scaled(c);
                (volumes, c)
            }
            _ => return 1.0,
        };
        for v in volumes.iter_mut() {
            *v /= c;
        }
        volumes[0] = 1.0;
        c
    }

    fn permute(&mut self, order: &[usize]) {
        fn pick<T: Clone>(v: &mut Vec<T>, order: &[usize]) {
            *v = order.iter().map(|&i| v[i].clone()).collect();
        }
        match self {
            CovarianceParams::SphericalEqual { .. }
            | CovarianceParams::DiagonalEqual { .. }
            | CovarianceParams::GeneralEqual { .. } => {}
            CovarianceParams::SphericalFree { volumes }
            | CovarianceParams::DiagonalFree { volumes, .. }
            | CovarianceParams::GeneralScaleFree { volumes, .. } => pick(volumes, order),
            CovarianceParams::GeneralOrientFree { orientations, .. } => pick(orientations, order),
            CovarianceParams::GeneralOrientScaleFree { orientations, volumes, .. } => {
                pick(orientations, order);
                pick(volumes, order);
            }
            CovarianceParams::GeneralFull { sigmas } => pick(sigmas, order),
        }
    }
}

fn positive(v: f64, name: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

/// Per-component covariance pieces of one cluster.
#[derive(Clone, Debug, PartialEq)]
pub enum LocalParams {
    None,
    Volume(f64),
    Orientation(DMatrix<f64>),
    OrientedVolume { orientation: DMatrix<f64>, volume: f64 },
    Covariance(SpdMatrix),
}

/// One cluster's mean and per-component pieces, detached from a mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentDraw {
    pub mean: DVector<f64>,
    pub local: LocalParams,
}

/// Volume, unit-determinant shape (descending) and orientation of a
/// covariance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub volume: f64,
    pub shape: DVector<f64>,
    pub orientation: DMatrix<f64>,
}

impl Decomposition {
    pub fn of(sigma: &SpdMatrix) -> Self {
        let d = sigma.dim();
        let (eig, vecs) = eigen_descending(sigma.matrix());
        let volume = (sigma.log_det() / d as f64).exp();
        Self {
            volume,
            shape: eig / volume,
            orientation: vecs,
        }
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        &self.orientation * DMatrix::from_diagonal(&self.shape) * self.orientation.transpose() * self.volume
    }
}

/// Means and covariance blocks of a K-component mixture under one model,
/// with the assembled covariances cached.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureParams {
    dim: usize,
    means: Vec<DVector<f64>>,
    covariance: CovarianceParams,
    cache: Vec<SpdMatrix>,
}

impl MixtureParams {
    pub fn new(dim: usize, means: Vec<DVector<f64>>, covariance: CovarianceParams) -> Result<Self> {
        if let Some(bad) = means.iter().find(|m| m.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        if let Some(len) = covariance.local_len() {
            if len != means.len() {
                return Err(Error::DimensionMismatch {
                    expected: means.len(),
                    found: len,
                });
            }
        }
        let mut params = Self {
            dim,
            means,
            covariance,
            cache: Vec::new(),
        };
        params.covariance.normalize_reference();
        params.refresh()?;
        Ok(params)
    }

    fn refresh(&mut self) -> Result<()> {
        self.cache = (0..self.k())
            .map(|k| self.covariance.assemble(&self.covariance.local(k), self.dim))
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn model(&self) -> ModelFamily {
        self.covariance.model()
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn covariance_params(&self) -> &CovarianceParams {
        &self.covariance
    }

    pub fn covariance(&self, k: usize) -> &SpdMatrix {
        &self.cache[k]
    }

    pub fn covariances(&self) -> &[SpdMatrix] {
        &self.cache
    }

    pub fn local(&self, k: usize) -> LocalParams {
        self.covariance.local(k)
    }

    /// Covariance a detached component would have inside this mixture.
    pub fn assemble(&self, local: &LocalParams) -> Result<SpdMatrix> {
        self.covariance.assemble(local, self.dim)
    }

    pub fn decomposition(&self, k: usize) -> Decomposition {
        Decomposition::of(&self.cache[k])
    }

    /// Detaches component `k`; later components shift down by one. The
    /// returned pieces describe the same covariance under the (possibly
    /// renormalized) shared blocks.
    pub fn remove_component(&mut self, k: usize) -> ComponentDraw {
        let mean = self.means.remove(k);
        let mut local = self.covariance.local(k);
        self.covariance.remove(k);
        self.cache.remove(k);
        let c = self.covariance.normalize_reference();
        if c != 1.0 {
            match &mut local {
                LocalParams::Volume(v) | LocalParams::OrientedVolume { volume: v, .. } => *v /= c,
                _ => {}
            }
        }
        ComponentDraw { mean, local }
    }

    /// Appends a component as the last cluster.
    pub fn push_component(&mut self, draw: ComponentDraw) -> Result<()> {
        if draw.mean.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: draw.mean.len(),
            });
        }
        let sigma = self.assemble(&draw.local)?;
        self.covariance.push(draw.local)?;
        self.means.push(draw.mean);
        self.cache.push(sigma);
        self.covariance.normalize_reference();
        Ok(())
    }

    /// Reorders components so that new component `j` is old `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.k()).collect::<Vec<_>>() {
            return Err(Error::Labels("ordering is not a permutation of the components".into()));
        }
        let mut out = self.clone();
        out.means = order.iter().map(|&i| self.means[i].clone()).collect();
        out.cache = order.iter().map(|&i| self.cache[i].clone()).collect();
        out.covariance.permute(order);
        out.covariance.normalize_reference();
        Ok(out)
    }

    pub(crate) fn set_means(&mut self, means: Vec<DVector<f64>>) {
        debug_assert_eq!(means.len(), self.k());
        self.means = means;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rot45() -> DMatrix<f64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        DMatrix::from_row_slice(2, 2, &[h, -h, h, h])
    }

    #[test]
    fn identity_decomposition() {
        let p = MixtureParams::new(2, vec![DVector::zeros(2)], CovarianceParams::SphericalEqual { volume: 2.0 }).unwrap();
        assert_eq!(p.covariance(0).matrix(), &(DMatrix::identity(2, 2) * 2.0));
    }

    #[test]
    fn rotated_shape() {
        let p = MixtureParams::new(
            2,
            vec![DVector::zeros(2)],
            CovarianceParams::GeneralOrientFree {
                shape: DVector::from_vec(vec![3.0, 1.0 / 3.0]),
                orientations: vec![rot45()],
            },
        )
        .unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[5.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0, 5.0 / 3.0]);
        assert!((p.covariance(0).matrix() - expected).amax() < 1e-12);
    }

    #[test]
    fn spherical_volumes() {
        let p = MixtureParams::new(
            2,
            vec![DVector::zeros(2), DVector::zeros(2)],
            CovarianceParams::SphericalFree { volumes: vec![1.0, 5.0] },
        )
        .unwrap();
        assert_eq!(p.covariance(1).matrix(), &(DMatrix::identity(2, 2) * 5.0));
    }

    #[test]
    fn decomposition_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[5.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0, 5.0 / 3.0]);
        let dec = Decomposition::of(&SpdMatrix::new(m.clone()).unwrap());
        assert_abs_diff_eq!(dec.volume, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.shape[0], 3.0, epsilon = 1e-12);
        assert!((dec.assemble() - m).amax() < 1e-10);
    }

    #[test]
    fn reference_volume_kept_on_removal() {
        let mut p = MixtureParams::new(
            2,
            vec![DVector::zeros(2), DVector::from_vec(vec![1.0, 1.0]), DVector::from_vec(vec![2.0, 2.0])],
            CovarianceParams::GeneralScaleFree {
                sigma0: SpdMatrix::identity(2),
                volumes: vec![1.0, 4.0, 2.0],
            },
        )
        .unwrap();
        let before: Vec<_> = p.covariances().to_vec();
        let removed = p.remove_component(0);
        assert_eq!(p.covariance_params().volumes().unwrap()[0], 1.0);
        for (k, s) in p.covariances().iter().enumerate() {
            let fresh = p.assemble(&p.local(k)).unwrap();
            assert!((fresh.matrix() - s.matrix()).amax() < 1e-12);
            assert!((s.matrix() - before[k + 1].matrix()).amax() < 1e-12);
        }
        let again = p.assemble(&removed.local).unwrap();
        assert!((again.matrix() - before[0].matrix()).amax() < 1e-12);
        p.push_component(removed).unwrap();
        assert_eq!(p.k(), 3);
    }

    #[test]
    fn push_onto_empty_normalizes() {
        let mut p = MixtureParams::new(
            2,
            vec![],
            CovarianceParams::DiagonalFree {
                shape: DVector::from_vec(vec![1.0, 2.0]),
                volumes: vec![],
            },
        )
        .unwrap();
        p.push_component(ComponentDraw {
            mean: DVector::zeros(2),
            local: LocalParams::Volume(3.0),
        })
        .unwrap();
        assert_eq!(p.covariance_params().volumes().unwrap(), &[1.0]);
        assert_abs_diff_eq!(p.covariance(0).matrix()[(1, 1)], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn permutation_preserves_covariances() {
        let p = MixtureParams::new(
            1,
            vec![DVector::from_vec(vec![0.0]), DVector::from_vec(vec![1.0])],
            CovarianceParams::DiagonalFree {
                shape: DVector::from_vec(vec![2.0]),
                volumes: vec![1.0, 3.0],
            },
        )
        .unwrap();
        let q = p.permuted(&[1, 0]).unwrap();
        assert_abs_diff_eq!(q.covariance(0).matrix()[(0, 0)], 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.covariance(1).matrix()[(0, 0)], 2.0, epsilon = 1e-12);
        assert_eq!(q.covariance_params().volumes().unwrap()[0], 1.0);
        assert!(p.permuted(&[0, 0]).is_err());
    }

    #[test]
    fn mismatched_lengths() {
        let err = MixtureParams::new(
            2,
            vec![DVector::zeros(2)],
            CovarianceParams::SphericalFree { volumes: vec![1.0, 2.0] },
        );
        assert!(err.is_err());
    }
}
