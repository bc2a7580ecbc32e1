//! PCA whitening with a principal/residual split.
//!
//! With mean `mu`, eigenvectors `E` (columns) and eigenvalues `lambda` of the
//! biased covariance, the forward map is `[y; z] = Lambda^{-1/2} E^T (x - mu)`
//! where `y` holds the first `d'` coordinates. Directions whose eigenvalue is
//! at most `1e-12 * lambda_1` are treated as null: they are dropped from `z`
//! instead of being divided by, so `z` has `rank - d'` coordinates.

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::linalg::{covariance, mean_vector, symmetric_eigen, Matrix};

pub const WHITENING_FORMAT_VERSION: u32 = 1;
const RELATIVE_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningModel {
    pub format_version: u32,
    pub mu: Vec<f64>,
    pub eigvecs: Matrix,
    pub eigvals: Vec<f64>,
    pub d_prime: Option<usize>,
}

pub fn fit(set: &EmbeddingSet) -> Result<WhiteningModel> {
    fit_vectors(&set.vectors())
}

pub fn fit_vectors(points: &[Vec<f64>]) -> Result<WhiteningModel> {
    if points.len() < 2 {
        return Err(Error::validation(format!(
            "whitening needs at least 2 points, got {}",
            points.len()
        )));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::validation("points must share a positive dimension"));
    }
    let mu = mean_vector(points);
    let cov = covariance(points, &mu);
    let eig = symmetric_eigen(&cov)?;
    let eigvals = eig.values.iter().map(|&l| l.max(0.0)).collect();
    Ok(WhiteningModel {
        format_version: WHITENING_FORMAT_VERSION,
        mu,
        eigvecs: eig.vectors,
        eigvals,
        d_prime: None,
    })
}

/// Smallest `m` whose leading eigenvalues carry more than `energy` of the
/// total; the full length if no prefix strictly exceeds it.
pub fn choose_dprime(eigvals: &[f64], energy: f64) -> Result<usize> {
    if !(energy > 0.0 && energy <= 1.0) {
        return Err(Error::validation(format!("energy {energy} outside (0, 1]")));
    }
    if eigvals.iter().any(|l| *l < 0.0 || !l.is_finite()) {
        return Err(Error::validation("eigenvalues must be finite and nonnegative"));
    }
    if eigvals.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::validation("eigenvalues must be sorted descending"));
    }
    let total: f64 = eigvals.iter().sum();
    if total <= 0.0 {
        return Err(Error::validation("all-zero spectrum has no principal subspace"));
    }
    let mut cumulative = 0.0;
    for (i, l) in eigvals.iter().enumerate() {
        cumulative += l;
        if cumulative / total > energy {
            return Ok(i + 1);
        }
    }
    Ok(eigvals.len())
}

impl WhiteningModel {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Number of directions above the singularity tolerance.
    pub fn rank(&self) -> usize {
        let tol = self.tolerance();
        self.eigvals.iter().take_while(|&&l| l > tol).count()
    }

    fn tolerance(&self) -> f64 {
        RELATIVE_RANK_TOL * self.eigvals.first().copied().unwrap_or(0.0)
    }

    pub fn with_dprime(mut self, d_prime: usize) -> Result<Self> {
        if d_prime == 0 || d_prime > self.dim() {
            return Err(Error::validation(format!(
                "d' = {d_prime} outside [1, {}]",
                self.dim()
            )));
        }
        self.d_prime = Some(d_prime);
        Ok(self)
    }

    pub fn with_energy(self, energy: f64) -> Result<Self> {
        let m = choose_dprime(&self.eigvals, energy)?;
        self.with_dprime(m)
    }

    pub fn d_prime(&self) -> Result<usize> {
        self.d_prime
            .ok_or_else(|| Error::validation("whitening model has no d' set"))
    }

    /// Residual dimension: nonsingular directions beyond `d'`.
    pub fn z_dim(&self) -> Result<usize> {
        Ok(self.rank().saturating_sub(self.d_prime()?))
    }

    fn check_principal_rank(&self, d_prime: usize) -> Result<()> {
        let tol = self.tolerance();
        match self.eigvals[..d_prime].iter().position(|&l| l <= tol) {
            Some(index) => Err(Error::Singular {
                index,
                value: self.eigvals[index],
            }),
            None => Ok(()),
        }
    }

    pub fn transform(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d_prime = self.d_prime()?;
        if x.len() != self.dim() {
            return Err(Error::validation(format!(
                "vector has dimension {}, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        self.check_principal_rank(d_prime)?;
        let centered: Vec<f64> = x.iter().zip(&self.mu).map(|(a, m)| a - m).collect();
        let proj = self.eigvecs.tmatvec(&centered);
        let mut coords: Vec<f64> = proj
            .iter()
            .zip(&self.eigvals)
            .take(self.rank())
            .map(|(p, l)| p / l.sqrt())
            .collect();
        let z = coords.split_off(d_prime);
        Ok((coords, z))
    }

    /// Principal coordinates only.
    pub fn transform_y(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.transform(x)?.0)
    }

    pub fn inverse(&self, y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        let d_prime = self.d_prime()?;
        let z_dim = self.z_dim()?;
        if y.len() != d_prime || z.len() != z_dim {
            return Err(Error::validation(format!(
                "inverse expects y of length {d_prime} and z of length {z_dim}, got {} and {}",
                y.len(),
                z.len()
            )));
        }
        let mut x = self.mu.clone();
        for (i, c) in y.iter().chain(z).enumerate() {
            let s = c * self.eigvals[i].sqrt();
            if s == 0.0 {
                continue;
            }
            for (r, xr) in x.iter_mut().enumerate() {
                *xr += self.eigvecs[(r, i)] * s;
            }
        }
        Ok(x)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("whitening model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: WhiteningModel =
            serde_json::from_str(text).map_err(|e| Error::json("whitening model", e))?;
        if m.format_version != WHITENING_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported whitening format version {}",
                m.format_version
            )));
        }
        let d = m.mu.len();
        if m.eigvals.len() != d || m.eigvecs.rows() != d || m.eigvecs.cols() != d {
            return Err(Error::validation("whitening model shapes are inconsistent"));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn correlated_cloud(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = crate::rng::rng_from_seed(seed);
        let mix: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        (0..n)
            .map(|_| {
                let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                mix.iter()
                    .map(|row| crate::linalg::dot(row, &g) + 3.0)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn two_point_fit() {
        let m = fit_vectors(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(m.mu, vec![0.0, 0.0]);
        assert!((m.eigvals[0] - 1.0).abs() < 1e-15);
        assert_eq!(m.eigvals[1], 0.0);
        assert!((m.eigvecs[(0, 0)].abs() - 1.0).abs() < 1e-15);
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn identical_points() {
        let m = fit_vectors(&vec![vec![2.0, -1.0, 0.5]; 4]).unwrap();
        assert_eq!(m.mu, vec![2.0, -1.0, 0.5]);
        assert!(m.eigvals.iter().all(|&l| l == 0.0));
        assert!(fit_vectors(&[vec![1.0]]).is_err());
    }

    #[test]
    fn isotropic_data_has_unit_spectrum() {
        let mut rng = crate::rng::rng_from_seed(5);
        let pts: Vec<Vec<f64>> = (0..20000)
            .map(|_| (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let m = fit_vectors(&pts).unwrap();
        assert!(m.eigvals.iter().all(|l| (l - 1.0).abs() < 0.05), "{:?}", m.eigvals);
    }

    #[test]
    fn dprime_examples() {
        assert_eq!(choose_dprime(&[1.0, 0.0, 0.0], 0.99).unwrap(), 1);
        assert_eq!(choose_dprime(&[0.5, 0.5], 0.99).unwrap(), 2);
        assert_eq!(choose_dprime(&[4.0, 3.0, 2.0, 1.0], 0.65).unwrap(), 2);
        assert_eq!(choose_dprime(&[4.0, 3.0, 2.0, 1.0], 1.0).unwrap(), 4);
        assert!(choose_dprime(&[0.0, 0.0], 0.9).is_err());
        assert!(choose_dprime(&[1.0, 2.0], 0.9).is_err());
        assert!(choose_dprime(&[1.0], 0.0).is_err());
    }

    #[test]
    fn transform_examples() {
        let pts = correlated_cloud(300, 5, 1);
        let m = fit_vectors(&pts).unwrap().with_dprime(2).unwrap();
        let (y, z) = m.transform(&m.mu).unwrap();
        assert!(y.iter().chain(&z).all(|v| v.abs() < 1e-12));
        assert_eq!(z.len(), 3);

        let e1 = m.eigvecs.column(0);
        let x: Vec<f64> = m.mu.iter().zip(&e1).map(|(u, e)| u + m.eigvals[0].sqrt() * e).collect();
        let (y, z) = m.transform(&x).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10 && y[1].abs() < 1e-10);
        assert!(z.iter().all(|v| v.abs() < 1e-10));

        let back = m.inverse(&[1.0, 0.0], &[0.0; 3]).unwrap();
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-10));
        assert_eq!(m.inverse(&[0.0; 2], &[0.0; 3]).unwrap(), m.mu);
        assert!(m.inverse(&[0.0; 3], &[0.0; 3]).is_err());
    }

    #[test]
    fn whitened_training_data_is_standard() {
        let pts = correlated_cloud(500, 8, 2);
        let m = fit_vectors(&pts).unwrap().with_dprime(3).unwrap();
        let white: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| {
                let (mut y, z) = m.transform(p).unwrap();
                y.extend(z);
                y
            })
            .collect();
        let mean = mean_vector(&white);
        assert!(mean.iter().all(|v| v.abs() < 1e-9));
        let cov = covariance(&white, &mean);
        assert!(cov.frobenius_diff(&Matrix::identity(8)) < 1e-6);
        let ete = m.eigvecs.transpose().matmul(&m.eigvecs);
        assert!(ete.max_abs_diff(&Matrix::identity(8)) < 1e-8);
    }

    #[test]
    fn rank_deficient_data_drops_null_directions() {
        // Points on a plane inside 3-D.
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let (a, b) = ((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos());
                vec![a + b, a - b, 2.0 * a]
            })
            .collect();
        let m = fit_vectors(&pts).unwrap();
        assert_eq!(m.rank(), 2);
        let m1 = m.clone().with_dprime(1).unwrap();
        let (y, z) = m1.transform(&pts[3]).unwrap();
        assert_eq!((y.len(), z.len()), (1, 1));
        assert!(z.iter().all(|v| v.is_finite()));
        let back = m1.inverse(&y, &z).unwrap();
        assert!(back.iter().zip(&pts[3]).all(|(a, b)| (a - b).abs() < 1e-9));
        let m3 = m.with_dprime(3).unwrap();
        assert!(matches!(m3.transform(&pts[0]), Err(Error::Singular { index: 2, .. })));
    }

    #[test]
    fn json_round_trip() {
        let m = fit_vectors(&correlated_cloud(20, 3, 4)).unwrap().with_dprime(2).unwrap();
        assert_eq!(WhiteningModel::from_json(&m.to_json()).unwrap(), m);
        let bad = m.to_json().replace("\"format_version\":1", "\"format_version\":9");
        assert!(WhiteningModel::from_json(&bad).is_err());
    }
}
