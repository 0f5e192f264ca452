//! Spatially correlated Rayleigh fading between the TX-SIM output layer and
//! the RX-SIM input layer, with log-distance path loss and optional
//! shadowing.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::error::{Result, SimError};
use crate::geometry::{intra_layer_distance_unchecked, SimArchitecture};

/// Log-distance path-loss model parameters; lengths in meters, shadowing
/// standard deviation in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossParams {
    pub reference_distance: f64,
    pub exponent: f64,
    pub shadowing_std_db: f64,
    pub link_distance: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams {
            reference_distance: 1.0,
            exponent: 3.5,
            shadowing_std_db: 9.0,
            link_distance: 250.0,
        }
    }
}

/// Average path loss in dB at distance `d`:
/// `20·log10(4π·d0/λ) + 10·b·log10(d/d0) + δ·z`, `z` the shadowing draw.
/// Returns the linear power gain `ρ² = 10^(−PL/10)`.
pub fn path_loss_gain(params: &PathLossParams, shadowing_draw: f64, lambda: f64) -> Result<f64> {
    if !(params.reference_distance > 0.0) {
        return Err(SimError::domain("reference distance must be strictly positive"));
    }
    if params.link_distance < params.reference_distance {
        return Err(SimError::domain(format!(
            "link distance {} below reference distance {}; model invalid",
            params.link_distance, params.reference_distance
        )));
    }
    if !(lambda > 0.0) {
        return Err(SimError::domain("wavelength must be strictly positive"));
    }
    let pl_ref_db = 20.0 * (4.0 * PI * params.reference_distance / lambda).log10();
    let pl_db = pl_ref_db
        + 10.0 * params.exponent * (params.link_distance / params.reference_distance).log10()
        + params.shadowing_std_db * shadowing_draw;
    Ok(10f64.powf(-pl_db / 10.0))
}

/// Spatial correlation of an isotropically scattered far field over one
/// layer's lattice: entry `(m, m̃) = sinc(2·dist(m, m̃)/λ)`.
pub fn correlation_matrix(row_len: usize, spacing: f64, lambda: f64) -> DMatrix<f64> {
    let atoms = row_len * row_len;
    DMatrix::from_fn(atoms, atoms, |m0, mt0| {
        let d = intra_layer_distance_unchecked(m0 + 1, mt0 + 1, spacing, row_len);
        sinc(2.0 * d / lambda)
    })
}

/// `sin(πx)/(πx)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Principal square root of a real symmetric PSD matrix via
/// eigendecomposition. Eigenvalues below `1e-12·λ_max` are clamped to zero
/// first; sinc correlation matrices are PSD in theory but carry tiny negative
/// numerical eigenvalues.
///
/// Panics if the input is asymmetric beyond 1e-10.
pub fn psd_sqrt(r: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(r.nrows(), r.ncols(), "psd_sqrt requires a square matrix");
    let asym = (r - r.transpose()).abs().max();
    assert!(asym <= 1e-10, "psd_sqrt input asymmetric by {asym}");
    let eig = SymmetricEigen::new(r.clone());
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = 1e-12 * max_ev;
    let sqrt_ev: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&ev| if ev < cutoff { 0.0 } else { ev.sqrt() })
        .collect();
    let mut scaled = eig.eigenvectors.clone();
    for (j, s) in sqrt_ev.iter().enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * eig.eigenvectors.transpose()
}

/// Which spatial correlation to impose on the fading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationKind {
    /// Isotropic-scattering sinc correlation from the lattice geometry.
    Sinc,
    /// Uncorrelated (i.i.d.) fading.
    Identity,
}

/// Statistical description of the HMIMO channel between the SIM apertures.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    /// TX-side correlation (M×M, unit diagonal).
    pub r_tx: DMatrix<f64>,
    /// RX-side correlation (N×N, unit diagonal).
    pub r_rx: DMatrix<f64>,
    /// Average path-loss power gain at zero shadowing.
    pub rho2: f64,
    pub pathloss: PathLossParams,
    /// Draw a fresh shadowing term for every realization when set.
    pub shadowing: bool,
    pub wavelength: f64,
    r_tx_sqrt: DMatrix<Complex64>,
    r_rx_sqrt: DMatrix<Complex64>,
}

/// One draw of the correlated channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// N×M channel matrix.
    pub g: DMatrix<Complex64>,
    /// Seed of the RNG stream that produced this draw.
    pub seed: u64,
    /// Path-loss gain of this realization (includes its shadowing term).
    pub rho2: f64,
}

impl ChannelModel {
    /// Builds the model for an architecture's apertures.
    pub fn new(
        arch: &SimArchitecture,
        pathloss: PathLossParams,
        correlation: CorrelationKind,
        shadowing: bool,
    ) -> Result<Self> {
        let (r_tx, r_rx) = match correlation {
            CorrelationKind::Sinc => (
                correlation_matrix(arch.tx.row_len(), arch.tx.spacing, arch.wavelength),
                correlation_matrix(arch.rx.row_len(), arch.rx.spacing, arch.wavelength),
            ),
            CorrelationKind::Identity => (
                DMatrix::identity(arch.tx.atoms, arch.tx.atoms),
                DMatrix::identity(arch.rx.atoms, arch.rx.atoms),
            ),
        };
        Self::from_correlations(r_tx, r_rx, pathloss, shadowing, arch.wavelength)
    }

    /// Uncorrelated model of arbitrary dimensions (e.g. a conventional
    /// antenna array instead of a metasurface aperture).
    pub fn iid(
        rx_dim: usize,
        tx_dim: usize,
        pathloss: PathLossParams,
        shadowing: bool,
        wavelength: f64,
    ) -> Result<Self> {
        Self::from_correlations(
            DMatrix::identity(tx_dim, tx_dim),
            DMatrix::identity(rx_dim, rx_dim),
            pathloss,
            shadowing,
            wavelength,
        )
    }

    fn from_correlations(
        r_tx: DMatrix<f64>,
        r_rx: DMatrix<f64>,
        pathloss: PathLossParams,
        shadowing: bool,
        wavelength: f64,
    ) -> Result<Self> {
        let rho2 = path_loss_gain(&pathloss, 0.0, wavelength)?;
        let r_tx_sqrt = psd_sqrt(&r_tx).map(|v| Complex64::new(v, 0.0));
        let r_rx_sqrt = psd_sqrt(&r_rx).map(|v| Complex64::new(v, 0.0));
        Ok(ChannelModel { r_tx, r_rx, rho2, pathloss, shadowing, wavelength, r_tx_sqrt, r_rx_sqrt })
    }

    /// Draws `G = R_rx^{1/2} · G̃ · R_tx^{1/2}` with `G̃` i.i.d. complex
    /// Gaussian of entry variance ρ² (split evenly between real and imaginary
    /// parts). The same seed reproduces the same realization bit for bit.
    pub fn draw_channel(&self, seed: u64) -> ChannelRealization {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Shadowing is large-scale fading: one draw per realization.
        let rho2 = if self.shadowing {
            let z: f64 = StandardNormal.sample(&mut rng);
            path_loss_gain(&self.pathloss, z, self.wavelength)
                .expect("parameters validated at model construction")
        } else {
            self.rho2
        };
        let n = self.r_rx.nrows();
        let m = self.r_tx.nrows();
        let component_std = (rho2 / 2.0).sqrt();
        let white = DMatrix::from_fn(n, m, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * component_std, im * component_std)
        });
        let g = &self.r_rx_sqrt * white * &self.r_tx_sqrt;
        ChannelRealization { g, seed, rho2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceLayout;
    use approx::assert_relative_eq;

    const LAMBDA: f64 = 0.0107;

    fn arch(atoms: usize, spacing: f64) -> SimArchitecture {
        SimArchitecture::new(
            1,
            SurfaceLayout::new(1, atoms, spacing, 0.05).unwrap(),
            SurfaceLayout::new(1, atoms, spacing, 0.05).unwrap(),
            LAMBDA,
        )
        .unwrap()
    }

    #[test]
    fn correlation_diagonal_is_one() {
        let r = correlation_matrix(3, LAMBDA / 3.0, LAMBDA);
        for i in 0..9 {
            assert_eq!(r[(i, i)], 1.0);
        }
    }

    #[test]
    fn half_wavelength_neighbors_are_uncorrelated() {
        // Adjacent atoms at λ/2 spacing: sinc(1) = 0; same for every integer
        // multiple along a lattice row.
        let r = correlation_matrix(4, LAMBDA / 2.0, LAMBDA);
        assert_relative_eq!(r[(0, 1)], 0.0, epsilon = 1e-15);
        assert_relative_eq!(r[(0, 2)], 0.0, epsilon = 1e-15);
        assert_relative_eq!(r[(0, 3)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn quarter_wavelength_neighbors_match_sinc_half() {
        let r = correlation_matrix(2, LAMBDA / 4.0, LAMBDA);
        assert_relative_eq!(r[(0, 1)], 2.0 / PI, max_relative = 1e-14);
        assert_relative_eq!(r[(0, 1)], 0.636_619_772_367_581_4, max_relative = 1e-14);
    }

    #[test]
    fn psd_sqrt_identity_and_diagonal() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_relative_eq!((psd_sqrt(&id) - &id).norm(), 0.0, epsilon = 1e-12);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0]));
        let s = psd_sqrt(&d);
        assert_relative_eq!(s[(0, 0)], 2.0, max_relative = 1e-12);
        assert_relative_eq!(s[(1, 1)], 1.0, max_relative = 1e-12);
        assert_relative_eq!(s[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let s = psd_sqrt(&r);
        assert!(((&s * &s) - &r).norm() <= 1e-10);
        // and on a real sinc correlation matrix
        let r = correlation_matrix(4, LAMBDA / 4.0, LAMBDA);
        let s = psd_sqrt(&r);
        assert!(((&s * &s) - &r).norm() / r.norm() <= 1e-8);
    }

    #[test]
    #[should_panic(expected = "asymmetric")]
    fn psd_sqrt_rejects_asymmetric_input() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        let _ = psd_sqrt(&r);
    }

    #[test]
    fn free_space_reference_loss() {
        // d = d0 = 1 m at λ = 10.7 mm: PL = 20·log10(4π/λ) ≈ 61.3965 dB.
        let params = PathLossParams {
            reference_distance: 1.0,
            exponent: 3.5,
            shadowing_std_db: 0.0,
            link_distance: 1.0,
        };
        let rho2 = path_loss_gain(&params, 0.0, LAMBDA).unwrap();
        let pl_db = -10.0 * rho2.log10();
        assert_relative_eq!(pl_db, 61.396_521_726_738, max_relative = 1e-10);
    }

    #[test]
    fn decade_rule_at_exponent_two() {
        let near = PathLossParams {
            reference_distance: 1.0,
            exponent: 2.0,
            shadowing_std_db: 0.0,
            link_distance: 1.0,
        };
        let far = PathLossParams { link_distance: 10.0, ..near };
        let g0 = path_loss_gain(&near, 0.0, LAMBDA).unwrap();
        let g1 = path_loss_gain(&far, 0.0, LAMBDA).unwrap();
        assert_relative_eq!(10.0 * (g0 / g1).log10(), 20.0, max_relative = 1e-12);
    }

    #[test]
    fn default_link_budget_loss() {
        let params = PathLossParams::default();
        let rho2 = path_loss_gain(&params, 0.0, LAMBDA).unwrap();
        let pl_db = -10.0 * rho2.log10();
        assert_relative_eq!(pl_db, 145.324_422_030_259, max_relative = 1e-10);
    }

    #[test]
    fn rejects_link_shorter_than_reference() {
        let params = PathLossParams { link_distance: 0.5, ..Default::default() };
        assert!(path_loss_gain(&params, 0.0, LAMBDA).is_err());
    }

    #[test]
    fn draws_are_reproducible_and_seed_sensitive() {
        let model =
            ChannelModel::new(&arch(9, LAMBDA / 2.0), PathLossParams::default(), CorrelationKind::Sinc, true)
                .unwrap();
        let a = model.draw_channel(99);
        let b = model.draw_channel(99);
        assert_eq!(a, b);
        let c = model.draw_channel(100);
        assert_ne!(a.g, c.g);
    }

    #[test]
    fn zero_gain_limit_yields_zero_channel() {
        // Push the link distance far enough that ρ² underflows to 0.
        let params = PathLossParams {
            link_distance: 1e100,
            exponent: 3.5,
            shadowing_std_db: 0.0,
            reference_distance: 1.0,
        };
        let model = ChannelModel::iid(2, 2, params, false, LAMBDA).unwrap();
        assert_eq!(model.rho2, 0.0);
        let real = model.draw_channel(1);
        assert_eq!(real.g.norm(), 0.0);
    }

    #[test]
    fn entry_variance_matches_rho2() {
        // Identity correlations: the sample second moment of the entries must
        // approach ρ² (within 5% over 1e5 draws of a 4×4 channel).
        let mut params = PathLossParams::default();
        params.link_distance = 1.0;
        let model = ChannelModel::iid(4, 4, params, false, LAMBDA).unwrap();
        let draws = 100_000;
        let mut acc = 0.0;
        for t in 0..draws {
            acc += model.draw_channel(t as u64).g.norm_squared();
        }
        let sample = acc / (draws as f64 * 16.0);
        assert_relative_eq!(sample, model.rho2, max_relative = 0.05);
    }

    #[test]
    fn correlated_second_moments_match_kronecker_product() {
        // E[vec(G)vec(G)^H] = ρ²·(R_tx ⊗ R_rx) for the column-stacked vec;
        // checked entrywise against the Monte-Carlo covariance on a 4×4 case.
        let a = arch(4, LAMBDA / 4.0);
        let mut params = PathLossParams::default();
        params.link_distance = 1.0;
        let model = ChannelModel::new(&a, params, CorrelationKind::Sinc, false).unwrap();
        let (n, m) = (4usize, 4usize);
        let draws = 100_000;
        let mut cov = DMatrix::<Complex64>::zeros(n * m, n * m);
        for t in 0..draws {
            let g = model.draw_channel(t as u64).g;
            let v: Vec<Complex64> = (0..m).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| g[(i, j)]).collect();
            for p in 0..n * m {
                for q in 0..n * m {
                    cov[(p, q)] += v[p] * v[q].conj();
                }
            }
        }
        cov /= Complex64::new(draws as f64, 0.0);
        for p in 0..n * m {
            for q in 0..n * m {
                let expect = model.rho2 * model.r_tx[(p / n, q / n)] * model.r_rx[(p % n, q % n)];
                let got = cov[(p, q)];
                assert!(
                    (got.re - expect).abs() <= 0.05 * model.rho2 && got.im.abs() <= 0.05 * model.rho2,
                    "cov[{p},{q}] = {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn fading_is_zero_mean() {
        let mut params = PathLossParams::default();
        params.link_distance = 1.0;
        let model = ChannelModel::iid(3, 3, params, false, LAMBDA).unwrap();
        let draws = 20_000;
        let mut mean = Complex64::default();
        for t in 0..draws {
            mean += model.draw_channel(t as u64).g.sum();
        }
        mean /= Complex64::new((draws * 9) as f64, 0.0);
        let bound = 3.0 * model.rho2.sqrt() / ((draws * 9) as f64).sqrt();
        assert!(mean.norm() <= bound, "|mean| = {} above {bound}", mean.norm());
    }
}
