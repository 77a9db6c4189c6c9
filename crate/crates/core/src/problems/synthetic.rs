//! Collinear-factor test tensors with optional homoscedastic and heteroscedastic noise.
//!
//! All randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`). A spec's 64-bit
//! seed is the ChaCha key; each use of randomness gets its own ChaCha stream id, so
//! adding a draw to one purpose never shifts the values of another.

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kruskal::{reconstruct, FlatIterate, KruskalModel, Layout};
use crate::scalar::Scalar;
use crate::tensor::{DenseTensor, Matrix};

/// Parameters of one synthetic instance. Noise levels are percentages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub s: usize,
    pub c: f64,
    pub rank: usize,
    pub l1: f64,
    pub l2: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(s: usize, c: f64, rank: usize, l1: f64, l2: f64, seed: u64) -> Self {
        Self { s, c, rank, l1, l2, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank < 1 || self.s < self.rank {
            return Err(Error::InvalidParameter(format!("need s >= R >= 1, got s={} R={}", self.s, self.rank)));
        }
        if !(0.0..1.0).contains(&self.c) {
            return Err(Error::InvalidParameter(format!("collinearity must be in [0, 1), got {}", self.c)));
        }
        for (name, l) in [("l1", self.l1), ("l2", self.l2)] {
            if !(0.0..100.0).contains(&l) {
                return Err(Error::InvalidParameter(format!("{name} must be in [0, 100), got {l}")));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.s; 3]
    }
}

/// The six benchmark classes `(s, c, R, l1, l2)`.
pub const STANDARD_CLASSES: [(usize, f64, usize, f64, f64); 6] = [
    (20, 0.9, 3, 0.0, 0.0),
    (20, 0.9, 5, 1.0, 1.0),
    (50, 0.9, 3, 0.0, 0.0),
    (50, 0.9, 5, 1.0, 1.0),
    (100, 0.9, 3, 0.0, 0.0),
    (100, 0.9, 5, 1.0, 1.0),
];

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Factor(usize),
    Homoscedastic,
    Heteroscedastic,
    Init,
}

impl Purpose {
    fn stream(self) -> u64 {
        match self {
            Purpose::Factor(n) => n as u64,
            Purpose::Homoscedastic => 1 << 32,
            Purpose::Heteroscedastic => (1 << 32) + 1,
            Purpose::Init => (1 << 32) + 2,
        }
    }
}

/// Generator for one purpose under one seed.
pub fn rng_for(seed: u64, purpose: Purpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(purpose.stream());
    rng
}

/// Seed of instance `instance` of class `class`: the first output of ChaCha20 keyed by
/// `base_seed` on stream `(class << 32) | instance`.
pub fn derive_seed(base_seed: u64, class: usize, instance: usize) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(base_seed);
    rng.set_stream(((class as u64) << 32) | instance as u64);
    rng.next_u64()
}

/// `s × R` matrix with unit columns and pairwise inner products `c`.
///
/// Orthonormalises a Gaussian matrix and applies the transposed Cholesky factor of
/// `K = (1 − c)I + c·11ᵀ`, so the column Gram matrix is exactly `K` up to rounding.
pub fn collinear_factor<R: Rng + ?Sized>(s: usize, rank: usize, c: f64, rng: &mut R) -> Result<Matrix<f64>> {
    if rank < 1 || s < rank {
        return Err(Error::InvalidParameter(format!("need s >= R >= 1, got s={s} R={rank}")));
    }
    let k = DMatrix::<f64>::from_fn(rank, rank, |i, j| if i == j { 1.0 } else { c });
    let chol = k
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter(format!("collinearity {c} is infeasible for {rank} columns")))?;
    let g = DMatrix::<f64>::from_fn(s, rank, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    let f = q * chol.l().transpose();
    let m = Matrix::from_fn(s, rank, |i, j| f[(i, j)]);

    for i in 0..rank {
        for j in 0..rank {
            let v = crate::scalar::dot(m.column(i), m.column(j));
            let want = if i == j { 1.0 } else { c };
            if (v - want).abs() > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "collinear factor check failed: column product ({i},{j}) = {v}"
                )));
            }
        }
    }
    Ok(m)
}

/// Packed factors with entries i.i.d. uniform on `(0, 1)`.
pub fn random_init<T: Scalar, R: Rng + ?Sized>(shape: &[usize], rank: usize, rng: &mut R) -> FlatIterate<T> {
    let n = Layout::new(shape.to_vec(), rank).len();
    FlatIterate(
        (0..n)
            .map(|_| loop {
                let v: f64 = rng.random();
                if v > 0.0 {
                    break T::lit(v);
                }
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Synthetic(SyntheticSpec),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ProblemInstance<T> {
    pub tensor: DenseTensor<T>,
    pub rank_to_fit: usize,
    pub x0: FlatIterate<T>,
    pub provenance: Provenance,
}

impl<T: Scalar> ProblemInstance<T> {
    pub fn shape(&self) -> &[usize] {
        self.tensor.shape()
    }

    /// Loads a tensor file and draws a uniform initial guess from `init_seed`.
    pub fn from_file(path: impl Into<PathBuf>, rank: usize, init_seed: u64) -> Result<Self> {
        let path = path.into();
        let tensor: DenseTensor<T> = super::io::load_tensor(&path)?.cast();
        let x0 = random_init(tensor.shape(), rank, &mut rng_for(init_seed, Purpose::Init));
        Ok(Self { tensor, rank_to_fit: rank, x0, provenance: Provenance::File(path) })
    }
}

fn add_scaled_noise(base: &DenseTensor<f64>, noise: Vec<f64>, level: f64) -> Result<DenseTensor<f64>> {
    let scale = (100.0 / level - 1.0).powf(-0.5) * crate::scalar::norm2(base.values()) / crate::scalar::norm2(&noise);
    let vals = base.values().iter().zip(&noise).map(|(&z, &n)| z + scale * n).collect();
    DenseTensor::new(base.shape().to_vec(), vals)
}

/// The noiseless rank-`R` model behind `spec`: three collinear factors, unit weights.
pub fn true_model(spec: &SyntheticSpec) -> Result<KruskalModel<f64>> {
    spec.validate()?;
    let factors = (0..3)
        .map(|n| collinear_factor(spec.s, spec.rank, spec.c, &mut rng_for(spec.seed, Purpose::Factor(n))))
        .collect::<Result<Vec<_>>>()?;
    KruskalModel::new(factors)
}

/// Builds the tensor of `spec` (rank-`R` with collinear factors plus noise) and its
/// initial guess, in `f64`.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<ProblemInstance<f64>> {
    let mut z = reconstruct(&true_model(spec)?);

    if spec.l1 > 0.0 {
        let mut rng = rng_for(spec.seed, Purpose::Homoscedastic);
        let n: Vec<f64> = (0..z.len()).map(|_| rng.sample(StandardNormal)).collect();
        z = add_scaled_noise(&z, n, spec.l1)?;
    }
    if spec.l2 > 0.0 {
        let mut rng = rng_for(spec.seed, Purpose::Heteroscedastic);
        let n: Vec<f64> = z.values().iter().map(|&v| rng.sample::<f64, _>(StandardNormal) * v).collect();
        z = add_scaled_noise(&z, n, spec.l2)?;
    }
    let x0 = random_init(&spec.shape(), spec.rank, &mut rng_for(spec.seed, Purpose::Init));
    Ok(ProblemInstance { tensor: z, rank_to_fit: spec.rank, x0, provenance: Provenance::Synthetic(*spec) })
}

/// Every class in [`STANDARD_CLASSES`] with `instances` seeds each, class-major.
pub fn standard_suite(instances: usize, base_seed: u64) -> Vec<SyntheticSpec> {
    STANDARD_CLASSES
        .iter()
        .enumerate()
        .flat_map(|(ci, &(s, c, r, l1, l2))| {
            (0..instances).map(move |i| SyntheticSpec::new(s, c, r, l1, l2, derive_seed(base_seed, ci, i)))
        })
        .collect()
}
