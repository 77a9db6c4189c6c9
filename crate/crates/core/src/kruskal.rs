//! The CP model: Kruskal factors, the flat iterate, objective, gradient and the ALS sweep.
//!
//! The objective is `f(x) = ½‖T − Ã‖²_F` with `Ã = Σ_j a_0^{(j)} ∘ … ∘ a_{N-1}^{(j)}`.
//! Block `n` of the gradient is `A_n Γ_n − M_n`, where `Γ_n` is the Hadamard product of
//! the other factors' Gram matrices and `M_n` the mode-`n` MTTKRP.

use crate::error::{Error, Result};
use crate::linalg::{solve_gram_system, SolveMethod};
use crate::scalar::{dot, norm2, Scalar};
use crate::tensor::{check_factors, gram, hadamard_of, mttkrp_unchecked, norm_sq, DenseTensor, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct KruskalModel<T> {
    factors: Vec<Matrix<T>>,
}

impl<T: Scalar> KruskalModel<T> {
    pub fn new(factors: Vec<Matrix<T>>) -> Result<Self> {
        let first = factors.first().ok_or_else(|| Error::InvalidShape("a Kruskal model needs factors".into()))?;
        if factors.len() < 2 {
            return Err(Error::InvalidShape("a Kruskal model needs at least 2 factors".into()));
        }
        let r = first.cols();
        if let Some(bad) = factors.iter().find(|f| f.cols() != r) {
            return Err(Error::DimensionMismatch(format!("factor column counts differ: {r} vs {}", bad.cols())));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Matrix<T>] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<Matrix<T>> {
        self.factors
    }

    pub fn rank(&self) -> usize {
        self.factors[0].cols()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.shape(), self.rank())
    }

    pub fn pack(&self) -> FlatIterate<T> {
        let mut v = Vec::with_capacity(self.layout().len());
        for f in &self.factors {
            v.extend_from_slice(f.values());
        }
        FlatIterate(v)
    }
}

/// Tensor extents plus CP rank: everything needed to map a flat iterate to factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    shape: Vec<usize>,
    rank: usize,
}

impl Layout {
    pub fn new(shape: Vec<usize>, rank: usize) -> Self {
        Self { shape, rank }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of variables `n_X = r · Σ I_n`.
    pub fn len(&self) -> usize {
        self.rank * self.shape.iter().sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Offset range of block `n` inside the flat iterate.
    pub fn block(&self, n: usize) -> std::ops::Range<usize> {
        let start = self.rank * self.shape[..n].iter().sum::<usize>();
        start..start + self.rank * self.shape[n]
    }
}

/// All factor entries in one vector: factors in mode order, each column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatIterate<T>(pub Vec<T>);

impl<T: Scalar> FlatIterate<T> {
    pub fn zeros(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn norm(&self) -> T {
        norm2(&self.0)
    }

    pub fn dot(&self, other: &Self) -> T {
        dot(&self.0, &other.0)
    }

    /// `self − other`
    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    /// `self + s·dir`
    pub fn add_scaled(&self, s: T, dir: &Self) -> Self {
        Self(self.0.iter().zip(&dir.0).map(|(&a, &d)| a + s * d).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn unpack(&self, layout: &Layout) -> Result<KruskalModel<T>> {
        if self.0.len() != layout.len() {
            return Err(Error::DimensionMismatch(format!(
                "flat iterate has {} values, layout needs {}",
                self.0.len(),
                layout.len()
            )));
        }
        if layout.rank == 0 {
            return Err(Error::InvalidShape("rank must be positive".into()));
        }
        let factors = (0..layout.shape.len())
            .map(|n| Matrix::from_parts(layout.shape[n], layout.rank, self.0[layout.block(n)].to_vec()))
            .collect();
        KruskalModel::new(factors)
    }
}

/// Full dense `Ã`. Costs `O(|T|·r)` memory-light work; intended for small checks.
pub fn reconstruct<T: Scalar>(m: &KruskalModel<T>) -> DenseTensor<T> {
    let shape = m.shape();
    let r = m.rank();
    let first = &m.factors[0];
    let rest = crate::tensor::partial_khatri_rao(&m.factors[1..], r);
    let i0 = first.rows();
    let mut values = vec![T::zero(); i0 * rest.rows()];
    for j in 0..r {
        let a = first.column(j);
        for (irest, &w) in rest.column(j).iter().enumerate() {
            let out = &mut values[irest * i0..(irest + 1) * i0];
            for (o, &x) in out.iter_mut().zip(a) {
                *o += x * w;
            }
        }
    }
    DenseTensor::from_parts(shape, values)
}

fn residual_half_sq<T: Scalar>(t: &DenseTensor<T>, m: &KruskalModel<T>) -> T {
    let approx = reconstruct(m);
    // Neumaier-compensated sum: near a fit the terms are tiny and there are many of them.
    let (mut s, mut c) = (T::zero(), T::zero());
    for (&a, &b) in t.values().iter().zip(approx.values()) {
        let x = (a - b) * (a - b);
        let y = s + x;
        c += if s >= x { (s - y) + x } else { (x - y) + s };
        s = y;
    }
    (s + c) * T::lit(0.5)
}

/// Objective and gradient together.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub f: T,
    pub grad: FlatIterate<T>,
    pub grad_norm: T,
}

/// A tensor with its cached squared norm; the unit every solver works on.
#[derive(Debug, Clone)]
pub struct CpProblem<T> {
    tensor: DenseTensor<T>,
    norm_sq: T,
    layout: Layout,
}

/// Below this fraction of `max(‖T‖², ‖Ã‖²)` the expanded objective has lost too many
/// digits to cancellation and is recomputed from the explicit residual. At 0.1 the
/// expansion keeps all but about 3 bits; a smaller cutoff makes `f` too noisy to compare
/// consecutive iterates near convergence.
const EXPANSION_CUTOFF: f64 = 0.1;

impl<T: Scalar> CpProblem<T> {
    pub fn new(tensor: DenseTensor<T>, rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidParameter("rank must be at least 1".into()));
        }
        let norm_sq = norm_sq(&tensor);
        let layout = Layout::new(tensor.shape().to_vec(), rank);
        Ok(Self { tensor, norm_sq, layout })
    }

    pub fn tensor(&self) -> &DenseTensor<T> {
        &self.tensor
    }

    pub fn tensor_norm_sq(&self) -> T {
        self.norm_sq
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn rank(&self) -> usize {
        self.layout.rank
    }

    pub fn n_vars(&self) -> usize {
        self.layout.len()
    }

    fn model(&self, x: &FlatIterate<T>) -> Result<KruskalModel<T>> {
        x.unpack(&self.layout)
    }

    fn check_model(&self, m: &KruskalModel<T>) -> Result<()> {
        check_factors(self.tensor.shape(), &m.factors)?;
        if m.rank() != self.layout.rank {
            return Err(Error::DimensionMismatch(format!(
                "model rank {} differs from problem rank {}",
                m.rank(),
                self.layout.rank
            )));
        }
        Ok(())
    }

    fn objective_from_parts(&self, m: &KruskalModel<T>, inner_t_model: T, model_norm_sq: T) -> T {
        let half = T::lit(0.5);
        let f = half * (self.norm_sq - T::lit(2.0) * inner_t_model + model_norm_sq);
        let scale = self.norm_sq.max(model_norm_sq);
        if f < T::lit(EXPANSION_CUTOFF) * scale {
            residual_half_sq(&self.tensor, m)
        } else {
            f
        }
    }

    pub fn objective_model(&self, m: &KruskalModel<T>) -> Result<T> {
        self.check_model(m)?;
        let last = m.factors.len() - 1;
        let grams: Vec<_> = m.factors.iter().map(gram).collect();
        let mn = mttkrp_unchecked(&self.tensor, &m.factors, last, m.rank());
        let ip = dot(mn.values(), m.factors[last].values());
        let model_sq: T = hadamard_of(&grams, None).values().iter().copied().sum();
        Ok(self.objective_from_parts(m, ip, model_sq))
    }

    pub fn objective(&self, x: &FlatIterate<T>) -> Result<T> {
        self.objective_model(&self.model(x)?)
    }

    pub fn evaluate_model(&self, m: &KruskalModel<T>) -> Result<Evaluation<T>> {
        self.check_model(m)?;
        let r = m.rank();
        let n_modes = m.factors.len();
        let grams: Vec<_> = m.factors.iter().map(gram).collect();
        let mut grad = Vec::with_capacity(self.layout.len());
        let mut ip = T::zero();
        for n in 0..n_modes {
            let a = &m.factors[n];
            let gamma = hadamard_of(&grams, Some(n));
            let mn = mttkrp_unchecked(&self.tensor, &m.factors, n, r);
            if n == n_modes - 1 {
                ip = dot(mn.values(), a.values());
            }
            let mut block = a.matmul(&gamma).expect("factor and Gram dimensions agree");
            for (g, &mv) in block.values_mut().iter_mut().zip(mn.values()) {
                *g -= mv;
            }
            grad.extend_from_slice(block.values());
        }
        let model_sq: T = hadamard_of(&grams, None).values().iter().copied().sum();
        let f = self.objective_from_parts(m, ip, model_sq);
        let grad = FlatIterate(grad);
        let grad_norm = grad.norm();
        Ok(Evaluation { f, grad, grad_norm })
    }

    pub fn evaluate(&self, x: &FlatIterate<T>) -> Result<Evaluation<T>> {
        self.evaluate_model(&self.model(x)?)
    }

    /// Replaces factor `n` by the exact minimizer of `f` over that block.
    pub fn update_block(&self, m: &mut KruskalModel<T>, n: usize) -> Result<SolveMethod> {
        self.check_model(m)?;
        if n >= m.factors.len() {
            return Err(Error::ModeOutOfRange { mode: n, order: m.factors.len() });
        }
        let grams: Vec<_> = m.factors.iter().map(gram).collect();
        let gamma = hadamard_of(&grams, Some(n));
        let mn = mttkrp_unchecked(&self.tensor, &m.factors, n, m.rank());
        let (a, how) = solve_gram_system(&gamma, &mn);
        m.factors[n] = a;
        Ok(how)
    }

    /// One full ALS sweep, blocks updated in ascending mode order.
    pub fn als_sweep_model(&self, m: &KruskalModel<T>) -> Result<KruskalModel<T>> {
        self.check_model(m)?;
        let r = m.rank();
        let mut out = m.clone();
        let mut grams: Vec<_> = out.factors.iter().map(gram).collect();
        for n in 0..out.factors.len() {
            let gamma = hadamard_of(&grams, Some(n));
            let mn = mttkrp_unchecked(&self.tensor, &out.factors, n, r);
            let (a, _) = solve_gram_system(&gamma, &mn);
            grams[n] = gram(&a);
            out.factors[n] = a;
        }
        Ok(out)
    }

    pub fn als_sweep(&self, x: &FlatIterate<T>) -> Result<FlatIterate<T>> {
        Ok(self.als_sweep_model(&self.model(x)?)?.pack())
    }
}

/// `½‖t − reconstruct(m)‖²` via the MTTKRP/Gram expansion.
pub fn objective<T: Scalar>(t: &DenseTensor<T>, m: &KruskalModel<T>) -> Result<T> {
    CpProblem::new(t.clone(), m.rank())?.objective_model(m)
}

/// Gradient of `½‖t − reconstruct(m)‖²` in flat-iterate layout.
pub fn gradient<T: Scalar>(t: &DenseTensor<T>, m: &KruskalModel<T>) -> Result<FlatIterate<T>> {
    Ok(CpProblem::new(t.clone(), m.rank())?.evaluate_model(m)?.grad)
}

pub fn als_sweep<T: Scalar>(t: &DenseTensor<T>, m: &KruskalModel<T>) -> Result<KruskalModel<T>> {
    CpProblem::new(t.clone(), m.rank())?.als_sweep_model(m)
}
