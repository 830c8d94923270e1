//! Dyadic model operators acting on Haar spectra: the shift, Haar
//! multipliers, the weighted square function in both its sum and random-sign
//! forms, disbalanced Haar bases adapted to a weight, and the quadratic forms
//! whose generalized eigenvalue extremes are the square-function constants.

use crate::dyadic::{self, DyadicIndex, HaarSpectrum, VectorField};
use crate::error::{Error, Result};
use crate::matlin::{self, Matrix, SymMatrix};
use crate::weights::AveragesTree;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Matrix symbol of a Haar multiplier: one d x d matrix per dyadic interval.
/// Intervals absent from the map act as the zero matrix.
#[derive(Debug, Clone)]
pub struct MultiplierSymbol {
    dim: usize,
    entries: BTreeMap<DyadicIndex, Matrix>,
}

impl MultiplierSymbol {
    pub fn new(dim: usize) -> Self {
        MultiplierSymbol {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, idx: DyadicIndex, m: Matrix) -> Result<()> {
        if m.rows() != self.dim || m.cols() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: m.rows(),
            });
        }
        self.entries.insert(idx, m);
        Ok(())
    }

    pub fn get(&self, idx: DyadicIndex) -> Option<&Matrix> {
        self.entries.get(&idx)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&DyadicIndex, &Matrix)> {
        self.entries.iter()
    }

    /// Fills every interval of levels 0..levels from a closure.
    pub fn fill(dim: usize, levels: u32, mut f: impl FnMut(DyadicIndex) -> Matrix) -> Self {
        let mut sym = MultiplierSymbol::new(dim);
        for idx in dyadic::internal_indices(levels) {
            sym.entries.insert(idx, f(idx));
        }
        sym
    }

    /// The same matrix on every interval of levels 0..levels.
    pub fn constant(dim: usize, levels: u32, m: &Matrix) -> Self {
        Self::fill(dim, levels, |_| m.clone())
    }

    /// Random +/- identity signs, the martingale-transform symbol.
    pub fn random_signs(dim: usize, levels: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::fill(dim, levels, |_| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            Matrix::identity(dim).scale(sign)
        })
    }
}

/// Dyadic shift: each Haar mode at I splits into an antisymmetric pair on the
/// children, (1/sqrt 2) f_hat(I) (h_{I-} - h_{I+}). The output spectrum is one
/// level deeper and has zero mean.
pub fn apply_shift(s: &HaarSpectrum) -> HaarSpectrum {
    let dim = s.dim();
    let mut out = HaarSpectrum::zeros(dim, s.levels() + 1);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for idx in s.indices() {
        let c = s.coeff(idx).to_vec();
        {
            let left = out.coeff_mut(idx.left());
            for (o, v) in left.iter_mut().zip(&c) {
                *o += v * inv_sqrt2;
            }
        }
        {
            let right = out.coeff_mut(idx.right());
            for (o, v) in right.iter_mut().zip(&c) {
                *o -= v * inv_sqrt2;
            }
        }
    }
    out
}

/// Haar multiplier: coefficient-wise matrix action f_hat(I) -> sigma_I
/// f_hat(I); annihilates the mean. Unspecified intervals act as zero.
pub fn apply_multiplier(sigma: &MultiplierSymbol, s: &HaarSpectrum) -> Result<HaarSpectrum> {
    if sigma.dim() != s.dim() {
        return Err(Error::DimMismatch {
            expected: s.dim(),
            got: sigma.dim(),
        });
    }
    let mut out = HaarSpectrum::zeros(s.dim(), s.levels());
    for idx in s.indices() {
        if let Some(m) = sigma.get(idx) {
            let v = m.matvec(s.coeff(idx));
            out.coeff_mut(idx).copy_from_slice(&v);
        }
    }
    Ok(out)
}

/// Weighted symbol norm, supremum form:
/// sup over internal I of ||<W>_I^{1/2} sigma_I <W>_I^{-1/2}||.
pub fn sigma_norm(sigma: &MultiplierSymbol, tree: &AveragesTree) -> Result<f64> {
    let mut sup = 0.0f64;
    for idx in tree.internal_indices() {
        if let Some(m) = sigma.get(idx) {
            let conj = tree
                .sqrt_avg(idx)
                .to_matrix()
                .matmul(m)
                .matmul(&tree.invsqrt_avg(idx).to_matrix());
            sup = sup.max(matlin::op_norm(&conj)?);
        }
    }
    Ok(sup)
}

/// Weighted symbol norm, infimum form: the smallest C with
/// <W>_I^{-1/2} sigma_I^T <W>_I sigma_I <W>_I^{-1/2} <= C^2 on every internal
/// interval. Agrees with `sigma_norm` up to rounding.
pub fn sigma_norm_inf_form(sigma: &MultiplierSymbol, tree: &AveragesTree) -> Result<f64> {
    let mut sup = 0.0f64;
    for idx in tree.internal_indices() {
        if let Some(m) = sigma.get(idx) {
            let x = necessity_matrix(tree, idx, m)?;
            let eig = matlin::eig_sym(&x)?;
            sup = sup.max(eig.values.last().copied().unwrap_or(0.0).max(0.0));
        }
    }
    Ok(sup.sqrt())
}

/// <W>_I^{-1/2} sigma^T <W>_I sigma <W>_I^{-1/2}, the matrix whose quadratic
/// form gives ||T_sigma f||^2_{L2(W)} on the test functions
/// f = <W>_I^{-1/2} h_I e.
pub fn necessity_matrix(
    tree: &AveragesTree,
    idx: DyadicIndex,
    sigma_i: &Matrix,
) -> Result<SymMatrix> {
    let w_half_inv = tree.invsqrt_avg(idx).to_matrix();
    let inner = sigma_i
        .transpose()
        .matmul(&tree.avg(idx).to_matrix())
        .matmul(sigma_i);
    Ok(SymMatrix::from_matrix(
        &w_half_inv.matmul(&inner).matmul(&w_half_inv),
    ))
}

/// Squared weighted square-function norm, sum form:
/// sum over internal I of < <W>_I f_hat(I), f_hat(I) >. The mean mode is
/// excluded unless `include_mean` is set, in which case the root average acts
/// on the mean vector as well.
pub fn square_norm_sq(s: &HaarSpectrum, tree: &AveragesTree, include_mean: bool) -> Result<f64> {
    if s.dim() != tree.dim() {
        return Err(Error::DimMismatch {
            expected: tree.dim(),
            got: s.dim(),
        });
    }
    if s.levels() > tree.depth() + 1 {
        return Err(Error::DepthTooSmall {
            needed: s.levels() as usize - 1,
            got: tree.depth() as usize,
        });
    }
    let mut acc = 0.0;
    for idx in s.indices() {
        acc += tree.avg(idx).quad_form(s.coeff(idx));
    }
    if include_mean {
        acc += tree.avg(DyadicIndex::ROOT).quad_form(s.mean());
    }
    Ok(acc)
}

/// Monte-Carlo estimate of the squared square-function norm via the
/// random-sign form E || W^{1/2} T_sigma f ||^2 with independent uniform
/// +/- 1 signs per interval.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
    pub trials: usize,
}

pub fn square_norm_mc(
    s: &HaarSpectrum,
    tree: &AveragesTree,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "need at least one trial".to_string(),
        ));
    }
    if s.levels() > tree.depth() {
        return Err(Error::DepthTooSmall {
            needed: s.levels() as usize,
            got: tree.depth() as usize,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = s.dim();
    let n_coeff_nodes = dyadic::coeff_count(s.levels());
    let mut samples = Vec::with_capacity(trials);
    let mut flipped = HaarSpectrum::zeros(dim, s.levels());
    for _ in 0..trials {
        for node in 0..n_coeff_nodes {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let idx = DyadicIndex::from_flat(node);
            let src = s.coeff(idx).to_vec();
            for (o, v) in flipped.coeff_mut(idx).iter_mut().zip(&src) {
                *o = sign * v;
            }
        }
        let g = dyadic::synthesize(&flipped, tree.depth())?;
        let mut x = 0.0;
        let h = 1.0 / g.leaf_count() as f64;
        for i in 0..g.leaf_count() {
            x += h * tree.leaf_weight(i).quad_form(g.leaf(i));
        }
        samples.push(x);
    }
    let mean = samples.iter().sum::<f64>() / trials as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / trials as f64;
    let std_err = (var / trials as f64).sqrt();
    Ok(McEstimate {
        value: mean,
        std_err,
        trials,
    })
}

/// Disbalanced Haar basis adapted to the weight on one interval:
/// g_I^{W,k} = w_I^k h_I e_I^k + h_I^1 e~_I^k with e~ = A(W,I) e.
#[derive(Debug, Clone)]
pub struct DisbalancedBasis {
    pub index: DyadicIndex,
    /// Orthonormal eigenvectors of <W>_I, ascending eigenvalue order.
    pub eigenvectors: Matrix,
    /// w_I^k = lambda_k^{-1/2}, the L2(W) normalization of h_I e_I^k.
    pub weights: Vec<f64>,
    /// A(W, I) = (|I|^{1/2}/2) <W>_I^{-1} (<W>_{I-} - <W>_{I+}) <W>_I^{-1/2}.
    pub a_matrix: Matrix,
    /// Columns e~_I^k = A(W,I) e_I^k.
    pub tilde: Matrix,
}

pub fn disbalanced_basis(tree: &AveragesTree, idx: DyadicIndex) -> Result<DisbalancedBasis> {
    if idx.level >= tree.depth() {
        return Err(Error::LeafInterval {
            level: idx.level,
            position: idx.position,
        });
    }
    let eig = tree.eig_avg(idx);
    let weights: Vec<f64> = eig.values.iter().map(|&l| 1.0 / l.sqrt()).collect();
    let diff = tree.avg(idx.left()).sub(tree.avg(idx.right()));
    let scale = 0.5 * dyadic::sqrt_measure(idx.level);
    let a_matrix = tree
        .inv_avg(idx)
        .to_matrix()
        .matmul(&diff.to_matrix())
        .matmul(&tree.invsqrt_avg(idx).to_matrix())
        .scale(scale);
    let tilde = a_matrix.matmul(&eig.vectors);
    Ok(DisbalancedBasis {
        index: idx,
        eigenvectors: eig.vectors.clone(),
        weights,
        a_matrix,
        tilde,
    })
}

impl DisbalancedBasis {
    /// g_I^{W,k} evaluated on the leaves of a depth-`depth` tree.
    /// The Haar part contributes +/- w^k |I|^{-1/2} e^k on the halves of I;
    /// the flat part contributes e~^k / |I| throughout I.
    pub fn leaf_field(&self, k: usize, depth: u32) -> Result<VectorField> {
        let dim = self.eigenvectors.rows();
        if depth < self.index.level + 1 {
            return Err(Error::DepthTooSmall {
                needed: (self.index.level + 1) as usize,
                got: depth as usize,
            });
        }
        let mut f = VectorField::zeros(dim, depth);
        let h = 1.0 / dyadic::sqrt_measure(self.index.level);
        let flat = 1.0 / self.index.measure();
        let e = self.eigenvectors.column(k);
        let tilde = self.tilde.column(k);
        for pos in self.index.left().leaf_range(depth) {
            let leaf = f.leaf_mut(pos as usize);
            for c in 0..dim {
                leaf[c] = -self.weights[k] * h * e[c] + flat * tilde[c];
            }
        }
        for pos in self.index.right().leaf_range(depth) {
            let leaf = f.leaf_mut(pos as usize);
            for c in 0..dim {
                leaf[c] = self.weights[k] * h * e[c] + flat * tilde[c];
            }
        }
        Ok(f)
    }

    /// h_I e_I^k as a leaf field.
    pub fn haar_mode_field(&self, k: usize, depth: u32) -> VectorField {
        let dim = self.eigenvectors.rows();
        let mut f = VectorField::zeros(dim, depth);
        let h = 1.0 / dyadic::sqrt_measure(self.index.level);
        let e = self.eigenvectors.column(k);
        for pos in self.index.left().leaf_range(depth) {
            let leaf = f.leaf_mut(pos as usize);
            for c in 0..dim {
                leaf[c] = -h * e[c];
            }
        }
        for pos in self.index.right().leaf_range(depth) {
            let leaf = f.leaf_mut(pos as usize);
            for c in 0..dim {
                leaf[c] = h * e[c];
            }
        }
        f
    }
}

/// L2(W) inner product of two leaf fields with exact quadrature.
pub fn weighted_inner(tree: &AveragesTree, f: &VectorField, g: &VectorField) -> f64 {
    let h = 1.0 / f.leaf_count() as f64;
    let mut acc = 0.0;
    for i in 0..f.leaf_count() {
        let wf = tree.leaf_weight(i).matvec(f.leaf(i));
        acc += h * wf.iter().zip(g.leaf(i)).map(|(a, b)| a * b).sum::<f64>();
    }
    acc
}

/// ||f||^2 in L2(W).
pub fn weighted_norm_sq(tree: &AveragesTree, f: &VectorField) -> f64 {
    weighted_inner(tree, f, f)
}

/// ||f||^2 in L2(W^{-1}).
pub fn inv_weighted_norm_sq(tree: &AveragesTree, f: &VectorField) -> f64 {
    let h = 1.0 / f.leaf_count() as f64;
    let mut acc = 0.0;
    for i in 0..f.leaf_count() {
        acc += h * tree.avg_of_inv(tree.leaf_index(i)).quad_form(f.leaf(i));
    }
    acc
}

/// Residual of the reconstruction of the plain Haar mode from the
/// disbalanced basis:
/// h_I e^k = (w^k)^{-1} g^{W,k} - (w^k)^{-1} A(W,I) h^1_I e^k,
/// measured as the largest leaf deviation.
pub fn reconstruct_check(tree: &AveragesTree, idx: DyadicIndex, k: usize) -> Result<f64> {
    let basis = disbalanced_basis(tree, idx)?;
    let depth = tree.depth();
    let dim = tree.dim();
    let lhs = basis.haar_mode_field(k, depth);
    let g = basis.leaf_field(k, depth)?;
    let inv_w = 1.0 / basis.weights[k];
    let flat = 1.0 / idx.measure();
    let ae = basis.tilde.column(k);
    let mut worst = 0.0f64;
    for pos in idx.leaf_range(depth) {
        let i = pos as usize;
        for c in 0..dim {
            let rhs = inv_w * g.leaf(i)[c] - inv_w * flat * ae[c];
            worst = worst.max((lhs.leaf(i)[c] - rhs).abs());
        }
    }
    Ok(worst)
}

/// The four quadratic forms of the square-function comparison evaluated on
/// one spectrum: the Haar-diagonal forms with <W>_I and <W>_I^{-1}, and the
/// pointwise multiplication forms with W and W^{-1}.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticForms {
    /// sum < <W>_I f_hat(I), f_hat(I) >.
    pub dw: f64,
    /// ||f||^2_{L2(W)} of the zero-mean part.
    pub mw: f64,
    /// sum < <W>_I^{-1} f_hat(I), f_hat(I) >.
    pub dw_inv: f64,
    /// ||f||^2_{L2(W^{-1})} of the zero-mean part.
    pub mw_inv: f64,
    /// ||f||^2_{L2(W)} of the full field, mean included.
    pub mw_full: f64,
    /// ||f||^2_{L2(W^{-1})} of the full field.
    pub mw_inv_full: f64,
}

pub fn quadratic_forms(s: &HaarSpectrum, tree: &AveragesTree) -> Result<QuadraticForms> {
    if s.levels() > tree.depth() {
        return Err(Error::DepthTooSmall {
            needed: s.levels() as usize,
            got: tree.depth() as usize,
        });
    }
    let mut dw = 0.0;
    let mut dw_inv = 0.0;
    for idx in s.indices() {
        let c = s.coeff(idx);
        dw += tree.avg(idx).quad_form(c);
        dw_inv += tree.inv_avg(idx).quad_form(c);
    }
    let mut zero_mean = s.clone();
    for m in zero_mean.mean_mut() {
        *m = 0.0;
    }
    let f0 = dyadic::synthesize(&zero_mean, tree.depth())?;
    let f = dyadic::synthesize(s, tree.depth())?;
    Ok(QuadraticForms {
        dw,
        mw: weighted_norm_sq(tree, &f0),
        dw_inv,
        mw_inv: inv_weighted_norm_sq(tree, &f0),
        mw_full: weighted_norm_sq(tree, &f),
        mw_inv_full: inv_weighted_norm_sq(tree, &f),
    })
}
