//! Finite-scale values of the constants that weighted-norm inequalities
//! bound: two-sided square-function constants, the embedding sum, the
//! S1/S2/S3 split, weighted operator norms of the shift and of Haar
//! multipliers, Carleson embedding vs. testing constants, and the weighted
//! testing ratio.
//!
//! Spectral problems run on one of two state spaces. Square-function
//! constants live on the Haar coefficient space (optionally extended by the
//! mean block); embedding constants live on the leaf space. Both get a dense
//! path (exact, for state dimension up to 4096) and a matrix-free power
//! iteration path; the two agree on their overlap and tests pin that down.

use crate::dyadic::{self, DyadicIndex, HaarSpectrum, VectorField};
use crate::error::{Error, Result};
use crate::matlin::{self, Matrix, SymMatrix};
use crate::operators::{self, MultiplierSymbol};
use crate::weights::{self, AveragesTree};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Largest state dimension handed to the dense eigensolver.
pub const DENSE_STATE_LIMIT: usize = 4096;
/// Below this size the automatic method cross-checks power iteration against
/// the dense solver.
pub const AUTO_CROSSCHECK_LIMIT: usize = 512;

const POWER_MAX_ITERS: usize = 10_000;
const POWER_EIG_DELTA: f64 = 1e-10;
const POWER_RESIDUAL_TOL: f64 = 1e-8;
const POWER_SEED: u64 = 0x5EED_CAFE;

/// Solver selection for the spectral computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Dense when the state fits, with a power-iteration cross-check on
    /// small problems.
    Auto,
    /// Dense eigensolver; fails above `DENSE_STATE_LIMIT`.
    Dense,
    /// Matrix-free power iteration only.
    Power,
}

/// Deterministic start vector, normalized.
fn power_start(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
    v
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration with a
/// fixed seed, a relative-increment stopping rule held for three consecutive
/// iterations, and a residual check.
pub fn power_lambda_max(
    n: usize,
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    seed: u64,
) -> Result<f64> {
    let mut v = power_start(n, seed);
    let mut lambda_prev = f64::NAN;
    let mut stable = 0usize;
    let mut last_delta = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for it in 0..POWER_MAX_ITERS {
        let w = apply(&v);
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let wnorm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if wnorm == 0.0 {
            // Start vector is annihilated; the operator is zero on its span.
            return Ok(0.0);
        }
        residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if lambda_prev.is_finite() {
            last_delta = (lambda - lambda_prev).abs() / lambda.abs().max(1.0);
            if last_delta <= POWER_EIG_DELTA {
                stable += 1;
            } else {
                stable = 0;
            }
        }
        lambda_prev = lambda;
        if stable >= 3 && residual <= POWER_RESIDUAL_TOL * lambda.abs().max(1.0) {
            return Ok(lambda);
        }
        let _ = it;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wnorm;
        }
    }
    Err(Error::PowerNoConvergence {
        iterations: POWER_MAX_ITERS,
        last_delta,
        residual,
    })
}

/// Extreme eigenvalues of a symmetric PSD operator: the maximum directly,
/// the minimum through the shifted operator s I - K.
pub fn power_extremes(
    n: usize,
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    seed: u64,
) -> Result<(f64, f64)> {
    let lambda_max = power_lambda_max(n, &mut apply, seed)?;
    let shift = lambda_max * (1.0 + 1e-6) + 1e-12;
    let shifted = power_lambda_max(
        n,
        |v| {
            let w = apply(v);
            v.iter()
                .zip(&w)
                .map(|(vi, wi)| shift * vi - wi)
                .collect()
        },
        seed.wrapping_add(1),
    )?;
    Ok((shift - shifted, lambda_max))
}

/// Haar coefficient state space: an optional mean block followed by one
/// d-block per internal node in level order.
#[derive(Debug, Clone, Copy)]
struct CoeffSpace {
    dim: usize,
    levels: u32,
    include_mean: bool,
}

impl CoeffSpace {
    fn len(&self) -> usize {
        let blocks = dyadic::coeff_count(self.levels);
        (blocks + usize::from(self.include_mean)) * self.dim
    }

    fn spectrum_of(&self, v: &[f64]) -> HaarSpectrum {
        let d = self.dim;
        let offset = if self.include_mean { d } else { 0 };
        let mean = if self.include_mean {
            v[..d].to_vec()
        } else {
            vec![0.0; d]
        };
        HaarSpectrum::from_parts(d, self.levels, mean, v[offset..].to_vec())
            .expect("coefficient layout matches by construction")
    }

    fn vector_of(&self, s: &HaarSpectrum) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        if self.include_mean {
            v.extend_from_slice(s.mean());
        }
        v.extend_from_slice(s.coeffs());
        v
    }

    /// Haar-diagonal form: each block acted on by <W>_I (or <W>_I^{-1}).
    fn apply_diag(&self, tree: &AveragesTree, v: &[f64], inverse: bool) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; v.len()];
        let mut offset = 0;
        if self.include_mean {
            let block = if inverse {
                tree.inv_avg(DyadicIndex::ROOT)
            } else {
                tree.avg(DyadicIndex::ROOT)
            };
            out[..d].copy_from_slice(&block.matvec(&v[..d]));
            offset = d;
        }
        for idx in dyadic::internal_indices(self.levels) {
            let o = offset + idx.flat_offset() * d;
            let block = if inverse {
                tree.inv_avg(idx)
            } else {
                tree.avg(idx)
            };
            out[o..o + d].copy_from_slice(&block.matvec(&v[o..o + d]));
        }
        out
    }

    /// Same structure with <W>_I^{-1/2} blocks; whitens the diagonal form.
    fn apply_diag_invsqrt(&self, tree: &AveragesTree, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; v.len()];
        let mut offset = 0;
        if self.include_mean {
            let block = tree.invsqrt_avg(DyadicIndex::ROOT);
            out[..d].copy_from_slice(&block.matvec(&v[..d]));
            offset = d;
        }
        for idx in dyadic::internal_indices(self.levels) {
            let o = offset + idx.flat_offset() * d;
            out[o..o + d].copy_from_slice(&tree.invsqrt_avg(idx).matvec(&v[o..o + d]));
        }
        out
    }

    /// Multiplication form: synthesize, multiply pointwise by W (or W^{-1}),
    /// analyze back. In the orthonormal Haar coordinates this is the matrix
    /// of the quadratic form ||f||^2_{L2(W)}.
    fn apply_mult(&self, tree: &AveragesTree, v: &[f64], inverse: bool) -> Vec<f64> {
        let s = self.spectrum_of(v);
        let f = dyadic::synthesize(&s, tree.depth()).expect("levels bounded by tree depth");
        let mut g = VectorField::zeros(self.dim, tree.depth());
        for i in 0..f.leaf_count() {
            let block = if inverse {
                tree.avg_of_inv(tree.leaf_index(i))
            } else {
                tree.leaf_weight(i)
            };
            g.leaf_mut(i).copy_from_slice(&block.matvec(f.leaf(i)));
        }
        let sg = dyadic::analyze(&g);
        self.vector_of(&sg)
    }
}

/// Dense symmetric matrix of a linear operator, assembled column by column
/// and symmetrized.
fn build_dense(n: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) -> SymMatrix {
    let mut m = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = apply(&e);
        e[j] = 0.0;
        for i in 0..n {
            m.set(i, j, col[i]);
        }
    }
    SymMatrix::from_matrix(&m)
}

/// Two-sided square-function constants as generalized-eigenvalue extremes of
/// the Haar-diagonal form against the multiplication form:
/// c_up = sup <D_W f, f> / <M_W f, f>, c_low = sup <M_W f, f> / <D_W f, f>,
/// over the zero-mean subspace (or the full space with `include_mean`).
pub fn square_constants(
    tree: &AveragesTree,
    include_mean: bool,
    method: Method,
) -> Result<(f64, f64)> {
    if tree.depth() == 0 && !include_mean {
        return Err(Error::InvalidParameter(
            "a depth-0 tree has no Haar modes; the zero-mean forms are empty".to_string(),
        ));
    }
    let space = CoeffSpace {
        dim: tree.dim(),
        levels: tree.depth(),
        include_mean,
    };
    let n = space.len();
    let use_dense = match method {
        Method::Dense => {
            if n > DENSE_STATE_LIMIT {
                return Err(Error::StateTooLarge {
                    dim: n,
                    limit: DENSE_STATE_LIMIT,
                });
            }
            true
        }
        Method::Power => false,
        Method::Auto => n <= DENSE_STATE_LIMIT,
    };
    if use_dense {
        let d_mat = build_dense(n, |v| space.apply_diag(tree, v, false));
        let m_mat = build_dense(n, |v| space.apply_mult(tree, v, false));
        let (lo, hi) = matlin::gen_eig_extremes(&m_mat, &d_mat)?;
        Ok((1.0 / lo, hi))
    } else {
        // K = D^{-1/2} M D^{-1/2}: c_low = lambda_max, c_up = 1 / lambda_min.
        let (lo, hi) = power_extremes(
            n,
            |v| {
                let w = space.apply_diag_invsqrt(tree, v);
                let w = space.apply_mult(tree, &w, false);
                space.apply_diag_invsqrt(tree, &w)
            },
            POWER_SEED,
        )?;
        Ok((1.0 / lo, hi))
    }
}

/// Relative disagreement between the two formulations of the lower
/// square-function inequality: sup M_W/D_W computed directly versus
/// sup D_W^{-1}/M_W^{-1} computed from the inverse forms. The identity is an
/// operator-inversion statement, so both pencils live on the full
/// (mean-included) space, where the multiplication form of W^{-1} is the
/// exact operator inverse of the multiplication form of W.
pub fn inverse_equivalence_check(tree: &AveragesTree) -> Result<f64> {
    let space = CoeffSpace {
        dim: tree.dim(),
        levels: tree.depth(),
        include_mean: true,
    };
    let n = space.len();
    if n > DENSE_STATE_LIMIT {
        return Err(Error::StateTooLarge {
            dim: n,
            limit: DENSE_STATE_LIMIT,
        });
    }
    let d_mat = build_dense(n, |v| space.apply_diag(tree, v, false));
    let m_mat = build_dense(n, |v| space.apply_mult(tree, v, false));
    let (_, route1) = matlin::gen_eig_extremes(&m_mat, &d_mat)?;

    let d_inv_mat = build_dense(n, |v| space.apply_diag(tree, v, true));
    let m_inv_mat = build_dense(n, |v| space.apply_mult(tree, v, true));
    let (_, route2) = matlin::gen_eig_extremes(&d_inv_mat, &m_inv_mat)?;

    Ok((route1 - route2).abs() / route1.abs().max(1.0))
}

/// Block reduction of the operator inequality D_W <= [W] (D_{W^{-1}})^{-1}:
/// max over internal I of
/// lambda_max(<W^{-1}>_I^{1/2} <W>_I <W^{-1}>_I^{1/2}) / [W]_{A2}.
/// Always at most 1 up to rounding.
pub fn dw_dominance_gap(tree: &AveragesTree) -> Result<f64> {
    let a2 = weights::a2_characteristic(tree)?;
    let mut sup = 0.0f64;
    for idx in tree.internal_indices() {
        let conj = matlin::conjugate_sym(tree.sqrt_avg_of_inv(idx), tree.avg(idx));
        let eig = matlin::eig_sym(&conj)?;
        sup = sup.max(*eig.values.last().unwrap());
    }
    Ok(sup / a2)
}

/// The weighted embedding sum and its ratio against
/// [W] max(1, log [W]) ||f||^2:
/// lhs = sum |I| ||<W>_I^{-1/2}(<W>_{I-} - <W>_{I+})<W>_I^{-1/2}||^2
///                ||<W>_I^{-1/2} <W^{1/2} f>_I||^2.
pub fn tv_embedding_ratio(tree: &AveragesTree, f: &VectorField) -> Result<(f64, f64)> {
    if f.depth() != tree.depth() || f.dim() != tree.dim() {
        return Err(Error::DimMismatch {
            expected: tree.dim(),
            got: f.dim(),
        });
    }
    let sqrt_avgs = weights::sqrt_weighted_averages(tree, f)?;
    let mut lhs = 0.0;
    for idx in tree.internal_indices() {
        let inv_half = tree.invsqrt_avg(idx);
        let diff = tree.avg(idx.left()).sub(tree.avg(idx.right()));
        let conj = matlin::conjugate_sym(inv_half, &diff);
        let norm = matlin::op_norm_sym(&conj)?;
        let avg_vec = inv_half.matvec(sqrt_avgs.node(idx));
        let vec_sq: f64 = avg_vec.iter().map(|x| x * x).sum();
        lhs += idx.measure() * norm * norm * vec_sq;
    }
    let a2 = weights::a2_characteristic(tree)?;
    let denom = a2 * a2.ln().max(1.0) * f.l2_norm_sq();
    Ok((lhs, lhs / denom))
}

/// The three-term split of the inverse Haar-diagonal form along the
/// disbalanced basis.
#[derive(Debug, Clone, Copy)]
pub struct S123 {
    /// Coefficients against the disbalanced functions.
    pub s1: f64,
    /// 2 sqrt(s1 s3), the Cauchy-Schwarz bound on the cross term.
    pub s2_bound: f64,
    /// Flat-part term, inner-product form.
    pub s3: f64,
    /// Flat-part term, averaged form; equals `s3` up to rounding.
    pub s3_alt: f64,
    /// sum_k (w_I^k)^2 |<f, h_I e_I^k>|^2 = <D_W^{-1} f_hat, f_hat>.
    pub total: f64,
}

pub fn s123_decomposition(tree: &AveragesTree, f: &VectorField) -> Result<S123> {
    if f.depth() != tree.depth() || f.dim() != tree.dim() {
        return Err(Error::DimMismatch {
            expected: tree.dim(),
            got: f.dim(),
        });
    }
    let dim = tree.dim();
    let spectrum = dyadic::analyze(f);
    let avgs = dyadic::averages(f);
    let mut s1 = 0.0;
    let mut s3 = 0.0;
    let mut s3_alt = 0.0;
    let mut total = 0.0;
    for idx in tree.internal_indices() {
        let basis = operators::disbalanced_basis(tree, idx)?;
        let coeff = spectrum.coeff(idx);
        let favg = avgs.node(idx);
        let inv_half = tree.invsqrt_avg(idx);
        let u = inv_half.matvec(favg);
        let w_hat = weights::weight_haar_coeff(tree, idx)?;
        let b = matlin::conjugate_sym(inv_half, &w_hat);
        for k in 0..dim {
            let e = basis.eigenvectors.column(k);
            let haar_coeff: f64 = coeff.iter().zip(&e).map(|(a, b)| a * b).sum();
            total += basis.weights[k].powi(2) * haar_coeff * haar_coeff;

            let ae = basis.tilde.column(k);
            let flat: f64 = favg.iter().zip(&ae).map(|(a, b)| a * b).sum();
            let g_coeff = basis.weights[k] * haar_coeff + flat;
            s1 += g_coeff * g_coeff;
            s3 += flat * flat;

            let bv = b.matvec(&e);
            let alt: f64 = u.iter().zip(&bv).map(|(a, b)| a * b).sum();
            s3_alt += alt * alt;
        }
    }
    Ok(S123 {
        s1,
        s2_bound: 2.0 * (s1 * s3).sqrt(),
        s3,
        s3_alt,
        total,
    })
}

/// Which dyadic model operator a weighted norm refers to.
#[derive(Debug, Clone, Copy)]
pub enum OperatorKind<'a> {
    Shift,
    Multiplier(&'a MultiplierSymbol),
}

/// Weighted operator norm with both computation paths recorded.
#[derive(Debug, Clone, Copy)]
pub struct OpNorm {
    pub power: Option<f64>,
    pub dense: Option<f64>,
}

impl OpNorm {
    /// Preferred value: the dense one when present.
    pub fn value(&self) -> f64 {
        self.dense.or(self.power).unwrap_or(0.0)
    }
}

fn field_from_euclid(dim: usize, depth: u32, u: &[f64]) -> VectorField {
    let scale = (1u64 << depth) as f64;
    let values = u.iter().map(|x| x * scale.sqrt()).collect();
    VectorField::new(dim, depth, values).expect("layout fixed by caller")
}

fn euclid_from_field(f: &VectorField) -> Vec<f64> {
    let scale = 1.0 / ((1u64 << f.depth()) as f64).sqrt();
    f.values().iter().map(|x| x * scale).collect()
}

struct ConjugatedOperator<'a> {
    tree: &'a AveragesTree,
    kind: OperatorKind<'a>,
    in_depth: u32,
    out_depth: u32,
}

impl<'a> ConjugatedOperator<'a> {
    fn new(tree: &'a AveragesTree, kind: OperatorKind<'a>) -> Self {
        let in_depth = tree.depth();
        let out_depth = match kind {
            OperatorKind::Shift => in_depth + 1,
            OperatorKind::Multiplier(_) => in_depth,
        };
        ConjugatedOperator {
            tree,
            kind,
            in_depth,
            out_depth,
        }
    }

    fn n_in(&self) -> usize {
        (1usize << self.in_depth) * self.tree.dim()
    }

    /// W^{1/2} o op o W^{-1/2} in Euclidean leaf coordinates. The output
    /// weight is the same piecewise function, read at the refined depth.
    fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let tree = self.tree;
        let dim = tree.dim();
        let f = field_from_euclid(dim, self.in_depth, u);
        let mut g = VectorField::zeros(dim, self.in_depth);
        for i in 0..f.leaf_count() {
            g.leaf_mut(i)
                .copy_from_slice(&tree.invsqrt_avg(tree.leaf_index(i)).matvec(f.leaf(i)));
        }
        let s = dyadic::analyze(&g);
        let ts = match self.kind {
            OperatorKind::Shift => operators::apply_shift(&s),
            OperatorKind::Multiplier(sigma) => operators::apply_multiplier(sigma, &s)?,
        };
        let out = dyadic::synthesize(&ts, self.out_depth)?;
        let mut res = VectorField::zeros(dim, self.out_depth);
        let shift_back = self.out_depth - self.in_depth;
        for i in 0..out.leaf_count() {
            let parent_leaf = i >> shift_back;
            let sq = tree.sqrt_avg(tree.leaf_index(parent_leaf));
            res.leaf_mut(i).copy_from_slice(&sq.matvec(out.leaf(i)));
        }
        Ok(euclid_from_field(&res))
    }

    /// Adjoint of `apply` in the Euclidean coordinates.
    fn apply_adjoint(&self, u: &[f64]) -> Result<Vec<f64>> {
        let tree = self.tree;
        let dim = tree.dim();
        let f = field_from_euclid(dim, self.out_depth, u);
        let mut g = VectorField::zeros(dim, self.out_depth);
        let shift_back = self.out_depth - self.in_depth;
        for i in 0..f.leaf_count() {
            let parent_leaf = i >> shift_back;
            let sq = tree.sqrt_avg(tree.leaf_index(parent_leaf));
            g.leaf_mut(i).copy_from_slice(&sq.matvec(f.leaf(i)));
        }
        let s = dyadic::analyze(&g);
        let ts = match self.kind {
            OperatorKind::Shift => shift_adjoint(&s),
            OperatorKind::Multiplier(sigma) => multiplier_adjoint(sigma, &s)?,
        };
        let out = dyadic::synthesize(&ts, self.in_depth)?;
        let mut res = VectorField::zeros(dim, self.in_depth);
        for i in 0..out.leaf_count() {
            res.leaf_mut(i)
                .copy_from_slice(&tree.invsqrt_avg(tree.leaf_index(i)).matvec(out.leaf(i)));
        }
        Ok(euclid_from_field(&res))
    }
}

/// Adjoint of the shift on spectra: the coefficient at I collects
/// (c(I-) - c(I+)) / sqrt 2 from the level below; the mean is annihilated.
fn shift_adjoint(s: &HaarSpectrum) -> HaarSpectrum {
    let dim = s.dim();
    let levels = s.levels().saturating_sub(1);
    let mut out = HaarSpectrum::zeros(dim, levels);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for idx in out.indices() {
        let left = s.coeff(idx.left()).to_vec();
        let right = s.coeff(idx.right()).to_vec();
        let dst = out.coeff_mut(idx);
        for c in 0..dim {
            dst[c] = (left[c] - right[c]) * inv_sqrt2;
        }
    }
    out
}

/// Adjoint of the Haar multiplier: sigma_I^T coefficient-wise.
fn multiplier_adjoint(sigma: &MultiplierSymbol, s: &HaarSpectrum) -> Result<HaarSpectrum> {
    let mut out = HaarSpectrum::zeros(s.dim(), s.levels());
    for idx in s.indices() {
        if let Some(m) = sigma.get(idx) {
            let v = m.transpose().matvec(s.coeff(idx));
            out.coeff_mut(idx).copy_from_slice(&v);
        }
    }
    Ok(out)
}

/// Adjoint identity residual |<G u, v> - <u, G* v>| / scale for seeded
/// random u, v. Exposed so the self-check suite can certify the adjoint the
/// norm computations rely on.
pub fn op_adjoint_residual(tree: &AveragesTree, kind: OperatorKind, seed: u64) -> Result<f64> {
    let op = ConjugatedOperator::new(tree, kind);
    let n_in = op.n_in();
    let n_out = (1usize << op.out_depth) * tree.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..n_out).map(|_| rng.random_range(-1.0..1.0)).collect();
    let gu = op.apply(&u)?;
    let gtv = op.apply_adjoint(&v)?;
    let lhs: f64 = gu.iter().zip(&v).map(|(a, b)| a * b).sum();
    let rhs: f64 = u.iter().zip(&gtv).map(|(a, b)| a * b).sum();
    Ok((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0))
}

/// Weighted operator norm ||op||_{L2(W) -> L2(W)}: the largest singular
/// value of W^{1/2} op W^{-1/2} on the leaf space at the refined depth.
pub fn weighted_op_norm(tree: &AveragesTree, kind: OperatorKind, method: Method) -> Result<OpNorm> {
    let op = ConjugatedOperator::new(tree, kind);
    let n = op.n_in();
    let mut power = None;
    let mut dense = None;
    let run_power = matches!(method, Method::Auto | Method::Power);
    let run_dense = match method {
        Method::Dense => {
            if n > DENSE_STATE_LIMIT {
                return Err(Error::StateTooLarge {
                    dim: n,
                    limit: DENSE_STATE_LIMIT,
                });
            }
            true
        }
        Method::Auto => n <= AUTO_CROSSCHECK_LIMIT,
        Method::Power => false,
    };
    if run_power {
        let lambda = power_lambda_max(
            n,
            |v| {
                let w = op.apply(v).expect("dimensions fixed");
                op.apply_adjoint(&w).expect("dimensions fixed")
            },
            POWER_SEED,
        )?;
        power = Some(lambda.max(0.0).sqrt());
    }
    if run_dense {
        let gtg = build_dense(n, |v| {
            let w = op.apply(v).expect("dimensions fixed");
            op.apply_adjoint(&w).expect("dimensions fixed")
        });
        let eig = matlin::eig_sym(&gtg)?;
        dense = Some(eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt());
    }
    Ok(OpNorm { power, dense })
}

/// Largest necessity ratio over the test functions f = <W>_I^{-1/2} h_I e:
/// a certified lower bound for the weighted multiplier norm.
pub fn multiplier_necessity_bound(tree: &AveragesTree, sigma: &MultiplierSymbol) -> Result<f64> {
    let mut best = 0.0f64;
    for idx in tree.internal_indices() {
        if let Some(m) = sigma.get(idx) {
            let x = operators::necessity_matrix(tree, idx, m)?;
            let eig = matlin::eig_sym(&x)?;
            best = best.max(eig.values.last().copied().unwrap_or(0.0).max(0.0));
        }
    }
    Ok(best.sqrt())
}

/// Sequence of PSD matrices indexed by internal dyadic intervals.
#[derive(Debug, Clone)]
pub struct CarlesonSequence {
    dim: usize,
    entries: BTreeMap<DyadicIndex, SymMatrix>,
}

impl CarlesonSequence {
    pub fn new(dim: usize) -> Self {
        CarlesonSequence {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rejects entries that fail the PSD tolerance
    /// lambda_min >= -1e-12 lambda_max.
    pub fn insert(&mut self, idx: DyadicIndex, m: SymMatrix) -> Result<()> {
        if m.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: m.dim(),
            });
        }
        let eig = matlin::eig_sym(&m)?;
        let lo = eig.values[0];
        let hi = *eig.values.last().unwrap();
        if lo < -1e-12 * hi.abs().max(1.0) {
            return Err(Error::NotPositiveDefinite {
                lambda_min: lo,
                lambda_max: hi,
            });
        }
        self.entries.insert(idx, m);
        Ok(())
    }

    pub fn get(&self, idx: DyadicIndex) -> Option<&SymMatrix> {
        self.entries.get(&idx)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&DyadicIndex, &SymMatrix)> {
        self.entries.iter()
    }
}

/// Carleson embedding constant (exact generalized eigenvalue on the leaf
/// space) and localized testing constant:
/// c_embed = sup_f sum <A_I <f>_I, <f>_I> / ||f||^2_{L2(W^{-1})},
/// c_test  = sup_J lambda_max(<W>_J^{-1/2} ((1/|J|) sum_{I in J} <W>_I A_I
///           <W>_I) <W>_J^{-1/2}).
pub fn carleson_constants(seq: &CarlesonSequence, tree: &AveragesTree) -> Result<(f64, f64)> {
    if seq.dim() != tree.dim() {
        return Err(Error::DimMismatch {
            expected: tree.dim(),
            got: seq.dim(),
        });
    }
    let dim = tree.dim();
    let depth = tree.depth();

    // Testing side: bottom-up subtree sums of <W>_I A_I <W>_I.
    let mut subtree = vec![SymMatrix::zeros(dim); dyadic::node_count(depth)];
    for level in (0..depth).rev() {
        for k in 0..(1u64 << level) {
            let idx = DyadicIndex { level, position: k };
            let mut acc = subtree[idx.left().flat_offset()]
                .add(&subtree[idx.right().flat_offset()]);
            if let Some(a) = seq.get(idx) {
                let wa = tree.avg(idx).mul_sym(a);
                let waw = SymMatrix::from_matrix(&wa.matmul(&tree.avg(idx).to_matrix()));
                acc = acc.add(&waw);
            }
            subtree[idx.flat_offset()] = acc;
        }
    }
    let mut c_test = 0.0f64;
    for idx in tree.internal_indices() {
        let local = subtree[idx.flat_offset()].scale(1.0 / idx.measure());
        let s = tree.invsqrt_avg(idx);
        let conj = matlin::conjugate_sym(s, &local);
        let eig = matlin::eig_sym(&conj)?;
        c_test = c_test.max(eig.values.last().copied().unwrap_or(0.0).max(0.0));
    }

    // Embedding side: whitened numerator form on the leaf space.
    let n = (1usize << depth) * dim;
    if n > DENSE_STATE_LIMIT {
        return Err(Error::StateTooLarge {
            dim: n,
            limit: DENSE_STATE_LIMIT,
        });
    }
    let whitened = |u: &[f64]| -> Vec<f64> {
        // B^{-1/2} with B = blockdiag(W_l^{-1}) is blockdiag(W_l^{1/2}).
        let mut su = vec![0.0; n];
        for l in 0..(1usize << depth) {
            let block = tree.sqrt_avg(tree.leaf_index(l));
            su[l * dim..(l + 1) * dim].copy_from_slice(&block.matvec(&u[l * dim..(l + 1) * dim]));
        }
        let f = field_from_euclid(dim, depth, &su);
        let avgs = dyadic::averages(&f);
        // Top-down accumulation of 2^{j - N/2} A_I <f>_I over ancestors.
        let mut acc = vec![0.0; n];
        let root_scale = 1.0 / ((1u64 << depth) as f64).sqrt();
        for (idx, a) in seq.entries() {
            if idx.level >= depth {
                continue;
            }
            let av = a.matvec(avgs.node(*idx));
            let scale = (1u64 << idx.level) as f64 * root_scale;
            for leaf in idx.leaf_range(depth) {
                let o = leaf as usize * dim;
                for c in 0..dim {
                    acc[o + c] += scale * av[c];
                }
            }
        }
        let mut out = vec![0.0; n];
        for l in 0..(1usize << depth) {
            let block = tree.sqrt_avg(tree.leaf_index(l));
            out[l * dim..(l + 1) * dim]
                .copy_from_slice(&block.matvec(&acc[l * dim..(l + 1) * dim]));
        }
        out
    };
    let k_mat = build_dense(n, whitened);
    let eig = matlin::eig_sym(&k_mat)?;
    let c_embed = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    Ok((c_embed, c_test))
}

/// Weighted testing ratio:
/// sup over internal J of
/// lambda_max(<W>_J^{-1/2} ((1/|J|) sum_{I in J} W_hat(I) <W>_I^{-1}
/// W_hat(I)) <W>_J^{-1/2}) / [W]_{A2}^2.
pub fn testing_ratio(tree: &AveragesTree) -> Result<f64> {
    let dim = tree.dim();
    let depth = tree.depth();
    let mut subtree = vec![SymMatrix::zeros(dim); dyadic::node_count(depth)];
    for level in (0..depth).rev() {
        for k in 0..(1u64 << level) {
            let idx = DyadicIndex { level, position: k };
            let w_hat = weights::weight_haar_coeff(tree, idx)?;
            let term = SymMatrix::from_matrix(
                &w_hat
                    .mul_sym(tree.inv_avg(idx))
                    .matmul(&w_hat.to_matrix()),
            );
            subtree[idx.flat_offset()] = subtree[idx.left().flat_offset()]
                .add(&subtree[idx.right().flat_offset()])
                .add(&term);
        }
    }
    let mut sup = 0.0f64;
    for idx in tree.internal_indices() {
        let local = subtree[idx.flat_offset()].scale(1.0 / idx.measure());
        let s = tree.invsqrt_avg(idx);
        let conj = matlin::conjugate_sym(s, &local);
        let eig = matlin::eig_sym(&conj)?;
        sup = sup.max(eig.values.last().copied().unwrap_or(0.0).max(0.0));
    }
    let a2 = weights::a2_characteristic(tree)?;
    Ok(sup / (a2 * a2))
}

/// The PSD sequence behind the flat-part term of the decomposition:
/// A_I = <W>_I^{-1} W_hat(I) <W>_I^{-1} W_hat(I) <W>_I^{-1}.
pub fn s3_carleson_sequence(tree: &AveragesTree) -> Result<CarlesonSequence> {
    let mut seq = CarlesonSequence::new(tree.dim());
    for idx in tree.internal_indices() {
        let w_hat = weights::weight_haar_coeff(tree, idx)?;
        let c = tree.inv_avg(idx).mul_sym(&w_hat);
        let a = SymMatrix::from_matrix(
            &c.matmul(&tree.inv_avg(idx).to_matrix())
                .matmul(&c.transpose()),
        );
        seq.insert(idx, a)?;
    }
    Ok(seq)
}

/// Everything the sweeps track for one weight, plus derived shape constants.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub a2: f64,
    pub c_up: f64,
    pub c_low: f64,
    pub shift_norm: f64,
    pub tsigma_norm: f64,
    pub tv_ratio: f64,
    pub testing_ratio: f64,
    pub carleson_ratio: f64,
    pub depth: u32,
    pub dim: usize,
    pub family: String,
    pub seed: u64,
}

impl BoundsReport {
    /// Computes every tracked constant for one weight. The multiplier uses
    /// seeded random sign symbols, the embedding a seeded random function,
    /// and the Carleson pair the weight's own flat-part testing sequence.
    pub fn compute(
        tree: &AveragesTree,
        family: impl Into<String>,
        seed: u64,
    ) -> Result<BoundsReport> {
        let a2 = weights::a2_characteristic(tree)?;
        let (c_up, c_low) = square_constants(tree, false, Method::Auto)?;
        let shift_norm = weighted_op_norm(tree, OperatorKind::Shift, Method::Auto)?.value();
        let sigma = MultiplierSymbol::random_signs(tree.dim(), tree.depth(), seed);
        let tsigma_norm =
            weighted_op_norm(tree, OperatorKind::Multiplier(&sigma), Method::Auto)?.value();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7EB0);
        let values = (0..(1usize << tree.depth()) * tree.dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let f = VectorField::new(tree.dim(), tree.depth(), values)?;
        let (_, tv_ratio) = tv_embedding_ratio(tree, &f)?;
        let testing = testing_ratio(tree)?;
        let seq = s3_carleson_sequence(tree)?;
        let (c_embed, c_test) = carleson_constants(&seq, tree)?;
        let carleson_ratio = if c_test > 0.0 { c_embed / c_test } else { 0.0 };
        Ok(BoundsReport {
            a2,
            c_up,
            c_low,
            shift_norm,
            tsigma_norm,
            tv_ratio,
            testing_ratio: testing,
            carleson_ratio,
            depth: tree.depth(),
            dim: tree.dim(),
            family: family.into(),
            seed,
        })
    }

    /// [W] max(1, log [W]).
    pub fn c_w(&self) -> f64 {
        self.a2 * self.a2.ln().max(1.0)
    }

    /// [W]^2 max(1, log [W]).
    pub fn b_w(&self) -> f64 {
        self.a2 * self.c_w()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{generate, WeightFamily, WeightField};

    fn scalar_weight(leaves: &[f64]) -> AveragesTree {
        let depth = leaves.len().trailing_zeros();
        let field = WeightField::new(
            1,
            depth,
            leaves.iter().map(|&v| SymMatrix::diag(&[v])).collect(),
        )
        .unwrap();
        AveragesTree::build(&field).unwrap()
    }

    fn random_field(seed: u64, dim: usize, depth: u32) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..(1usize << depth) * dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        VectorField::new(dim, depth, values).unwrap()
    }

    #[test]
    fn square_constants_trivial_cases() {
        // Constant weight: forms coincide.
        let field = WeightField::constant(SymMatrix::diag(&[2.0, 7.0]), 3).unwrap();
        let tree = AveragesTree::build(&field).unwrap();
        let (c_up, c_low) = square_constants(&tree, false, Method::Auto).unwrap();
        assert!((c_up - 1.0).abs() <= 1e-9, "c_up = {c_up}");
        assert!((c_low - 1.0).abs() <= 1e-9, "c_low = {c_low}");

        // Depth 1: the single Haar mode forces equality for any weight.
        let tree = scalar_weight(&[1.0, 4.0]);
        let (c_up, c_low) = square_constants(&tree, false, Method::Auto).unwrap();
        assert!((c_up - 1.0).abs() <= 1e-10);
        assert!((c_low - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn square_constants_depth2_pencil() {
        // Frozen three-dimensional pencil: c_low = 1 + sqrt(8/15),
        // c_up = 1 / (1 - sqrt(8/15)).
        let tree = scalar_weight(&[1.0, 1.0, 1.0, 9.0]);
        let (c_up, c_low) = square_constants(&tree, false, Method::Auto).unwrap();
        let r = (8.0f64 / 15.0).sqrt();
        assert!((c_low - (1.0 + r)).abs() <= 1e-9, "c_low = {c_low}");
        assert!((c_up - 1.0 / (1.0 - r)).abs() <= 1e-9, "c_up = {c_up}");
        assert!((c_low - 1.73030).abs() <= 1e-4);
        assert!((c_up - 3.70782).abs() <= 1e-4);
    }

    #[test]
    fn square_constants_power_agrees_with_dense() {
        let w = generate(&WeightFamily::Rotation { t: 3.0 }, 2, 4, 0).unwrap();
        let tree = AveragesTree::build(&w).unwrap();
        let (du, dl) = square_constants(&tree, false, Method::Dense).unwrap();
        let (pu, pl) = square_constants(&tree, false, Method::Power).unwrap();
        assert!((du - pu).abs() <= 1e-6 * du, "dense {du} power {pu}");
        assert!((dl - pl).abs() <= 1e-6 * dl, "dense {dl} power {pl}");
    }

    #[test]
    fn inverse_equivalence_small() {
        let tree = scalar_weight(&[1.0, 1.0, 1.0, 9.0]);
        let resid = inverse_equivalence_check(&tree).unwrap();
        assert!(resid <= 1e-8, "residual {resid}");

        let w = generate(&WeightFamily::RandomMartingale { step: 0.6 }, 2, 3, 5).unwrap();
        let tree = AveragesTree::build(&w).unwrap();
        let resid = inverse_equivalence_check(&tree).unwrap();
        assert!(resid <= 1e-8, "residual {resid}");
    }

    #[test]
    fn dominance_gap_examples() {
        let field = WeightField::constant(SymMatrix::diag(&[3.0]), 3).unwrap();
        let tree = AveragesTree::build(&field).unwrap();
        let gap = dw_dominance_gap(&tree).unwrap();
        assert!((gap - 1.0).abs() <= 1e-9);

        // Scalar: the same product defines the characteristic.
        let tree = scalar_weight(&[1.0, 4.0, 2.0, 0.5]);
        let gap = dw_dominance_gap(&tree).unwrap();
        assert!(gap <= 1.0 + 1e-9);

        let w = generate(&WeightFamily::Rotation { t: 4.0 }, 2, 4, 0).unwrap();
        let tree = AveragesTree::build(&w).unwrap();
        assert!(dw_dominance_gap(&tree).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn tv_embedding_examples() {
        let field = WeightField::constant(SymMatrix::diag(&[5.0, 1.0]), 3).unwrap();
        let tree = AveragesTree::build(&field).unwrap();
        let f = VectorField::constant(&[1.0, 2.0], 3);
        let (lhs, _) = tv_embedding_ratio(&tree, &f).unwrap();
        assert!(lhs.abs() <= 1e-13);

        // Two-leaf hand computation: 1.44 * 0.9.
        let tree = scalar_weight(&[1.0, 4.0]);
        let f = VectorField::constant(&[1.0], 1);
        let (lhs, _) = tv_embedding_ratio(&tree, &f).unwrap();
        assert!((lhs - 1.296).abs() <= 1e-12, "lhs = {lhs}");

        let w = generate(&WeightFamily::RandomMartingale { step: 0.5 }, 2, 4, 9).unwrap();
        let tree = AveragesTree::build(&w).unwrap();
        let f = random_field(1, 2, 4);
        let (lhs, _) = tv_embedding_ratio(&tree, &f).unwrap();
        assert!(lhs >= 0.0);
    }

    #[test]
    fn s123_examples() {
        // Constant weight: flat parts vanish.
        let field = WeightField::constant(SymMatrix::diag(&[2.0, 3.0]), 3).unwrap();
        let tree = AveragesTree::build(&field).unwrap();
        let f = random_field(4, 2, 3);
        let s = s123_decomposition(&tree, &f).unwrap();
        assert!(s.s3 <= 1e-20);
        assert!(s.s2_bound <= 1e-9);
        assert!((s.total - s.s1).abs() <= 1e-9 * s.total.max(1.0));

        // Two-leaf: f = h gives total = 1/2.5.
        let tree = scalar_weight(&[1.0, 4.0]);
        let f = VectorField::new(1, 1, vec![-1.0, 1.0]).unwrap();
        let s = s123_decomposition(&tree, &f).unwrap();
        assert!((s.total - 0.4).abs() <= 1e-12);

        // Chain agreement and the quadratic-form identity.
        let w = generate(&WeightFamily::RandomMartingale { step: 0.7 }, 2, 4, 13).unwrap();
        let tree = AveragesTree::build(&w).unwrap();
        let f = random_field(7, 2, 4);
        let s = s123_decomposition(&tree, &f).unwrap();
        assert!((s.s3 - s.s3_alt).abs() <= 1e-9 * s.s3.max(1.0));
        let q = operators::quadratic_forms(&dyadic::analyze(&f), &tree).unwrap();
        assert!((s.total - q.dw_inv).abs() <= 1e-10 * s.total.max(1.0));
        assert!(s.total <= s.s1 + s.s2_bound + s.s3 + 1e-9);
    }

    #[test]
    fn conjugated_operator_adjoint_identity() {
        let w = generate(&WeightFamily::RandomMartingale { step: 0.7 }, 2, 4, 31).unwrap();
        let tree = AveragesTree::build(&w).unwrap();
        let sigma = MultiplierSymbol::random_signs(2, 4, 8);
        for kind in [OperatorKind::Shift, OperatorKind::Multiplier(&sigma)] {
            let resid = op_adjoint_residual(&tree, kind, 55).unwrap();
            assert!(resid <= 1e-12, "adjoint residual {resid:e}");
        }
    }

    #[test]
    fn op_norm_against_explicit_gram() {
        // Materialize G column by column and take lambda_max(G^T G) by
        // explicit transpose-multiply; no adjoint code involved.
        let w = generate(&WeightFamily::RandomMartingale { step: 0.6 }, 2, 3, 41).unwrap();
        let tree = AveragesTree::build(&w).unwrap();
        let op = ConjugatedOperator::new(&tree, OperatorKind::Shift);
        let n_in = op.n_in();
        let n_out = (1usize << op.out_depth) * tree.dim();
        let mut g = Matrix::zeros(n_out, n_in);
        let mut e = vec![0.0; n_in];
        for j in 0..n_in {
            e[j] = 1.0;
            let col = op.apply(&e).unwrap();
            e[j] = 0.0;
            for i in 0..n_out {
                g.set(i, j, col[i]);
            }
        }
        let explicit = matlin::op_norm(&g).unwrap();
        let fast = weighted_op_norm(&tree, OperatorKind::Shift, Method::Auto)
            .unwrap()
            .value();
        assert!(
            (explicit - fast).abs() <= 1e-8 * explicit,
            "explicit {explicit} vs {fast}"
        );
    }

    #[test]
    fn shift_norm_identity_weight() {
        let field = WeightField::constant(SymMatrix::identity(2), 3).unwrap();
        let tree = AveragesTree::build(&field).unwrap();
        let norm = weighted_op_norm(&tree, OperatorKind::Shift, Method::Auto).unwrap();
        let v = norm.value();
        assert!((v - 1.0).abs() <= 1e-8, "norm = {v}");
        if let (Some(p), Some(d)) = (norm.power, norm.dense) {
            assert!((p - d).abs() <= 1e-6 * d.max(1.0));
        }
    }

    #[test]
    fn multiplier_norm_scaled_identity() {
        let field = WeightField::constant(SymMatrix::identity(1), 3).unwrap();
        let tree = AveragesTree::build(&field).unwrap();
        let sigma = MultiplierSymbol::constant(1, 3, &Matrix::identity(1).scale(-3.0));
        let norm = weighted_op_norm(&tree, OperatorKind::Multiplier(&sigma), Method::Auto).unwrap();
        assert!((norm.value() - 3.0).abs() <= 1e-8);
    }

    #[test]
    fn multiplier_norm_necessity_lower_bound() {
        let w = generate(&WeightFamily::RandomMartingale { step: 0.8 }, 2, 3, 3).unwrap();
        let tree = AveragesTree::build(&w).unwrap();
        let sigma = MultiplierSymbol::random_signs(2, 3, 11);
        let norm = weighted_op_norm(&tree, OperatorKind::Multiplier(&sigma), Method::Auto)
            .unwrap()
            .value();
        let lower = multiplier_necessity_bound(&tree, &sigma).unwrap();
        assert!(norm >= lower * (1.0 - 1e-8), "norm {norm} lower {lower}");
    }

    #[test]
    fn carleson_trivial_cases() {
        let field = WeightField::constant(SymMatrix::identity(2), 3).unwrap();
        let tree = AveragesTree::build(&field).unwrap();
        let empty = CarlesonSequence::new(2);
        let (ce, ct) = carleson_constants(&empty, &tree).unwrap();
        assert_eq!(ce, 0.0);
        assert_eq!(ct, 0.0);

        // Single entry at the root with identity weight: both constants are
        // the top eigenvalue.
        let mut seq = CarlesonSequence::new(2);
        let a = SymMatrix::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        seq.insert(DyadicIndex::ROOT, a).unwrap();
        let (ce, ct) = carleson_constants(&seq, &tree).unwrap();
        assert!((ct - 3.0).abs() <= 1e-10, "c_test = {ct}");
        assert!((ce - 3.0).abs() <= 1e-8, "c_embed = {ce}");
    }

    #[test]
    fn testing_ratio_examples() {
        let field = WeightField::constant(SymMatrix::diag(&[2.0, 5.0]), 3).unwrap();
        let tree = AveragesTree::build(&field).unwrap();
        assert!(testing_ratio(&tree).unwrap() <= 1e-15);

        // Hand value for the two-leaf weight.
        let tree = scalar_weight(&[1.0, 4.0]);
        let r = testing_ratio(&tree).unwrap();
        let expect = (1.5 * 1.5 / 2.5) / ((25.0f64 / 16.0).powi(2) * 2.5);
        assert!((r - expect).abs() <= 1e-12, "ratio = {r}");
        assert!((r - 0.14745).abs() <= 1e-4);
    }

    #[test]
    fn full_report_invariants() {
        let w = generate(&WeightFamily::RandomMartingale { step: 0.6 }, 2, 4, 17).unwrap();
        let tree = AveragesTree::build(&w).unwrap();
        let report = BoundsReport::compute(&tree, "random_martingale", 17).unwrap();
        assert!(report.a2 >= 1.0 - 1e-9);
        assert!(report.c_up >= 1.0 - 1e-9);
        assert!(report.c_low >= 1.0 - 1e-9);
        for v in [
            report.shift_norm,
            report.tsigma_norm,
            report.tv_ratio,
            report.testing_ratio,
            report.carleson_ratio,
        ] {
            assert!(v.is_finite() && v >= 0.0);
        }
        assert!(report.b_w() >= report.c_w());
    }

    #[test]
    fn refinement_leaves_constants_unchanged() {
        let w = generate(&WeightFamily::RandomMartingale { step: 0.5 }, 2, 3, 21).unwrap();
        let tree = AveragesTree::build(&w).unwrap();
        let refined = AveragesTree::build(&w.refine(1)).unwrap();

        let a2 = weights::a2_characteristic(&tree).unwrap();
        let a2r = weights::a2_characteristic(&refined).unwrap();
        assert!((a2 - a2r).abs() <= 1e-10 * a2);

        let (cu, cl) = square_constants(&tree, false, Method::Auto).unwrap();
        let (cur, clr) = square_constants(&refined, false, Method::Auto).unwrap();
        assert!((cu - cur).abs() <= 1e-10 * cu, "{cu} vs refined {cur}");
        assert!((cl - clr).abs() <= 1e-10 * cl);

        let t = testing_ratio(&tree).unwrap();
        let tr = testing_ratio(&refined).unwrap();
        assert!((t - tr).abs() <= 1e-10 * t.max(1.0));
    }
}
