//! Matrix weights on the dyadic tree: cached interval averages with spectral
//! data, the A2 characteristic, Haar coefficients of the weight itself,
//! eigenvalue truncation, the weighted dyadic maximal function, and the
//! built-in weight families.
// Negated float guards are deliberate: NaN parameters must be rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]


use crate::dyadic::{self, AveragesField, DyadicIndex, VectorField};
use crate::error::{Error, Result};
use crate::matlin::{self, EigenDecomp, SymMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Piecewise-constant matrix weight: one symmetric PD matrix per leaf.
#[derive(Debug, Clone)]
pub struct WeightField {
    dim: usize,
    depth: u32,
    leaves: Vec<SymMatrix>,
}

impl WeightField {
    /// Validates leaf count and positive definiteness of every leaf.
    pub fn new(dim: usize, depth: u32, leaves: Vec<SymMatrix>) -> Result<Self> {
        let expected = 1usize << depth;
        if leaves.len() != expected {
            return Err(Error::DimMismatch {
                expected,
                got: leaves.len(),
            });
        }
        for m in &leaves {
            if m.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: m.dim(),
                });
            }
            if !matlin::is_pd(m)? {
                let eig = matlin::eig_sym(m)?;
                return Err(Error::NotPositiveDefinite {
                    lambda_min: eig.values[0],
                    lambda_max: eig.values[dim - 1],
                });
            }
        }
        Ok(WeightField { dim, depth, leaves })
    }

    pub fn constant(m: SymMatrix, depth: u32) -> Result<Self> {
        let dim = m.dim();
        WeightField::new(dim, depth, vec![m; 1usize << depth])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn depth(&self) -> u32 {
        self.depth
    }

    #[inline]
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    #[inline]
    pub fn leaf(&self, i: usize) -> &SymMatrix {
        &self.leaves[i]
    }

    pub fn leaves(&self) -> &[SymMatrix] {
        &self.leaves
    }

    /// Same weight as a function, one level finer (each leaf split in two).
    pub fn refine(&self, extra_levels: u32) -> WeightField {
        let mut leaves = Vec::with_capacity(self.leaves.len() << extra_levels);
        for m in &self.leaves {
            for _ in 0..(1usize << extra_levels) {
                leaves.push(m.clone());
            }
        }
        WeightField {
            dim: self.dim,
            depth: self.depth + extra_levels,
            leaves,
        }
    }

    /// Conjugates every leaf by a fixed matrix Q: W(x) -> Q^T W(x) Q.
    pub fn conjugate(&self, q: &crate::matlin::Matrix) -> Result<WeightField> {
        let qt = q.transpose();
        let leaves = self
            .leaves
            .iter()
            .map(|m| SymMatrix::from_matrix(&qt.matmul(&m.to_matrix()).matmul(q)))
            .collect();
        WeightField::new(self.dim, self.depth, leaves)
    }

    pub fn scale(&self, c: f64) -> Result<WeightField> {
        if c <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {c}"
            )));
        }
        WeightField::new(
            self.dim,
            self.depth,
            self.leaves.iter().map(|m| m.scale(c)).collect(),
        )
    }
}

/// Spectral cache of one tree interval.
#[derive(Debug, Clone)]
pub struct NodeData {
    avg: SymMatrix,
    avg_of_inv: SymMatrix,
    eig_avg: EigenDecomp,
    sqrt_avg: SymMatrix,
    invsqrt_avg: SymMatrix,
    inv_avg: SymMatrix,
    sqrt_avg_of_inv: SymMatrix,
}

/// Per-interval averages <W>_I and <W^{-1}>_I for every node of the tree,
/// together with cached eigendecompositions and square roots.
///
/// Internal averages satisfy the exact midpoint recursion
/// `<W>_I = (<W>_{I-} + <W>_{I+}) / 2`; leaf averages are the leaf matrices
/// themselves. The tree is immutable after construction.
#[derive(Debug, Clone)]
pub struct AveragesTree {
    dim: usize,
    depth: u32,
    nodes: Vec<NodeData>,
}

impl AveragesTree {
    pub fn build(w: &WeightField) -> Result<Self> {
        let dim = w.dim();
        let depth = w.depth();
        let count = dyadic::node_count(depth);
        let mut avg = vec![SymMatrix::zeros(dim); count];
        let mut avg_of_inv = vec![SymMatrix::zeros(dim); count];

        let leaf_base = dyadic::coeff_count(depth);
        for i in 0..w.leaf_count() {
            avg[leaf_base + i] = w.leaf(i).clone();
            avg_of_inv[leaf_base + i] = matlin::inv_spd(w.leaf(i))?;
        }
        for level in (0..depth).rev() {
            let base = dyadic::coeff_count(level);
            let child = dyadic::coeff_count(level + 1);
            for k in 0..(1usize << level) {
                avg[base + k] = avg[child + 2 * k].midpoint(&avg[child + 2 * k + 1]);
                avg_of_inv[base + k] =
                    avg_of_inv[child + 2 * k].midpoint(&avg_of_inv[child + 2 * k + 1]);
            }
        }

        let mut nodes = Vec::with_capacity(count);
        for (a, ai) in avg.into_iter().zip(avg_of_inv) {
            let eig_avg = matlin::eig_sym(&a)?;
            let sqrt_avg = matlin::sqrt_spd(&a)?;
            let invsqrt_avg = matlin::invsqrt_spd(&a)?;
            let inv_avg = matlin::inv_spd(&a)?;
            let sqrt_avg_of_inv = matlin::sqrt_spd(&ai)?;
            nodes.push(NodeData {
                avg: a,
                avg_of_inv: ai,
                eig_avg,
                sqrt_avg,
                invsqrt_avg,
                inv_avg,
                sqrt_avg_of_inv,
            });
        }
        Ok(AveragesTree { dim, depth, nodes })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn depth(&self) -> u32 {
        self.depth
    }

    #[inline]
    fn node(&self, idx: DyadicIndex) -> &NodeData {
        &self.nodes[idx.flat_offset()]
    }

    /// <W>_I.
    #[inline]
    pub fn avg(&self, idx: DyadicIndex) -> &SymMatrix {
        &self.node(idx).avg
    }

    /// <W^{-1}>_I.
    #[inline]
    pub fn avg_of_inv(&self, idx: DyadicIndex) -> &SymMatrix {
        &self.node(idx).avg_of_inv
    }

    /// <W>_I^{1/2}.
    #[inline]
    pub fn sqrt_avg(&self, idx: DyadicIndex) -> &SymMatrix {
        &self.node(idx).sqrt_avg
    }

    /// <W>_I^{-1/2}.
    #[inline]
    pub fn invsqrt_avg(&self, idx: DyadicIndex) -> &SymMatrix {
        &self.node(idx).invsqrt_avg
    }

    /// <W>_I^{-1}.
    #[inline]
    pub fn inv_avg(&self, idx: DyadicIndex) -> &SymMatrix {
        &self.node(idx).inv_avg
    }

    /// <W^{-1}>_I^{1/2}.
    #[inline]
    pub fn sqrt_avg_of_inv(&self, idx: DyadicIndex) -> &SymMatrix {
        &self.node(idx).sqrt_avg_of_inv
    }

    /// Eigendecomposition of <W>_I, ascending.
    #[inline]
    pub fn eig_avg(&self, idx: DyadicIndex) -> &EigenDecomp {
        &self.node(idx).eig_avg
    }

    #[inline]
    pub fn leaf_index(&self, leaf: usize) -> DyadicIndex {
        DyadicIndex {
            level: self.depth,
            position: leaf as u64,
        }
    }

    /// Pointwise W on leaf `i` (the leaf-level average is the leaf value).
    #[inline]
    pub fn leaf_weight(&self, i: usize) -> &SymMatrix {
        self.avg(self.leaf_index(i))
    }

    /// All internal (non-leaf) indices, level order.
    pub fn internal_indices(&self) -> impl Iterator<Item = DyadicIndex> {
        dyadic::internal_indices(self.depth)
    }

    /// All node indices including leaves, level order.
    pub fn all_indices(&self) -> impl Iterator<Item = DyadicIndex> {
        dyadic::internal_indices(self.depth + 1)
    }
}

/// Haar coefficient of the weight itself:
/// W_hat(I) = (|I|^{1/2} / 2) (<W>_{I+} - <W>_{I-}).
pub fn weight_haar_coeff(tree: &AveragesTree, idx: DyadicIndex) -> Result<SymMatrix> {
    if idx.level >= tree.depth() {
        return Err(Error::LeafInterval {
            level: idx.level,
            position: idx.position,
        });
    }
    let scale = 0.5 * dyadic::sqrt_measure(idx.level);
    Ok(tree
        .avg(idx.right())
        .sub(tree.avg(idx.left()))
        .scale(scale))
}

/// Matrix A2 characteristic:
/// sup over every tree interval (leaves included) of
/// ||<W>_I^{1/2} <W^{-1}>_I^{1/2}||^2.
pub fn a2_characteristic(tree: &AveragesTree) -> Result<f64> {
    let mut sup = 0.0f64;
    for idx in tree.all_indices() {
        let prod = tree.sqrt_avg(idx).mul_sym(tree.sqrt_avg_of_inv(idx));
        let norm = matlin::op_norm(&prod)?;
        sup = sup.max(norm * norm);
    }
    Ok(sup)
}

/// A2 ratio of a single interval (used for localized diagnostics).
pub fn a2_at(tree: &AveragesTree, idx: DyadicIndex) -> Result<f64> {
    let prod = tree.sqrt_avg(idx).mul_sym(tree.sqrt_avg_of_inv(idx));
    Ok(matlin::op_norm(&prod)?.powi(2))
}

/// Orthogonal projectors onto the eigenspaces of `m` with eigenvalues
/// at most 1/n, strictly between 1/n and n, and at least n.
pub fn clip_projectors(m: &SymMatrix, n: f64) -> Result<[SymMatrix; 3]> {
    let dim = m.dim();
    let eig = matlin::eig_sym(m)?;
    let mut parts = [
        SymMatrix::zeros(dim),
        SymMatrix::zeros(dim),
        SymMatrix::zeros(dim),
    ];
    for (k, &lambda) in eig.values.iter().enumerate() {
        let group = if lambda <= 1.0 / n {
            0
        } else if lambda < n {
            1
        } else {
            2
        };
        let q = eig.eigenvector(k);
        let p = &mut parts[group];
        for i in 0..dim {
            for j in i..dim {
                let v = p.get(i, j) + q[i] * q[j];
                p.set_sym(i, j, v);
            }
        }
    }
    Ok(parts)
}

/// Eigenvalue truncation of a weight:
/// W_n = (1/n) P_1 + P_2 W P_2 + n P_3 per leaf, where P_1, P_2, P_3 project
/// onto the eigenspaces with eigenvalues <= 1/n, in (1/n, n), and >= n.
/// The middle block conjugates the original matrix by its own spectral
/// projector, exactly as written.
pub fn truncate(w: &WeightField, n: f64) -> Result<WeightField> {
    if !(n > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "truncation level must exceed 1, got {n}"
        )));
    }
    let mut leaves = Vec::with_capacity(w.leaf_count());
    for leaf in w.leaves() {
        let eig = matlin::eig_sym(leaf)?;
        let untouched = eig
            .values
            .iter()
            .all(|&l| l > 1.0 / n && l < n);
        if untouched {
            leaves.push(leaf.clone());
            continue;
        }
        let [p1, p2, p3] = clip_projectors(leaf, n)?;
        let middle = SymMatrix::from_matrix(
            &p2.to_matrix()
                .matmul(&leaf.to_matrix())
                .matmul(&p2.to_matrix()),
        );
        leaves.push(p1.scale(1.0 / n).add(&middle).add(&p3.scale(n)));
    }
    WeightField::new(w.dim(), w.depth(), leaves)
}

/// Weighted dyadic maximal function at p = 2, restricted to tree intervals:
/// per leaf x, the sup over I containing x of
/// (1/|I|) Int_I ||W(x)^{1/2} W(y)^{-1/2} f(y)|| dy, with exact leaf
/// quadrature.
pub fn dyadic_maximal(f: &VectorField, tree: &AveragesTree) -> Result<Vec<f64>> {
    if f.dim() != tree.dim() {
        return Err(Error::DimMismatch {
            expected: tree.dim(),
            got: f.dim(),
        });
    }
    if f.depth() != tree.depth() {
        return Err(Error::DepthTooSmall {
            needed: tree.depth() as usize,
            got: f.depth() as usize,
        });
    }
    let n_leaves = f.leaf_count();
    let depth = tree.depth();
    // v_y = W(y)^{-1/2} f(y) once per leaf.
    let v: Vec<Vec<f64>> = (0..n_leaves)
        .map(|y| {
            tree.invsqrt_avg(tree.leaf_index(y))
                .matvec(f.leaf(y))
        })
        .collect();
    let mut out = vec![0.0; n_leaves];
    let mut prefix = vec![0.0; n_leaves + 1];
    for x in 0..n_leaves {
        let sx = tree.sqrt_avg(tree.leaf_index(x));
        for y in 0..n_leaves {
            let z = sx.matvec(&v[y]);
            let norm = z.iter().map(|t| t * t).sum::<f64>().sqrt();
            prefix[y + 1] = prefix[y] + norm;
        }
        let mut best = 0.0f64;
        for level in 0..=depth {
            let width = 1usize << (depth - level);
            let start = (x / width) * width;
            let avg = (prefix[start + width] - prefix[start]) / width as f64;
            best = best.max(avg);
        }
        out[x] = best;
    }
    Ok(out)
}

/// Built-in weight families used by tests and sweeps.
#[derive(Debug, Clone)]
pub enum WeightFamily {
    /// Every leaf is the same PD matrix.
    Constant(SymMatrix),
    /// Scalar two-value weight: t on [0, 1/2), 1/t on [1/2, 1).
    TwoValue { t: f64 },
    /// d = 2 weight R(theta_j) diag(t, 1/t) R(theta_j)^T with the eigenframe
    /// rotating by theta_j = pi j / 2^depth across leaves.
    Rotation { t: f64 },
    /// Log-matrix random walk down the tree with symmetric Gaussian
    /// increments of Frobenius size `step`.
    RandomMartingale { step: f64 },
}

impl WeightFamily {
    pub fn parse(name: &str, param: f64) -> Result<WeightFamily> {
        match name {
            "constant" => Ok(WeightFamily::Constant(SymMatrix::identity(1).scale(param))),
            "two_value" => Ok(WeightFamily::TwoValue { t: param }),
            "rotation" => Ok(WeightFamily::Rotation { t: param }),
            "random_martingale" => Ok(WeightFamily::RandomMartingale { step: param }),
            other => Err(Error::InvalidParameter(format!(
                "unknown family '{other}'"
            ))),
        }
    }
}

/// Generation statistics; `rejections` counts leaves re-drawn because they
/// violated the PD floor.
#[derive(Debug, Clone, Copy, Default)]
pub struct GenerateStats {
    pub rejections: u64,
}

pub fn generate(family: &WeightFamily, dim: usize, depth: u32, seed: u64) -> Result<WeightField> {
    generate_with_stats(family, dim, depth, seed).map(|(w, _)| w)
}

pub fn generate_with_stats(
    family: &WeightFamily,
    dim: usize,
    depth: u32,
    seed: u64,
) -> Result<(WeightField, GenerateStats)> {
    if depth < 1 {
        return Err(Error::InvalidParameter(
            "depth must be at least 1".to_string(),
        ));
    }
    let mut stats = GenerateStats::default();
    let w = match family {
        WeightFamily::Constant(m) => {
            if m.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: m.dim(),
                });
            }
            WeightField::constant(m.clone(), depth)?
        }
        WeightFamily::TwoValue { t } => {
            if dim != 1 {
                return Err(Error::InvalidParameter(
                    "two_value weights are scalar (dim = 1)".to_string(),
                ));
            }
            if !(*t > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "two_value parameter must be positive, got {t}"
                )));
            }
            let half = 1usize << (depth - 1);
            let mut leaves = Vec::with_capacity(2 * half);
            for _ in 0..half {
                leaves.push(SymMatrix::diag(&[*t]));
            }
            for _ in 0..half {
                leaves.push(SymMatrix::diag(&[1.0 / *t]));
            }
            WeightField::new(1, depth, leaves)?
        }
        WeightFamily::Rotation { t } => {
            if dim != 2 {
                return Err(Error::InvalidParameter(
                    "rotation weights have dim = 2".to_string(),
                ));
            }
            if !(*t > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "rotation parameter must be positive, got {t}"
                )));
            }
            let n = 1usize << depth;
            let leaves = (0..n)
                .map(|j| {
                    let theta = std::f64::consts::PI * j as f64 / n as f64;
                    let (s, c) = theta.sin_cos();
                    // R diag(t, 1/t) R^T.
                    let (a, b) = (*t, 1.0 / *t);
                    SymMatrix::new(
                        2,
                        vec![
                            a * c * c + b * s * s,
                            (a - b) * s * c,
                            (a - b) * s * c,
                            a * s * s + b * c * c,
                        ],
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            WeightField::new(2, depth, leaves)?
        }
        WeightFamily::RandomMartingale { step } => {
            if !(*step >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "martingale step must be nonnegative, got {step}"
                )));
            }
            let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            // Walk the log-matrices down to the parents of the leaves.
            let mut logs = vec![SymMatrix::zeros(dim)];
            for level in 0..depth.saturating_sub(1) {
                let mut next = Vec::with_capacity(2 << level);
                for parent in &logs {
                    for _child in 0..2 {
                        let inc = gaussian_symmetric(&mut rng, dim, *step);
                        next.push(parent.add(&inc));
                    }
                }
                logs = next;
            }
            // Final edge: draw each leaf, re-drawing its last increment while
            // the exponential violates the PD floor.
            let mut leaves = Vec::with_capacity(2 * logs.len());
            for (i, parent) in logs.iter().enumerate() {
                for child in 0..2 {
                    let mut attempts = 0;
                    let leaf = loop {
                        let inc = gaussian_symmetric(&mut rng, dim, *step);
                        let candidate =
                            matlin::eig_sym(&parent.add(&inc))?.map_spectrum(f64::exp);
                        // Overflowing exponentials count as floor violations.
                        let accept = candidate.data().iter().all(|x| x.is_finite())
                            && matlin::is_pd(&candidate).unwrap_or(false);
                        if accept {
                            break candidate;
                        }
                        stats.rejections += 1;
                        attempts += 1;
                        if attempts > 100 {
                            return Err(Error::InvalidParameter(format!(
                                "martingale leaf {} rejected more than 100 times; reduce step {step}",
                                2 * i + child
                            )));
                        }
                    };
                    leaves.push(leaf);
                }
            }
            WeightField::new(dim, depth, leaves)?
        }
    };
    Ok((w, stats))
}

/// Standard normal via Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Symmetric matrix with iid N(0,1) entries on and above the diagonal,
/// scaled to Frobenius norm `size`.
fn gaussian_symmetric(rng: &mut ChaCha8Rng, dim: usize, size: f64) -> SymMatrix {
    loop {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set_sym(i, j, normal(rng));
            }
        }
        let frob = m.frob();
        if frob > 0.0 {
            return m.scale(size / frob);
        }
    }
}

/// Average of the Haar-coefficient recursion applied to an arbitrary vector
/// field under the weight square root, <W^{1/2} f>_I per node: used by the
/// embedding sum.
pub fn sqrt_weighted_averages(tree: &AveragesTree, f: &VectorField) -> Result<AveragesField> {
    if f.depth() != tree.depth() || f.dim() != tree.dim() {
        return Err(Error::DimMismatch {
            expected: tree.dim(),
            got: f.dim(),
        });
    }
    let mut g = VectorField::zeros(f.dim(), f.depth());
    for i in 0..f.leaf_count() {
        let gi = tree.sqrt_avg(tree.leaf_index(i)).matvec(f.leaf(i));
        g.leaf_mut(i).copy_from_slice(&gi);
    }
    Ok(dyadic::averages(&g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn scalar_tree(leaves: &[f64]) -> AveragesTree {
        let depth = leaves.len().trailing_zeros();
        let field = WeightField::new(
            1,
            depth,
            leaves.iter().map(|&v| SymMatrix::diag(&[v])).collect(),
        )
        .unwrap();
        AveragesTree::build(&field).unwrap()
    }

    #[test]
    fn a2_examples() {
        let constant = WeightField::constant(
            SymMatrix::new(2, vec![3.0, 1.0, 1.0, 2.0]).unwrap(),
            3,
        )
        .unwrap();
        let a2 = a2_characteristic(&AveragesTree::build(&constant).unwrap()).unwrap();
        assert!((a2 - 1.0).abs() <= 1e-10);

        let a2 = a2_characteristic(&scalar_tree(&[1.0, 4.0])).unwrap();
        assert!((a2 - 1.5625).abs() <= 1e-12);

        // Max attained on the right half, not at the root (root gives 7/3).
        let tree = scalar_tree(&[1.0, 1.0, 1.0, 9.0]);
        let a2 = a2_characteristic(&tree).unwrap();
        assert!((a2 - 25.0 / 9.0).abs() <= 1e-12);
        let at_right = a2_at(&tree, DyadicIndex::new(1, 1).unwrap()).unwrap();
        assert!((at_right - 25.0 / 9.0).abs() <= 1e-12);
        let at_root = a2_at(&tree, DyadicIndex::ROOT).unwrap();
        assert!((at_root - 7.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn weight_haar_coeff_examples() {
        let tree = scalar_tree(&[1.0, 4.0]);
        let c = weight_haar_coeff(&tree, DyadicIndex::ROOT).unwrap();
        assert!((c.get(0, 0) - 1.5).abs() <= 1e-14);

        let tree = scalar_tree(&[1.0, 1.0, 1.0, 9.0]);
        let c = weight_haar_coeff(&tree, DyadicIndex::new(1, 1).unwrap()).unwrap();
        assert!((c.get(0, 0) - 2.0 * std::f64::consts::SQRT_2).abs() <= 1e-12);

        assert!(matches!(
            weight_haar_coeff(&tree, DyadicIndex::new(2, 0).unwrap()),
            Err(Error::LeafInterval { .. })
        ));
    }

    #[test]
    fn truncate_examples() {
        // Both eigenvalues clipped: axis projectors.
        let w = WeightField::constant(SymMatrix::diag(&[0.01, 5.0]), 1).unwrap();
        let t = truncate(&w, 2.0).unwrap();
        assert!(t.leaf(0).sub(&SymMatrix::diag(&[0.5, 2.0])).frob() <= 1e-12);

        // Interior spectrum: unchanged exactly.
        let w = WeightField::constant(
            SymMatrix::new(2, vec![1.5, 0.3, 0.3, 1.2]).unwrap(),
            2,
        )
        .unwrap();
        let t = truncate(&w, 4.0).unwrap();
        for (a, b) in w.leaves().iter().zip(t.leaves()) {
            assert_eq!(a.data(), b.data());
        }

        assert!(truncate(&w, 1.0).is_err());
        assert!(truncate(&w, 0.3).is_err());
    }

    #[test]
    fn maximal_examples() {
        // Identity weight, two leaves, f = (1, 0): averages over the leaf
        // and the root.
        let id = WeightField::constant(SymMatrix::identity(1), 1).unwrap();
        let tree = AveragesTree::build(&id).unwrap();
        let f = VectorField::new(1, 1, vec![1.0, 0.0]).unwrap();
        let out = dyadic_maximal(&f, &tree).unwrap();
        assert_eq!(out, vec![1.0, 0.5]);

        // Scalar factorization: w(x)^{1/2} max <w^{-1/2} |f|>_I.
        let leaves = [0.5, 2.0, 1.0, 4.0];
        let tree = scalar_tree(&leaves);
        let f = VectorField::constant(&[1.0], 2);
        let out = dyadic_maximal(&f, &tree).unwrap();
        let inv_sqrt: Vec<f64> = leaves.iter().map(|w| 1.0 / w.sqrt()).collect();
        for (x, &got) in out.iter().enumerate() {
            let mut best = 0.0f64;
            for (level, width) in [(2u32, 1usize), (1, 2), (0, 4)] {
                let _ = level;
                let start = (x / width) * width;
                let avg: f64 =
                    inv_sqrt[start..start + width].iter().sum::<f64>() / width as f64;
                best = best.max(avg);
            }
            let expect = leaves[x].sqrt() * best;
            assert!((got - expect).abs() <= 1e-13 * expect, "{got} vs {expect}");
        }
    }

    #[test]
    fn generate_examples() {
        // two_value(1) is the constant unit weight.
        let w = generate(&WeightFamily::TwoValue { t: 1.0 }, 1, 3, 0).unwrap();
        let a2 = a2_characteristic(&AveragesTree::build(&w).unwrap()).unwrap();
        assert!((a2 - 1.0).abs() <= 1e-12);

        // two_value(4): <w> = <1/w> = 17/8.
        let w = generate(&WeightFamily::TwoValue { t: 4.0 }, 1, 1, 0).unwrap();
        let a2 = a2_characteristic(&AveragesTree::build(&w).unwrap()).unwrap();
        assert!((a2 - 4.515625).abs() <= 1e-12);

        // rotation(1) is the identity weight for any depth.
        let w = generate(&WeightFamily::Rotation { t: 1.0 }, 2, 4, 0).unwrap();
        for leaf in w.leaves() {
            assert!(leaf.sub(&SymMatrix::identity(2)).frob() <= 1e-12);
        }

        // Deterministic per seed.
        let a = generate(&WeightFamily::RandomMartingale { step: 0.5 }, 2, 3, 9).unwrap();
        let b = generate(&WeightFamily::RandomMartingale { step: 0.5 }, 2, 3, 9).unwrap();
        for (x, y) in a.leaves().iter().zip(b.leaves()) {
            assert_eq!(x.data(), y.data());
        }
    }

    #[test]
    fn generate_rejects_bad_parameters() {
        assert!(generate(&WeightFamily::TwoValue { t: 0.0 }, 1, 3, 0).is_err());
        assert!(generate(&WeightFamily::TwoValue { t: -2.0 }, 1, 3, 0).is_err());
        assert!(generate(&WeightFamily::TwoValue { t: 2.0 }, 1, 0, 0).is_err());
        assert!(generate(&WeightFamily::TwoValue { t: 2.0 }, 2, 3, 0).is_err());
        assert!(generate(&WeightFamily::Rotation { t: 2.0 }, 1, 3, 0).is_err());
        // A step so large that every exponential overflows gets rejected
        // loudly after the redraw budget.
        assert!(generate(&WeightFamily::RandomMartingale { step: 5000.0 }, 2, 2, 0).is_err());
    }

    #[test]
    fn martingale_rejection_logging() {
        // Large but not hopeless steps: rejections happen and are counted.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut seen = 0u64;
        for _ in 0..20 {
            let seed = rng.random::<u64>();
            if let Ok((_, stats)) = generate_with_stats(
                &WeightFamily::RandomMartingale { step: 40.0 },
                2,
                2,
                seed,
            ) {
                seen += stats.rejections;
            }
        }
        assert!(seen > 0, "expected at least one logged rejection");
    }

    #[test]
    fn kernel_limit_dimension() {
        // d = 16 is the largest supported block size; the whole pipeline
        // stays within tolerance there.
        let w = generate(&WeightFamily::RandomMartingale { step: 0.4 }, 16, 3, 5).unwrap();
        let tree = AveragesTree::build(&w).unwrap();
        let a2 = a2_characteristic(&tree).unwrap();
        assert!(a2 >= 1.0 - 1e-9);
        let m = w.leaf(0);
        let eig = matlin::eig_sym(m).unwrap();
        let resid = eig.reconstruct().sub(m).frob() / m.frob().max(1.0);
        assert!(resid <= 1e-12, "eig residual {resid:e} at d = 16");
        let (cu, cl) =
            crate::bounds::square_constants(&tree, false, crate::bounds::Method::Auto).unwrap();
        assert!(cu >= 1.0 - 1e-9 && cl >= 1.0 - 1e-9);
    }

    #[test]
    fn depth_zero_square_constants_rejected() {
        let w = WeightField::constant(SymMatrix::identity(2), 0).unwrap();
        let tree = AveragesTree::build(&w).unwrap();
        assert!(matches!(
            crate::bounds::square_constants(&tree, false, crate::bounds::Method::Auto),
            Err(Error::InvalidParameter(_))
        ));
        // The full-space variant is well defined even at depth 0.
        let (cu, cl) =
            crate::bounds::square_constants(&tree, true, crate::bounds::Method::Auto).unwrap();
        assert!((cu - 1.0).abs() <= 1e-10 && (cl - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn leaf_validation() {
        assert!(WeightField::new(1, 1, vec![SymMatrix::diag(&[1.0])]).is_err());
        assert!(matches!(
            WeightField::new(
                1,
                1,
                vec![SymMatrix::diag(&[1.0]), SymMatrix::diag(&[0.0])]
            ),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        // Truncation trace inequality on random 2x2 weights at every node.
        #[test]
        fn truncate_trace_inequality(seed in 0u64..500, n in 1.5f64..6.0) {
            let w = generate(&WeightFamily::RandomMartingale { step: 0.8 }, 2, 3, seed).unwrap();
            let tree = AveragesTree::build(&w).unwrap();
            let truncated = truncate(&w, n).unwrap();
            let tree_n = AveragesTree::build(&truncated).unwrap();
            let trace = |a: &SymMatrix, b: &SymMatrix| -> f64 {
                let p = a.mul_sym(b);
                (0..a.dim()).map(|i| p.get(i, i)).sum()
            };
            for idx in tree.all_indices() {
                let lhs = trace(tree_n.avg(idx), tree_n.avg_of_inv(idx));
                let rhs = 4.0 + trace(tree.avg(idx), tree.avg_of_inv(idx));
                prop_assert!(lhs <= rhs + 1e-9, "{lhs} vs {rhs}");
            }
        }

        // The inverse of the truncated weight matches the projector formula.
        #[test]
        fn truncate_inverse_formula(seed in 0u64..500) {
            let n = 2.5;
            let w = generate(&WeightFamily::RandomMartingale { step: 1.0 }, 2, 2, seed).unwrap();
            let truncated = truncate(&w, n).unwrap();
            for i in 0..w.leaf_count() {
                let [p1, p2, p3] = clip_projectors(w.leaf(i), n).unwrap();
                let w_inv = matlin::inv_spd(w.leaf(i)).unwrap();
                let middle = SymMatrix::from_matrix(
                    &p2.to_matrix().matmul(&w_inv.to_matrix()).matmul(&p2.to_matrix()),
                );
                let expect = p1.scale(n).add(&middle).add(&p3.scale(1.0 / n));
                let actual = matlin::inv_spd(truncated.leaf(i)).unwrap();
                let dev = expect.sub(&actual).frob();
                prop_assert!(dev <= 1e-9 * actual.frob().max(1.0), "deviation {dev:e}");
            }
        }
    }
}
