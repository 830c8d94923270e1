//! Finite dyadic tree over [0, 1): interval indexing, Haar analysis and
//! synthesis of vector fields, bottom-up averages.
//!
//! Intervals are addressed by (level, position): level j splits [0, 1) into
//! 2^j pieces and position k selects [k 2^{-j}, (k+1) 2^{-j}). The Haar
//! function of an interval is -|I|^{-1/2} on the left half and +|I|^{-1/2} on
//! the right half, L2-normalized with mean zero. Leaf quadrature is exact for
//! piecewise-constant data, so every identity below is a pure floating-point
//! statement.

use crate::error::{Error, Result};

/// Interval I = [k 2^{-j}, (k+1) 2^{-j}) in the dyadic tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicIndex {
    pub level: u32,
    pub position: u64,
}

impl DyadicIndex {
    pub const ROOT: DyadicIndex = DyadicIndex {
        level: 0,
        position: 0,
    };

    pub fn new(level: u32, position: u64) -> Result<Self> {
        if position >= 1u64 << level {
            return Err(Error::InvalidParameter(format!(
                "position {position} out of range at level {level}"
            )));
        }
        Ok(DyadicIndex { level, position })
    }

    /// Left half.
    pub fn left(self) -> DyadicIndex {
        DyadicIndex {
            level: self.level + 1,
            position: 2 * self.position,
        }
    }

    /// Right half.
    pub fn right(self) -> DyadicIndex {
        DyadicIndex {
            level: self.level + 1,
            position: 2 * self.position + 1,
        }
    }

    pub fn parent(self) -> Option<DyadicIndex> {
        if self.level == 0 {
            None
        } else {
            Some(DyadicIndex {
                level: self.level - 1,
                position: self.position / 2,
            })
        }
    }

    /// |I| = 2^{-level}.
    pub fn measure(self) -> f64 {
        (2.0f64).powi(-(self.level as i32))
    }

    /// Offset of this node in a flat level-order array.
    #[inline]
    pub fn flat_offset(self) -> usize {
        ((1u64 << self.level) - 1 + self.position) as usize
    }

    /// Inverse of `flat_offset`.
    pub fn from_flat(offset: usize) -> DyadicIndex {
        let o = offset as u64 + 1;
        let level = 63 - o.leading_zeros();
        DyadicIndex {
            level,
            position: o - (1u64 << level),
        }
    }

    /// True if `self` contains the leaf (depth, leaf_pos).
    pub fn contains_leaf(self, depth: u32, leaf_pos: u64) -> bool {
        self.level <= depth && (leaf_pos >> (depth - self.level)) == self.position
    }

    /// Range of leaf positions at `depth` covered by this interval.
    pub fn leaf_range(self, depth: u32) -> std::ops::Range<u64> {
        let shift = depth - self.level;
        (self.position << shift)..((self.position + 1) << shift)
    }
}

/// Number of nodes in levels 0..=depth.
pub fn node_count(depth: u32) -> usize {
    ((1u64 << (depth + 1)) - 1) as usize
}

/// Number of nodes in levels 0..levels (the coefficient-carrying nodes of a
/// spectrum with `levels` coefficient levels).
pub fn coeff_count(levels: u32) -> usize {
    ((1u64 << levels) - 1) as usize
}

/// All indices of levels 0..levels in level order.
pub fn internal_indices(levels: u32) -> impl Iterator<Item = DyadicIndex> {
    (0..coeff_count(levels)).map(DyadicIndex::from_flat)
}

/// Piecewise-constant R^d-valued function at leaf resolution 2^{-depth}.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    dim: usize,
    depth: u32,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(dim: usize, depth: u32, values: Vec<f64>) -> Result<Self> {
        let leaves = 1usize << depth;
        if values.len() != leaves * dim {
            return Err(Error::DimMismatch {
                expected: leaves * dim,
                got: values.len(),
            });
        }
        if !values.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("vector field values"));
        }
        Ok(VectorField { dim, depth, values })
    }

    pub fn zeros(dim: usize, depth: u32) -> Self {
        VectorField {
            dim,
            depth,
            values: vec![0.0; (1usize << depth) * dim],
        }
    }

    pub fn constant(v: &[f64], depth: u32) -> Self {
        let dim = v.len();
        let mut values = Vec::with_capacity((1usize << depth) * dim);
        for _ in 0..(1usize << depth) {
            values.extend_from_slice(v);
        }
        VectorField { dim, depth, values }
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
        1usize << self.depth
    }

    #[inline]
    pub fn leaf(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn leaf_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// ||f||^2 in L2: 2^{-N} sum of squared leaf norms (exact quadrature).
    pub fn l2_norm_sq(&self) -> f64 {
        let h = 1.0 / self.leaf_count() as f64;
        h * self.values.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn axpy(&mut self, alpha: f64, other: &VectorField) {
        assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in self.values.iter_mut() {
            *a *= alpha;
        }
    }

    /// Splits every leaf in two, leaving the function unchanged.
    pub fn refine(&self, extra_levels: u32) -> VectorField {
        let mut values = Vec::with_capacity(self.values.len() << extra_levels);
        for i in 0..self.leaf_count() {
            for _ in 0..(1usize << extra_levels) {
                values.extend_from_slice(self.leaf(i));
            }
        }
        VectorField {
            dim: self.dim,
            depth: self.depth + extra_levels,
            values,
        }
    }
}

/// Mean vector plus Haar coefficients of a field analyzed at depth `levels`:
/// coefficients live on the internal nodes, levels 0..levels.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarSpectrum {
    dim: usize,
    levels: u32,
    mean: Vec<f64>,
    coeffs: Vec<f64>,
}

impl HaarSpectrum {
    pub fn zeros(dim: usize, levels: u32) -> Self {
        HaarSpectrum {
            dim,
            levels,
            mean: vec![0.0; dim],
            coeffs: vec![0.0; coeff_count(levels) * dim],
        }
    }

    pub fn from_parts(dim: usize, levels: u32, mean: Vec<f64>, coeffs: Vec<f64>) -> Result<Self> {
        if mean.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: mean.len(),
            });
        }
        if coeffs.len() != coeff_count(levels) * dim {
            return Err(Error::DimMismatch {
                expected: coeff_count(levels) * dim,
                got: coeffs.len(),
            });
        }
        Ok(HaarSpectrum {
            dim,
            levels,
            mean,
            coeffs,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of coefficient levels; the deepest coefficient sits at
    /// `levels - 1` and needs leaves at depth `levels` to resolve.
    #[inline]
    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn mean_mut(&mut self) -> &mut [f64] {
        &mut self.mean
    }

    #[inline]
    pub fn coeff(&self, idx: DyadicIndex) -> &[f64] {
        let o = idx.flat_offset() * self.dim;
        &self.coeffs[o..o + self.dim]
    }

    #[inline]
    pub fn coeff_mut(&mut self, idx: DyadicIndex) -> &mut [f64] {
        let o = idx.flat_offset() * self.dim;
        &mut self.coeffs[o..o + self.dim]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Indices carrying coefficients, level order.
    pub fn indices(&self) -> impl Iterator<Item = DyadicIndex> {
        internal_indices(self.levels)
    }

    /// ||mean||^2 + sum of squared coefficient norms. By Parseval this equals
    /// the L2 norm squared of the synthesized field.
    pub fn energy(&self) -> f64 {
        self.mean.iter().map(|x| x * x).sum::<f64>()
            + self.coeffs.iter().map(|x| x * x).sum::<f64>()
    }
}

/// Per-node vector averages of a field, levels 0..=depth.
#[derive(Debug, Clone)]
pub struct AveragesField {
    dim: usize,
    depth: u32,
    data: Vec<f64>,
}

impl AveragesField {
    #[inline]
    pub fn node(&self, idx: DyadicIndex) -> &[f64] {
        let o = idx.flat_offset() * self.dim;
        &self.data[o..o + self.dim]
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Bottom-up averages over every tree interval; exact midpoint recursion
/// `<f>_I = (<f>_{I-} + <f>_{I+}) / 2`.
pub fn averages(f: &VectorField) -> AveragesField {
    let dim = f.dim();
    let depth = f.depth();
    let mut data = vec![0.0; node_count(depth) * dim];
    let leaf_base = coeff_count(depth);
    for i in 0..f.leaf_count() {
        let o = (leaf_base + i) * dim;
        data[o..o + dim].copy_from_slice(f.leaf(i));
    }
    for level in (0..depth).rev() {
        let base = coeff_count(level);
        let child_base = coeff_count(level + 1);
        for k in 0..(1usize << level) {
            for c in 0..dim {
                let l = data[(child_base + 2 * k) * dim + c];
                let r = data[(child_base + 2 * k + 1) * dim + c];
                data[(base + k) * dim + c] = 0.5 * (l + r);
            }
        }
    }
    AveragesField { dim, depth, data }
}

/// Haar analysis: mean plus coefficients over all internal nodes,
/// f_hat(I) = (|I|^{1/2} / 2) (<f>_{I+} - <f>_{I-}).
pub fn analyze(f: &VectorField) -> HaarSpectrum {
    let dim = f.dim();
    let levels = f.depth();
    let avgs = averages(f);
    let mut coeffs = vec![0.0; coeff_count(levels) * dim];
    for idx in internal_indices(levels) {
        let scale = 0.5 * sqrt_measure(idx.level);
        let l = avgs.node(idx.left());
        let r = avgs.node(idx.right());
        let o = idx.flat_offset() * dim;
        for c in 0..dim {
            coeffs[o + c] = scale * (r[c] - l[c]);
        }
    }
    HaarSpectrum {
        dim,
        levels,
        mean: avgs.node(DyadicIndex::ROOT).to_vec(),
        coeffs,
    }
}

/// |I|^{1/2} = 2^{-level/2}.
#[inline]
pub fn sqrt_measure(level: u32) -> f64 {
    (2.0f64).powi(-(level as i32)).sqrt()
}

/// Haar synthesis at leaf resolution `depth >= levels`:
/// f(x) = mean + sum f_hat(I) h_I(x) evaluated per leaf.
pub fn synthesize(s: &HaarSpectrum, depth: u32) -> Result<VectorField> {
    if depth < s.levels {
        return Err(Error::DepthTooSmall {
            needed: s.levels as usize,
            got: depth as usize,
        });
    }
    let dim = s.dim;
    // Walk down level by level: the value on a child node is the parent value
    // plus the parent coefficient times h_I at that child.
    let mut acc = s.mean.clone();
    for level in 0..depth {
        let mut next = vec![0.0; (1usize << (level + 1)) * dim];
        for k in 0..(1usize << level) {
            let parent = &acc[k * dim..(k + 1) * dim];
            let (lo, ro) = ((2 * k) * dim, (2 * k + 1) * dim);
            if level < s.levels {
                let idx = DyadicIndex {
                    level,
                    position: k as u64,
                };
                let h = 1.0 / sqrt_measure(level);
                let coeff = s.coeff(idx);
                for c in 0..dim {
                    next[lo + c] = parent[c] - coeff[c] * h;
                    next[ro + c] = parent[c] + coeff[c] * h;
                }
            } else {
                next[lo..lo + dim].copy_from_slice(parent);
                next[ro..ro + dim].copy_from_slice(parent);
            }
        }
        acc = next;
    }
    VectorField::new(dim, depth, acc)
}

/// Leaf values of h_I at `depth`: -|I|^{-1/2} on the left half, +|I|^{-1/2}
/// on the right, 0 outside.
pub fn haar_leaf_values(idx: DyadicIndex, depth: u32) -> Vec<f64> {
    let mut values = vec![0.0; 1usize << depth];
    let h = 1.0 / sqrt_measure(idx.level);
    for pos in idx.left().leaf_range(depth) {
        values[pos as usize] = -h;
    }
    for pos in idx.right().leaf_range(depth) {
        values[pos as usize] = h;
    }
    values
}
