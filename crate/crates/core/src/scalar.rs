//! Independent scalar (d = 1) reference path.
//!
//! Everything here works on plain `f64` slices with its own arithmetic: no
//! `SymMatrix`, no shared kernel, and a classical (largest-pivot) Jacobi
//! eigensolver instead of the cyclic one. The matrix pipeline at d = 1 is
//! cross-checked against these routines to 1e-12, so keep this module free
//! of imports from `matlin`, `weights`, `operators`, and `bounds`.

/// Flat level-order node array (levels 0..=depth) of bottom-up averages.
pub fn node_averages(leaves: &[f64]) -> Vec<f64> {
    let n = leaves.len();
    let depth = n.trailing_zeros();
    let total = 2 * n - 1;
    let mut nodes = vec![0.0; total];
    nodes[total - n..].copy_from_slice(leaves);
    for level in (0..depth).rev() {
        let base = (1usize << level) - 1;
        let child = (1usize << (level + 1)) - 1;
        for k in 0..(1usize << level) {
            nodes[base + k] = 0.5 * (nodes[child + 2 * k] + nodes[child + 2 * k + 1]);
        }
    }
    nodes
}

/// Haar analysis of a scalar leaf vector: (mean, coefficients on internal
/// nodes in level order).
pub fn analyze(leaves: &[f64]) -> (f64, Vec<f64>) {
    let n = leaves.len();
    let depth = n.trailing_zeros();
    let nodes = node_averages(leaves);
    let mut coeffs = vec![0.0; n - 1];
    for level in 0..depth {
        let base = (1usize << level) - 1;
        let child = (1usize << (level + 1)) - 1;
        let scale = 0.5 * (2.0f64).powi(-(level as i32)).sqrt();
        for k in 0..(1usize << level) {
            coeffs[base + k] = scale * (nodes[child + 2 * k + 1] - nodes[child + 2 * k]);
        }
    }
    (nodes[0], coeffs)
}

/// Haar synthesis of (mean, coefficients) at leaf resolution `depth`.
pub fn synthesize(mean: f64, coeffs: &[f64], depth: u32) -> Vec<f64> {
    let mut acc = vec![mean];
    let coeff_levels = (coeffs.len() + 1).trailing_zeros();
    for level in 0..depth {
        let mut next = vec![0.0; 2 << level];
        for k in 0..(1usize << level) {
            if level < coeff_levels {
                let h = (2.0f64).powi(level as i32).sqrt();
                let c = coeffs[(1usize << level) - 1 + k];
                next[2 * k] = acc[k] - c * h;
                next[2 * k + 1] = acc[k] + c * h;
            } else {
                next[2 * k] = acc[k];
                next[2 * k + 1] = acc[k];
            }
        }
        acc = next;
    }
    acc
}

/// Scalar A2 characteristic: max over every node of <w>_I <w^{-1}>_I.
pub fn a2(w: &[f64]) -> f64 {
    let avg_w = node_averages(w);
    let inv: Vec<f64> = w.iter().map(|x| 1.0 / x).collect();
    let avg_inv = node_averages(&inv);
    avg_w
        .iter()
        .zip(&avg_inv)
        .map(|(a, b)| a * b)
        .fold(f64::MIN, f64::max)
}

/// sum over internal I of <w>_I f_hat(I)^2.
pub fn square_norm_sq(w: &[f64], f: &[f64]) -> f64 {
    let avg_w = node_averages(w);
    let (_, coeffs) = analyze(f);
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| avg_w[i] * c * c)
        .sum()
}

/// ||f||^2 in L2(w).
pub fn weighted_norm_sq(w: &[f64], f: &[f64]) -> f64 {
    let h = 1.0 / w.len() as f64;
    w.iter().zip(f).map(|(wi, fi)| h * wi * fi * fi).sum()
}

/// Classical Jacobi on a dense symmetric array: rotate the largest
/// off-diagonal pivot until it is negligible. Returns eigenvalues unsorted.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    if n == 1 {
        return vec![a[0][0]];
    }
    let scale: f64 = a
        .iter()
        .flat_map(|row| row.iter().map(|x| x * x))
        .sum::<f64>()
        .sqrt();
    let tol = 1e-15 * scale.max(1e-300);
    for _ in 0..(40 * n * n) {
        let mut p = 0;
        let mut q = 1;
        let mut biggest = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                if a[i][j].abs() > biggest {
                    biggest = a[i][j].abs();
                    p = i;
                    q = j;
                }
            }
        }
        if biggest <= tol {
            break;
        }
        let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        let t = if theta >= 0.0 {
            1.0 / (theta + (1.0 + theta * theta).sqrt())
        } else {
            -1.0 / (-theta + (1.0 + theta * theta).sqrt())
        };
        let c = 1.0 / (1.0 + t * t).sqrt();
        let s = t * c;
        for j in 0..n {
            let ajp = a[j][p];
            let ajq = a[j][q];
            a[j][p] = c * ajp - s * ajq;
            a[j][q] = s * ajp + c * ajq;
        }
        for j in 0..n {
            let apj = a[p][j];
            let aqj = a[q][j];
            a[p][j] = c * apj - s * aqj;
            a[q][j] = s * apj + c * aqj;
        }
        a[p][q] = 0.0;
        a[q][p] = 0.0;
    }
    (0..n).map(|i| a[i][i]).collect()
}

fn eigen_extremes(a: Vec<Vec<f64>>) -> (f64, f64) {
    let vals = jacobi_eigenvalues(a);
    let lo = vals.iter().copied().fold(f64::MAX, f64::min);
    let hi = vals.iter().copied().fold(f64::MIN, f64::max);
    (lo, hi)
}

/// Applies the multiplication form in Haar coordinates: synthesize, multiply
/// by w (or 1/w), analyze. Mean block first when `with_mean` is set.
fn apply_mult_form(w: &[f64], v: &[f64], with_mean: bool, inverse: bool) -> Vec<f64> {
    let depth = w.len().trailing_zeros();
    let (mean, coeffs) = if with_mean {
        (v[0], v[1..].to_vec())
    } else {
        (0.0, v.to_vec())
    };
    let f = synthesize(mean, &coeffs, depth);
    let g: Vec<f64> = f
        .iter()
        .zip(w)
        .map(|(fi, wi)| if inverse { fi / wi } else { fi * wi })
        .collect();
    let (gm, gc) = analyze(&g);
    if with_mean {
        let mut out = vec![gm];
        out.extend(gc);
        out
    } else {
        gc
    }
}

/// K = D^{-1/2} M D^{-1/2} on the zero-mean coefficient space.
fn whitened_pencil(w: &[f64]) -> Vec<Vec<f64>> {
    let avg_w = node_averages(w);
    let n = w.len() - 1;
    let dhalf_inv: Vec<f64> = (0..n).map(|i| 1.0 / avg_w[i].sqrt()).collect();
    let mut k = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = dhalf_inv[j];
        let col = apply_mult_form(w, &e, false, false);
        for i in 0..n {
            k[i][j] = col[i] * dhalf_inv[i];
        }
    }
    // Symmetrize rounding noise.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (k[i][j] + k[j][i]);
            k[i][j] = avg;
            k[j][i] = avg;
        }
    }
    k
}

/// Square-function constants (c_up, c_low) on the zero-mean subspace.
pub fn square_constants(w: &[f64]) -> (f64, f64) {
    let (lo, hi) = eigen_extremes(whitened_pencil(w));
    (1.0 / lo, hi)
}

/// Both routes of the lower-constant identity on the full space:
/// sup M/D directly and sup D^{-1}/M^{-1} from the inverse forms.
pub fn inverse_equivalence_routes(w: &[f64]) -> (f64, f64) {
    let avg_w = node_averages(w);
    let n = w.len(); // mean block + (n - 1) coefficients
    // Block scale: the mean block is whitened by the root average, the
    // coefficient block i by the average on node i.
    let scale = |i: usize| -> f64 {
        if i == 0 {
            1.0 / avg_w[0].sqrt()
        } else {
            1.0 / avg_w[i - 1].sqrt()
        }
    };
    let mut k1 = vec![vec![0.0; n]; n];
    let mut k2 = vec![vec![0.0; n]; n];
    for j in 0..n {
        // Route 1: K1 = D^{-1/2} M D^{-1/2}; sup M/D = lambda_max(K1).
        let mut e = vec![0.0; n];
        e[j] = scale(j);
        let col = apply_mult_form(w, &e, true, false);
        for i in 0..n {
            k1[i][j] = col[i] * scale(i);
        }
        // Route 2: K2 = D^{1/2} M^{-1} D^{1/2};
        // sup D^{-1}/M^{-1} = 1 / lambda_min(K2).
        let mut e2 = vec![0.0; n];
        e2[j] = 1.0 / scale(j);
        let col2 = apply_mult_form(w, &e2, true, true);
        for i in 0..n {
            k2[i][j] = col2[i] / scale(i);
        }
    }
    for k in [&mut k1, &mut k2] {
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (k[i][j] + k[j][i]);
                k[i][j] = avg;
                k[j][i] = avg;
            }
        }
    }
    let (_, route1) = eigen_extremes(k1);
    let (lo2, _) = eigen_extremes(k2);
    (route1, 1.0 / lo2)
}

/// max over internal I of <w>_I <1/w>_I divided by the characteristic.
pub fn dominance_gap(w: &[f64]) -> f64 {
    let avg_w = node_averages(w);
    let inv: Vec<f64> = w.iter().map(|x| 1.0 / x).collect();
    let avg_inv = node_averages(&inv);
    let n_internal = w.len() - 1;
    let sup = (0..n_internal)
        .map(|i| avg_w[i] * avg_inv[i])
        .fold(f64::MIN, f64::max);
    sup / a2(w)
}

/// Largest singular value of the conjugated shift in Euclidean leaf
/// coordinates (input depth N, output depth N + 1).
pub fn shift_norm(w: &[f64]) -> f64 {
    let n_in = w.len();
    let depth = n_in.trailing_zeros();
    let n_out = 2 * n_in;
    let mut g = vec![vec![0.0; n_in]; n_out];
    for j in 0..n_in {
        let mut u = vec![0.0; n_in];
        u[j] = 1.0;
        let col = apply_conjugated_shift(w, &u, depth);
        for (i, row) in g.iter_mut().enumerate() {
            row[j] = col[i];
        }
    }
    gram_norm(&g)
}

fn apply_conjugated_shift(w: &[f64], u: &[f64], depth: u32) -> Vec<f64> {
    let n_in = w.len();
    let scale_in = (n_in as f64).sqrt();
    let f: Vec<f64> = u
        .iter()
        .zip(w)
        .map(|(ui, wi)| ui * scale_in / wi.sqrt())
        .collect();
    let (_, coeffs) = analyze(&f);
    // Shift: coefficient at I feeds +/- c/sqrt(2) to its children.
    let mut out_coeffs = vec![0.0; 2 * n_in - 1];
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for level in 0..depth {
        let base = (1usize << level) - 1;
        let child = (1usize << (level + 1)) - 1;
        for k in 0..(1usize << level) {
            let c = coeffs[base + k] * inv_sqrt2;
            out_coeffs[child + 2 * k] += c;
            out_coeffs[child + 2 * k + 1] -= c;
        }
    }
    let field = synthesize(0.0, &out_coeffs, depth + 1);
    let scale_out = 1.0 / ((2 * n_in) as f64).sqrt();
    field
        .iter()
        .enumerate()
        .map(|(i, fi)| fi * w[i / 2].sqrt() * scale_out)
        .collect()
}

/// Weighted norm of the sign multiplier with symbol `signs` per internal
/// node (level order).
pub fn multiplier_norm(w: &[f64], signs: &[f64]) -> f64 {
    let n = w.len();
    let depth = n.trailing_zeros();
    let scale_in = (n as f64).sqrt();
    let mut g = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut u = vec![0.0; n];
        u[j] = 1.0;
        let f: Vec<f64> = u
            .iter()
            .zip(w)
            .map(|(ui, wi)| ui * scale_in / wi.sqrt())
            .collect();
        let (_, coeffs) = analyze(&f);
        let flipped: Vec<f64> = coeffs.iter().zip(signs).map(|(c, s)| c * s).collect();
        let field = synthesize(0.0, &flipped, depth);
        for i in 0..n {
            g[i][j] = field[i] * w[i].sqrt() / scale_in;
        }
    }
    gram_norm(&g)
}

/// Largest singular value via lambda_max(G^T G).
fn gram_norm(g: &[Vec<f64>]) -> f64 {
    let cols = g[0].len();
    let mut gtg = vec![vec![0.0; cols]; cols];
    for i in 0..cols {
        for j in i..cols {
            let dot: f64 = g.iter().map(|row| row[i] * row[j]).sum();
            gtg[i][j] = dot;
            gtg[j][i] = dot;
        }
    }
    let (_, hi) = eigen_extremes(gtg);
    hi.max(0.0).sqrt()
}

/// sup |sigma_I| for scalar symbols.
pub fn sigma_norm(signs: &[f64]) -> f64 {
    signs.iter().fold(0.0f64, |acc, s| acc.max(s.abs()))
}

/// Embedding sum and its ratio against [w] max(1, log [w]) ||f||^2.
pub fn tv_ratio(w: &[f64], f: &[f64]) -> (f64, f64) {
    let avg_w = node_averages(w);
    let g: Vec<f64> = w.iter().zip(f).map(|(wi, fi)| wi.sqrt() * fi).collect();
    let avg_g = node_averages(&g);
    let n_internal = w.len() - 1;
    let mut lhs = 0.0;
    for i in 0..n_internal {
        let level = (i + 1).ilog2();
        let child = (1usize << (level + 1)) - 1;
        let k = i - ((1usize << level) - 1);
        let measure = (2.0f64).powi(-(level as i32));
        let diff = (avg_w[child + 2 * k] - avg_w[child + 2 * k + 1]) / avg_w[i];
        let vec_part = avg_g[i] * avg_g[i] / avg_w[i];
        lhs += measure * diff * diff * vec_part;
    }
    let char_a2 = a2(w);
    let h = 1.0 / w.len() as f64;
    let f_norm: f64 = f.iter().map(|x| h * x * x).sum();
    (lhs, lhs / (char_a2 * char_a2.ln().max(1.0) * f_norm))
}

/// Weighted testing ratio for scalar weights.
pub fn testing_ratio(w: &[f64]) -> f64 {
    let avg_w = node_averages(w);
    let n_internal = w.len() - 1;
    let depth = w.len().trailing_zeros();
    // W_hat(I)^2 / <w>_I per internal node, then subtree sums.
    let mut term = vec![0.0; n_internal];
    for (i, t) in term.iter_mut().enumerate() {
        let level = (i + 1).ilog2();
        let child = (1usize << (level + 1)) - 1;
        let k = i - ((1usize << level) - 1);
        let sqrt_measure = (2.0f64).powi(-(level as i32)).sqrt();
        let w_hat = 0.5 * sqrt_measure * (avg_w[child + 2 * k + 1] - avg_w[child + 2 * k]);
        *t = w_hat * w_hat / avg_w[i];
    }
    let mut subtree = vec![0.0; 2 * w.len() - 1];
    for level in (0..depth).rev() {
        let base = (1usize << level) - 1;
        let child = (1usize << (level + 1)) - 1;
        for k in 0..(1usize << level) {
            subtree[base + k] =
                term[base + k] + subtree[child + 2 * k] + subtree[child + 2 * k + 1];
        }
    }
    let mut sup = 0.0f64;
    for (i, s) in subtree.iter().enumerate().take(n_internal) {
        let level = (i + 1).ilog2();
        let inv_measure = (2.0f64).powi(level as i32);
        sup = sup.max(inv_measure * s / avg_w[i]);
    }
    let char_a2 = a2(w);
    sup / (char_a2 * char_a2)
}

/// Scalar flat-part split of the inverse diagonal form:
/// (s1, s2 bound, s3, total).
pub fn s123(w: &[f64], f: &[f64]) -> (f64, f64, f64, f64) {
    let avg_w = node_averages(w);
    let avg_f = node_averages(f);
    let (_, coeffs) = analyze(f);
    let n_internal = w.len() - 1;
    let mut s1 = 0.0;
    let mut s3 = 0.0;
    let mut total = 0.0;
    for i in 0..n_internal {
        let level = (i + 1).ilog2();
        let child = (1usize << (level + 1)) - 1;
        let k = i - ((1usize << level) - 1);
        let sqrt_measure = (2.0f64).powi(-(level as i32)).sqrt();
        let w_norm = 1.0 / avg_w[i].sqrt();
        total += w_norm * w_norm * coeffs[i] * coeffs[i];
        let a = 0.5 * sqrt_measure * (avg_w[child + 2 * k] - avg_w[child + 2 * k + 1])
            / (avg_w[i] * avg_w[i].sqrt());
        let flat = avg_f[i] * a;
        let g_coeff = w_norm * coeffs[i] + flat;
        s1 += g_coeff * g_coeff;
        s3 += flat * flat;
    }
    (s1, 2.0 * (s1 * s3).sqrt(), s3, total)
}

/// Carleson constants for a scalar PSD sequence `a` on the internal nodes
/// (level order): (c_embed, c_test).
pub fn carleson(w: &[f64], a: &[f64]) -> (f64, f64) {
    let avg_w = node_averages(w);
    let n = w.len();
    let depth = n.trailing_zeros();
    let n_internal = n - 1;

    let mut subtree = vec![0.0; 2 * n - 1];
    for level in (0..depth).rev() {
        let base = (1usize << level) - 1;
        let child = (1usize << (level + 1)) - 1;
        for k in 0..(1usize << level) {
            let i = base + k;
            subtree[i] = avg_w[i] * avg_w[i] * a[i]
                + subtree[child + 2 * k]
                + subtree[child + 2 * k + 1];
        }
    }
    let mut c_test = 0.0f64;
    for i in 0..n_internal {
        let level = (i + 1).ilog2();
        let inv_measure = (2.0f64).powi(level as i32);
        c_test = c_test.max(inv_measure * subtree[i] / avg_w[i]);
    }

    // Embedding numerator, whitened by the leaf weights.
    let mut k_mat = vec![vec![0.0; n]; n];
    let scale_root = 1.0 / (n as f64).sqrt();
    for j in 0..n {
        let mut field = vec![0.0; n];
        field[j] = w[j].sqrt() * (n as f64).sqrt();
        let avgs = node_averages(&field);
        let mut acc = vec![0.0; n];
        for i in 0..n_internal {
            let level = (i + 1).ilog2();
            let k = i - ((1usize << level) - 1);
            let scale = (1u64 << level) as f64 * scale_root;
            let shift = depth - level;
            let start = (k as u64) << shift;
            for leaf in start..(start + (1u64 << shift)) {
                acc[leaf as usize] += scale * a[i] * avgs[i];
            }
        }
        for i in 0..n {
            k_mat[i][j] = acc[i] * w[i].sqrt();
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (k_mat[i][j] + k_mat[j][i]);
            k_mat[i][j] = avg;
            k_mat[j][i] = avg;
        }
    }
    let (_, c_embed) = eigen_extremes(k_mat);
    (c_embed.max(0.0), c_test)
}

/// The scalar S3 testing sequence a_I = W_hat(I)^2 / <w>_I^3.
pub fn s3_sequence(w: &[f64]) -> Vec<f64> {
    let avg_w = node_averages(w);
    let n_internal = w.len() - 1;
    (0..n_internal)
        .map(|i| {
            let level = (i + 1).ilog2();
            let child = (1usize << (level + 1)) - 1;
            let k = i - ((1usize << level) - 1);
            let sqrt_measure = (2.0f64).powi(-(level as i32)).sqrt();
            let w_hat = 0.5 * sqrt_measure * (avg_w[child + 2 * k + 1] - avg_w[child + 2 * k]);
            w_hat * w_hat / (avg_w[i] * avg_w[i] * avg_w[i])
        })
        .collect()
}

/// Weighted maximal function: per leaf x,
/// max over ancestors I of sqrt(w_x) <|f| / sqrt(w)>_I.
pub fn maximal(w: &[f64], f: &[f64]) -> Vec<f64> {
    let n = w.len();
    let depth = n.trailing_zeros();
    let ratios: Vec<f64> = f
        .iter()
        .zip(w)
        .map(|(fi, wi)| fi.abs() / wi.sqrt())
        .collect();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + ratios[i];
    }
    (0..n)
        .map(|x| {
            let mut best = 0.0f64;
            for level in 0..=depth {
                let width = 1usize << (depth - level);
                let start = (x / width) * width;
                let avg = (prefix[start + width] - prefix[start]) / width as f64;
                best = best.max(avg);
            }
            w[x].sqrt() * best
        })
        .collect()
}
