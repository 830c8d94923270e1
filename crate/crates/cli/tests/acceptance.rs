//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! 1. Exact finite-scale identities over randomized weights (d in 1..=3,
//!    depth <= 6, more than 50 seeds).
//! 2. Frozen derived-value fixtures.
//! 3. Oracle equivalence: dense vs power iteration, Monte-Carlo vs sum form.
//! 4. Scalar cross-check of the full pipeline at d = 1.
//! 5. Bound-shape caps with slack 10 on weights with characteristic <= 100.
//! 6. Determinism of the sweep CSV and a clean self-check run of the binary.

use haarlab_core::bounds::{self, Method, OperatorKind};
use haarlab_core::matlin::{self, SymMatrix};
use haarlab_core::operators::{self, MultiplierSymbol};
use haarlab_core::verify::{self, VerifyConfig};
use haarlab_core::weights::{self, AveragesTree, WeightFamily, WeightField};
use haarlab_core::{dyadic, DyadicIndex, Matrix, VectorField};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::process::Command;

fn report(criterion: &str, result: Result<String, String>) {
    match result {
        Ok(detail) => println!("acceptance {criterion}: PASS ({detail})"),
        Err(msg) => {
            println!("acceptance {criterion}: FAIL ({msg})");
            panic!("{criterion} failed: {msg}");
        }
    }
}

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn random_field(rng: &mut ChaCha8Rng, dim: usize, depth: u32) -> VectorField {
    let values = (0..(1usize << depth) * dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    VectorField::new(dim, depth, values).unwrap()
}

fn random_symbol(rng: &mut ChaCha8Rng, dim: usize, levels: u32) -> MultiplierSymbol {
    MultiplierSymbol::fill(dim, levels, |_| {
        let data: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        Matrix::from_rows(dim, dim, data).unwrap()
    })
}

/// The per-seed identity battery of criterion 1.
fn identities_for_seed(seed: u64) -> Result<(), String> {
    let dim = 1 + (seed % 3) as usize;
    let depth = 2 + (seed % 5) as u32; // 2..=6
    let step = 0.3 + 0.1 * (seed % 7) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xACC3_97A1);

    let w = weights::generate(&WeightFamily::RandomMartingale { step }, dim, depth, seed)
        .map_err(|e| e.to_string())?;
    let tree = AveragesTree::build(&w).map_err(|e| e.to_string())?;
    let f = random_field(&mut rng, dim, depth);
    let s = dyadic::analyze(&f);

    // Parseval.
    check(
        close(f.l2_norm_sq(), s.energy(), 1e-10),
        format!("seed {seed}: parseval"),
    )?;

    // Exact midpoint recursion on the weight averages.
    for idx in tree.internal_indices() {
        let mid = tree.avg(idx.left()).midpoint(tree.avg(idx.right()));
        let dev = mid.sub(tree.avg(idx)).frob();
        check(
            dev <= 1e-14 * tree.avg(idx).frob().max(1.0),
            format!("seed {seed}: midpoint recursion dev {dev:e}"),
        )?;
    }

    // Disbalanced system: norm bound, reconstruction, orthogonality on a
    // subsample of interval pairs.
    let idxs: Vec<DyadicIndex> = tree.internal_indices().collect();
    for &idx in idxs.iter() {
        let basis = operators::disbalanced_basis(&tree, idx).map_err(|e| e.to_string())?;
        for k in 0..dim {
            let g = basis.leaf_field(k, depth).map_err(|e| e.to_string())?;
            let norm = operators::weighted_norm_sq(&tree, &g).sqrt();
            check(
                norm <= 5.0 + 1e-9,
                format!("seed {seed}: disbalanced norm {norm}"),
            )?;
            let resid =
                operators::reconstruct_check(&tree, idx, k).map_err(|e| e.to_string())?;
            check(
                resid <= 1e-10,
                format!("seed {seed}: reconstruction residual {resid:e}"),
            )?;
        }
    }
    for (a, &i) in idxs.iter().enumerate() {
        let bi = operators::disbalanced_basis(&tree, i).map_err(|e| e.to_string())?;
        for &j in idxs[a + 1..].iter().step_by(3) {
            let bj = operators::disbalanced_basis(&tree, j).map_err(|e| e.to_string())?;
            for k in 0..dim {
                let gi = bi.leaf_field(k, depth).map_err(|e| e.to_string())?;
                for l in 0..dim {
                    let gj = bj.leaf_field(l, depth).map_err(|e| e.to_string())?;
                    let ip = operators::weighted_inner(&tree, &gi, &gj);
                    check(
                        ip.abs() <= 1e-9,
                        format!("seed {seed}: disbalanced orthogonality {ip:e}"),
                    )?;
                }
            }
        }
    }

    // Shift isometry of the square function.
    let before = operators::square_norm_sq(&s, &tree, false).map_err(|e| e.to_string())?;
    let after = operators::square_norm_sq(&operators::apply_shift(&s), &tree, false)
        .map_err(|e| e.to_string())?;
    check(
        close(before, after, 1e-10),
        format!("seed {seed}: shift isometry {before} vs {after}"),
    )?;

    // Multiplier contraction and the necessity identities.
    let sigma = random_symbol(&mut rng, dim, depth);
    let ts = operators::apply_multiplier(&sigma, &s).map_err(|e| e.to_string())?;
    let lhs = operators::square_norm_sq(&ts, &tree, false).map_err(|e| e.to_string())?;
    let snorm = operators::sigma_norm(&sigma, &tree).map_err(|e| e.to_string())?;
    check(
        lhs <= snorm * snorm * before * (1.0 + 1e-10) + 1e-12,
        format!("seed {seed}: multiplier contraction"),
    )?;
    let idx = idxs[(seed as usize) % idxs.len()];
    let e: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v = tree.invsqrt_avg(idx).matvec(&e);
    let mut test_fn = VectorField::zeros(dim, depth);
    let h = 1.0 / dyadic::sqrt_measure(idx.level);
    for pos in idx.left().leaf_range(depth) {
        test_fn.leaf_mut(pos as usize).copy_from_slice(
            &v.iter().map(|x| -h * x).collect::<Vec<_>>(),
        );
    }
    for pos in idx.right().leaf_range(depth) {
        test_fn
            .leaf_mut(pos as usize)
            .copy_from_slice(&v.iter().map(|x| h * x).collect::<Vec<_>>());
    }
    let e_sq: f64 = e.iter().map(|x| x * x).sum();
    check(
        close(operators::weighted_norm_sq(&tree, &test_fn), e_sq, 1e-10),
        format!("seed {seed}: necessity norm identity"),
    )?;
    let tf = dyadic::synthesize(
        &operators::apply_multiplier(&sigma, &dyadic::analyze(&test_fn)).map_err(|e| e.to_string())?,
        depth,
    )
    .map_err(|e| e.to_string())?;
    let x = operators::necessity_matrix(&tree, idx, sigma.get(idx).unwrap())
        .map_err(|e| e.to_string())?;
    check(
        close(
            operators::weighted_norm_sq(&tree, &tf),
            x.quad_form(&e),
            1e-10,
        ),
        format!("seed {seed}: necessity action identity"),
    )?;

    // Lower-constant equivalence and diagonal dominance.
    let resid = bounds::inverse_equivalence_check(&tree).map_err(|e| e.to_string())?;
    check(
        resid <= 1e-8,
        format!("seed {seed}: inverse equivalence residual {resid:e}"),
    )?;
    let gap = bounds::dw_dominance_gap(&tree).map_err(|e| e.to_string())?;
    check(gap <= 1.0 + 1e-9, format!("seed {seed}: dominance gap {gap}"))?;

    // Truncation: explicit inverse formula and the trace inequality.
    let n = 2.5;
    let truncated = weights::truncate(&w, n).map_err(|e| e.to_string())?;
    let tree_n = AveragesTree::build(&truncated).map_err(|e| e.to_string())?;
    let leaf_idx = (seed as usize) % w.leaf_count();
    let [p1, p2, p3] = weights::clip_projectors(w.leaf(leaf_idx), n).map_err(|e| e.to_string())?;
    let w_inv = matlin::inv_spd(w.leaf(leaf_idx)).map_err(|e| e.to_string())?;
    let middle = SymMatrix::from_matrix(
        &p2.to_matrix()
            .matmul(&w_inv.to_matrix())
            .matmul(&p2.to_matrix()),
    );
    let expect_inv = p1.scale(n).add(&middle).add(&p3.scale(1.0 / n));
    let actual_inv = matlin::inv_spd(truncated.leaf(leaf_idx)).map_err(|e| e.to_string())?;
    check(
        expect_inv.sub(&actual_inv).frob() <= 1e-9 * actual_inv.frob().max(1.0),
        format!("seed {seed}: truncation inverse formula"),
    )?;
    let trace = |a: &SymMatrix, b: &SymMatrix| -> f64 {
        let p = a.mul_sym(b);
        (0..a.dim()).map(|i| p.get(i, i)).sum()
    };
    for idx in tree.all_indices() {
        let lhs = trace(tree_n.avg(idx), tree_n.avg_of_inv(idx));
        let rhs = 2.0 * dim as f64 + trace(tree.avg(idx), tree.avg_of_inv(idx));
        check(
            lhs <= rhs + 1e-9,
            format!("seed {seed}: truncation trace inequality {lhs} vs {rhs}"),
        )?;
    }

    // Norm-trace bands (the two matrix facts).
    let a1 = tree.avg(DyadicIndex::ROOT).clone();
    let a2 = tree.avg_of_inv(DyadicIndex::ROOT).clone();
    let s1 = matlin::sqrt_spd(&a1).map_err(|e| e.to_string())?;
    let s2 = matlin::sqrt_spd(&a2).map_err(|e| e.to_string())?;
    let lam = matlin::op_norm(&s1.mul_sym(&s2))
        .map_err(|e| e.to_string())?
        .powi(2);
    let tr = trace(&a1, &a2);
    check(
        lam <= tr * (1.0 + 1e-9) && tr <= dim as f64 * lam * (1.0 + 1e-9),
        format!("seed {seed}: norm-trace band"),
    )?;
    let b1 = a1.add(&SymMatrix::identity(dim));
    check(
        tr <= trace(&b1, &a2) + 1e-9,
        format!("seed {seed}: trace monotonicity"),
    )?;
    Ok(())
}

#[test]
fn criterion_1_exact_identities() {
    let result = (|| -> Result<String, String> {
        // Haar orthonormality once per depth.
        for depth in 2..=6u32 {
            let n = 1usize << depth;
            let h = 1.0 / n as f64;
            let idxs: Vec<DyadicIndex> = dyadic::internal_indices(depth).collect();
            for (a, &i) in idxs.iter().enumerate() {
                let hi = dyadic::haar_leaf_values(i, depth);
                for &j in &idxs[a..] {
                    let hj = dyadic::haar_leaf_values(j, depth);
                    let dot: f64 = hi.iter().zip(&hj).map(|(x, y)| x * y).sum::<f64>() * h;
                    let expect = if i == j { 1.0 } else { 0.0 };
                    check(
                        (dot - expect).abs() <= 1e-12,
                        format!("orthonormality at depth {depth}"),
                    )?;
                }
            }
        }
        let seeds = 54u64;
        for seed in 0..seeds {
            identities_for_seed(seed)?;
        }
        Ok(format!("{seeds} seeds, d in 1..=3, depth in 2..=6"))
    })();
    report("criterion 1 (exact identities)", result);
}

#[test]
fn criterion_2_derived_fixtures() {
    let result = (|| -> Result<String, String> {
        let two = WeightField::new(1, 1, vec![SymMatrix::diag(&[1.0]), SymMatrix::diag(&[4.0])])
            .map_err(|e| e.to_string())?;
        let tree2 = AveragesTree::build(&two).map_err(|e| e.to_string())?;
        let a2 = weights::a2_characteristic(&tree2).map_err(|e| e.to_string())?;
        check((a2 - 1.5625).abs() <= 1e-12, format!("two-leaf a2 {a2}"))?;

        let deep = WeightField::new(
            1,
            2,
            [1.0, 1.0, 1.0, 9.0]
                .iter()
                .map(|&v| SymMatrix::diag(&[v]))
                .collect(),
        )
        .map_err(|e| e.to_string())?;
        let tree4 = AveragesTree::build(&deep).map_err(|e| e.to_string())?;
        let a2 = weights::a2_characteristic(&tree4).map_err(|e| e.to_string())?;
        check(
            (a2 - 25.0 / 9.0).abs() <= 1e-12,
            format!("depth-2 a2 {a2}"),
        )?;

        let (c_up, c_low) =
            bounds::square_constants(&tree4, false, Method::Auto).map_err(|e| e.to_string())?;
        check((c_up - 3.70782).abs() <= 1e-4, format!("c_up {c_up}"))?;
        check((c_low - 1.73030).abs() <= 1e-4, format!("c_low {c_low}"))?;

        // Independent re-derivation from the explicit three-dimensional
        // pencil diag(3,1,5) against [[3,0,2sqrt2],[0,1,0],[2sqrt2,0,5]].
        let d_mat = SymMatrix::diag(&[3.0, 1.0, 5.0]);
        let r8 = 8.0f64.sqrt();
        let m_mat = SymMatrix::new(3, vec![3.0, 0.0, r8, 0.0, 1.0, 0.0, r8, 0.0, 5.0])
            .map_err(|e| e.to_string())?;
        let (lo, hi) = matlin::gen_eig_extremes(&d_mat, &m_mat).map_err(|e| e.to_string())?;
        check(
            close(c_up, hi, 1e-9) && close(c_low, 1.0 / lo, 1e-9),
            format!("pencil re-derivation ({}, {}) vs ({c_up}, {c_low})", hi, 1.0 / lo),
        )?;

        let tr = bounds::testing_ratio(&tree2).map_err(|e| e.to_string())?;
        check((tr - 0.14745).abs() <= 1e-4, format!("testing ratio {tr}"))?;

        let basis = operators::disbalanced_basis(&tree2, DyadicIndex::ROOT)
            .map_err(|e| e.to_string())?;
        let a = basis.a_matrix.get(0, 0);
        check((a + 0.37947).abs() <= 1e-4, format!("disbalance entry {a}"))?;
        Ok("all fixtures within stated precision".to_string())
    })();
    report("criterion 2 (derived-value fixtures)", result);
}

#[test]
fn criterion_3_oracle_equivalence() {
    let result = (|| -> Result<String, String> {
        let mut checked = 0;
        for depth in 1..=5u32 {
            for (dim, seed) in [(2usize, 40u64), (1, 41), (3, 42)] {
                if dim == 3 && depth > 4 {
                    continue;
                }
                let w = weights::generate(
                    &WeightFamily::RandomMartingale { step: 0.55 },
                    dim,
                    depth,
                    seed + depth as u64,
                )
                .map_err(|e| e.to_string())?;
                let tree = AveragesTree::build(&w).map_err(|e| e.to_string())?;
                let (du, dl) = bounds::square_constants(&tree, false, Method::Dense)
                    .map_err(|e| e.to_string())?;
                let (pu, pl) = bounds::square_constants(&tree, false, Method::Power)
                    .map_err(|e| e.to_string())?;
                check(
                    close(du, pu, 1e-6) && close(dl, pl, 1e-6),
                    format!("square constants dense vs power at depth {depth} dim {dim}"),
                )?;
                let sd = bounds::weighted_op_norm(&tree, OperatorKind::Shift, Method::Dense)
                    .map_err(|e| e.to_string())?
                    .value();
                let sp = bounds::weighted_op_norm(&tree, OperatorKind::Shift, Method::Power)
                    .map_err(|e| e.to_string())?
                    .value();
                check(
                    close(sd, sp, 1e-6),
                    format!("shift norm dense {sd} vs power {sp} at depth {depth} dim {dim}"),
                )?;
                let sigma = MultiplierSymbol::random_signs(dim, depth, seed);
                let md = bounds::weighted_op_norm(
                    &tree,
                    OperatorKind::Multiplier(&sigma),
                    Method::Dense,
                )
                .map_err(|e| e.to_string())?
                .value();
                let mp = bounds::weighted_op_norm(
                    &tree,
                    OperatorKind::Multiplier(&sigma),
                    Method::Power,
                )
                .map_err(|e| e.to_string())?
                .value();
                check(
                    close(md, mp, 1e-6),
                    format!("multiplier norm dense {md} vs power {mp}"),
                )?;
                checked += 1;
            }
        }

        // Monte-Carlo square function at 1e4 trials within five standard
        // errors of the exact sum.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let w = weights::generate(&WeightFamily::RandomMartingale { step: 0.7 }, 2, 4, 99)
            .map_err(|e| e.to_string())?;
        let tree = AveragesTree::build(&w).map_err(|e| e.to_string())?;
        let f = random_field(&mut rng, 2, 4);
        let s = dyadic::analyze(&f);
        let exact = operators::square_norm_sq(&s, &tree, false).map_err(|e| e.to_string())?;
        let mc = operators::square_norm_mc(&s, &tree, 10_000, 5).map_err(|e| e.to_string())?;
        let dev = (mc.value - exact).abs();
        let band = (5.0 * mc.std_err).max(1e-9 * exact);
        check(
            dev <= band,
            format!("Monte-Carlo dev {dev} exceeds 5 sigma band {band}"),
        )?;
        Ok(format!(
            "{checked} dense/power configurations, MC within {:.2} sigma",
            dev / mc.std_err.max(1e-300)
        ))
    })();
    report("criterion 3 (oracle equivalence)", result);
}

#[test]
fn criterion_4_scalar_crosscheck() {
    let result = (|| -> Result<String, String> {
        // 20 random weights per configuration inside the named check; run it
        // at depths 4 and 6 with different seeds.
        for (depth, seed) in [(4u32, 21u64), (6, 22)] {
            let cfg = VerifyConfig {
                depth,
                dim: 1,
                seed,
                trials: 100,
            };
            let outcomes = verify::run_named(&cfg, &["scalar_crosscheck"]);
            for o in &outcomes {
                if !o.passed {
                    return Err(o.detail.clone());
                }
            }
        }
        Ok("matrix pipeline matches the scalar reference to 1e-12".to_string())
    })();
    report("criterion 4 (scalar cross-check)", result);
}

#[test]
fn criterion_5_bound_shapes() {
    let result = (|| -> Result<String, String> {
        let mut checked = 0usize;
        let mut rng = ChaCha8Rng::seed_from_u64(0xB0);
        for seed in 0..18u64 {
            let dim = 1 + (seed % 3) as usize;
            let depth = 2 + (seed % 4) as u32;
            let step = 0.4 + 0.15 * (seed % 5) as f64;
            let w = weights::generate(
                &WeightFamily::RandomMartingale { step },
                dim,
                depth,
                seed ^ 0x5A5A,
            )
            .map_err(|e| e.to_string())?;
            let tree = AveragesTree::build(&w).map_err(|e| e.to_string())?;
            let a2 = weights::a2_characteristic(&tree).map_err(|e| e.to_string())?;
            if a2 > 100.0 {
                continue;
            }
            checked += 1;
            let log = a2.ln().max(1.0);
            let dump = |what: &str, got: f64, cap: f64| -> String {
                format!(
                    "{what}: {got} > {cap} (a2 = {a2}); offending weight: {:?}",
                    w.leaves().iter().map(|m| m.data().to_vec()).collect::<Vec<_>>()
                )
            };
            let (cu, cl) =
                bounds::square_constants(&tree, false, Method::Auto).map_err(|e| e.to_string())?;
            check(cu <= 10.0 * a2 * a2 * log, dump("c_up", cu, 10.0 * a2 * a2 * log))?;
            check(cl <= 10.0 * a2 * log, dump("c_low", cl, 10.0 * a2 * log))?;
            let shift = bounds::weighted_op_norm(&tree, OperatorKind::Shift, Method::Auto)
                .map_err(|e| e.to_string())?
                .value();
            check(
                shift * shift <= 10.0 * a2.powi(3) * log * log,
                dump("shift_norm^2", shift * shift, 10.0 * a2.powi(3) * log * log),
            )?;
            let sigma = random_symbol(&mut rng, dim, depth);
            let snorm = operators::sigma_norm(&sigma, &tree).map_err(|e| e.to_string())?;
            let tnorm =
                bounds::weighted_op_norm(&tree, OperatorKind::Multiplier(&sigma), Method::Auto)
                    .map_err(|e| e.to_string())?
                    .value();
            check(
                tnorm <= 10.0 * snorm * a2.powf(1.5) * log,
                dump("tsigma_norm", tnorm, 10.0 * snorm * a2.powf(1.5) * log),
            )?;
        }
        Ok(format!("{checked} weights with a2 <= 100, slack 10"))
    })();
    report("criterion 5 (bound shapes)", result);
}

/// Long randomized soak of the criterion-1 battery; run on demand with
/// `cargo test -p haarlab-cli --test acceptance -- --ignored`.
#[test]
#[ignore = "long randomized soak"]
fn soak_identities_many_seeds() {
    for seed in 0..400u64 {
        if let Err(msg) = identities_for_seed(seed) {
            panic!("soak failed: {msg}");
        }
    }
    println!("soak: 400 seeds clean");
}

#[test]
fn criterion_6_determinism_and_verify() {
    let result = (|| -> Result<String, String> {
        let bin = env!("CARGO_BIN_EXE_haarlab");
        let dir = std::env::temp_dir().join("haarlab-acceptance");
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;

        // Byte-identical sweep CSV across two runs with a fixed seed.
        let mut csvs = Vec::new();
        for run in 0..2 {
            let path = dir.join(format!("sweep_{run}.csv"));
            let out = Command::new(bin)
                .args([
                    "sweep",
                    "--family",
                    "random_martingale",
                    "--range",
                    "0.2:0.9:5",
                    "--depth",
                    "4",
                    "--dim",
                    "2",
                    "--seed",
                    "1234",
                    "--measure",
                    "all",
                    "--out",
                    path.to_str().unwrap(),
                ])
                .output()
                .map_err(|e| e.to_string())?;
            check(
                out.status.success(),
                format!("sweep failed: {}", String::from_utf8_lossy(&out.stderr)),
            )?;
            csvs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        check(
            csvs[0] == csvs[1],
            "sweep CSV differs between identical runs".to_string(),
        )?;

        // The self-check suite exits 0 on the shipped configuration.
        let out = Command::new(bin)
            .args(["verify", "--depth", "5", "--dim", "2", "--seed", "7", "--trials", "2000"])
            .output()
            .map_err(|e| e.to_string())?;
        check(
            out.status.success(),
            format!(
                "verify failed:\n{}",
                String::from_utf8_lossy(&out.stdout)
            ),
        )?;
        let text = String::from_utf8_lossy(&out.stdout).to_string();
        check(text.contains("failed=0"), "verify reported failures".to_string())?;

        // Every shipped fixture is accepted by its subcommand.
        let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
        for (args, fixture) in [
            (vec!["a2", "--weight"], "const_id.json"),
            (vec!["a2", "--weight"], "two_leaf_14.json"),
            (vec!["square-bounds", "--weight"], "depth2_1119.json"),
            (vec!["a2", "--weight"], "rotation4_d2.json"),
        ] {
            let mut full = args.clone();
            let path = fixtures.join(fixture);
            full.push(path.to_str().unwrap());
            let out = Command::new(bin).args(&full).output().map_err(|e| e.to_string())?;
            check(
                out.status.success(),
                format!("fixture {fixture} rejected"),
            )?;
        }
        Ok(format!("CSV byte-identical ({} bytes), verify exit 0", csvs[0].len()))
    })();
    report("criterion 6 (determinism and self-check)", result);
}
