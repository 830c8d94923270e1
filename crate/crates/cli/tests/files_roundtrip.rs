//! Load -> serialize -> load round-trips for every file kind, bit-exact
//! thanks to the 17-significant-digit float emission.

use haarlab_cli::files;
use std::path::{Path, PathBuf};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn temp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("haarlab-roundtrip");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn weight_roundtrip_bit_exact() {
    for fixture in ["const_id.json", "two_leaf_14.json", "rotation4_d2.json"] {
        let w = files::load_weight(&fixtures().join(fixture)).unwrap();
        let path = temp(fixture);
        std::fs::write(&path, files::weight_to_json(&w).unwrap()).unwrap();
        let back = files::load_weight(&path).unwrap();
        assert_eq!(w.dim(), back.dim());
        assert_eq!(w.depth(), back.depth());
        for (a, b) in w.leaves().iter().zip(back.leaves()) {
            assert_eq!(a.data(), b.data(), "{fixture} changed under round-trip");
        }
    }
}

#[test]
fn function_roundtrip_bit_exact() {
    let f = files::load_function(&fixtures().join("fn_hat_d1_depth2.json")).unwrap();
    let path = temp("fn.json");
    std::fs::write(&path, files::function_to_json(&f).unwrap()).unwrap();
    let back = files::load_function(&path).unwrap();
    assert_eq!(f.values(), back.values());
}

#[test]
fn symbol_roundtrip_bit_exact() {
    let s = files::load_symbol(&fixtures().join("sigma_signs_d1.json")).unwrap();
    let path = temp("sym.json");
    std::fs::write(&path, files::symbol_to_json(&s).unwrap()).unwrap();
    let back = files::load_symbol(&path).unwrap();
    let a: Vec<_> = s.entries().collect();
    let b: Vec<_> = back.entries().collect();
    assert_eq!(a.len(), b.len());
    for ((ia, ma), (ib, mb)) in a.iter().zip(&b) {
        assert_eq!(ia, ib);
        assert_eq!(ma.data(), mb.data());
    }
}

#[test]
fn sequence_roundtrip_bit_exact() {
    let s = files::load_sequence(&fixtures().join("carleson_seq_d1.json")).unwrap();
    let path = temp("seq.json");
    std::fs::write(&path, files::sequence_to_json(&s).unwrap()).unwrap();
    let back = files::load_sequence(&path).unwrap();
    let a: Vec<_> = s.entries().collect();
    let b: Vec<_> = back.entries().collect();
    assert_eq!(a.len(), b.len());
    for ((ia, ma), (ib, mb)) in a.iter().zip(&b) {
        assert_eq!(ia, ib);
        assert_eq!(ma.data(), mb.data());
    }
}

#[test]
fn seventeen_digit_floats_roundtrip() {
    // An irrational entry survives serialization exactly.
    let w = files::load_weight(&fixtures().join("two_leaf_14.json")).unwrap();
    let scaled = w.scale(std::f64::consts::PI).unwrap();
    let path = temp("pi.json");
    std::fs::write(&path, files::weight_to_json(&scaled).unwrap()).unwrap();
    let back = files::load_weight(&path).unwrap();
    for (a, b) in scaled.leaves().iter().zip(back.leaves()) {
        assert_eq!(a.data(), b.data());
    }
}
