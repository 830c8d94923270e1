//! JSON fixture formats for weights, vector functions, multiplier symbols,
//! and Carleson sequences, with strict validation on load and
//! 17-significant-digit emission so every f64 round-trips exactly.

use haarlab_core::matlin::SymMatrix;
use haarlab_core::operators::MultiplierSymbol;
use haarlab_core::{CarlesonSequence, DyadicIndex, Matrix, VectorField, WeightField};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::CliError;

const ASYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Serialize, Deserialize)]
pub struct WeightFile {
    pub kind: String,
    pub dim: usize,
    pub depth: u32,
    pub leaves: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FunctionFile {
    pub kind: String,
    pub dim: usize,
    pub depth: u32,
    pub leaves: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub level: u32,
    pub position: u64,
    pub matrix: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EntriesFile {
    pub kind: String,
    pub dim: usize,
    pub entries: Vec<MatrixEntry>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: malformed JSON: {e}", path.display())))
}

fn expect_kind(path: &Path, got: &str, want: &str) -> Result<(), CliError> {
    if got != want {
        return Err(CliError::Input(format!(
            "{}: field 'kind' is '{got}', expected '{want}'",
            path.display()
        )));
    }
    Ok(())
}

fn check_leaf_count(path: &Path, depth: u32, got: usize) -> Result<(), CliError> {
    let expected = 1usize << depth;
    if got != expected {
        return Err(CliError::Input(format!(
            "{}: field 'leaves' has {got} entries, expected 2^{depth} = {expected}",
            path.display()
        )));
    }
    Ok(())
}

fn parse_symmetric(path: &Path, field: &str, dim: usize, raw: &[f64]) -> Result<SymMatrix, CliError> {
    if raw.len() != dim * dim {
        return Err(CliError::Input(format!(
            "{}: field '{field}' has {} numbers, expected {}",
            path.display(),
            raw.len(),
            dim * dim
        )));
    }
    if !raw.iter().all(|x| x.is_finite()) {
        return Err(CliError::Input(format!(
            "{}: field '{field}' contains a non-finite value",
            path.display()
        )));
    }
    let asym = SymMatrix::asymmetry(dim, raw);
    if asym > ASYMMETRY_TOL {
        return Err(CliError::Input(format!(
            "{}: field '{field}' is asymmetric beyond tolerance ({asym:e} > {ASYMMETRY_TOL:e})",
            path.display()
        )));
    }
    SymMatrix::new(dim, raw.to_vec()).map_err(CliError::from)
}

pub fn load_weight(path: &Path) -> Result<WeightField, CliError> {
    let file: WeightFile = read_json(path)?;
    expect_kind(path, &file.kind, "weight")?;
    check_leaf_count(path, file.depth, file.leaves.len())?;
    let leaves = file
        .leaves
        .iter()
        .enumerate()
        .map(|(i, raw)| parse_symmetric(path, &format!("leaves[{i}]"), file.dim, raw))
        .collect::<Result<Vec<_>, _>>()?;
    WeightField::new(file.dim, file.depth, leaves).map_err(CliError::from)
}

pub fn load_function(path: &Path) -> Result<VectorField, CliError> {
    let file: FunctionFile = read_json(path)?;
    expect_kind(path, &file.kind, "function")?;
    check_leaf_count(path, file.depth, file.leaves.len())?;
    let mut values = Vec::with_capacity(file.leaves.len() * file.dim);
    for (i, leaf) in file.leaves.iter().enumerate() {
        if leaf.len() != file.dim {
            return Err(CliError::Input(format!(
                "{}: field 'leaves[{i}]' has {} numbers, expected dim = {}",
                path.display(),
                leaf.len(),
                file.dim
            )));
        }
        values.extend_from_slice(leaf);
    }
    VectorField::new(file.dim, file.depth, values).map_err(CliError::from)
}

fn check_entry_index(path: &Path, i: usize, e: &MatrixEntry) -> Result<DyadicIndex, CliError> {
    DyadicIndex::new(e.level, e.position).map_err(|_| {
        CliError::Input(format!(
            "{}: field 'entries[{i}]' has position {} out of range at level {}",
            path.display(),
            e.position,
            e.level
        ))
    })
}

/// Multiplier symbols are arbitrary (not necessarily symmetric) matrices.
pub fn load_symbol(path: &Path) -> Result<MultiplierSymbol, CliError> {
    let file: EntriesFile = read_json(path)?;
    expect_kind(path, &file.kind, "symbol")?;
    let mut sym = MultiplierSymbol::new(file.dim);
    for (i, e) in file.entries.iter().enumerate() {
        let idx = check_entry_index(path, i, e)?;
        if e.matrix.len() != file.dim * file.dim {
            return Err(CliError::Input(format!(
                "{}: field 'entries[{i}].matrix' has {} numbers, expected {}",
                path.display(),
                e.matrix.len(),
                file.dim * file.dim
            )));
        }
        let m = Matrix::from_rows(file.dim, file.dim, e.matrix.clone()).map_err(CliError::from)?;
        sym.insert(idx, m).map_err(CliError::from)?;
    }
    Ok(sym)
}

pub fn load_sequence(path: &Path) -> Result<CarlesonSequence, CliError> {
    let file: EntriesFile = read_json(path)?;
    expect_kind(path, &file.kind, "carleson")?;
    let mut seq = CarlesonSequence::new(file.dim);
    for (i, e) in file.entries.iter().enumerate() {
        let idx = check_entry_index(path, i, e)?;
        let m = parse_symmetric(path, &format!("entries[{i}].matrix"), file.dim, &e.matrix)?;
        seq.insert(idx, m).map_err(CliError::from)?;
    }
    Ok(seq)
}

/// serde_json formatter printing every float with 17 significant digits.
struct Sig17Formatter;

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

fn to_json_sig17<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17Formatter);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Input(format!("serialization failed: {e}")))?;
    String::from_utf8(out).map_err(|e| CliError::Input(format!("serialization failed: {e}")))
}

pub fn weight_to_json(w: &WeightField) -> Result<String, CliError> {
    let file = WeightFile {
        kind: "weight".to_string(),
        dim: w.dim(),
        depth: w.depth(),
        leaves: w.leaves().iter().map(|m| m.data().to_vec()).collect(),
    };
    to_json_sig17(&file)
}

pub fn function_to_json(f: &VectorField) -> Result<String, CliError> {
    let file = FunctionFile {
        kind: "function".to_string(),
        dim: f.dim(),
        depth: f.depth(),
        leaves: (0..f.leaf_count()).map(|i| f.leaf(i).to_vec()).collect(),
    };
    to_json_sig17(&file)
}

pub fn symbol_to_json(sym: &MultiplierSymbol) -> Result<String, CliError> {
    let file = EntriesFile {
        kind: "symbol".to_string(),
        dim: sym.dim(),
        entries: sym
            .entries()
            .map(|(idx, m)| MatrixEntry {
                level: idx.level,
                position: idx.position,
                matrix: m.data().to_vec(),
            })
            .collect(),
    };
    to_json_sig17(&file)
}

pub fn sequence_to_json(seq: &CarlesonSequence) -> Result<String, CliError> {
    let file = EntriesFile {
        kind: "carleson".to_string(),
        dim: seq.dim(),
        entries: seq
            .entries()
            .map(|(idx, m)| MatrixEntry {
                level: idx.level,
                position: idx.position,
                matrix: m.data().to_vec(),
            })
            .collect(),
    };
    to_json_sig17(&file)
}

pub fn write_weight(path: &Path, w: &WeightField) -> Result<(), CliError> {
    let json = weight_to_json(w)?;
    std::fs::write(path, json)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}
