//! Binary embedding checkpoints.
//!
//! Layout:
//!
//! ```text
//! <model> <d> <m> <n> <seed>\n          ASCII header line
//! m·d little-endian f32                  user matrix, row-major
//! n·d little-endian f32                  item matrix, row-major
//! ```
//!
//! A `<file>.meta` sidecar holds `key=value` lines describing the run.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub model: String,
    pub dim: usize,
    pub num_users: usize,
    pub num_items: usize,
    pub seed: u64,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

pub(crate) fn write_f32s<'a>(
    out: &mut impl Write,
    values: impl IntoIterator<Item = &'a f64>,
) -> std::io::Result<()> {
    for &v in values {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_f32s(input: &mut impl Read, count: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 4];
    input.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect())
}

pub fn write_table(
    path: &Path,
    model: &str,
    seed: u64,
    table: &EmbeddingTable,
    meta: &[(&str, String)],
) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(
        out,
        "{model} {} {} {} {seed}",
        table.dim(),
        table.num_users(),
        table.num_items()
    )
    .map_err(io)?;
    write_f32s(&mut out, table.users().iter()).map_err(io)?;
    write_f32s(&mut out, table.items().iter()).map_err(io)?;
    out.flush().map_err(io)?;

    let mpath = meta_path(path);
    let mut m = BufWriter::new(File::create(&mpath).map_err(|e| Error::io(&mpath, e))?);
    let mut lines = vec![
        ("model", model.to_owned()),
        ("dim", table.dim().to_string()),
        ("num_users", table.num_users().to_string()),
        ("num_items", table.num_items().to_string()),
        ("seed", seed.to_string()),
        ("dtype", "f32le".to_owned()),
    ];
    lines.extend(meta.iter().map(|(k, v)| (*k, v.clone())));
    for (k, v) in lines {
        writeln!(m, "{k}={v}").map_err(|e| Error::io(&mpath, e))?;
    }
    m.flush().map_err(|e| Error::io(&mpath, e))
}

pub fn read_table(path: &Path) -> Result<(CheckpointHeader, EmbeddingTable)> {
    let io = |e| Error::io(path, e);
    let mut input = BufReader::new(File::open(path).map_err(io)?);
    let mut line = String::new();
    input.read_line(&mut line).map_err(io)?;
    let bad = |message: &str| Error::Format {
        what: "checkpoint header",
        message: format!("{}: {message}", path.display()),
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(bad("expected `model d m n seed`"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("non-numeric field"));
    let header = CheckpointHeader {
        model: fields[0].to_owned(),
        dim: num(fields[1])?,
        num_users: num(fields[2])?,
        num_items: num(fields[3])?,
        seed: fields[4].parse().map_err(|_| bad("bad seed"))?,
    };
    let d = header.dim;
    let users = read_f32s(&mut input, header.num_users * d).map_err(io)?;
    let items = read_f32s(&mut input, header.num_items * d).map_err(io)?;
    let users = Array2::from_shape_vec((header.num_users, d), users).expect("sized read");
    let items = Array2::from_shape_vec((header.num_items, d), items).expect("sized read");
    let mut rest = Vec::new();
    input.read_to_end(&mut rest).map_err(io)?;
    if !rest.is_empty() {
        return Err(bad("trailing bytes after item matrix"));
    }
    Ok((header, EmbeddingTable::new(users, items)?))
}

pub fn read_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let mpath = meta_path(path);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect())
}
