//! Chain persistence: retained draws as per-block CSVs plus JSON metadata.
//! Floats are written losslessly, so `load(save(x))` reproduces every draw
//! bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{ChainMeta, ChainOutput, Draws, ModelState};

use super::csvio::fmt_f64;

/// Bumped on any breaking change to the on-disk layout.
pub const CHAIN_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Serialize, Deserialize)]
struct MetaFile {
    schema_version: String,
    meta: ChainMeta,
}

fn write_block(path: &Path, n_cols: usize, rows: &[Vec<f64>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header: Vec<String> = (0..n_cols).map(|c| format!("c{c}")).collect();
    writeln!(w, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
    for row in rows {
        if row.len() != n_cols {
            return Err(Error::InvalidState(format!(
                "block row has {} values, expected {n_cols}",
                row.len()
            )));
        }
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_block(path: &Path, n_cols: usize, n_rows: usize) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let mut out = Vec::with_capacity(n_rows);
    for (k, rec) in reader.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Parse { path: path.into(), row, msg: e.to_string() })?;
        if rec.len() != n_cols {
            return Err(Error::Parse {
                path: path.into(),
                row,
                msg: format!("{} fields, expected {n_cols}", rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(n_cols);
        for cell in rec.iter() {
            vals.push(cell.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: path.into(),
                row,
                msg: format!("bad float '{cell}': {e}"),
            })?);
        }
        out.push(vals);
    }
    if out.len() != n_rows {
        return Err(Error::Parse {
            path: path.into(),
            row: out.len() + 1,
            msg: format!("{} data rows, expected {n_rows}", out.len()),
        });
    }
    Ok(out)
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().cloned().collect()).collect()
}

/// Saves one finished chain into `dir` (created if needed).
pub fn save_chain(dir: &Path, chain: &ChainOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta_path = dir.join("meta.json");
    let file = File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(
        &mut w,
        &MetaFile {
            schema_version: CHAIN_SCHEMA_VERSION.to_string(),
            meta: chain.meta.clone(),
        },
    )?;
    w.flush().map_err(|e| Error::io(&meta_path, e))?;

    let d = &chain.draws;
    let scalars: Vec<Vec<f64>> = (0..d.alpha.len())
        .map(|k| vec![d.alpha[k], d.sigma2[k], d.sigma2_eta[k], d.phi_eta[k]])
        .collect();
    write_block(&dir.join("scalars.csv"), 4, &scalars)?;
    write_block(&dir.join("beta.csv"), chain.meta.n_covariates, &d.beta)?;
    write_block(&dir.join("eta.csv"), chain.meta.n_nodes, &d.eta)?;
    write_block(&dir.join("phi_q.csv"), chain.meta.q, &d.phi_q)?;
    write_block(&dir.join("xi.csv"), chain.meta.q, &d.xi)?;
    if !d.fitted.is_empty() {
        write_block(&dir.join("fitted.csv"), chain.meta.n_dyads, &d.fitted)?;
    }
    if !d.delta.is_empty() {
        let cols = chain.meta.n_dyads * chain.meta.n_covariates;
        write_block(&dir.join("delta_draws.csv"), cols, &d.delta)?;
    }
    if !d.w.is_empty() {
        write_block(&dir.join("w.csv"), chain.meta.n_dyads * chain.meta.q, &d.w)?;
        write_block(
            &dir.join("c_load.csv"),
            chain.meta.n_covariates * chain.meta.q,
            &d.c_load,
        )?;
    }
    write_block(
        &dir.join("delta_mean.csv"),
        chain.meta.n_covariates,
        &matrix_rows(&chain.delta_mean),
    )?;
    write_block(
        &dir.join("delta_sd.csv"),
        chain.meta.n_covariates,
        &matrix_rows(&chain.delta_sd),
    )?;

    let state_path = dir.join("final_state.json");
    let file = File::create(&state_path).map_err(|e| Error::io(&state_path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &chain.final_state)?;
    w.flush().map_err(|e| Error::io(&state_path, e))?;
    Ok(())
}

/// Loads a chain directory written by [`save_chain`].
pub fn load_chain(dir: &Path) -> Result<ChainOutput> {
    let meta_path = dir.join("meta.json");
    let file = File::open(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta_file: MetaFile = serde_json::from_reader(BufReader::new(file))?;
    if meta_file.schema_version != CHAIN_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: meta_file.schema_version,
            expected: CHAIN_SCHEMA_VERSION.to_string(),
        });
    }
    let meta = meta_file.meta;
    let k = meta.n_draws;

    let scalars = read_block(&dir.join("scalars.csv"), 4, k)?;
    let mut draws = Draws {
        alpha: scalars.iter().map(|r| r[0]).collect(),
        sigma2: scalars.iter().map(|r| r[1]).collect(),
        sigma2_eta: scalars.iter().map(|r| r[2]).collect(),
        phi_eta: scalars.iter().map(|r| r[3]).collect(),
        beta: read_block(&dir.join("beta.csv"), meta.n_covariates, k)?,
        eta: read_block(&dir.join("eta.csv"), meta.n_nodes, k)?,
        phi_q: read_block(&dir.join("phi_q.csv"), meta.q, k)?,
        xi: read_block(&dir.join("xi.csv"), meta.q, k)?,
        ..Draws::default()
    };
    let fitted_path = dir.join("fitted.csv");
    if fitted_path.exists() {
        draws.fitted = read_block(&fitted_path, meta.n_dyads, k)?;
    }
    let delta_path = dir.join("delta_draws.csv");
    if delta_path.exists() {
        draws.delta = read_block(&delta_path, meta.n_dyads * meta.n_covariates, k)?;
    }
    let w_path = dir.join("w.csv");
    if w_path.exists() {
        draws.w = read_block(&w_path, meta.n_dyads * meta.q, k)?;
        draws.c_load = read_block(&dir.join("c_load.csv"), meta.n_covariates * meta.q, k)?;
    }

    let to_matrix = |rows: Vec<Vec<f64>>| {
        DMatrix::from_fn(meta.n_dyads, meta.n_covariates, |r, c| rows[r][c])
    };
    let delta_mean =
        to_matrix(read_block(&dir.join("delta_mean.csv"), meta.n_covariates, meta.n_dyads)?);
    let delta_sd =
        to_matrix(read_block(&dir.join("delta_sd.csv"), meta.n_covariates, meta.n_dyads)?);

    let state_path = dir.join("final_state.json");
    let file = File::open(&state_path).map_err(|e| Error::io(&state_path, e))?;
    let final_state: ModelState = serde_json::from_reader(BufReader::new(file))?;

    Ok(ChainOutput { draws, delta_mean, delta_sd, meta, final_state })
}
