//! Dataset file formats: node tables, dyadic responses, genetic distance
//! matrices, and pathway geometry. All CSVs are UTF-8 with header rows and
//! '.' decimals; floats are written with 17 significant digits so that
//! reading them back is lossless.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::design::PathwayClass;
use crate::dyad::{DyadIndex, NodeSet};
use crate::error::{Error, Result};

/// Lossless text form of an f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

fn parse_f64(path: &Path, row: usize, field: &str, s: &str) -> Result<f64> {
    s.trim().parse().map_err(|e| Error::Parse {
        path: path.into(),
        row,
        msg: format!("bad {field} '{s}': {e}"),
    })
}

fn open_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(BufReader::new(file)))
}

fn create_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

/// Writes `id,x,y,<covariate columns>`, one row per node.
pub fn write_nodes(path: &Path, nodes: &NodeSet) -> Result<()> {
    let mut w = create_writer(path)?;
    let mut header = vec!["id".to_string(), "x".to_string(), "y".to_string()];
    header.extend(nodes.covariate_names.iter().cloned());
    w.write_record(&header).map_err(|e| Error::io(path, e.into()))?;
    for (r, id) in nodes.ids.iter().enumerate() {
        let mut rec = vec![id.clone(), fmt_f64(nodes.coords[r][0]), fmt_f64(nodes.coords[r][1])];
        for c in 0..nodes.covariates.ncols() {
            rec.push(fmt_f64(nodes.covariates[(r, c)]));
        }
        w.write_record(&rec).map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a node table written by [`write_nodes`] (or hand-authored in the
/// same shape).
pub fn read_nodes(path: &Path) -> Result<NodeSet> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { path: path.into(), row: 1, msg: e.to_string() })?
        .clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "x" || &headers[2] != "y" {
        return Err(Error::Parse {
            path: path.into(),
            row: 1,
            msg: "expected header id,x,y,<covariates>".into(),
        });
    }
    let cov_names: Vec<String> = headers.iter().skip(3).map(String::from).collect();
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut cov_rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Parse { path: path.into(), row, msg: e.to_string() })?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                path: path.into(),
                row,
                msg: format!("{} fields, expected {}", rec.len(), headers.len()),
            });
        }
        ids.push(rec[0].to_string());
        coords.push([
            parse_f64(path, row, "x", &rec[1])?,
            parse_f64(path, row, "y", &rec[2])?,
        ]);
        let mut covs = Vec::with_capacity(cov_names.len());
        for (c, name) in cov_names.iter().enumerate() {
            covs.push(parse_f64(path, row, name, &rec[3 + c])?);
        }
        cov_rows.push(covs);
    }
    let n = ids.len();
    let covariates = DMatrix::from_fn(n, cov_names.len(), |r, c| cov_rows[r][c]);
    NodeSet::new(ids, coords, covariates, cov_names)
}

/// Writes dyadic responses as `i,j,response` using node ids, in dyad order.
pub fn write_responses(
    path: &Path,
    ids: &[String],
    idx: &DyadIndex,
    response: &DVector<f64>,
) -> Result<()> {
    if response.len() != idx.len() {
        return Err(Error::invalid_input("response length must match dyad count"));
    }
    let mut w = create_writer(path)?;
    w.write_record(["i", "j", "response"]).map_err(|e| Error::io(path, e.into()))?;
    for (r, &(i, j)) in idx.pairs().iter().enumerate() {
        w.write_record([ids[i].as_str(), ids[j].as_str(), &fmt_f64(response[r])])
            .map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads responses back into dyad order for the given node ids. Every dyad
/// must appear exactly once (either orientation).
pub fn read_responses(path: &Path, ids: &[String]) -> Result<DVector<f64>> {
    let idx = DyadIndex::new(ids.len())?;
    let pos = |id: &str, row: usize| {
        ids.iter().position(|x| x == id).ok_or_else(|| Error::Parse {
            path: path.into(),
            row,
            msg: format!("unknown node id '{id}'"),
        })
    };
    let mut out = vec![f64::NAN; idx.len()];
    let mut seen = vec![false; idx.len()];
    let mut reader = open_reader(path)?;
    for (k, rec) in reader.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Parse { path: path.into(), row, msg: e.to_string() })?;
        if rec.len() != 3 {
            return Err(Error::Parse {
                path: path.into(),
                row,
                msg: format!("{} fields, expected 3", rec.len()),
            });
        }
        let a = pos(&rec[0], row)?;
        let b = pos(&rec[1], row)?;
        let d = idx.position(a.min(b), a.max(b)).ok_or_else(|| Error::Parse {
            path: path.into(),
            row,
            msg: format!("not a dyad: {} {}", &rec[0], &rec[1]),
        })?;
        if seen[d] {
            return Err(Error::Parse {
                path: path.into(),
                row,
                msg: format!("duplicate dyad {} {}", &rec[0], &rec[1]),
            });
        }
        seen[d] = true;
        out[d] = parse_f64(path, row, "response", &rec[2])?;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let (i, j) = idx.pairs()[missing];
        return Err(Error::Parse {
            path: path.into(),
            row: 0,
            msg: format!("missing dyad {} {}", ids[i], ids[j]),
        });
    }
    Ok(DVector::from_vec(out))
}

/// Writes a genetic distance matrix as `i,j,discordant,comparable` long form.
pub fn write_gdm(
    path: &Path,
    ids: &[String],
    gdm: &DMatrix<f64>,
    comparable: &DMatrix<f64>,
) -> Result<()> {
    let n = ids.len();
    if gdm.shape() != (n, n) || comparable.shape() != (n, n) {
        return Err(Error::invalid_input("GDM shape must match the id list"));
    }
    let mut w = create_writer(path)?;
    w.write_record(["i", "j", "discordant", "comparable"])
        .map_err(|e| Error::io(path, e.into()))?;
    for i in 0..n {
        for j in (i + 1)..n {
            w.write_record([
                ids[i].as_str(),
                ids[j].as_str(),
                &fmt_f64(gdm[(i, j)]),
                &fmt_f64(comparable[(i, j)]),
            ])
            .map_err(|e| Error::io(path, e.into()))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a long-form GDM back into symmetric matrices in id order.
pub fn read_gdm(path: &Path, ids: &[String]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = ids.len();
    let idx = DyadIndex::new(n)?;
    let mut gdm = DMatrix::zeros(n, n);
    let mut comparable = DMatrix::zeros(n, n);
    let mut seen = vec![false; idx.len()];
    let mut reader = open_reader(path)?;
    for (k, rec) in reader.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Parse { path: path.into(), row, msg: e.to_string() })?;
        if rec.len() != 4 {
            return Err(Error::Parse {
                path: path.into(),
                row,
                msg: format!("{} fields, expected 4", rec.len()),
            });
        }
        let find = |id: &str| {
            ids.iter().position(|x| x == id).ok_or_else(|| Error::Parse {
                path: path.into(),
                row,
                msg: format!("unknown node id '{id}'"),
            })
        };
        let a = find(&rec[0])?;
        let b = find(&rec[1])?;
        if a == b {
            return Err(Error::Parse {
                path: path.into(),
                row,
                msg: "self pair in GDM".into(),
            });
        }
        let d = idx.position(a.min(b), a.max(b)).unwrap();
        if seen[d] {
            return Err(Error::Parse {
                path: path.into(),
                row,
                msg: format!("duplicate pair {} {}", &rec[0], &rec[1]),
            });
        }
        seen[d] = true;
        let dv = parse_f64(path, row, "discordant", &rec[2])?;
        let mv = parse_f64(path, row, "comparable", &rec[3])?;
        gdm[(a, b)] = dv;
        gdm[(b, a)] = dv;
        comparable[(a, b)] = mv;
        comparable[(b, a)] = mv;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let (i, j) = idx.pairs()[missing];
        return Err(Error::Parse {
            path: path.into(),
            row: 0,
            msg: format!("missing pair {} {}", ids[i], ids[j]),
        });
    }
    Ok((gdm, comparable))
}

/// Writes pathway classes as pretty JSON.
pub fn write_pathways(path: &Path, classes: &[PathwayClass]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, classes)?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads pathway classes, re-validating geometry and τ.
pub fn read_pathways(path: &Path) -> Result<Vec<PathwayClass>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let classes: Vec<PathwayClass> = serde_json::from_reader(BufReader::new(file))?;
    classes
        .into_iter()
        .map(|c| PathwayClass::new(c.name, c.features, c.tau))
        .collect()
}
