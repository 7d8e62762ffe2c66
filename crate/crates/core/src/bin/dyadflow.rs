//! Command-line surface: simulate, ingest, fit, score, and map subcommands
//! driven by one TOML config file. Every subcommand writes a manifest.json
//! with input hashes and seeds so runs can be reproduced exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use dyadflow::design::standardize_columns;
use dyadflow::error::{Error, Result};
use dyadflow::evaluation::{
    convergence_diagnostics, crps_empirical, interval_coverage, kinship_residuals,
    predictive_draws, ParamDiagnostic, ScoreReport,
};
use dyadflow::io::{
    fmt_f64, load_chain, read_nodes, save_chain, write_gdm, write_nodes, write_pathways,
    write_responses, FitConfig, MapConfig, Manifest, RunConfig, ScoreConfig,
};
use dyadflow::io::genotype::{ingest_genotypes, GenotypeTable};
use dyadflow::mapping::{
    build_grid, delta_edge_summary, dsvc_zscore_map, dyadic_mean_surface, grid_edge_design,
    node_level_slope_map, predict_latent_fields, vector_field, GridEdges, MapOpts,
};
use dyadflow::sampler::{run_chain, ChainOutput, Schedule, StorageOpts};
use dyadflow::simulator::{simulate_dataset, SimTruth};

#[derive(Parser)]
#[command(name = "dyadflow", version, about = "Dyadic flow models for landscape genomics")]
struct Cli {
    /// TOML config file with one section per subcommand.
    #[arg(short, long, global = true, default_value = "dyadflow.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a synthetic dataset and write it with its generating truth.
    Simulate,
    /// Turn a genotype table into a genetic distance matrix.
    Ingest,
    /// Run MCMC chains and persist them to per-chain directories.
    Fit,
    /// Score fitted chains: CRPS, diagnostics, coverage, residuals.
    Score,
    /// Grid map products: vector field, DSVC z-scores, pathway slopes.
    Map,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dyadflow: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::read(&cli.config)?;
    match cli.command {
        Cmd::Simulate => cmd_simulate(&cfg),
        Cmd::Ingest => cmd_ingest(&cfg),
        Cmd::Fit => cmd_fit(cfg.fit()?),
        Cmd::Score => cmd_score(cfg.score()?),
        Cmd::Map => cmd_map(cfg.map()?),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let sim = cfg.simulate()?;
    let truth = simulate_dataset(&sim.params, sim.seed)?;
    std::fs::create_dir_all(&sim.out_dir).map_err(|e| Error::io(&sim.out_dir, e))?;
    write_nodes(&sim.out_dir.join("nodes.csv"), &truth.nodes)?;
    write_pathways(&sim.out_dir.join("pathways.json"), &truth.pathways)?;
    let idx = dyadflow::dyad::DyadIndex::new(truth.nodes.ids.len())?;
    write_responses(&sim.out_dir.join("responses.csv"), &truth.nodes.ids, &idx, &truth.response)?;
    write_json(&sim.out_dir.join("truth.json"), &truth)?;
    Manifest::new("simulate", Some(sim.seed), &[])?.write(&sim.out_dir)?;
    println!(
        "simulate: {} nodes, {} dyads -> {}",
        truth.nodes.ids.len(),
        truth.response.len(),
        sim.out_dir.display()
    );
    Ok(())
}

fn cmd_ingest(cfg: &RunConfig) -> Result<()> {
    let ing = cfg.ingest()?;
    ing.validate()?;
    let table = GenotypeTable::read_csv(&ing.genotypes)?;
    let out = ingest_genotypes(&table, ing.per_chrom, ing.seed, ing.mode)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    for &(i, j) in &out.flagged_pairs {
        eprintln!(
            "warning: pair ({}, {}) has no comparable loci",
            out.individuals[i], out.individuals[j]
        );
    }
    std::fs::create_dir_all(&ing.out_dir).map_err(|e| Error::io(&ing.out_dir, e))?;
    write_gdm(&ing.out_dir.join("gdm.csv"), &out.individuals, &out.gdm, &out.comparable)?;
    Manifest::new("ingest", Some(ing.seed), &[&ing.genotypes])?.write(&ing.out_dir)?;
    println!(
        "ingest: {} individuals, {} loci retained -> {}",
        out.individuals.len(),
        out.retained_loci,
        ing.out_dir.display()
    );
    Ok(())
}

/// Input files a dataset description touches, for the manifest.
fn input_paths(inputs: &dyadflow::io::DataInputs) -> Vec<&Path> {
    let mut paths = vec![inputs.nodes.as_path()];
    if let Some(p) = &inputs.pathways {
        paths.push(p.as_path());
    }
    if let Some(p) = &inputs.responses {
        paths.push(p.as_path());
    }
    if let Some(p) = &inputs.gdm {
        paths.push(p.as_path());
    }
    paths
}

fn cmd_fit(fit: &FitConfig) -> Result<()> {
    // Validate everything before touching the output directory, so a config
    // error never leaves a partial chain dir behind.
    fit.validate()?;
    let loaded = fit.inputs.load()?;
    let prior = fit.build_prior(&loaded.data.distance_matrix())?;
    let storage = StorageOpts {
        store_fitted: fit.store_fitted,
        store_delta_draws: false,
        store_factors: fit.store_factors,
    };
    std::fs::create_dir_all(&fit.out_dir).map_err(|e| Error::io(&fit.out_dir, e))?;
    for c in 0..fit.chains {
        let sched = Schedule {
            iterations: fit.iterations,
            burnin: fit.burnin(),
            thin: fit.thin,
            seed: fit.seed.wrapping_add(c as u64),
            variant: fit.variant,
        };
        let chain = run_chain(&loaded.data, &prior, &sched, storage)?;
        let dir = fit.out_dir.join(format!("chain_{c}"));
        save_chain(&dir, &chain)?;
        let acc: f64 = if chain.meta.joint_acceptance.is_empty() {
            0.0
        } else {
            chain.meta.joint_acceptance.iter().sum::<f64>()
                / chain.meta.joint_acceptance.len() as f64
        };
        println!(
            "fit: chain {c} ({}) kept {} draws, joint acceptance {:.2} -> {}",
            fit.variant.name(),
            chain.meta.n_draws,
            acc,
            dir.display()
        );
    }
    Manifest::new("fit", Some(fit.seed), &input_paths(&fit.inputs))?.write(&fit.out_dir)?;
    Ok(())
}

fn load_chains(dirs: &[PathBuf]) -> Result<Vec<ChainOutput>> {
    let mut chains = Vec::with_capacity(dirs.len());
    for d in dirs {
        chains.push(load_chain(d)?);
    }
    Ok(chains)
}

fn cmd_score(score: &ScoreConfig) -> Result<()> {
    score.validate()?;
    let loaded = score.inputs.load()?;
    let chains = load_chains(&score.chain_dirs)?;
    let n_dyads = loaded.data.n_dyads();
    for c in &chains {
        if c.meta.n_dyads != n_dyads {
            return Err(Error::invalid_input("chain was fitted to a different dataset"));
        }
        if c.draws.fitted.is_empty() {
            return Err(Error::invalid_input(
                "scoring needs fitted draws (fit with store_fitted)",
            ));
        }
    }

    // Posterior predictive draws pooled across chains.
    let mut fitted: Vec<DVector<f64>> = Vec::new();
    let mut sigma2: Vec<f64> = Vec::new();
    for c in &chains {
        for (mu, s2) in c.draws.fitted.iter().zip(&c.draws.sigma2) {
            fitted.push(DVector::from_column_slice(mu));
            sigma2.push(*s2);
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(score.seed);
    let predictive = predictive_draws(&fitted, &sigma2, &mut rng)?;

    let y = &loaded.data.response;
    let mut crps = Vec::with_capacity(n_dyads);
    for d in 0..n_dyads {
        let col: Vec<f64> = predictive.column(d).iter().cloned().collect();
        crps.push(crps_empirical(&col, y[d])?);
    }
    let mean_crps = crps.iter().sum::<f64>() / n_dyads as f64;

    // R-hat / ESS per scalar parameter across the chains.
    let p = chains[0].meta.n_covariates;
    let mut params: Vec<(String, Vec<Vec<f64>>)> = vec![
        ("alpha".into(), chains.iter().map(|c| c.draws.alpha.clone()).collect()),
        ("sigma2".into(), chains.iter().map(|c| c.draws.sigma2.clone()).collect()),
        ("sigma2_eta".into(), chains.iter().map(|c| c.draws.sigma2_eta.clone()).collect()),
        ("phi_eta".into(), chains.iter().map(|c| c.draws.phi_eta.clone()).collect()),
    ];
    for k in 0..p {
        params.push((
            format!("beta_{k}"),
            chains
                .iter()
                .map(|c| c.draws.beta.iter().map(|b| b[k]).collect())
                .collect(),
        ));
    }
    let mut diagnostics = Vec::with_capacity(params.len());
    for (name, series) in &params {
        diagnostics.push(ParamDiagnostic {
            parameter: name.clone(),
            diag: convergence_diagnostics(series)?,
        });
    }

    // Coverage against the simulator's generating values, when available.
    let coverage = match &score.truth {
        Some(path) => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let truth: SimTruth = serde_json::from_reader(std::io::BufReader::new(file))?;
            if truth.beta.len() != p {
                return Err(Error::invalid_input(
                    "truth.json has a different number of covariates than the fit",
                ));
            }
            let mut names = vec!["alpha".to_string()];
            let mut draws: Vec<Vec<f64>> =
                vec![chains.iter().flat_map(|c| c.draws.alpha.iter().cloned()).collect()];
            let mut values = vec![truth.alpha];
            for k in 0..p {
                names.push(format!("beta_{k}"));
                draws.push(
                    chains.iter().flat_map(|c| c.draws.beta.iter().map(|b| b[k])).collect(),
                );
                values.push(truth.beta[k]);
            }
            names.push("sigma2".into());
            draws.push(chains.iter().flat_map(|c| c.draws.sigma2.iter().cloned()).collect());
            values.push(truth.sigma2);
            names.push("sigma2_eta".into());
            draws.push(chains.iter().flat_map(|c| c.draws.sigma2_eta.iter().cloned()).collect());
            values.push(truth.sigma2_eta);
            interval_coverage(&names, &draws, &values)?
        }
        None => Vec::new(),
    };

    let kinship = Some(kinship_residuals(
        &predictive,
        y,
        loaded.mismatches.as_deref(),
        score.near_clonal_threshold,
    )?);

    let report = ScoreReport { crps, mean_crps, diagnostics, coverage, kinship };
    std::fs::create_dir_all(&score.out_dir).map_err(|e| Error::io(&score.out_dir, e))?;
    write_json(&score.out_dir.join("score.json"), &report)?;

    let cov_path = score.out_dir.join("coverage.csv");
    let mut w = BufWriter::new(File::create(&cov_path).map_err(|e| Error::io(&cov_path, e))?);
    writeln!(w, "parameter,truth,lower,upper,covered").map_err(|e| Error::io(&cov_path, e))?;
    for row in &report.coverage {
        writeln!(
            w,
            "{},{},{},{},{}",
            row.parameter,
            fmt_f64(row.truth),
            fmt_f64(row.lower),
            fmt_f64(row.upper),
            row.covered
        )
        .map_err(|e| Error::io(&cov_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&cov_path, e))?;

    let res_path = score.out_dir.join("residuals.csv");
    let mut w = BufWriter::new(File::create(&res_path).map_err(|e| Error::io(&res_path, e))?);
    writeln!(w, "i,j,crps,kinship_residual,mean_log1p_residual,sd_log1p_residual")
        .map_err(|e| Error::io(&res_path, e))?;
    let kin = report.kinship.as_ref().unwrap();
    let ids = &loaded.data.node_ids;
    for (row, &(i, j)) in loaded.data.idx.pairs().iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            ids[i],
            ids[j],
            fmt_f64(report.crps[row]),
            fmt_f64(kin.kinship_residual[row]),
            fmt_f64(kin.mean_log1p_residual[row]),
            fmt_f64(kin.sd_log1p_residual[row])
        )
        .map_err(|e| Error::io(&res_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&res_path, e))?;

    let mut inputs = input_paths(&score.inputs);
    if let Some(t) = &score.truth {
        inputs.push(t.as_path());
    }
    Manifest::new("score", Some(score.seed), &inputs)?.write(&score.out_dir)?;
    println!(
        "score: mean CRPS {:.4} over {} dyads -> {}",
        report.mean_crps,
        n_dyads,
        score.out_dir.display()
    );
    Ok(())
}

fn node_bbox(coords: &[[f64; 2]]) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for c in coords {
        b[0] = b[0].min(c[0]);
        b[1] = b[1].min(c[1]);
        b[2] = b[2].max(c[0]);
        b[3] = b[3].max(c[1]);
    }
    b
}

fn cmd_map(map: &MapConfig) -> Result<()> {
    map.validate()?;
    let loaded = map.inputs.load()?;
    let chain = load_chain(&map.chain_dir)?;
    let variant = chain.meta.schedule.variant;
    let p_active = chain.meta.n_covariates;

    // Grid covariates arrive raw; put them on the fit's standardized node
    // scale before differencing, mirroring the observed-data pipeline.
    let covariates = match &map.grid_nodes {
        Some(path) => {
            let grid_nodes = read_nodes(path)?;
            if grid_nodes.ids.len() != map.nx * map.ny {
                return Err(Error::invalid_input(format!(
                    "grid_nodes has {} rows, expected {} for a {}x{} lattice",
                    grid_nodes.ids.len(),
                    map.nx * map.ny,
                    map.nx,
                    map.ny
                )));
            }
            if grid_nodes.covariates.ncols() != loaded.nodes.covariates.ncols() {
                return Err(Error::invalid_input(
                    "grid_nodes covariates do not match the fitted nodes",
                ));
            }
            let (_, means, scales) = standardize_columns(&loaded.nodes.covariates);
            let mut cov = grid_nodes.covariates.clone();
            for c in 0..cov.ncols() {
                for g in 0..cov.nrows() {
                    cov[(g, c)] = (cov[(g, c)] - means[c]) / scales[c];
                }
            }
            Some(cov)
        }
        None => None,
    };
    let bbox = map.bbox.unwrap_or_else(|| node_bbox(&loaded.data.coords));
    let grid = build_grid(bbox, map.nx, map.ny, covariates)?;
    let edges = GridEdges::from_grid(&grid);

    let prior = chain.meta.prior.clone();
    let opts = MapOpts { draw_step: map.draw_step, max_grid_dyads: map.max_grid_dyads };
    let fields = predict_latent_fields(&chain, &loaded.data, &grid, &edges, &prior, &opts)?;

    let (z_fwd, z_bwd) = grid_edge_design(
        &grid,
        &edges,
        &loaded.pathways,
        loaded.rbf.as_ref(),
        &loaded.data.design.standardization,
        p_active,
    )?;
    let surface = dyadic_mean_surface(&fields, &edges, &z_fwd, &z_bwd)?;
    let vectors = vector_field(&surface, &grid, &edges)?;
    let (dmean, dsd) = delta_edge_summary(&fields)?;
    let zbar = dsvc_zscore_map(&dmean, &dsd, &grid, &edges)?;

    std::fs::create_dir_all(&map.out_dir).map_err(|e| Error::io(&map.out_dir, e))?;
    let vec_path = map.out_dir.join("vectors.csv");
    let mut w = BufWriter::new(File::create(&vec_path).map_err(|e| Error::io(&vec_path, e))?);
    writeln!(w, "node,x,y,u,v,log_grad").map_err(|e| Error::io(&vec_path, e))?;
    for (k, &g) in vectors.nodes.iter().enumerate() {
        writeln!(
            w,
            "{g},{},{},{},{},{}",
            fmt_f64(grid.coords[g][0]),
            fmt_f64(grid.coords[g][1]),
            fmt_f64(vectors.u[k]),
            fmt_f64(vectors.v[k]),
            fmt_f64(vectors.log_grad[k])
        )
        .map_err(|e| Error::io(&vec_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&vec_path, e))?;

    let zbar_path = map.out_dir.join("zbar.csv");
    let mut w = BufWriter::new(File::create(&zbar_path).map_err(|e| Error::io(&zbar_path, e))?);
    writeln!(w, "node,x,y,zbar").map_err(|e| Error::io(&zbar_path, e))?;
    for (g, z) in zbar.iter().enumerate() {
        writeln!(
            w,
            "{g},{},{},{}",
            fmt_f64(grid.coords[g][0]),
            fmt_f64(grid.coords[g][1]),
            fmt_f64(*z)
        )
        .map_err(|e| Error::io(&zbar_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&zbar_path, e))?;

    // Node-level pathway slopes, one file per class; the class coefficients
    // occupy the trailing design columns.
    if variant.includes_connectivity() {
        let n_classes = loaded.pathways.len();
        let p_env = p_active - n_classes;
        for (c, class) in loaded.pathways.iter().enumerate() {
            let theta = node_level_slope_map(&fields, &grid, &edges, p_env + c)?;
            let path = map.out_dir.join(format!("theta_{}.csv", class.name));
            let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
            writeln!(w, "node,x,y,mean,lower,upper").map_err(|e| Error::io(&path, e))?;
            for g in 0..grid.n_nodes() {
                writeln!(
                    w,
                    "{g},{},{},{},{},{}",
                    fmt_f64(grid.coords[g][0]),
                    fmt_f64(grid.coords[g][1]),
                    fmt_f64(theta.mean[g]),
                    fmt_f64(theta.lower[g]),
                    fmt_f64(theta.upper[g])
                )
                .map_err(|e| Error::io(&path, e))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            println!(
                "map: theta[{}] domain-wide mean {:.4}",
                class.name, theta.global_mean
            );
        }
    }

    Manifest::new("map", None, &input_paths(&map.inputs))?.write(&map.out_dir)?;
    println!(
        "map: {}x{} grid, {} edges, {} interior vectors -> {}",
        map.nx,
        map.ny,
        edges.len(),
        vectors.nodes.len(),
        map.out_dir.display()
    );
    Ok(())
}
