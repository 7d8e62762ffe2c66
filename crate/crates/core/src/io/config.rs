//! Run configuration: one TOML file with a section per subcommand, validated
//! before any work starts.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{
    assemble_design, closeness_scores, fit_rbf_spec, rbf_basis, shared_segment_covariates,
    standardize_columns, DyadicData, PathwayClass, RbfSpec,
};
use crate::dyad::{dyadic_response, pairwise_difference_matrix, DyadIndex, NodeSet};
use crate::error::{Error, Result};
use crate::sampler::{ModelVariant, PriorConfig};
use crate::simulator::SimConfig;

use super::csvio::{read_gdm, read_nodes, read_pathways, read_responses};
use super::genotype::MismatchMode;

fn default_per_chrom() -> usize {
    300
}
fn default_burnin_frac() -> f64 {
    0.2
}
fn default_thin() -> usize {
    1
}
fn default_chains() -> usize {
    1
}
fn default_q() -> usize {
    6
}
fn default_true() -> bool {
    true
}
fn default_threshold() -> f64 {
    crate::evaluation::NEAR_CLONAL_THRESHOLD
}
fn default_draw_step() -> usize {
    1
}
fn default_max_grid_dyads() -> usize {
    20_000
}

/// The whole config file; each subcommand reads its own section.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub simulate: Option<SimulateConfig>,
    pub ingest: Option<IngestConfig>,
    pub fit: Option<FitConfig>,
    pub score: Option<ScoreConfig>,
    pub map: Option<MapConfig>,
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn section<'a, T>(opt: &'a Option<T>, name: &str) -> Result<&'a T> {
        opt.as_ref()
            .ok_or_else(|| Error::Config(format!("config has no [{name}] section")))
    }

    pub fn simulate(&self) -> Result<&SimulateConfig> {
        Self::section(&self.simulate, "simulate")
    }
    pub fn ingest(&self) -> Result<&IngestConfig> {
        Self::section(&self.ingest, "ingest")
    }
    pub fn fit(&self) -> Result<&FitConfig> {
        Self::section(&self.fit, "fit")
    }
    pub fn score(&self) -> Result<&ScoreConfig> {
        Self::section(&self.score, "score")
    }
    pub fn map(&self) -> Result<&MapConfig> {
        Self::section(&self.map, "map")
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Config(format!("{what} not found: {}", path.display())));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    #[serde(default)]
    pub params: SimConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub genotypes: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default = "default_per_chrom")]
    pub per_chrom: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: MismatchMode,
}

fn default_mode() -> MismatchMode {
    MismatchMode::DiscordantLoci
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        require_file(&self.genotypes, "genotype table")?;
        if self.per_chrom == 0 {
            return Err(Error::Config("per_chrom must be >= 1".into()));
        }
        Ok(())
    }
}

/// Input dataset description shared by fit, score, and map.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataInputs {
    pub nodes: PathBuf,
    pub pathways: Option<PathBuf>,
    /// Exactly one of `responses` (precomputed logits) or `gdm` (mismatch
    /// counts turned into logits here) must be given.
    pub responses: Option<PathBuf>,
    pub gdm: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub standardize_connectivity: bool,
    /// RBF expansion of the environmental differences (k centers); raw
    /// differences when absent.
    pub rbf_k: Option<usize>,
    #[serde(default)]
    pub rbf_seed: u64,
}

/// Everything loaded from one dataset description.
pub struct LoadedData {
    pub data: DyadicData,
    pub nodes: NodeSet,
    pub pathways: Vec<PathwayClass>,
    pub rbf: Option<RbfSpec>,
    /// Discordant counts per dyad when a GDM was the source.
    pub mismatches: Option<Vec<f64>>,
}

impl DataInputs {
    pub fn validate(&self) -> Result<()> {
        require_file(&self.nodes, "nodes.csv")?;
        if let Some(p) = &self.pathways {
            require_file(p, "pathways.json")?;
        }
        match (&self.responses, &self.gdm) {
            (Some(r), None) => require_file(r, "responses.csv"),
            (None, Some(g)) => require_file(g, "gdm.csv"),
            (Some(_), Some(_)) => {
                Err(Error::Config("give either responses or gdm, not both".into()))
            }
            (None, None) => Err(Error::Config("one of responses or gdm is required".into())),
        }?;
        if self.rbf_k == Some(0) {
            return Err(Error::Config("rbf_k must be >= 1 when set".into()));
        }
        Ok(())
    }

    /// Reads and assembles the dataset exactly as the fit does, so that
    /// score and map reconstruct the identical design.
    pub fn load(&self) -> Result<LoadedData> {
        self.validate()?;
        let nodes = read_nodes(&self.nodes)?;
        let idx = DyadIndex::new(nodes.ids.len())?;

        let (std_cov, _, _) = standardize_columns(&nodes.covariates);
        let diffs = pairwise_difference_matrix(&std_cov, &idx)?;
        let (env, rbf) = match self.rbf_k {
            Some(k) => {
                let spec = fit_rbf_spec(&diffs, k, self.rbf_seed)?;
                (rbf_basis(&diffs, &spec)?, Some(spec))
            }
            None => (diffs, None),
        };

        let pathways = match &self.pathways {
            Some(p) => read_pathways(p)?,
            None => Vec::new(),
        };
        let mut conn = DMatrix::zeros(idx.len(), pathways.len());
        for (c, class) in pathways.iter().enumerate() {
            let v = closeness_scores(&nodes, class)?;
            conn.set_column(c, &shared_segment_covariates(&v, &idx)?);
        }
        let design = assemble_design(&env, &conn, self.standardize_connectivity)?;

        let (response, mismatches) = match (&self.responses, &self.gdm) {
            (Some(r), None) => (read_responses(r, &nodes.ids)?, None),
            (None, Some(g)) => {
                let (gdm, comparable) = read_gdm(g, &nodes.ids)?;
                let mut y = DVector::zeros(idx.len());
                let mut counts = Vec::with_capacity(idx.len());
                for (row, &(i, j)) in idx.pairs().iter().enumerate() {
                    let d = gdm[(i, j)];
                    let m = comparable[(i, j)];
                    if m <= 0.0 {
                        return Err(Error::invalid_input(format!(
                            "dyad ({}, {}) has no comparable loci",
                            nodes.ids[i], nodes.ids[j]
                        )));
                    }
                    y[row] = dyadic_response(d.round() as u64, m.round() as u64)?;
                    counts.push(d);
                }
                (y, Some(counts))
            }
            _ => unreachable!("validated above"),
        };

        let data = DyadicData::new(nodes.ids.clone(), nodes.coords.clone(), response, design)?;
        Ok(LoadedData { data, nodes, pathways, rbf, mismatches })
    }
}

/// Optional overrides of the distance-informed prior defaults; anything left
/// unset keeps the value from [`PriorConfig::from_distances`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorOverrides {
    pub var_alpha: Option<f64>,
    pub var_beta: Option<f64>,
    pub ig_shape_sigma2: Option<f64>,
    pub ig_rate_sigma2: Option<f64>,
    pub ig_shape_eta: Option<f64>,
    pub ig_rate_eta: Option<f64>,
    pub var_logphi: Option<f64>,
    pub slice_w0: Option<f64>,
    pub rw_frac: Option<f64>,
}

impl PriorOverrides {
    pub fn apply(&self, prior: &mut PriorConfig) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    prior.$field = v;
                }
            };
        }
        set!(var_alpha);
        set!(var_beta);
        set!(ig_shape_sigma2);
        set!(ig_rate_sigma2);
        set!(ig_shape_eta);
        set!(ig_rate_eta);
        set!(var_logphi);
        set!(slice_w0);
        set!(rw_frac);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(flatten)]
    pub inputs: DataInputs,
    pub out_dir: PathBuf,
    pub variant: ModelVariant,
    pub iterations: usize,
    #[serde(default = "default_burnin_frac")]
    pub burnin_frac: f64,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_q")]
    pub q: usize,
    #[serde(default = "default_true")]
    pub store_fitted: bool,
    #[serde(default)]
    pub store_factors: bool,
    #[serde(default)]
    pub prior: PriorOverrides,
}

impl FitConfig {
    /// The distance-informed prior with this config's overrides applied.
    pub fn build_prior(&self, dist: &nalgebra::DMatrix<f64>) -> Result<PriorConfig> {
        let mut prior = PriorConfig::from_distances(dist, self.q)?;
        self.prior.apply(&mut prior);
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        self.inputs.validate()?;
        if !(0.0..1.0).contains(&self.burnin_frac) {
            return Err(Error::Config("burnin_frac must lie in [0, 1)".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::Config("chains must be >= 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.q == 0 {
            return Err(Error::Config("q must be >= 1".into()));
        }
        Ok(())
    }

    pub fn burnin(&self) -> usize {
        (self.iterations as f64 * self.burnin_frac).floor() as usize
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreConfig {
    #[serde(flatten)]
    pub inputs: DataInputs,
    pub chain_dirs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    /// truth.json from the simulator enables the coverage table.
    pub truth: Option<PathBuf>,
    #[serde(default = "default_threshold")]
    pub near_clonal_threshold: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        self.inputs.validate()?;
        if self.chain_dirs.is_empty() {
            return Err(Error::Config("at least one chain_dir is required".into()));
        }
        for d in &self.chain_dirs {
            if !d.is_dir() {
                return Err(Error::Config(format!("chain dir not found: {}", d.display())));
            }
        }
        if let Some(t) = &self.truth {
            require_file(t, "truth.json")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    #[serde(flatten)]
    pub inputs: DataInputs,
    pub chain_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Grid node covariates (id,x,y,<covariates>); coordinates must form a
    /// regular nx × ny lattice in row-major order.
    pub grid_nodes: Option<PathBuf>,
    /// Bounding box [xmin, ymin, xmax, ymax]; defaults to the node hull.
    pub bbox: Option<[f64; 4]>,
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "default_draw_step")]
    pub draw_step: usize,
    #[serde(default = "default_max_grid_dyads")]
    pub max_grid_dyads: usize,
}

impl MapConfig {
    pub fn validate(&self) -> Result<()> {
        self.inputs.validate()?;
        if !self.chain_dir.is_dir() {
            return Err(Error::Config(format!(
                "chain dir not found: {}",
                self.chain_dir.display()
            )));
        }
        if let Some(g) = &self.grid_nodes {
            require_file(g, "grid_nodes.csv")?;
        }
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::Config("nx and ny must be >= 3".into()));
        }
        if self.draw_step == 0 {
            return Err(Error::Config("draw_step must be >= 1".into()));
        }
        Ok(())
    }
}
