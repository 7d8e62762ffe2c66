//! Genotype ingestion: dosage-coded SNP tables to genetic distance matrices
//! via stratified locus subsampling and pairwise deletion.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dosage-coded SNP table: locus metadata plus one column per individual.
#[derive(Debug, Clone)]
pub struct GenotypeTable {
    pub chromosomes: Vec<String>,
    pub positions: Vec<u64>,
    pub locus_ids: Vec<String>,
    pub individuals: Vec<String>,
    /// Loci × individuals; `None` is a missing call.
    pub dosages: Vec<Vec<Option<u8>>>,
}

impl GenotypeTable {
    pub fn n_loci(&self) -> usize {
        self.locus_ids.len()
    }

    pub fn n_individuals(&self) -> usize {
        self.individuals.len()
    }

    /// Reads a CSV with columns `chromosome,position,locus_id` followed by
    /// one dosage column per individual (entries 0/1/2 or NA/empty).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::Parse { path: path.into(), row: 0, msg: e.to_string() })?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse { path: path.into(), row: 0, msg: e.to_string() })?
            .clone();
        if headers.len() < 4 {
            return Err(Error::Parse {
                path: path.into(),
                row: 0,
                msg: "need chromosome,position,locus_id plus at least one individual".into(),
            });
        }
        let individuals: Vec<String> = headers.iter().skip(3).map(String::from).collect();

        let mut out = GenotypeTable {
            chromosomes: Vec::new(),
            positions: Vec::new(),
            locus_ids: Vec::new(),
            individuals,
            dosages: Vec::new(),
        };
        for (row_idx, record) in reader.records().enumerate() {
            let row = row_idx + 2; // header is row 1
            let record = record
                .map_err(|e| Error::Parse { path: path.into(), row, msg: e.to_string() })?;
            let parse_err = |msg: String| Error::Parse { path: path.into(), row, msg };
            let chrom = record.get(0).unwrap_or("").trim();
            if chrom.is_empty() {
                return Err(parse_err("empty chromosome label".into()));
            }
            let pos: u64 = record
                .get(1)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad position: {e}")))?;
            let locus = record.get(2).unwrap_or("").trim();
            let mut dosage_row = Vec::with_capacity(out.individuals.len());
            for (c, cell) in record.iter().skip(3).enumerate() {
                let cell = cell.trim();
                let v = if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    None
                } else {
                    match cell {
                        "0" => Some(0),
                        "1" => Some(1),
                        "2" => Some(2),
                        other => {
                            return Err(parse_err(format!(
                                "dosage '{other}' for {} not in 0/1/2/NA",
                                out.individuals[c]
                            )))
                        }
                    }
                };
                dosage_row.push(v);
            }
            if dosage_row.len() != out.individuals.len() {
                return Err(parse_err(format!(
                    "{} dosage cells for {} individuals",
                    dosage_row.len(),
                    out.individuals.len()
                )));
            }
            out.chromosomes.push(chrom.to_string());
            out.positions.push(pos);
            out.locus_ids.push(locus.to_string());
            out.dosages.push(dosage_row);
        }
        if out.n_loci() == 0 {
            return Err(Error::Parse { path: path.into(), row: 0, msg: "no loci".into() });
        }
        Ok(out)
    }
}

/// How per-locus discordance is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchMode {
    /// Count a locus once when the dosages differ (selfing-species reading).
    DiscordantLoci,
    /// Accumulate |a − b| / 2 allele mismatches (for diploid outcrossers).
    AlleleDosage,
}

/// GDM and comparable-locus counts from one ingestion run.
#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub individuals: Vec<String>,
    /// Discordance counts (or halved allele-dosage sums), symmetric, zero
    /// diagonal.
    pub gdm: DMatrix<f64>,
    /// Loci observed in both members of each pair.
    pub comparable: DMatrix<f64>,
    /// Pairs with zero comparable loci; their responses are missing.
    pub flagged_pairs: Vec<(usize, usize)>,
    pub retained_loci: usize,
    /// Ids of the loci kept by the stratified sample, in table order.
    pub retained_locus_ids: Vec<String>,
    pub warnings: Vec<String>,
}

/// Stratified subsample (`per_chrom` loci per chromosome, seeded) followed by
/// pairwise-deletion mismatch counting. Chromosomes with fewer loci than
/// requested contribute everything, with a warning.
pub fn ingest_genotypes(
    table: &GenotypeTable,
    per_chrom: usize,
    seed: u64,
    mode: MismatchMode,
) -> Result<IngestOutput> {
    if per_chrom == 0 {
        return Err(Error::invalid_input("per_chrom must be >= 1"));
    }
    if table.n_individuals() < 2 {
        return Err(Error::invalid_input("need at least two individuals"));
    }

    // Chromosome strata in first-appearance order.
    let mut strata: Vec<(String, Vec<usize>)> = Vec::new();
    for (l, chrom) in table.chromosomes.iter().enumerate() {
        match strata.iter_mut().find(|(c, _)| c == chrom) {
            Some((_, idxs)) => idxs.push(l),
            None => strata.push((chrom.clone(), vec![l])),
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut retained: Vec<usize> = Vec::new();
    for (chrom, idxs) in &strata {
        if idxs.len() <= per_chrom {
            if idxs.len() < per_chrom {
                warnings.push(format!(
                    "chromosome {chrom} has {} loci, fewer than {per_chrom}; keeping all",
                    idxs.len()
                ));
            }
            retained.extend_from_slice(idxs);
        } else {
            let picks = rand::seq::index::sample(&mut rng, idxs.len(), per_chrom);
            let mut chosen: Vec<usize> = picks.iter().map(|k| idxs[k]).collect();
            chosen.sort_unstable();
            retained.extend(chosen);
        }
    }

    let n = table.n_individuals();
    let mut gdm = DMatrix::zeros(n, n);
    let mut comparable = DMatrix::zeros(n, n);
    let mut flagged = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut m = 0.0;
            let mut d = 0.0;
            for &l in &retained {
                let (a, b) = (table.dosages[l][i], table.dosages[l][j]);
                if let (Some(a), Some(b)) = (a, b) {
                    m += 1.0;
                    match mode {
                        MismatchMode::DiscordantLoci => {
                            if a != b {
                                d += 1.0;
                            }
                        }
                        MismatchMode::AlleleDosage => {
                            d += (a as f64 - b as f64).abs() / 2.0;
                        }
                    }
                }
            }
            gdm[(i, j)] = d;
            gdm[(j, i)] = d;
            comparable[(i, j)] = m;
            comparable[(j, i)] = m;
            if m == 0.0 {
                flagged.push((i, j));
            }
        }
    }
    Ok(IngestOutput {
        individuals: table.individuals.clone(),
        gdm,
        comparable,
        flagged_pairs: flagged,
        retained_loci: retained.len(),
        retained_locus_ids: retained.iter().map(|&l| table.locus_ids[l].clone()).collect(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn table(chroms: &[&str], dosages: Vec<Vec<Option<u8>>>, n_ind: usize) -> GenotypeTable {
        GenotypeTable {
            chromosomes: chroms.iter().map(|s| s.to_string()).collect(),
            positions: (0..chroms.len() as u64).collect(),
            locus_ids: (0..chroms.len()).map(|l| format!("L{l}")).collect(),
            individuals: (0..n_ind).map(|i| format!("ind{i}")).collect(),
            dosages,
        }
    }

    #[test]
    fn pairwise_deletion_hand_case() {
        // A = (0, 1, NA), B = (0, 2, 1): two comparable loci, one discordant.
        let t = table(
            &["chr1", "chr1", "chr1"],
            vec![
                vec![Some(0), Some(0)],
                vec![Some(1), Some(2)],
                vec![None, Some(1)],
            ],
            2,
        );
        let out = ingest_genotypes(&t, 10, 0, MismatchMode::DiscordantLoci).unwrap();
        assert_eq!(out.comparable[(0, 1)], 2.0);
        assert_eq!(out.gdm[(0, 1)], 1.0);
        assert!(out.flagged_pairs.is_empty());
        assert_eq!(out.warnings.len(), 1); // fewer than 10 loci on chr1
    }

    #[test]
    fn identical_individuals_are_concordant() {
        let l = 12;
        let dosages = (0..l).map(|k| vec![Some((k % 3) as u8); 3]).collect();
        let t = table(&vec!["chr1"; l], dosages, 3);
        let out = ingest_genotypes(&t, l, 0, MismatchMode::DiscordantLoci).unwrap();
        for i in 0..3 {
            assert_eq!(out.gdm[(i, i)], 0.0);
            for j in 0..3 {
                assert_eq!(out.gdm[(i, j)], 0.0);
                if i != j {
                    assert_eq!(out.comparable[(i, j)], l as f64);
                }
            }
        }
    }

    #[test]
    fn stratified_retention_is_300_per_chromosome() {
        let n_per = 500;
        let chroms: Vec<String> =
            (1..=7).flat_map(|c| std::iter::repeat_n(format!("chr{c}"), n_per)).collect();
        let chrom_refs: Vec<&str> = chroms.iter().map(String::as_str).collect();
        let dosages = (0..chroms.len()).map(|k| vec![Some((k % 2) as u8); 2]).collect();
        let t = table(&chrom_refs, dosages, 2);
        let out = ingest_genotypes(&t, 300, 7, MismatchMode::DiscordantLoci).unwrap();
        assert_eq!(out.retained_loci, 2100);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let chroms: Vec<&str> = vec!["chr1"; 40];
        let dosages: Vec<Vec<Option<u8>>> =
            (0..40).map(|k| vec![Some((k % 3) as u8), Some(((k + 1) % 3) as u8)]).collect();
        let t = table(&chroms, dosages, 2);
        let a = ingest_genotypes(&t, 11, 5, MismatchMode::DiscordantLoci).unwrap();
        let b = ingest_genotypes(&t, 11, 5, MismatchMode::DiscordantLoci).unwrap();
        assert_eq!(a.gdm, b.gdm);
        assert_eq!(a.retained_locus_ids, b.retained_locus_ids);
        let c = ingest_genotypes(&t, 11, 6, MismatchMode::DiscordantLoci).unwrap();
        assert_eq!(c.retained_loci, 11);
        // Different seed picks a different subset.
        assert_ne!(a.retained_locus_ids, c.retained_locus_ids);
    }

    #[test]
    fn allele_dosage_mode_halves_absolute_differences() {
        let t = table(
            &["chr1", "chr1"],
            vec![vec![Some(0), Some(2)], vec![Some(1), Some(2)]],
            2,
        );
        let out = ingest_genotypes(&t, 2, 0, MismatchMode::AlleleDosage).unwrap();
        // |0−2|/2 + |1−2|/2 = 1.5.
        assert_eq!(out.gdm[(0, 1)], 1.5);
    }

    #[test]
    fn zero_overlap_pair_is_flagged() {
        let t = table(
            &["chr1", "chr1"],
            vec![vec![Some(0), None], vec![None, Some(2)]],
            2,
        );
        let out = ingest_genotypes(&t, 2, 0, MismatchMode::DiscordantLoci).unwrap();
        assert_eq!(out.flagged_pairs, vec![(0, 1)]);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("geno.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "chromosome,position,locus_id,a,b").unwrap();
        writeln!(f, "chr1,100,L1,0,2").unwrap();
        writeln!(f, "chr1,200,L2,NA,1").unwrap();
        writeln!(f, "chr2,50,L3,1,1").unwrap();
        drop(f);
        let t = GenotypeTable::read_csv(&path).unwrap();
        assert_eq!(t.n_loci(), 3);
        assert_eq!(t.individuals, vec!["a", "b"]);
        assert_eq!(t.dosages[1][0], None);

        let bad = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&bad).unwrap();
        writeln!(f, "chromosome,position,locus_id,a,b").unwrap();
        writeln!(f, "chr1,100,L1,0,7").unwrap();
        drop(f);
        match GenotypeTable::read_csv(&bad) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
