//! Chain records, CSV persistence, checkpoints and the chain driver.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    posterior_predictive_pvalues, pvalues_from_paths, summarize_columns, ParamSummary, PValueSet,
    PosteriorPValues, PVALUE_NAMES,
};
use crate::error::{Error, Result};
use crate::likelihood::PriorSpec;
use crate::mcmc::config::McmcConfig;
use crate::mcmc::engine::Sampler;
use crate::mcmc::state::{param_names, param_values, ChainState, Counters, MoveCount, MOVE_NAMES};
use crate::model::ModelSpec;

pub const CHAIN_FILE: &str = "chain.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ABORT_FILE: &str = "abort_state.json";
pub const CHECKPOINT_VERSION: u32 = 1;

/// One retained iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainRecord {
    pub iteration: u64,
    pub params: Vec<f64>,
    pub n_jumps: [usize; 2],
    pub pvalues: PValueSet,
    /// Cumulative counts since the start of the chain.
    pub counters: Counters,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainOutput {
    pub param_names: Vec<String>,
    pub records: Vec<ChainRecord>,
}

fn header(names: &[String]) -> Vec<String> {
    let mut h = vec!["iteration".to_string()];
    h.extend(names.iter().cloned());
    h.extend(["n_jumps_1".into(), "n_jumps_2".into()]);
    h.extend(PVALUE_NAMES.iter().map(|s| s.to_string()));
    for m in MOVE_NAMES {
        h.push(format!("acc_{m}"));
        h.push(format!("prop_{m}"));
    }
    h
}

fn record_fields(r: &ChainRecord) -> Vec<String> {
    let mut f = vec![r.iteration.to_string()];
    f.extend(r.params.iter().map(|v| v.to_string()));
    f.extend(r.n_jumps.iter().map(|v| v.to_string()));
    f.extend(r.pvalues.values().iter().map(|v| v.map_or(String::new(), |x| x.to_string())));
    for (_, c) in r.counters.iter() {
        f.push(c.accepted.to_string());
        f.push(c.proposed.to_string());
    }
    f
}

impl ChainOutput {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(header(&self.param_names))?;
        for r in &self.records {
            wtr.write_record(record_fields(r))?;
        }
        wtr.flush().map_err(|e| Error::io("<chain csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let h: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        let end = h
            .iter()
            .position(|c| c == "n_jumps_1")
            .ok_or_else(|| Error::domain("chain CSV lacks an n_jumps_1 column"))?;
        if h.first().map(String::as_str) != Some("iteration") {
            return Err(Error::domain("chain CSV must start with an iteration column"));
        }
        let names: Vec<String> = h[1..end].to_vec();
        if h != header(&names) {
            return Err(Error::domain("unexpected chain CSV columns"));
        }
        let mut records = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| rec.get(k).unwrap_or("");
            let parse_err = |k: usize| Error::Parse {
                row: row + 1,
                field: h[k].clone(),
                value: field(k).to_string(),
            };
            let num = |k: usize| field(k).parse::<f64>().map_err(|_| parse_err(k));
            let int = |k: usize| field(k).parse::<u64>().map_err(|_| parse_err(k));
            let params = (1..end).map(num).collect::<Result<Vec<_>>>()?;
            let mut pv = [None; 6];
            for (i, slot) in pv.iter_mut().enumerate() {
                let k = end + 2 + i;
                if !field(k).is_empty() {
                    *slot = Some(num(k)?);
                }
            }
            let mut counters = Counters::default();
            for (i, c) in counters.0.iter_mut().enumerate() {
                let k = end + 8 + 2 * i;
                *c = MoveCount {
                    accepted: int(k)?,
                    proposed: int(k + 1)?,
                };
            }
            records.push(ChainRecord {
                iteration: int(0)?,
                params,
                n_jumps: [int(end)? as usize, int(end + 1)? as usize],
                pvalues: PValueSet::from_values(pv),
                counters,
            });
        }
        Ok(Self {
            param_names: names,
            records,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }

    pub fn param_rows(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.params.clone()).collect()
    }

    pub fn pvalue_records(&self) -> Vec<PValueSet> {
        self.records.iter().map(|r| r.pvalues).collect()
    }

    /// Column of one named parameter.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.param_names.iter().position(|n| n == name)?;
        Some(self.records.iter().map(|r| r.params[k]).collect())
    }
}

/// Record of the sampler's current state.
pub fn record_of(sampler: &Sampler) -> ChainRecord {
    let state = sampler.state();
    let spec = sampler.spec();
    ChainRecord {
        iteration: sampler.iteration(),
        params: param_values(&state.params, spec),
        n_jumps: [state.latent.phi1.len(), state.latent.phi2.len()],
        pvalues: pvalues_from_paths(
            sampler.y1_path(),
            state,
            spec,
            sampler.dt(),
            sampler.config().first_gap_from_zero,
        ),
        counters: *sampler.counters(),
    }
}

fn names_of(spec: &ModelSpec) -> Vec<String> {
    param_names(spec).into_iter().map(String::from).collect()
}

/// Runs chain `0` in memory.
pub fn run_chain(
    data: &[f64],
    dt: f64,
    spec: &ModelSpec,
    priors: &PriorSpec,
    config: &McmcConfig,
) -> Result<ChainOutput> {
    let mut s = Sampler::new(data.to_vec(), dt, *spec, *priors, *config)?;
    let mut out = ChainOutput {
        param_names: names_of(spec),
        records: Vec::with_capacity(config.n_records() as usize),
    };
    while s.iteration() < config.n_iterations {
        s.step()?;
        if config.is_retained(s.iteration()) {
            out.records.push(record_of(&s));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub accepted: u64,
    pub proposed: u64,
    pub rate: Option<f64>,
}

/// Summary written next to a chain CSV; every field is recomputed from the
/// CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub n_records: usize,
    pub params: Vec<ParamSummary>,
    pub mean_jumps: [f64; 2],
    pub acceptance: BTreeMap<String, AcceptanceReport>,
    pub pvalues: PosteriorPValues,
}

impl ChainSummary {
    pub fn from_chain(chain: &ChainOutput) -> Result<Self> {
        let params = summarize_columns(&chain.param_names, &chain.param_rows())?;
        let n = chain.records.len() as f64;
        let mut mean_jumps = [0.0; 2];
        for (k, m) in mean_jumps.iter_mut().enumerate() {
            *m = chain.records.iter().map(|r| r.n_jumps[k] as f64).sum::<f64>() / n;
        }
        let last = chain.records.last().expect("summaries need records").counters;
        let acceptance = last
            .iter()
            .map(|(name, c)| {
                (
                    name.to_string(),
                    AcceptanceReport {
                        accepted: c.accepted,
                        proposed: c.proposed,
                        rate: c.rate(),
                    },
                )
            })
            .collect();
        Ok(Self {
            n_records: chain.records.len(),
            params,
            mean_jumps,
            acceptance,
            pvalues: posterior_predictive_pvalues(&chain.pvalue_records())?,
        })
    }
}

/// Everything needed to continue a chain exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub chain: u64,
    pub iteration: u64,
    pub records_written: u64,
    /// Length of the chain CSV when the checkpoint was taken.
    pub csv_bytes: u64,
    pub spec: ModelSpec,
    pub priors: PriorSpec,
    pub config: McmcConfig,
    pub state: ChainState,
    pub counters: Counters,
    pub rng: ChaCha8Rng,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Self = serde_json::from_str(&text)?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                c.version
            )));
        }
        Ok(c)
    }

    /// Writes to a temporary file first so a crash never leaves a torn
    /// checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

/// Output locations of one chain.
#[derive(Clone, Debug)]
pub struct RunFiles {
    pub dir: PathBuf,
}

impl RunFiles {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn chain(&self) -> PathBuf {
        self.dir.join(CHAIN_FILE)
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join(CHECKPOINT_FILE)
    }

    pub fn summary(&self) -> PathBuf {
        self.dir.join(SUMMARY_FILE)
    }
}

fn same_run(c: &Checkpoint, spec: &ModelSpec, priors: &PriorSpec, config: &McmcConfig) -> bool {
    let mut a = c.config;
    a.n_iterations = config.n_iterations;
    a.checkpoint_every = config.checkpoint_every;
    a.verify_every = config.verify_every;
    &c.spec == spec && &c.priors == priors && &a == config
}

/// Runs one chain writing `chain.csv`, `checkpoint.json` and `summary.json`
/// into `dir`. With `resume`, continues from that checkpoint; the CSV is
/// cut back to the length recorded in it, so the result is identical to an
/// uninterrupted run.
#[allow(clippy::too_many_arguments)]
pub fn run_chain_to_dir(
    data: &[f64],
    dt: f64,
    spec: &ModelSpec,
    priors: &PriorSpec,
    config: &McmcConfig,
    chain: u64,
    dir: &Path,
    resume: Option<&Path>,
) -> Result<ChainSummary> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = RunFiles::new(dir);
    let chain_path = files.chain();

    let (mut sampler, mut records_written, mut file) = match resume {
        Some(ck_path) => {
            let ck = Checkpoint::load(ck_path)?;
            if !same_run(&ck, spec, priors, config) || ck.chain != chain {
                return Err(Error::Config(format!(
                    "{} was written for a different model, prior or sampler configuration",
                    ck_path.display()
                )));
            }
            let file = OpenOptions::new()
                .write(true)
                .open(&chain_path)
                .map_err(|e| Error::io(&chain_path, e))?;
            let len = file.metadata().map_err(|e| Error::io(&chain_path, e))?.len();
            if len < ck.csv_bytes {
                return Err(Error::domain(format!(
                    "{} is shorter than recorded in the checkpoint",
                    chain_path.display()
                )));
            }
            file.set_len(ck.csv_bytes).map_err(|e| Error::io(&chain_path, e))?;
            let s = Sampler::resume(
                data.to_vec(),
                dt,
                *spec,
                *priors,
                *config,
                ck.state,
                ck.rng,
                ck.counters,
                ck.iteration,
            )?;
            (s, ck.records_written, file)
        }
        None => {
            let s = Sampler::new_chain(data.to_vec(), dt, *spec, *priors, *config, chain)?;
            let mut file = File::create(&chain_path).map_err(|e| Error::io(&chain_path, e))?;
            let mut w = csv::Writer::from_writer(&mut file);
            w.write_record(header(&names_of(spec)))?;
            w.flush().map_err(|e| Error::io(&chain_path, e))?;
            drop(w);
            (s, 0, file)
        }
    };
    use std::io::{Seek, SeekFrom};
    file.seek(SeekFrom::End(0)).map_err(|e| Error::io(&chain_path, e))?;
    let mut wtr = csv::Writer::from_writer(std::io::BufWriter::new(file));

    let mut last_checkpoint: Option<PathBuf> = resume.map(Path::to_path_buf);
    let save_checkpoint = |s: &Sampler,
                               wtr: &mut csv::Writer<std::io::BufWriter<File>>,
                               records_written: u64|
     -> Result<PathBuf> {
        wtr.flush().map_err(|e| Error::io(&chain_path, e))?;
        let csv_bytes = fs::metadata(&chain_path).map_err(|e| Error::io(&chain_path, e))?.len();
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            chain,
            iteration: s.iteration(),
            records_written,
            csv_bytes,
            spec: *spec,
            priors: *priors,
            config: *config,
            state: s.state().clone(),
            counters: *s.counters(),
            rng: s.rng().clone(),
        };
        let path = files.checkpoint();
        ck.save(&path)?;
        Ok(path)
    };

    while sampler.iteration() < config.n_iterations {
        if let Err(e) = sampler.step() {
            let _ = wtr.flush();
            if let Error::NonFinite { dump, .. } = &e {
                let p = dir.join(ABORT_FILE);
                fs::write(&p, dump).map_err(|err| Error::io(&p, err))?;
            }
            return Err(Error::Aborted {
                checkpoint: last_checkpoint,
                source: Box::new(e),
            });
        }
        let it = sampler.iteration();
        if config.is_retained(it) {
            wtr.write_record(record_fields(&record_of(&sampler)))?;
            records_written += 1;
        }
        if config.checkpoint_every > 0 && it % config.checkpoint_every == 0 {
            last_checkpoint = Some(save_checkpoint(&sampler, &mut wtr, records_written)?);
        }
    }
    save_checkpoint(&sampler, &mut wtr, records_written)?;
    drop(wtr);

    let out = ChainOutput::load(&chain_path)?;
    let summary = ChainSummary::from_chain(&out)?;
    let p = files.summary();
    fs::write(&p, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&p, e))?;
    Ok(summary)
}

/// Runs `k` independent chains in parallel, chain `i` in `dir/chain_i`.
/// A single chain writes straight into `dir`.
pub fn run_chains_to_dir(
    data: &[f64],
    dt: f64,
    spec: &ModelSpec,
    priors: &PriorSpec,
    config: &McmcConfig,
    chains: u64,
    dir: &Path,
) -> Result<Vec<ChainSummary>> {
    if chains <= 1 {
        return Ok(vec![run_chain_to_dir(data, dt, spec, priors, config, 0, dir, None)?]);
    }
    (0..chains)
        .into_par_iter()
        .map(|k| {
            let sub = dir.join(format!("chain_{k}"));
            run_chain_to_dir(data, dt, spec, priors, config, k, &sub, None)
        })
        .collect()
}
