use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use btrank::bt::{aggregate_comparisons, fit, FitConfig, FitResult};
use btrank::comparators::{Comparator, ComparatorConfig, ComparatorKind};
use btrank::harness::{run_experiment, synthetic_cohort, ExperimentConfig, ExperimentReport};
use btrank::io::{
    read_cohort_csv, read_comparisons_jsonl, write_cohort_csv, write_comparisons_jsonl, write_pairs_jsonl,
};
use btrank::logistic::{fit_logistic, generate_features};
use btrank::pairs::{generate_pairs, PairOrdering};
use btrank::rng::{derive_seed, stream};
use btrank::{Cohort, ComparisonGraph, ComparisonRecord, Error, ItemId};

use crate::render;

pub const RANKING_FORMAT_VERSION: u32 = 1;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or flag values. Exit 1.
    Usage(String),
    /// Unreadable, unparsable or inconsistent input. Exit 2.
    Data(String),
    /// Output was written but the fit hit its iteration cap. Exit 3.
    NotConverged(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::NotConverged(m) => f.write_str(m),
        }
    }
}

/// Writes to stdout; a closed pipe is not an error.
pub fn emit(text: &str) {
    let mut out = io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

type CmdResult = Result<(), Failure>;

fn data(path: &Path, err: impl fmt::Display) -> Failure {
    Failure::Data(format!("{}: {err}", path.display()))
}

fn check_input(path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(data(path, "no such file"))
    }
}

fn check_output(path: &Path) -> CmdResult {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(data(path, "parent directory does not exist")),
        _ => Ok(()),
    }
}

fn read_cohort(path: &Path) -> Result<Cohort, Failure> {
    let file = File::open(path).map_err(|e| data(path, e))?;
    read_cohort_csv(BufReader::new(file)).map_err(|e| data(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| data(path, e))?;
    serde_json::from_str(&text).map_err(|e| data(path, e))
}

/// Writes `path` atomically enough for a CLI: everything or an error.
fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> btrank::Result<()>) -> CmdResult {
    let file = File::create(path).map_err(|e| data(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| data(path, e))?;
    w.flush().map_err(|e| data(path, e))
}

fn write_string(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| data(path, e))
}

pub fn gen_cohort(n: usize, subjects: usize, score_min: f64, score_max: f64, seed: u64, out: &Path) -> CmdResult {
    check_output(out)?;
    let cohort =
        synthetic_cohort(n, subjects, score_min, score_max, seed).map_err(|e| Failure::Usage(e.to_string()))?;
    write_file(out, |w| write_cohort_csv(w, &cohort))
}

pub fn pairs(cohort: &Path, mode: PairOrdering, out: &Path) -> CmdResult {
    check_input(cohort)?;
    check_output(out)?;
    let cohort = read_cohort(cohort)?;
    write_file(out, |w| write_pairs_jsonl(w, &generate_pairs(&cohort, mode)))
}

/// Every unordered pair once. A logistic comparator is first trained on all
/// of the cohort's pairs, so its predictions here are in-sample.
pub fn simulate(cohort_path: &Path, config_path: &Path, seed: u64, out: &Path) -> CmdResult {
    check_input(cohort_path)?;
    check_input(config_path)?;
    check_output(out)?;
    let cohort = read_cohort(cohort_path)?;
    let cfg: ComparatorConfig = read_json(config_path)?;
    cfg.validate().map_err(|e| data(config_path, e))?;
    let mut rng = stream(seed, "simulate", cfg.seed);
    let records = if cfg.kind == ComparatorKind::Logistic {
        let features = generate_features(
            &cohort,
            cfg.features.dim,
            cfg.features.noise_scale,
            derive_seed(cfg.seed, "features", seed),
        )
        .map_err(|e| data(config_path, e))?;
        let model = fit_logistic(
            &generate_pairs(&cohort, PairOrdering::UnorderedOnce),
            &features,
            &cfg.training,
        )
        .map_err(|e| data(cohort_path, e))?;
        Comparator::new(&cfg, &cohort, Some(&features), Some(&model))
            .and_then(|c| c.round_robin(&mut rng))
            .map_err(|e| data(cohort_path, e))?
    } else {
        Comparator::new(&cfg, &cohort, None, None)
            .and_then(|c| c.round_robin(&mut rng))
            .map_err(|e| data(cohort_path, e))?
    };
    write_file(out, |w| write_comparisons_jsonl(w, &records))
}

#[derive(Debug, Serialize)]
pub struct RankedItem {
    pub rank: usize,
    pub id: ItemId,
    pub strength: f64,
}

#[derive(Debug, Serialize)]
pub struct RankingFile {
    pub format_version: u32,
    pub converged: bool,
    pub iterations: usize,
    pub final_delta: f64,
    pub epsilon: f64,
    pub unpaired: Vec<ItemId>,
    pub ranking: Vec<RankedItem>,
}

impl RankingFile {
    fn new(result: &FitResult, epsilon: f64) -> Self {
        let ranking = result
            .ranking()
            .ids()
            .iter()
            .enumerate()
            .map(|(i, id)| RankedItem {
                rank: i + 1,
                id: id.clone(),
                strength: result.strengths.get(id.as_str()).unwrap_or(0.0),
            })
            .collect();
        Self {
            format_version: RANKING_FORMAT_VERSION,
            converged: result.converged,
            iterations: result.iterations_used,
            final_delta: result.final_delta,
            epsilon,
            unpaired: result.unpaired.clone(),
            ranking,
        }
    }
}

fn graph_from_log(records: &[ComparisonRecord]) -> btrank::Result<ComparisonGraph> {
    let mut ids: Vec<ItemId> = records
        .iter()
        .flat_map(|r| [r.winner.clone(), r.loser.clone()])
        .collect();
    ids.sort();
    ids.dedup();
    let mut graph = ComparisonGraph::new(ids)?;
    for r in records {
        graph.add_wins(r.winner.as_str(), r.loser.as_str(), 1)?;
    }
    Ok(graph)
}

pub fn rank(comparisons: &Path, cohort: Option<&Path>, fit_cfg: FitConfig, out: &Path) -> CmdResult {
    check_input(comparisons)?;
    if let Some(c) = cohort {
        check_input(c)?;
    }
    check_output(out)?;
    fit_cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let file = File::open(comparisons).map_err(|e| data(comparisons, e))?;
    let records = read_comparisons_jsonl(BufReader::new(file)).map_err(|e| data(comparisons, e))?;
    if records.is_empty() {
        return Err(data(comparisons, Error::NoComparisons));
    }
    let graph = match cohort {
        Some(path) => aggregate_comparisons(&records, &read_cohort(path)?),
        None => graph_from_log(&records),
    }
    .map_err(|e| data(comparisons, e))?;
    let result = fit(&graph, &fit_cfg).map_err(|e| data(comparisons, e))?;
    let file = RankingFile::new(&result, fit_cfg.epsilon);
    write_string(out, &pretty(&file)?)?;
    emit(&render::ranking_table(&file));
    if !result.converged {
        return Err(Failure::NotConverged(format!(
            "fit did not converge after {} iterations (last change {:e}); ranking written to {}",
            result.iterations_used,
            result.final_delta,
            out.display()
        )));
    }
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Data(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn load_experiment(cohort: &Path, config: &Path) -> Result<(Cohort, ExperimentConfig), Failure> {
    check_input(cohort)?;
    check_input(config)?;
    let cfg: ExperimentConfig = read_json(config)?;
    cfg.validate().map_err(|e| data(config, e))?;
    Ok((read_cohort(cohort)?, cfg))
}

fn not_converged(report: &ExperimentReport, out: &Path) -> CmdResult {
    if report.all_converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "a fold's fit did not converge; report written to {}",
            out.display()
        )))
    }
}

pub fn eval(cohort_path: &Path, config_path: &Path, out: &Path) -> CmdResult {
    check_output(out)?;
    let (cohort, cfg) = load_experiment(cohort_path, config_path)?;
    let report = run_experiment(&cohort, &cfg).map_err(|e| data(cohort_path, e))?;
    write_string(out, &report.to_json().map_err(|e| data(out, e))?)?;
    emit(&format!("{}\n", render::summary_line(&report)));
    not_converged(&report, out)
}

fn percentile_label(p: f64) -> String {
    p.to_string().replace('.', "_")
}

pub fn ablate(cohort_path: &Path, config_path: &Path, percentiles: &[f64], out_dir: &Path) -> CmdResult {
    if percentiles.is_empty() {
        return Err(Failure::Usage("--percentiles is empty".into()));
    }
    if let Some(&p) = percentiles.iter().find(|&&p| !(p > 0.0 && p <= 100.0)) {
        return Err(Failure::Usage(Error::PercentileOutOfRange(p).to_string()));
    }
    let (cohort, base) = load_experiment(cohort_path, config_path)?;
    fs::create_dir_all(out_dir).map_err(|e| data(out_dir, e))?;

    let reports: Vec<btrank::Result<ExperimentReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = percentiles
            .iter()
            .map(|&p| {
                let cfg = ExperimentConfig {
                    percentile: p,
                    ..base.clone()
                };
                let cohort = &cohort;
                scope.spawn(move || run_experiment(cohort, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    });

    let mut rows = Vec::with_capacity(reports.len());
    let mut first_unconverged = None;
    for (report, &p) in reports.into_iter().zip(percentiles) {
        let report = report.map_err(|e| data(cohort_path, e))?;
        let path = out_dir.join(format!("report_p{}.json", percentile_label(p)));
        write_string(&path, &report.to_json().map_err(|e| data(&path, e))?)?;
        if !report.all_converged && first_unconverged.is_none() {
            first_unconverged = Some(path);
        }
        rows.push(report);
    }
    let csv_path = out_dir.join("ablation.csv");
    write_string(&csv_path, &render::ablation_csv(&rows))?;
    emit(&render::ablation_table(&rows));
    match first_unconverged {
        Some(path) => Err(Failure::NotConverged(format!(
            "a fold's fit did not converge (first: {}); all reports written",
            path.display()
        ))),
        None => Ok(()),
    }
}

pub fn report(input: &Path, csv: bool) -> CmdResult {
    check_input(input)?;
    let report: ExperimentReport = read_json(input)?;
    let text = if csv {
        render::ablation_csv(std::slice::from_ref(&report))
    } else {
        render::report_text(&report)
    };
    emit(&text);
    Ok(())
}
