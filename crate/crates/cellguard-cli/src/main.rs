//! Command-line surface: predict a target cell, dump runtime context, run
//! corpus evaluations and ablations, emit sampling plans, rebuild report
//! tables, and compute inter-rater agreement.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use cellguard::context::ContextConfig;
use cellguard::eval::{
    self, cohens_kappa, load_benchmark, load_prediction_records, report, sample_size,
    stratified_sample, StratifyKey,
};
use cellguard::gateway::{provider_from_spec, Provider, ProviderProfile};
use cellguard::pipeline::{
    self, detection_records, end_to_end_records, evaluate, extract_context, predict_file,
    write_records, KernelSpec, PredictOptions,
};
use cellguard::DuplicatePolicy;

#[derive(Parser)]
#[command(
    name = "cellguard",
    about = "Pre-execution crash detection and diagnosis for ML notebooks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct KernelArgs {
    /// Synthetic kernel fixture (JSON namespace description).
    #[arg(long)]
    kernel_fixture: Option<PathBuf>,
    /// Replay executed cells in a fresh kernel.
    #[arg(long, conflicts_with_all = ["kernel_fixture", "attach"])]
    replay: bool,
    /// Attach to an existing live session.
    #[arg(long, conflicts_with = "kernel_fixture")]
    attach: bool,
}

impl KernelArgs {
    fn spec(&self) -> KernelSpec {
        if let Some(path) = &self.kernel_fixture {
            KernelSpec::Fixture(path.clone())
        } else if self.attach {
            KernelSpec::Attach
        } else if self.replay {
            KernelSpec::Replay
        } else {
            KernelSpec::Empty
        }
    }
}

#[derive(Args, Clone)]
struct QueryArgs {
    /// Context configuration: +RT, -RT, +RT-S, +RT-R, +RT-V, +RT+D.
    #[arg(long, default_value = "+RT", allow_hyphen_values = true)]
    config: String,
    /// Provider spec: `mock:<script.jsonl>` or a profile file path.
    #[arg(long)]
    provider: String,
    /// Number of vote instances (odd).
    #[arg(long, default_value_t = 5)]
    votes: usize,
    /// Sampling temperature, passed when the provider supports it.
    #[arg(long, default_value_t = 0.01)]
    temperature: f64,
    /// Accept duplicate execution counts, keeping the last occurrence.
    #[arg(long)]
    last_count_wins: bool,
}

impl QueryArgs {
    fn options(&self) -> Result<PredictOptions, String> {
        let config = ContextConfig::parse(&self.config).map_err(|e| e.to_string())?;
        Ok(PredictOptions {
            config,
            votes: self.votes,
            temperature: self.temperature,
            duplicate_policy: if self.last_count_wins {
                DuplicatePolicy::LastWins
            } else {
                DuplicatePolicy::Error
            },
            ..PredictOptions::default()
        })
    }

    fn provider(&self) -> Result<(ProviderProfile, Arc<dyn Provider>), String> {
        provider_from_spec(&self.provider).map_err(|e| e.to_string())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Predict whether a target cell will crash. Exit code 0 = no crash
    /// predicted, 2 = crash predicted, 1 = pipeline error.
    Predict {
        notebook: PathBuf,
        /// Target cell index (position in the file).
        #[arg(long)]
        cell: usize,
        #[command(flatten)]
        query: QueryArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Write the prediction record to this file (JSON line).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract the runtime context for a target cell and print its
    /// canonical JSON document.
    Extract {
        notebook: PathBuf,
        #[arg(long)]
        cell: usize,
        /// Context configuration to apply before dumping.
        #[arg(long, default_value = "+RT", allow_hyphen_values = true)]
        config: String,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every manifest case under one or more configurations.
    Evaluate {
        manifest: PathBuf,
        /// Configurations, repeatable: -c +RT -c -RT
        #[arg(short = 'c', long = "config", default_values = ["+RT", "-RT"], allow_hyphen_values = true)]
        configs: Vec<String>,
        #[arg(long)]
        provider: String,
        #[arg(long, default_value_t = 5)]
        votes: usize,
        #[arg(long, default_value_t = 0.01)]
        temperature: f64,
        /// Parallel cases.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Diagnosis judgments for end-to-end tables.
        #[arg(long)]
        judgments: Option<PathBuf>,
        /// Output directory for records and reports.
        #[arg(long, default_value = "eval-out")]
        out: PathBuf,
    },
    /// Leave-one-category-out ablation: evaluate +RT, +RT-S, +RT-V, +RT-R.
    Ablate {
        manifest: PathBuf,
        #[arg(long)]
        provider: String,
        #[arg(long, default_value_t = 5)]
        votes: usize,
        #[arg(long, default_value_t = 0.01)]
        temperature: f64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "ablate-out")]
        out: PathBuf,
    },
    /// Emit a stratified sampling plan over manifest cases or over
    /// diagnosis-applicable prediction records.
    Sample {
        manifest: PathBuf,
        /// Target sample size; defaults to the sample-size formula over the
        /// population at Z=1.96, p=0.5, E=0.05.
        #[arg(long)]
        target: Option<usize>,
        /// Stratification key over manifest cases.
        #[arg(long, default_value = "library_cause", value_parser = ["library_cause", "root_cause"])]
        by: String,
        /// Prediction records; when given, the population is the
        /// diagnosis-applicable records stratified by (llm, config).
        #[arg(long)]
        records: Option<PathBuf>,
        /// Sampling seed (mandatory).
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild report tables from record files.
    Report {
        manifest: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        judgments: Option<PathBuf>,
        #[arg(long, default_value = "report-out")]
        out: PathBuf,
    },
    /// Cohen's kappa between every pair of judges in a judgment file.
    Kappa { judgments: PathBuf },
}

fn write_or_print(path: Option<&Path>, content: &str) -> std::io::Result<()> {
    match path {
        Some(path) => std::fs::write(path, content),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn write_report(out_dir: &Path, name: &str, report: &report::Report) -> std::io::Result<()> {
    std::fs::write(out_dir.join(format!("{name}.txt")), &report.text)?;
    std::fs::write(
        out_dir.join(format!("{name}.json")),
        serde_json::to_string_pretty(&report.json).expect("report json"),
    )
}

fn emit_reports(
    out_dir: &Path,
    prefix: &str,
    records: &[eval::OutcomeRecord],
    configs: &[String],
) -> std::io::Result<()> {
    let main = report::build_main_report(
        records,
        configs,
        &["precision", "recall", "f1", "accuracy"],
        &format!("{prefix} results"),
    );
    write_report(out_dir, &format!("{prefix}_report"), &main)?;
    let by_library = report::build_stratified_report(
        records,
        StratifyKey::LibraryCause,
        &format!("{prefix} by library cause"),
    );
    write_report(out_dir, &format!("{prefix}_by_library"), &by_library)?;
    let by_root = report::build_stratified_report(
        records,
        StratifyKey::RootCause,
        &format!("{prefix} by root cause"),
    );
    write_report(out_dir, &format!("{prefix}_by_root_cause"), &by_root)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_evaluate(
    manifest: &Path,
    config_tokens: &[String],
    provider_spec: &str,
    votes: usize,
    temperature: f64,
    jobs: usize,
    judgments: Option<&Path>,
    out_dir: &Path,
) -> Result<(), String> {
    let configs: Vec<ContextConfig> = config_tokens
        .iter()
        .map(|t| ContextConfig::parse(t).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let (profile, provider) = provider_from_spec(provider_spec).map_err(|e| e.to_string())?;
    let opts = PredictOptions {
        votes,
        temperature,
        ..PredictOptions::default()
    };
    std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;

    let run =
        evaluate(manifest, &configs, provider, &profile, &opts, jobs).map_err(|e| e.to_string())?;
    for warning in &run.warnings {
        eprintln!("warning: {warning}");
    }
    for failure in &run.failures {
        eprintln!("failure: {failure}");
    }
    write_records(&run.records, &out_dir.join("records.jsonl")).map_err(|e| e.to_string())?;

    let load = load_benchmark(manifest).map_err(|e| e.to_string())?;
    let config_names: Vec<String> = configs.iter().map(|c| c.name()).collect();
    let detection = detection_records(&run.records, &load.cases);
    emit_reports(out_dir, "detection", &detection, &config_names).map_err(|e| e.to_string())?;

    if let Some(judgments_path) = judgments {
        let judgments =
            pipeline::load_judgments_opt(Some(judgments_path)).map_err(|e| e.to_string())?;
        let e2e =
            end_to_end_records(&run.records, &load.cases, &judgments).map_err(|e| e.to_string())?;
        emit_reports(out_dir, "end_to_end", &e2e, &config_names).map_err(|e| e.to_string())?;
    }

    println!(
        "evaluated {} records over {} configs; reports in {}",
        run.records.len(),
        configs.len(),
        out_dir.display()
    );
    if !run.failures.is_empty() {
        println!("{} case(s) failed; see stderr", run.failures.len());
    }
    Ok(())
}

fn run() -> Result<ExitCode, String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Predict {
            notebook,
            cell,
            query,
            kernel,
            out,
        } => {
            let opts = query.options()?;
            let (profile, provider) = query.provider()?;
            let output = predict_file(
                &notebook,
                cell,
                &kernel.spec(),
                provider.as_ref(),
                &profile,
                &opts,
            )
            .map_err(|e| e.to_string())?;
            let line = serde_json::to_string(&output.record).expect("record serializes");
            write_or_print(out.as_deref(), &line).map_err(|e| e.to_string())?;
            if output.record.detection {
                eprintln!("crash predicted: {}", output.record.reasoning);
                Ok(ExitCode::from(2))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Extract {
            notebook,
            cell,
            config,
            kernel,
            out,
        } => {
            let mut opts = PredictOptions::default();
            opts.config = ContextConfig::parse(&config).map_err(|e| e.to_string())?;
            let ctx =
                extract_context(&notebook, cell, &kernel.spec(), &opts).map_err(|e| e.to_string())?;
            write_or_print(out.as_deref(), &ctx.to_canonical_json()).map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            manifest,
            configs,
            provider,
            votes,
            temperature,
            jobs,
            judgments,
            out,
        } => {
            run_evaluate(
                &manifest,
                &configs,
                &provider,
                votes,
                temperature,
                jobs,
                judgments.as_deref(),
                &out,
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Ablate {
            manifest,
            provider,
            votes,
            temperature,
            jobs,
            out,
        } => {
            let configs: Vec<String> = ["+RT", "+RT-S", "+RT-V", "+RT-R"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            run_evaluate(&manifest, &configs, &provider, votes, temperature, jobs, None, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sample {
            manifest,
            target,
            by,
            records,
            seed,
            out,
        } => {
            let load = load_benchmark(&manifest).map_err(|e| e.to_string())?;
            let population: Vec<(String, String)> = match &records {
                Some(records_path) => {
                    let records =
                        load_prediction_records(records_path).map_err(|e| e.to_string())?;
                    let labels: std::collections::BTreeMap<&str, bool> = load
                        .cases
                        .iter()
                        .map(|c| (c.case_id.as_str(), c.crash_label))
                        .collect();
                    records
                        .iter()
                        .filter(|r| {
                            r.detection && labels.get(r.case_id.as_str()).copied().unwrap_or(false)
                        })
                        .map(|r| {
                            (
                                format!("{}::{}", r.case_id, r.config),
                                format!("{} ({})", r.llm, r.config),
                            )
                        })
                        .collect()
                }
                None => load
                    .cases
                    .iter()
                    .map(|c| {
                        let stratum = match by.as_str() {
                            "root_cause" => c.root_cause.as_str().to_string(),
                            _ => c.library_cause.as_str().to_string(),
                        };
                        (c.case_id.clone(), stratum)
                    })
                    .collect(),
            };
            let target = target.unwrap_or_else(|| sample_size(population.len() as u64) as usize);
            let plan = stratified_sample(&population, target, seed).map_err(|e| e.to_string())?;
            let rendered = serde_json::to_string_pretty(&plan).expect("plan serializes");
            write_or_print(out.as_deref(), &rendered).map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report {
            manifest,
            records,
            judgments,
            out,
        } => {
            let load = load_benchmark(&manifest).map_err(|e| e.to_string())?;
            let records = load_prediction_records(&records).map_err(|e| e.to_string())?;
            let mut config_names: Vec<String> = Vec::new();
            for record in &records {
                if !config_names.contains(&record.config) {
                    config_names.push(record.config.clone());
                }
            }
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            let detection = detection_records(&records, &load.cases);
            emit_reports(&out, "detection", &detection, &config_names)
                .map_err(|e| e.to_string())?;
            if let Some(judgments_path) = judgments {
                let judgments = pipeline::load_judgments_opt(Some(judgments_path.as_path()))
                    .map_err(|e| e.to_string())?;
                let e2e = end_to_end_records(&records, &load.cases, &judgments)
                    .map_err(|e| e.to_string())?;
                emit_reports(&out, "end_to_end", &e2e, &config_names)
                    .map_err(|e| e.to_string())?;
            }
            println!("reports written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Kappa { judgments } => {
            let all = pipeline::load_judgments_opt(Some(judgments.as_path()))
                .map_err(|e| e.to_string())?;
            let mut judges: Vec<String> = Vec::new();
            for j in &all {
                if !judges.contains(&j.judge_id) {
                    judges.push(j.judge_id.clone());
                }
            }
            judges.sort();
            if judges.len() < 2 {
                return Err("need judgments from at least two judges".into());
            }
            for i in 0..judges.len() {
                for j in (i + 1)..judges.len() {
                    let a_map: std::collections::BTreeMap<&str, &str> = all
                        .iter()
                        .filter(|x| x.judge_id == judges[i])
                        .map(|x| (x.case_id.as_str(), verdict_str(x)))
                        .collect();
                    let b_map: std::collections::BTreeMap<&str, &str> = all
                        .iter()
                        .filter(|x| x.judge_id == judges[j])
                        .map(|x| (x.case_id.as_str(), verdict_str(x)))
                        .collect();
                    let mut a_labels = Vec::new();
                    let mut b_labels = Vec::new();
                    for (case, a_verdict) in &a_map {
                        if let Some(b_verdict) = b_map.get(case) {
                            a_labels.push(*a_verdict);
                            b_labels.push(*b_verdict);
                        }
                    }
                    if a_labels.is_empty() {
                        println!("{} vs {}: no shared cases", judges[i], judges[j]);
                        continue;
                    }
                    let kappa = cohens_kappa(&a_labels, &b_labels).map_err(|e| e.to_string())?;
                    println!(
                        "{} vs {}: kappa = {:.4} over {} shared case(s)",
                        judges[i],
                        judges[j],
                        kappa,
                        a_labels.len()
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn verdict_str(j: &eval::DiagnosisJudgment) -> &'static str {
    match j.verdict {
        eval::Verdict::Correct => "correct",
        eval::Verdict::PartiallyCorrect => "partially_correct",
        eval::Verdict::ReasoningWrong => "reasoning_wrong",
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
