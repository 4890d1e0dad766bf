//! Command-line plumbing: extract → optimize → generate → check as
//! composable stages over JSON artifacts, plus crosscheck, report, and a
//! single-shot run.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::{self, CostTable, MergePlan};
use crate::propgen::{self, PropertyIR};
use crate::refmodel::{self, CheckBudget, CheckReport, Verdict, DEFAULT_SEED};
use crate::spec_model::{
    self, CostTableRef, ModelOfThings, OptimizeAlgorithm, PropertyClass, Severity,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Spec { path: String, source: spec_model::SpecError },
    #[error("{path}: {source}")]
    Plan { path: String, source: optimizer::OptimizerError },
    #[error("{path}: {source}")]
    Sva { path: String, source: propgen::PropgenError },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Model(#[from] refmodel::RefModelError),
    #[error("{0}")]
    Optimizer(#[from] optimizer::OptimizerError),
    #[error("{0}")]
    Propgen(#[from] propgen::PropgenError),
}

#[derive(Debug, Parser)]
#[command(name = "sffkit", about = "Safety flip-flop register toolkit", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct OptimizeFlags {
    /// Packing algorithm, overriding the <options> element.
    #[arg(long, value_parser = parse_alg)]
    pub alg: Option<OptimizeAlgorithm>,
    /// Maximum merged register width, overriding the <options> element.
    #[arg(long)]
    pub max_width: Option<u32>,
    /// Cost table: builtin-linear, builtin-paper, or a CSV path.
    #[arg(long)]
    pub cost_table: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct CheckFlags {
    /// PRNG seed for sampled sweeps.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Exhaustive fault enumeration up to this codeword width.
    #[arg(long, default_value_t = 13)]
    pub exhaustive_limit: u32,
    /// Emit machine-readable JSON lines instead of the summary table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a register-safety XML spec into model JSON on stdout.
    Extract {
        xml: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pack protections into merged wrappers; emits a model+plan bundle.
    Optimize {
        /// Model JSON file, or '-' for stdin.
        #[arg(default_value = "-")]
        input: String,
        #[command(flatten)]
        opt: OptimizeFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate SVA property files from a bundle into --out.
    Generate {
        /// Bundle JSON file, or '-' for stdin.
        #[arg(default_value = "-")]
        input: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check generated properties against the behavioral model.
    Check {
        /// Bundle JSON file, or '-' for stdin.
        #[arg(default_value = "-")]
        input: String,
        /// Directory holding the generated .sva files; reports land here too.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        check: CheckFlags,
    },
    /// Compare two merge plans for semantic equivalence.
    Crosscheck {
        plan_a: PathBuf,
        plan_b: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Summarize a reports.jsonl file per property class.
    Report {
        reports: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Full flow: extract, optimize, generate, check, into --out.
    Run {
        xml: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opt: OptimizeFlags,
        #[command(flatten)]
        check: CheckFlags,
    },
}

fn parse_alg(s: &str) -> Result<OptimizeAlgorithm, String> {
    OptimizeAlgorithm::from_name(s).ok_or_else(|| format!("expected none, bfd, or ilp, got '{}'", s))
}

/// The inter-stage artifact produced by `optimize` and consumed downstream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bundle {
    pub model: ModelOfThings,
    pub plan: MergePlan,
}

impl Bundle {
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle is serializable")
    }
}

fn read_input(input: &str) -> Result<(String, String), CliError> {
    if input == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| CliError::Io { path: "<stdin>".into(), message: e.to_string() })?;
        Ok(("<stdin>".into(), buf))
    } else {
        let text = fs::read_to_string(input)
            .map_err(|e| CliError::Io { path: input.into(), message: e.to_string() })?;
        Ok((input.to_string(), text))
    }
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io { path: dir.display().to_string(), message: e.to_string() })?;
    let path = dir.join(name);
    fs::write(&path, content)
        .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn load_mot(path: &str, text: &str) -> Result<ModelOfThings, CliError> {
    ModelOfThings::from_json(text).map_err(|e| CliError::Spec { path: path.into(), source: e })
}

fn load_bundle(path: &str, text: &str) -> Result<Bundle, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Io { path: path.into(), message: e.to_string() })
}

fn resolve_cost_table(
    mot: &ModelOfThings,
    flag: &Option<String>,
    max_width: u32,
) -> Result<CostTable, CliError> {
    let table_ref = match flag {
        Some(s) => CostTableRef::from_str(s),
        None => mot.options.cost_table.clone(),
    };
    Ok(match table_ref {
        CostTableRef::BuiltinLinear => CostTable::builtin_linear(max_width),
        CostTableRef::BuiltinPaper => CostTable::builtin_paper(max_width),
        CostTableRef::Path(p) => {
            let text = fs::read_to_string(&p)
                .map_err(|e| CliError::Io { path: p.clone(), message: e.to_string() })?;
            CostTable::from_csv(&text).map_err(|e| CliError::Plan { path: p, source: e })?
        }
    })
}

fn stage_extract(xml_path: &Path) -> Result<(ModelOfThings, Vec<spec_model::Diagnostic>), CliError> {
    let text = fs::read_to_string(xml_path)
        .map_err(|e| CliError::Io { path: xml_path.display().to_string(), message: e.to_string() })?;
    let mot = spec_model::parse_spec(&text)
        .map_err(|e| CliError::Spec { path: xml_path.display().to_string(), source: e })?;
    let diags = spec_model::validate_mot(&mot);
    Ok((mot, diags))
}

fn stage_optimize(mut mot: ModelOfThings, opt: &OptimizeFlags) -> Result<Bundle, CliError> {
    if let Some(alg) = opt.alg {
        mot.options.algorithm = alg;
    }
    if let Some(w) = opt.max_width {
        mot.options.max_merged_width = w;
    }
    let costs = resolve_cost_table(&mot, &opt.cost_table, mot.options.max_merged_width)?;
    let plan = optimizer::pack(&mot, mot.options.algorithm, &costs)?;
    Ok(Bundle { model: mot, plan })
}

/// Writes mot.json, plan.json, and the .sva files into `out`.
fn stage_generate(bundle: &Bundle, out: &Path) -> Result<Vec<PropertyIR>, CliError> {
    let props = propgen::generate_all(&bundle.model, &bundle.plan);
    propgen::validate_props(&props, &bundle.plan)?;
    write_out(out, "mot.json", &bundle.model.to_canonical_json())?;
    write_out(out, "plan.json", &bundle.plan.to_canonical_json())?;
    for (name, content) in propgen::emit_sva(&props, &bundle.model, &bundle.plan) {
        write_out(out, &name, &content)?;
    }
    Ok(props)
}

/// Parses the .sva files back out of `out`, checks each property, writes
/// reports.jsonl. Properties are checked in name order.
fn stage_check(bundle: &Bundle, out: &Path, budget: &CheckBudget) -> Result<Vec<CheckReport>, CliError> {
    let mut props: Vec<PropertyIR> = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(out)
        .map_err(|e| CliError::Io { path: out.display().to_string(), message: e.to_string() })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "sva").unwrap_or(false))
        .collect();
    entries.sort();
    for path in entries {
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
        props.extend(
            propgen::parse_sva(&text)
                .map_err(|e| CliError::Sva { path: path.display().to_string(), source: e })?,
        );
    }
    props.sort_by(|a, b| a.name.cmp(&b.name));

    let structure = refmodel::elaborate(&bundle.model, &bundle.plan)?;
    let reports = refmodel::check_all(&structure, &props, budget)?;
    let jsonl: String = reports.iter().map(|r| r.to_json_line() + "\n").collect();
    write_out(out, "reports.jsonl", &jsonl)?;
    Ok(reports)
}

fn budget_from_flags(flags: &CheckFlags) -> CheckBudget {
    CheckBudget {
        seed: flags.seed,
        exhaustive_bit_limit: flags.exhaustive_limit,
        ..CheckBudget::default()
    }
}

fn summarize(reports: &[CheckReport], json: bool) -> (String, i32) {
    if json {
        let lines: String = reports.iter().map(|r| r.to_json_line() + "\n").collect();
        let code = if reports.iter().any(|r| r.verdict == Verdict::Fail) { EXIT_FINDINGS } else { EXIT_OK };
        return (lines, code);
    }
    let mut text = String::from("class         pass  fail  vacuous  states\n");
    let mut any_fail = false;
    for class in PropertyClass::ALL {
        let rs: Vec<&CheckReport> = reports.iter().filter(|r| r.class == class).collect();
        if rs.is_empty() {
            continue;
        }
        let pass = rs.iter().filter(|r| r.verdict == Verdict::Pass).count();
        let fail = rs.iter().filter(|r| r.verdict == Verdict::Fail).count();
        let vac = rs.iter().filter(|r| r.verdict == Verdict::Vacuous).count();
        let states: u64 = rs.iter().map(|r| r.states_explored).sum();
        any_fail |= fail > 0;
        text.push_str(&format!("{:<13} {:>4}  {:>4}  {:>7}  {:>6}\n", class.name(), pass, fail, vac, states));
    }
    for r in reports.iter().filter(|r| r.verdict == Verdict::Fail) {
        text.push_str(&format!("FAIL {}\n", r.property_name));
        for t in &r.trace {
            text.push_str(&format!("  cycle {}: {} = {}\n", t.cycle, t.signal, t.value));
        }
    }
    let code = if any_fail { EXIT_FINDINGS } else { EXIT_OK };
    (text, code)
}

/// Executes a parsed command; returns (stdout text, exit code).
pub fn execute(cli: Cli) -> Result<(String, i32), CliError> {
    match cli.command {
        Command::Extract { xml, out } => {
            let (mot, diags) = stage_extract(&xml)?;
            let json = mot.to_canonical_json();
            if let Some(dir) = &out {
                write_out(dir, "mot.json", &json)?;
            }
            let mut code = EXIT_OK;
            for d in &diags {
                eprintln!("{}", d);
                if d.severity == Severity::Error {
                    code = EXIT_FINDINGS;
                }
            }
            Ok((json, code))
        }
        Command::Optimize { input, opt, out } => {
            let (path, text) = read_input(&input)?;
            let mot = load_mot(&path, &text)?;
            let bundle = stage_optimize(mot, &opt)?;
            if let Some(dir) = &out {
                write_out(dir, "plan.json", &bundle.plan.to_canonical_json())?;
            }
            Ok((bundle.to_canonical_json() + "\n", EXIT_OK))
        }
        Command::Generate { input, out } => {
            let (path, text) = read_input(&input)?;
            let bundle = load_bundle(&path, &text)?;
            stage_generate(&bundle, &out)?;
            Ok((bundle.to_canonical_json() + "\n", EXIT_OK))
        }
        Command::Check { input, out, check } => {
            let (path, text) = read_input(&input)?;
            let bundle = load_bundle(&path, &text)?;
            let reports = stage_check(&bundle, &out, &budget_from_flags(&check))?;
            Ok(summarize(&reports, check.json))
        }
        Command::Crosscheck { plan_a, plan_b, json } => {
            let a = load_plan(&plan_a)?;
            let b = load_plan(&plan_b)?;
            let diags = optimizer::crosscheck_plans(&a, &b);
            let text = if json {
                serde_json::to_string_pretty(&diags).expect("diagnostics serialize") + "\n"
            } else if diags.is_empty() {
                "plans are equivalent\n".to_string()
            } else {
                diags.iter().map(|d| format!("{}\n", d)).collect()
            };
            let code = if diags.iter().any(|d| d.severity == Severity::Error) {
                EXIT_FINDINGS
            } else {
                EXIT_OK
            };
            Ok((text, code))
        }
        Command::Report { reports, json } => {
            let text = fs::read_to_string(&reports)
                .map_err(|e| CliError::Io { path: reports.display().to_string(), message: e.to_string() })?;
            let mut parsed = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let r: CheckReport = serde_json::from_str(line).map_err(|e| CliError::Io {
                    path: format!("{}:{}", reports.display(), i + 1),
                    message: e.to_string(),
                })?;
                parsed.push(r);
            }
            Ok(summarize(&parsed, json))
        }
        Command::Run { xml, out, opt, check } => {
            let (mot, diags) = stage_extract(&xml)?;
            if diags.iter().any(|d| d.severity == Severity::Error) {
                let text: String = diags.iter().map(|d| format!("{}\n", d)).collect();
                return Ok((text, EXIT_FINDINGS));
            }
            let bundle = stage_optimize(mot, &opt)?;
            stage_generate(&bundle, &out)?;
            let reports = stage_check(&bundle, &out, &budget_from_flags(&check))?;
            Ok(summarize(&reports, check.json))
        }
    }
}

fn load_plan(path: &Path) -> Result<MergePlan, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
    MergePlan::from_json(&text).map_err(|e| CliError::Plan { path: path.display().to_string(), source: e })
}
