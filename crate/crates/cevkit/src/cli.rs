//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on internal errors, 2 on input errors
//! (unreadable or invalid files, bad flags, pages that failed to evaluate).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::builder::BoolishValueParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use cevkit_core::charvec::{CountUnit, NormalizationPolicy, UnicodeForm};
use cevkit_core::decompose::{decompose, triage, BuildOptions, Dominant, Measure, TriageThresholds};
use cevkit_core::geometry::{Granularity, InferenceOptions};
use cevkit_core::simulate::{
    classification_f1, crop_samples_for_page, cycled_spec, generate_page, page_seed, simulate_cell, summarize_crops,
    LayoutSpec, PipelineConfig,
};

use crate::eval::{decompose_page, score_page, EvalOptions};
use crate::io::{load_alto, load_page_json, page_to_json, read_file, PageDocument};
use crate::report::{
    crop_samples_to_csv, fmt_g, granularity_summary_to_csv, pipeline_to_csv, report_to_csv, report_to_json,
    PageReport, PipelineRow, ReportDocument,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitArg {
    Character,
    Word,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Spacer,
    Spacd,
    SpacdSymmetric,
    CddJsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnicodeArg {
    Nfc,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GranularityArg {
    Word,
    Line,
    Paragraph,
    Page,
}

#[derive(Debug, Parser)]
#[command(name = "cevkit", version, about = "Character error vector evaluation of OCR and layout pipelines")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Counting unit for character vectors.
    #[arg(long, global = true, value_enum, default_value_t = UnitArg::Character)]
    pub unit: UnitArg,
    /// Distance used for the decomposition.
    #[arg(long, global = true, value_enum, default_value_t = MeasureArg::Spacer)]
    pub measure: MeasureArg,
    /// Start from the raw policy (no normalization, spaces counted).
    #[arg(long, global = true)]
    pub policy_raw: bool,
    #[arg(long, global = true, value_parser = BoolishValueParser::new())]
    pub policy_lowercase: Option<bool>,
    #[arg(long, global = true, value_parser = BoolishValueParser::new())]
    pub policy_unify_punctuation: Option<bool>,
    #[arg(long, global = true, value_parser = BoolishValueParser::new())]
    pub policy_collapse_whitespace: Option<bool>,
    #[arg(long, global = true, value_parser = BoolishValueParser::new())]
    pub policy_count_spaces: Option<bool>,
    #[arg(long, global = true, value_enum)]
    pub policy_unicode: Option<UnicodeArg>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every logical core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report format (simulations always write CSV, convert always JSON).
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Page-level SpACER, SpACD, CDD and CER of predictions.
    Score(ScoreArgs),
    /// Parsing/OCR/interaction decomposition with COTe and triage.
    Decompose(EvalArgs),
    /// Same evaluation as `decompose`, with a verdict summary on stderr.
    Triage(EvalArgs),
    /// Random-crop membership error of word, line and paragraph inference.
    SimulateGranularity(GranularityArgs),
    /// Triage on a synthetic corpus of perturbed parses and OCR noise.
    SimulatePipeline(PipelineArgs),
    /// ALTO XML to PageDocument JSON.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// PageDocument files or directories of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Also report micro SpACER from IoU-paired regions (SpACER only).
    #[arg(long)]
    pub micro: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub ratio_threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    pub cote_threshold: f64,
    /// Ground-truth level used for Q and R; the finest present by default.
    #[arg(long, value_enum)]
    pub granularity: Option<GranularityArg>,
}

#[derive(Debug, Args)]
pub struct GranularityArgs {
    #[arg(long, default_value_t = 20)]
    pub pages: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
    pub width_fracs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
    pub height_fracs: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Also write median/mean per granularity and crop size here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, default_value_t = 49)]
    pub pages: usize,
    /// Also write triage F1 scores here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
}

impl GlobalArgs {
    pub fn policy(&self) -> NormalizationPolicy {
        let mut p = if self.policy_raw {
            NormalizationPolicy::raw()
        } else {
            NormalizationPolicy::default()
        };
        if let Some(v) = self.policy_lowercase {
            p.lowercase = v;
        }
        if let Some(v) = self.policy_unify_punctuation {
            p.unify_punctuation = v;
        }
        if let Some(v) = self.policy_collapse_whitespace {
            p.collapse_whitespace = v;
        }
        if let Some(v) = self.policy_count_spaces {
            p.count_spaces = v;
        }
        if let Some(u) = self.policy_unicode {
            p.unicode_form = match u {
                UnicodeArg::Nfc => UnicodeForm::ComposedCanonical,
                UnicodeArg::None => UnicodeForm::None,
            };
        }
        p
    }

    pub fn unit(&self) -> CountUnit {
        match self.unit {
            UnitArg::Character => CountUnit::Character,
            UnitArg::Word => CountUnit::Word,
        }
    }

    pub fn measure(&self) -> Measure {
        match self.measure {
            MeasureArg::Spacer => Measure::Spacer,
            MeasureArg::Spacd => Measure::Spacd,
            MeasureArg::SpacdSymmetric => Measure::SpacdSymmetric,
            MeasureArg::CddJsd => Measure::CddJsd,
        }
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))
    }

    fn write_output(&self, bytes: &[u8]) -> CliResult {
        match &self.out {
            Some(path) => write_file(path, bytes),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::Internal(e.to_string()))
            }
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    std::fs::write(path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn granularity(g: GranularityArg) -> Granularity {
    match g {
        GranularityArg::Word => Granularity::Word,
        GranularityArg::Line => Granularity::Line,
        GranularityArg::Paragraph => Granularity::Paragraph,
        GranularityArg::Page => Granularity::Page,
    }
}

/// Files named directly, plus the `*.json` files of named directories in
/// name order.
pub fn expand_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in inputs {
        let meta = std::fs::metadata(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if meta.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(path.clone());
        }
    }
    Ok(out)
}

fn page_id_fallback(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn evaluate_files(
    global: &GlobalArgs,
    inputs: &[PathBuf],
    f: impl Fn(&crate::io::LoadedPage, &str) -> PageReport + Sync,
) -> CliResult<Vec<PageReport>> {
    let files = expand_inputs(inputs)?;
    let pool = global.pool()?;
    Ok(pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let source = path.display().to_string();
                match read_file(path).and_then(|b| load_page_json(&b)) {
                    Ok(page) => f(&page, &source),
                    Err(e) => PageReport::failed(page_id_fallback(path), source, e.to_string()),
                }
            })
            .collect()
    }))
}

fn emit_report(global: &GlobalArgs, report: &ReportDocument) -> CliResult {
    let bytes = match global.format {
        FormatArg::Json => report_to_json(report).into_bytes(),
        FormatArg::Csv => report_to_csv(report).map_err(|e| CliError::Internal(e.to_string()))?,
    };
    global.write_output(&bytes)?;
    let failed: Vec<&PageReport> = report.pages.iter().filter(|p| p.error.is_some()).collect();
    if failed.is_empty() {
        return Ok(());
    }
    for p in &failed {
        log::error!("{}: {}", p.source, p.error.as_deref().unwrap_or_default());
    }
    Err(CliError::Input(format!(
        "{} of {} pages failed:\n{}",
        failed.len(),
        report.pages.len(),
        failed
            .iter()
            .map(|p| format!("  {}: {}", p.source, p.error.as_deref().unwrap_or_default()))
            .collect::<Vec<_>>()
            .join("\n")
    )))
}

fn eval_options(global: &GlobalArgs, thresholds: TriageThresholds, level: Option<GranularityArg>, micro: bool) -> CliResult<EvalOptions> {
    for (name, v) in [("ratio", thresholds.ratio), ("cote", thresholds.cote)] {
        if !v.is_finite() {
            return Err(CliError::Input(format!("{name} threshold must be finite")));
        }
    }
    if micro && global.measure != MeasureArg::Spacer {
        return Err(CliError::Input("--micro is only defined for --measure spacer".into()));
    }
    let mut build = BuildOptions::new(global.policy(), global.unit());
    build.granularity = level.map(granularity);
    Ok(EvalOptions {
        build,
        measure: global.measure(),
        thresholds,
        micro,
    })
}

fn cmd_score(global: &GlobalArgs, args: &ScoreArgs) -> CliResult {
    let opts = eval_options(global, TriageThresholds::default(), None, args.micro)?;
    let pages = evaluate_files(global, &args.inputs, |page, source| match score_page(page, &opts) {
        Ok(scores) => PageReport {
            page_id: page.layout.page_id.clone(),
            source: source.to_string(),
            scores: Some(scores),
            decomposition: None,
            cote: None,
            triage: None,
            error: None,
        },
        Err(e) => PageReport::failed(page.layout.page_id.clone(), source, e),
    })?;
    let report = ReportDocument::new("score", &global.measure().name(), global.unit().as_str(), pages);
    emit_report(global, &report)
}

fn cmd_decompose(global: &GlobalArgs, args: &EvalArgs, command: &str) -> CliResult {
    let thresholds = TriageThresholds {
        ratio: args.ratio_threshold,
        cote: args.cote_threshold,
    };
    let opts = eval_options(global, thresholds, args.granularity, false)?;
    let pages = evaluate_files(global, &args.inputs, |page, source| decompose_page(page, source, &opts))?;
    let report = ReportDocument::new(command, &opts.measure.name(), global.unit().as_str(), pages);
    if command == "triage" {
        let count = |d: Dominant| report.pages.iter().filter(|p| p.triage.is_some_and(|t| t.dominant == d)).count();
        eprintln!(
            "triage: {} parsing, {} ocr, {} indeterminate",
            count(Dominant::Parsing),
            count(Dominant::Ocr),
            count(Dominant::Indeterminate)
        );
    }
    emit_report(global, &report)
}

fn cmd_simulate_granularity(global: &GlobalArgs, args: &GranularityArgs) -> CliResult {
    if args.pages == 0 || args.repeats == 0 || args.width_fracs.is_empty() || args.height_fracs.is_empty() {
        return Err(CliError::Input("pages, repeats and crop fractions must be non-empty".into()));
    }
    let base = LayoutSpec::default();
    let inference = InferenceOptions::default();
    let pool = global.pool()?;
    let per_page: Result<Vec<_>, _> = pool.install(|| {
        (0..args.pages)
            .into_par_iter()
            .map(|i| {
                let page = generate_page(&cycled_spec(&base, i), page_seed(global.seed, i))?;
                crop_samples_for_page(i, &page, &args.width_fracs, &args.height_fracs, args.repeats, global.seed, &inference)
            })
            .collect()
    });
    let samples: Vec<_> = per_page.map_err(|e| CliError::Input(e.to_string()))?.into_iter().flatten().collect();
    let report = summarize_crops(samples, &args.width_fracs, &args.height_fracs);
    for s in &report.summary {
        log::info!(
            "{} {}x{}: median {} mean {}",
            s.granularity.as_str(),
            fmt_g(s.width_frac),
            fmt_g(s.height_frac),
            fmt_g(s.median),
            fmt_g(s.mean)
        );
    }
    if let Some(path) = &args.summary {
        write_file(path, &granularity_summary_to_csv(&report.summary).map_err(|e| CliError::Internal(e.to_string()))?)?;
    }
    global.write_output(&crop_samples_to_csv(&report.samples).map_err(|e| CliError::Internal(e.to_string()))?)
}

fn cmd_simulate_pipeline(global: &GlobalArgs, args: &PipelineArgs) -> CliResult {
    let mut config = PipelineConfig::desk_scale(args.pages, global.seed);
    config.policy = global.policy();
    config.validate().map_err(|e| CliError::Input(e.to_string()))?;
    let measure = global.measure();
    let thresholds = TriageThresholds::default();
    let pool = global.pool()?;
    let (n_parse, n_ocr) = (config.parse_grid.len(), config.ocr_grid.len());

    let rows: Result<Vec<PipelineRow>, cevkit_core::Error> = pool.install(|| {
        let pages: Vec<_> = (0..config.n_pages)
            .into_par_iter()
            .map(|i| generate_page(&cycled_spec(&config.layout, i), page_seed(config.page_seed(), i)))
            .collect::<Result<_, _>>()?;
        (0..config.n_pages * n_parse * n_ocr)
            .into_par_iter()
            .map(|k| {
                let (page, parse, ocr) = (k / (n_parse * n_ocr), (k / n_ocr) % n_parse, k % n_ocr);
                let cell = simulate_cell(&pages[page], page, parse, ocr, &config)?;
                let report = decompose(&cell.vectors, &measure)?;
                let verdict = triage(&report, None, thresholds);
                let gated = triage(&report, Some(&cell.cote), thresholds);
                Ok(PipelineRow {
                    cell,
                    report,
                    verdict,
                    gated,
                })
            })
            .collect()
    });
    let rows = rows.map_err(|e| CliError::Input(e.to_string()))?;

    if let Some(path) = &args.summary {
        let plain: Vec<_> = rows.iter().filter(|r| !r.cell.degenerate).map(|r| (r.verdict.dominant, r.cell.label)).collect();
        let gated: Vec<_> = rows.iter().map(|r| (r.gated.dominant, r.cell.label)).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut put = |k: &str, v: String| w.write_record([k, v.as_str()]);
        let csv_err = |e: csv::Error| CliError::Internal(e.to_string());
        put("metric", "value".into()).map_err(csv_err)?;
        put("cells", rows.len().to_string()).map_err(csv_err)?;
        put("non_degenerate_cells", plain.len().to_string()).map_err(csv_err)?;
        for (name, pairs) in [("ratio", &plain), ("ratio_cote", &gated)] {
            for d in [Dominant::Ocr, Dominant::Parsing] {
                put(&format!("f1_{name}_{}", d.as_str()), fmt_g(classification_f1(pairs.iter().copied(), d))).map_err(csv_err)?;
            }
        }
        write_file(path, &w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?)?;
    }
    global.write_output(&pipeline_to_csv(&rows).map_err(|e| CliError::Internal(e.to_string()))?)
}

fn cmd_convert(global: &GlobalArgs, args: &ConvertArgs) -> CliResult {
    let bytes = read_file(&args.input).map_err(|e| CliError::Input(e.to_string()))?;
    let layout = load_alto(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?;
    let mut json = page_to_json(&PageDocument::from_layout(&layout, None, None));
    json.push('\n');
    global.write_output(json.as_bytes())
}

pub fn run(cli: &Cli) -> CliResult {
    let g = &cli.global;
    match &cli.command {
        Command::Score(a) => cmd_score(g, a),
        Command::Decompose(a) => cmd_decompose(g, a, "decompose"),
        Command::Triage(a) => cmd_decompose(g, a, "triage"),
        Command::SimulateGranularity(a) => cmd_simulate_granularity(g, a),
        Command::SimulatePipeline(a) => cmd_simulate_pipeline(g, a),
        Command::Convert(a) => cmd_convert(g, a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn policy_overrides() {
        let cli = Cli::parse_from(["cevkit", "--policy-lowercase", "false", "score", "x.json", "--policy-count-spaces=true"]);
        let p = cli.global.policy();
        assert!(!p.lowercase && p.count_spaces && p.unify_punctuation);
        let cli = Cli::parse_from(["cevkit", "convert", "a.xml", "--policy-raw"]);
        assert_eq!(cli.global.policy(), NormalizationPolicy::raw());
    }

    #[test]
    fn micro_requires_spacer() {
        let cli = Cli::parse_from(["cevkit", "--measure", "cdd-jsd", "score", "--micro", "x.json"]);
        let err = run(&cli).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn fractions_parse_as_lists() {
        let cli = Cli::parse_from(["cevkit", "simulate-granularity", "--width-fracs", "0.1,0.3"]);
        match cli.command {
            Command::SimulateGranularity(a) => {
                assert_eq!(a.width_fracs, vec![0.1, 0.3]);
                assert_eq!(a.height_fracs.len(), 5);
            }
            _ => unreachable!(),
        }
    }
}
