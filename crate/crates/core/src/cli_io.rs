//! Command layer: estimate regions from files, simulate populations, and
//! reshape estimate tables into long-format plot data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Result};
use crate::identification::{check_alpha, AssumptionSet, IdentificationRegion, Regime};
use crate::oracle_sim::{
    census_truth, draw_sample, generate_population, verify_coverage, CoverageReport, MechanismConfig, PopulationShape,
    SampleDesign,
};
use crate::plausible_values::{aggregate_over_pvs, PvAggregate};
use crate::survey_model::{load_dataset, Dataset};

pub const TRUTH_FILE: &str = "truth.json";
pub const COVERAGE_FILE: &str = "coverage.json";
pub const OVERALL: &str = "*";
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Estimate,
    Simulate,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Tsv,
    Json,
}

impl OutputFormat {
    /// JSON for a `.json` extension, TSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Tsv,
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = BoundsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(OutputFormat::Tsv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(BoundsError::config(format!("unknown format `{s}`"))),
        }
    }
}

/// One requested regime; the alpha may come from the label or the alpha list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub regime: Regime,
    pub alpha: Option<f64>,
    pub support: Option<(f64, f64)>,
    pub strict_monotone: bool,
}

impl std::str::FromStr for RegimeSpec {
    type Err = BoundsError;

    /// Accepts `A1`, `A1:0.05`, `A1@0.05`, `A1.2+A2:0.1`, `A1_A4+strict:0.05`
    /// and `WORST_CASE:lo:hi`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split([':', '@']).map(str::trim);
        let head = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        let (head, strict) = match head.strip_suffix("+strict").or_else(|| head.strip_suffix("+STRICT")) {
            Some(h) => (h, true),
            None => (head, false),
        };
        let regime: Regime = head.replace(['.', '+'], "_").parse()?;
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| BoundsError::config(format!("`{t}` in regime `{s}` is not a number")))
        };
        let mut spec = RegimeSpec {
            regime,
            alpha: None,
            support: None,
            strict_monotone: strict,
        };
        if strict && regime != Regime::Monotone {
            return Err(BoundsError::config(format!(
                "`+strict` applies to A1_A4 only, got `{s}`"
            )));
        }
        match (regime, rest.as_slice()) {
            (Regime::WorstCase, [lo, hi]) => spec.support = Some((num(lo)?, num(hi)?)),
            (Regime::WorstCase, _) => {
                return Err(BoundsError::config(format!(
                    "WORST_CASE needs support limits, e.g. WORST_CASE:0:1, got `{s}`"
                )))
            }
            (r, []) if r.needs_alpha() || r.is_point() => {}
            (r, [a]) if r.needs_alpha() => spec.alpha = Some(num(a)?),
            _ => return Err(BoundsError::config(format!("malformed regime `{s}`"))),
        }
        Ok(spec)
    }
}

impl RegimeSpec {
    /// Concrete assumption sets: one per alpha for quantile regimes without
    /// their own alpha, otherwise exactly one.
    pub fn expand(&self, alphas: &[f64], use_replacements: bool) -> Vec<AssumptionSet> {
        let regime = if use_replacements && self.regime == Regime::Standard {
            Regime::StandardWithReplacements
        } else {
            self.regime
        };
        let with = |a: Option<f64>| AssumptionSet {
            regime,
            alpha: a,
            support: self.support,
            strict_monotone: self.strict_monotone,
        };
        if !regime.needs_alpha() {
            return vec![with(None)];
        }
        match self.alpha {
            Some(a) => vec![with(Some(a))],
            None if alphas.is_empty() => vec![with(Some(DEFAULT_ALPHA))],
            None => alphas.iter().map(|&a| with(Some(a))).collect(),
        }
    }
}

/// Options for the `simulate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOptions {
    pub mechanism: MechanismConfig,
    pub shape: PopulationShape,
    pub design: SampleDesign,
    /// Sampled replicates per regime for the coverage file; 0 reports only the
    /// census-mode check.
    pub coverage_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub students: Option<PathBuf>,
    pub schools: Option<PathBuf>,
    pub strata: Option<PathBuf>,
    /// Estimate files for `report`.
    pub inputs: Vec<PathBuf>,
    pub regimes: Vec<RegimeSpec>,
    pub alphas: Vec<f64>,
    pub use_replacements: bool,
    /// Output file (`estimate`, `report`) or directory (`simulate`).
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub seed: u64,
    pub simulate: Option<SimulateOptions>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            students: None,
            schools: None,
            strata: None,
            inputs: Vec::new(),
            regimes: Vec::new(),
            alphas: Vec::new(),
            use_replacements: false,
            out: None,
            format: OutputFormat::Tsv,
            seed: 0,
            simulate: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        for &a in &self.alphas {
            check_alpha(a)?;
        }
        if self.command == Command::Estimate && self.regimes.is_empty() {
            return Err(BoundsError::config("at least one --regime is required"));
        }
        for a in self.assumption_sets() {
            a.check()?;
        }
        Ok(())
    }

    /// Every (regime, alpha) pair, in request order without duplicates.
    pub fn assumption_sets(&self) -> Vec<AssumptionSet> {
        let mut out: Vec<AssumptionSet> = Vec::new();
        for spec in &self.regimes {
            for a in spec.expand(&self.alphas, self.use_replacements) {
                if !out.contains(&a) {
                    out.push(a);
                }
            }
        }
        out
    }

    fn input_paths(&self) -> Result<(&Path, &Path, &Path)> {
        match (&self.students, &self.schools, &self.strata) {
            (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
            _ => Err(BoundsError::config(
                "--students, --schools and --strata are all required",
            )),
        }
    }
}

/// One line of an estimate table: the overall region (stratum `*`) or one
/// stratum's share of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub regime: Regime,
    pub alpha: Option<f64>,
    pub stratum: String,
    pub share: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub point: Option<f64>,
    pub width: f64,
    pub mu: f64,
    pub q_alpha: Option<f64>,
    pub q_upper: Option<f64>,
    pub p1: f64,
    pub p2: f64,
    pub p: f64,
    pub school_factor: Option<f64>,
    pub participants: usize,
    pub lower_sd: Option<f64>,
    pub upper_sd: Option<f64>,
}

const COLUMNS: [&str; 19] = [
    "scenario",
    "regime",
    "alpha",
    "stratum",
    "share",
    "lower",
    "upper",
    "point",
    "width",
    "mu",
    "q_alpha",
    "q_upper",
    "p1",
    "p2",
    "p",
    "school_factor",
    "participants",
    "lower_sd",
    "upper_sd",
];

/// Rows for one aggregated estimate, overall row first.
pub fn report_rows(scenario: &str, agg: &PvAggregate) -> Vec<ReportRow> {
    let r: &IdentificationRegion = &agg.combined;
    let point = r.is_point().then_some(r.lower);
    let mut rows = vec![ReportRow {
        scenario: scenario.to_string(),
        regime: r.regime,
        alpha: r.alpha,
        stratum: OVERALL.to_string(),
        share: None,
        lower: r.lower,
        upper: r.upper,
        point,
        width: r.width,
        mu: r.ingredients.mu,
        q_alpha: r.ingredients.q_alpha,
        q_upper: r.ingredients.q_upper,
        p1: r.ingredients.p1,
        p2: r.ingredients.p2,
        p: r.ingredients.p,
        school_factor: None,
        participants: r.ingredients.participants,
        lower_sd: Some(agg.spread.lower_sd),
        upper_sd: Some(agg.spread.upper_sd),
    }];
    for (id, b) in r.per_stratum.iter().flatten() {
        rows.push(ReportRow {
            scenario: scenario.to_string(),
            regime: r.regime,
            alpha: r.alpha,
            stratum: id.clone(),
            share: Some(b.share),
            lower: b.lower,
            upper: b.upper,
            point: (b.upper - b.lower == 0.0).then_some(b.lower),
            width: b.upper - b.lower,
            mu: b.ingredients.mu,
            q_alpha: b.ingredients.q_alpha,
            q_upper: b.ingredients.q_upper,
            p1: b.ingredients.p1,
            p2: b.ingredients.p2,
            p: b.ingredients.p,
            school_factor: b.school_factor,
            participants: b.ingredients.participants,
            lower_sd: None,
            upper_sd: None,
        });
    }
    rows
}

fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| (&a.scenario, &a.stratum).cmp(&(&b.scenario, &b.stratum)));
}

fn score(v: f64) -> String {
    format!("{v:.2}")
}

fn prop(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>, f: fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

/// Render rows: TSV with 2 decimals for scores and 6 for proportions, or
/// full-precision JSON.
pub fn render_rows(rows: &[ReportRow], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => to_json(rows),
        OutputFormat::Tsv => {
            let mut out = COLUMNS.join("\t");
            out.push('\n');
            for r in rows {
                let fields = [
                    r.scenario.clone(),
                    r.regime.label().to_string(),
                    opt(r.alpha, prop),
                    r.stratum.clone(),
                    opt(r.share, prop),
                    score(r.lower),
                    score(r.upper),
                    opt(r.point, score),
                    score(r.width),
                    score(r.mu),
                    opt(r.q_alpha, score),
                    opt(r.q_upper, score),
                    prop(r.p1),
                    prop(r.p2),
                    prop(r.p),
                    opt(r.school_factor, prop),
                    r.participants.to_string(),
                    opt(r.lower_sd, score),
                    opt(r.upper_sd, score),
                ];
                let _ = writeln!(out, "{}", fields.join("\t"));
            }
            Ok(out)
        }
    }
}

/// Read rows back from either format.
pub fn parse_rows(text: &str, format: OutputFormat, name: &str) -> Result<Vec<ReportRow>> {
    match format {
        OutputFormat::Json => serde_json::from_str(text).map_err(|e| BoundsError::Parse {
            file: name.to_string(),
            line: e.line() as u64,
            column: e.column().to_string(),
            message: e.to_string(),
        }),
        OutputFormat::Tsv => {
            let mut reader = csv::ReaderBuilder::new().delimiter(b'\t').from_reader(text.as_bytes());
            let headers = reader.headers().map_err(|e| io_error(name, e))?.clone();
            if let Some(missing) = COLUMNS.iter().find(|c| !headers.iter().any(|h| h == **c)) {
                return Err(BoundsError::Parse {
                    file: name.to_string(),
                    line: 1,
                    column: missing.to_string(),
                    message: "column missing from header".into(),
                });
            }
            reader
                .deserialize()
                .enumerate()
                .map(|(i, row)| {
                    row.map_err(|e| BoundsError::Parse {
                        file: name.to_string(),
                        line: i as u64 + 2,
                        column: match e.kind() {
                            csv::ErrorKind::Deserialize { err, .. } => err
                                .field()
                                .and_then(|f| headers.get(f as usize))
                                .unwrap_or_default()
                                .to_string(),
                            _ => String::new(),
                        },
                        message: e.to_string(),
                    })
                })
                .collect()
        }
    }
}

fn io_error(file: impl AsRef<Path>, e: impl std::fmt::Display) -> BoundsError {
    BoundsError::Io {
        file: file.as_ref().display().to_string(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Rendered command output plus diagnostics for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub text: String,
    pub warnings: Vec<String>,
}

/// Estimate every requested region on a dataset.
pub fn estimate_rows(dataset: &Dataset, sets: &[AssumptionSet]) -> Result<(Vec<ReportRow>, Vec<String>)> {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for a in sets {
        let agg = aggregate_over_pvs(dataset, a)?;
        let label = a.scenario_label();
        warnings.extend(agg.combined.warnings.iter().map(|w| format!("{label}: {w}")));
        rows.extend(report_rows(&label, &agg));
    }
    sort_rows(&mut rows);
    Ok((rows, warnings))
}

pub fn cmd_estimate(config: &RunConfig) -> Result<CommandOutput> {
    config.check()?;
    let (students, schools, strata) = config.input_paths()?;
    let dataset = load_dataset(students, schools, strata)?;
    let (rows, warnings) = estimate_rows(&dataset, &config.assumption_sets())?;
    let text = render_rows(&rows, config.format)?;
    if let Some(out) = &config.out {
        write_file(out, &text)?;
    }
    Ok(CommandOutput { text, warnings })
}

/// Generate a population, write a sample of it in the dataset schema, the
/// census truth, and (when regimes are given) a coverage file.
pub fn cmd_simulate(config: &RunConfig) -> Result<CommandOutput> {
    config.check()?;
    let opts = config
        .simulate
        .as_ref()
        .ok_or_else(|| BoundsError::config("simulate needs population options"))?;
    let dir = config
        .out
        .as_ref()
        .ok_or_else(|| BoundsError::config("simulate needs --out <directory>"))?;
    let mut mechanism = opts.mechanism;
    mechanism.seed = config.seed;
    let pop = generate_population(&mechanism, &opts.shape)?;
    let sample_seed = config.seed.wrapping_add(1);
    let dataset = draw_sample(&pop, &opts.design, sample_seed)?;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    dataset.write_to_dir(dir)?;

    let truth = census_truth(&pop);
    write_file(&dir.join(TRUTH_FILE), &to_json(&truth)?)?;

    let mut summary = format!(
        "population {} students, {} schools; sample {} schools, {} students; true mean {:.2}\n",
        pop.students.len(),
        pop.schools.len(),
        dataset.schools.len(),
        dataset.students.len(),
        truth.mean
    );
    let sets = config.assumption_sets();
    if !sets.is_empty() {
        let reports: Vec<CoverageReport> = sets
            .iter()
            .map(|a| verify_coverage(&pop, a, opts.coverage_replicates, &opts.design, sample_seed))
            .collect::<Result<_>>()?;
        for r in &reports {
            let cov = r.coverage.map_or_else(|| "n/a".to_string(), |c| format!("{c:.4}"));
            let census = r
                .census_contained
                .map_or("undefined", |c| if c { "contained" } else { "not contained" });
            let _ = writeln!(
                summary,
                "{}: census {census}, coverage {cov} over {} replicates",
                r.scenario, r.defined
            );
        }
        write_file(&dir.join(COVERAGE_FILE), &to_json(&reports)?)?;
    }
    Ok(CommandOutput {
        text: summary,
        warnings: Vec::new(),
    })
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| BoundsError::config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// One line of long-format plot data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub group: String,
    pub scenario: String,
    pub stratum: String,
    pub endpoint: String,
    pub value: f64,
}

/// Long-format rows from estimate tables keyed by group name. Point
/// estimates appear as equal lower and upper endpoints.
pub fn plot_rows(groups: &[(String, Vec<ReportRow>)]) -> Vec<PlotRow> {
    let mut out = Vec::new();
    for (group, rows) in groups {
        for r in rows {
            for (endpoint, value) in [("lower", r.lower), ("upper", r.upper)] {
                out.push(PlotRow {
                    group: group.clone(),
                    scenario: r.scenario.clone(),
                    stratum: r.stratum.clone(),
                    endpoint: endpoint.to_string(),
                    value,
                });
            }
        }
    }
    out
}

pub fn render_plot_rows(rows: &[PlotRow], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => to_json(rows),
        OutputFormat::Tsv => {
            let mut out = String::from("group\tscenario\tstratum\tendpoint\tvalue\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    r.group,
                    r.scenario,
                    r.stratum,
                    r.endpoint,
                    score(r.value)
                );
            }
            Ok(out)
        }
    }
}

pub fn cmd_report(config: &RunConfig) -> Result<CommandOutput> {
    if config.inputs.is_empty() {
        return Err(BoundsError::config("report needs at least one estimate file"));
    }
    let mut groups = Vec::new();
    for path in &config.inputs {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let rows = parse_rows(&text, OutputFormat::from_path(path), &path.display().to_string())?;
        let group = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input").to_string();
        groups.push((group, rows));
    }
    let text = render_plot_rows(&plot_rows(&groups), config.format)?;
    if let Some(out) = &config.out {
        write_file(out, &text)?;
    }
    Ok(CommandOutput {
        text,
        warnings: Vec::new(),
    })
}

/// Dispatch on `config.command`.
pub fn run(config: &RunConfig) -> Result<CommandOutput> {
    match config.command {
        Command::Estimate => cmd_estimate(config),
        Command::Simulate => cmd_simulate(config),
        Command::Report => cmd_report(config),
    }
}

/// Machine-readable error line for diagnostics.
pub fn error_record(err: &BoundsError) -> String {
    serde_json::json!({
        "error": err.kind(),
        "exit_code": err.exit_code(),
        "message": err.to_string(),
    })
    .to_string()
}
