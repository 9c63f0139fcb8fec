//! `kms`: analyze, construct, verify, and export weighted countable graphs.
//!
//! Exit codes: 0 on success, 1 on validation or input errors, 2 when budgets
//! ran out and results are indeterminate (partial output is still written).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kmsgraph::construct::intervals::IntervalSpec;
use kmsgraph::construct::{ConstructionRecipe, EmitterCount, Theorem};
use kmsgraph::harmonic::{enumerate_kms, Exists, KmsReport};
use kmsgraph::kgd::{to_dot, KgdDocument, Realized};
use kmsgraph::spectrum::RecurrenceClass;
use kmsgraph::verify::verify_report;
use kmsgraph::SeriesBudget;

#[derive(Parser)]
#[command(name = "kms", version, about = "Certified KMS-structure analysis of weighted graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct BudgetArgs {
    /// Series term cap per enclosure.
    #[arg(long, default_value_t = 4096)]
    max_terms: usize,
    /// Vertex horizon for ray vectors.
    #[arg(long, default_value_t = 16)]
    horizon: usize,
}

impl BudgetArgs {
    fn budget(&self) -> Result<SeriesBudget> {
        if self.max_terms == 0 || self.horizon == 0 {
            bail!("budgets must be positive");
        }
        Ok(SeriesBudget::default().with_max_terms(self.max_terms))
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Classify recurrence and enumerate KMS rays at one or many beta values.
    Analyze {
        /// KGD file, or a builtin name (exx1, backbone, twoloops).
        #[arg(long)]
        graph: String,
        /// Single inverse temperature.
        #[arg(long, conflicts_with = "beta_grid")]
        beta: Option<f64>,
        /// Inclusive grid "start:end:step" in decimal notation.
        #[arg(long)]
        beta_grid: Option<String>,
        /// Analyze the loop-removed companion of a recipe graph.
        #[arg(long)]
        companion: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Output file (stdout when absent).
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Build a recipe graph and write it as a KGD file.
    Construct {
        #[arg(long)]
        theorem: String,
        /// Entropy h > 0.
        #[arg(long)]
        entropy: f64,
        /// Summability interval, e.g. "[h,inf)" or "[h+1,h+2]"; repeatable.
        /// The symbol h stands for the entropy.
        #[arg(long = "interval")]
        intervals: Vec<String>,
        /// Emitter count for star-core recipes: a number or "inf".
        #[arg(long)]
        emitters: Option<String>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Re-derive every claim of a KMS report and list pass/fail.
    Verify {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        beta: f64,
        /// Write the underlying report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        companion: bool,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Render a finite truncation as DOT.
    Export {
        #[arg(long)]
        graph: String,
        /// DOT output (the only supported format).
        #[arg(long)]
        dot: bool,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 8)]
        width: usize,
        #[arg(long)]
        companion: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn load_graph(spec: &str, companion: bool) -> Result<Realized> {
    let doc = if PathBuf::from(spec).exists() {
        let text = fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
        KgdDocument::parse(&text)?
    } else if !spec.contains(['.', '/']) {
        KgdDocument::builtin(spec)?
    } else {
        bail!("no such file: {spec}");
    };
    let mut realized = doc.realize()?;
    if companion {
        let Some(g) = realized.companion.take() else {
            bail!("the graph has no loop-removed companion");
        };
        realized.graph = g;
        realized.companion = None;
    }
    Ok(realized)
}

/// Fixed-point decimal, so grid steps stay exact however ragged the inputs.
#[derive(Clone, Copy)]
struct Decimal {
    units: i64,
    scale: u32,
}

fn parse_decimal(s: &str) -> Result<Decimal> {
    let s = s.trim();
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int.is_empty() && frac.is_empty() {
        bail!("empty number in grid spec");
    }
    let scale = frac.len() as u32;
    let joined = format!("{int}{frac}");
    let units: i64 = joined
        .parse()
        .map_err(|_| anyhow!("bad number '{s}' in grid spec"))?;
    Ok(Decimal { units, scale })
}

fn rescale(d: Decimal, scale: u32) -> Result<i64> {
    let extra = scale
        .checked_sub(d.scale)
        .ok_or_else(|| anyhow!("scale underflow"))?;
    d.units
        .checked_mul(10i64.pow(extra))
        .ok_or_else(|| anyhow!("grid spec out of range"))
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, end, step] = parts[..] else {
        bail!("grid spec must be start:end:step");
    };
    let (start, end, step) = (parse_decimal(start)?, parse_decimal(end)?, parse_decimal(step)?);
    let scale = start.scale.max(end.scale).max(step.scale);
    let (mut at, end, step) = (
        rescale(start, scale)?,
        rescale(end, scale)?,
        rescale(step, scale)?,
    );
    if step <= 0 {
        bail!("grid step must be positive");
    }
    let denom = 10f64.powi(scale as i32);
    let mut out = Vec::new();
    while at <= end {
        out.push(at as f64 / denom);
        at += step;
    }
    if out.is_empty() {
        bail!("grid spec covers no beta values");
    }
    Ok(out)
}

/// Endpoint expression: sums and differences of numbers and the symbol h.
fn eval_endpoint(s: &str, h: f64) -> Result<f64> {
    let s = s.trim();
    if s == "inf" {
        return Ok(f64::INFINITY);
    }
    let mut total = 0.0;
    let mut sign = 1.0;
    let mut term = String::new();
    let flush = |term: &mut String, sign: f64, total: &mut f64| -> Result<()> {
        if term.is_empty() {
            bail!("malformed endpoint '{s}'");
        }
        let v = if term == "h" {
            h
        } else {
            term.parse::<f64>()
                .map_err(|_| anyhow!("bad endpoint term '{term}'"))?
        };
        *total += sign * v;
        term.clear();
        Ok(())
    };
    for c in s.chars() {
        match c {
            '+' => {
                flush(&mut term, sign, &mut total)?;
                sign = 1.0;
            }
            '-' if !term.is_empty() => {
                flush(&mut term, sign, &mut total)?;
                sign = -1.0;
            }
            c if c.is_whitespace() => {}
            c => term.push(c),
        }
    }
    flush(&mut term, sign, &mut total)?;
    Ok(total)
}

fn parse_interval(s: &str, h: f64) -> Result<IntervalSpec> {
    let s = s.trim();
    let mut chars = s.chars();
    let (first, last) = (
        chars.next().ok_or_else(|| anyhow!("empty interval"))?,
        s.chars().last().unwrap(),
    );
    let lower_closed = match first {
        '[' => true,
        ']' | '(' => false,
        _ => bail!("interval must open with one of [ ] ("),
    };
    let upper_closed = match last {
        ']' if s.len() > 1 => true,
        '[' | ')' => false,
        _ => bail!("interval must close with one of ] [ )"),
    };
    let inner = &s[1..s.len() - 1];
    let Some((lo, hi)) = inner.split_once(',') else {
        bail!("interval needs two comma-separated endpoints");
    };
    let spec = IntervalSpec::new(
        eval_endpoint(lo, h)?,
        eval_endpoint(hi, h)?,
        lower_closed,
        upper_closed && eval_endpoint(hi, h)?.is_finite(),
    );
    Ok(spec)
}

fn indeterminate(report: &KmsReport) -> bool {
    report.exists == Exists::Indeterminate
        || matches!(report.recurrence, RecurrenceClass::Indeterminate(_))
}

fn report_line(r: &KmsReport) -> String {
    let rec = match &r.recurrence {
        RecurrenceClass::Recurrent => "recurrent".into(),
        RecurrenceClass::Transient => "transient".into(),
        RecurrenceClass::Indeterminate(e) => format!("indeterminate[{:.3e},{:.3e}]", e.lo, e.hi),
    };
    format!(
        "beta {:.6}: exists={:?} recurrence={} boundary_rays={} harmonic_rays={} label={:?}{}{}",
        r.beta,
        r.exists,
        rec,
        r.boundary_rays.len(),
        r.harmonic_rays.len(),
        r.measure_label,
        if r.approximate { " (approximate)" } else { "" },
        if r.unenumerated_possible {
            " (possibly unenumerated rays)"
        } else {
            ""
        },
    )
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Analyze {
            graph,
            beta,
            beta_grid,
            companion,
            format,
            out,
            budget,
        } => {
            let budget = budget.budget()?;
            let realized = load_graph(&graph, companion)?;
            let betas = match (beta, beta_grid) {
                (Some(b), None) => vec![b],
                (None, Some(spec)) => parse_grid(&spec)?,
                _ => bail!("give exactly one of --beta or --beta-grid"),
            };
            let mut reports = Vec::new();
            for b in betas {
                reports.push(enumerate_kms(&realized.graph, b, &budget)?);
            }
            let soft = reports.iter().any(indeterminate);
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&reports)? + "\n",
                Format::Text => reports
                    .iter()
                    .map(|r| report_line(r) + "\n")
                    .collect::<String>(),
            };
            emit(&out, &text)?;
            Ok(if soft { 2 } else { 0 })
        }
        Cmd::Construct {
            theorem,
            entropy,
            intervals,
            emitters,
            out,
        } => {
            let theorem = match theorem.as_str() {
                "rev1" => Theorem::Rev1,
                "rev2" => Theorem::Rev2,
                "intro1" => Theorem::Intro1,
                "intro" => Theorem::Intro,
                other => bail!("unknown theorem '{other}' (rev1, rev2, intro1, intro)"),
            };
            let emitters = match emitters.as_deref() {
                None => None,
                Some("inf") => Some(EmitterCount::Infinite),
                Some(n) => Some(EmitterCount::Finite(
                    n.parse().map_err(|_| anyhow!("bad emitter count '{n}'"))?,
                )),
            };
            let intervals = intervals
                .iter()
                .map(|s| parse_interval(s, entropy))
                .collect::<Result<Vec<_>>>()?;
            let recipe = ConstructionRecipe {
                theorem,
                h: entropy,
                intervals,
                emitters,
            };
            // Building validates the theorem hypotheses before anything is
            // written.
            kmsgraph::construct::build(&recipe)?;
            let doc = KgdDocument::from_recipe(&recipe);
            fs::write(&out, doc.to_string_pretty()? + "\n")
                .with_context(|| format!("writing {}", out.display()))?;
            Ok(0)
        }
        Cmd::Verify {
            graph,
            beta,
            report,
            companion,
            budget,
        } => {
            let budget = budget.budget()?;
            let realized = load_graph(&graph, companion)?;
            let kms = enumerate_kms(&realized.graph, beta, &budget)?;
            if let Some(p) = &report {
                fs::write(p, serde_json::to_string_pretty(&kms)? + "\n")
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            let listing = verify_report(&realized.graph, beta, &kms, &budget)?;
            for (claim, ok) in &listing.claims {
                println!("{} {claim}", if *ok { "pass" } else { "FAIL" });
            }
            if listing.pass() {
                if indeterminate(&kms) {
                    println!("note: report is budget-limited (indeterminate)");
                    Ok(2)
                } else {
                    Ok(0)
                }
            } else {
                Ok(1)
            }
        }
        Cmd::Export {
            graph,
            dot,
            depth,
            width,
            companion,
            out,
        } => {
            if !dot {
                bail!("only --dot export is supported");
            }
            if width == 0 || depth == 0 {
                bail!("truncation depth and width must be >= 1");
            }
            let realized = load_graph(&graph, companion)?;
            let text = to_dot(&realized.graph, depth, width)?;
            emit(&out, &text)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
