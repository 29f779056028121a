//! `osp`: command-line front end for maximal elements, outer support points
//! and their certificates.
//!
//! Exit codes: 0 success, 1 suite failures, 2 invalid input, 3 solver failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use osp_core::bishop_phelps::{bishop_phelps_sequence, certify_osp, fmt12, osp_numeraire, BishopPhelpsOptions};
use osp_core::convex_sets::{project, variational_gap};
use osp_core::gamma_family::{gamma_report, obstruction_report, GAMMA_GRID};
use osp_core::maximal::{is_maximal, maximal_lift_with_tol};
use osp_core::problem::Problem;
use osp_core::suite::{fixture_file_check, run_suite, select, SuiteConfig};
use osp_core::utility::{maximize_utility, UtilityOptions};
use osp_core::Error;

#[derive(Debug, Parser)]
#[command(name = "osp", version, about = "Maximal elements and outer support points on finite probability spaces")]
struct Cli {
    /// Tolerance, overriding the problem file.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Random seed, overriding the problem file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON result to PATH, or to stdout when PATH is omitted or `-`.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "-", value_name = "PATH")]
    json: Option<String>,
    /// Write a CSV table to PATH.
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Project the point `g` onto the set in the weighted L2 norm.
    Project { file: PathBuf },
    /// Lift the member `g` to a maximal member dominating it.
    Lift { file: PathBuf },
    /// Test whether the member `g` is maximal.
    IsMaximal { file: PathBuf },
    /// Check that `mu` certifies `g` as an outer support point.
    CertifyOsp { file: PathBuf },
    /// Log-optimal member and its reciprocal-density certificate.
    Numeraire { file: PathBuf },
    /// Approximate the maximal point `g` by certified outer support points.
    BishopPhelps {
        file: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Maximize the expected utility and extract the marginal-utility certificate.
    MaximizeUtility { file: PathBuf },
    /// Report on the curve example `1 - a + (a + b) xi`.
    Section24 {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 64)]
        atoms: usize,
    },
    /// Run the acceptance suite.
    Suite {
        /// `all`, a group (section24, polytope, expectation, utility, determinism) or criterion ids.
        #[arg(long, default_value = "all")]
        fixtures: String,
        /// An extra problem file to check alongside the built-in fixtures.
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: if e.is_validation() { 2 } else { 3 }, message: e.to_string() }
    }
}

struct Output {
    json: Value,
    summary: String,
    csv: String,
    failed: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|out| emit(&cli, out)) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn emit(cli: &Cli, out: Output) -> Result<u8, Failure> {
    let text = serde_json::to_string_pretty(&round_json(out.json)).expect("JSON values serialize") + "\n";
    match cli.json.as_deref() {
        Some("-") => print!("{text}"),
        Some(path) => {
            write_atomic(Path::new(path), &text)?;
            print!("{}", out.summary);
        }
        None => print!("{}", out.summary),
    }
    if let Some(path) = &cli.csv {
        write_atomic(path, &out.csv)?;
    }
    Ok(if out.failed { 1 } else { 0 })
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let fail = |e: std::io::Error| Failure { code: 3, message: format!("writing {}: {e}", path.display()) };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Failure { code: 2, message: format!("{} is not a file path", path.display()) })?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents).map_err(fail)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        fail(e)
    })
}

/// Rounds every float to 12 significant digits.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            fmt12(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn vec12(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| fmt12(*x)).collect::<Vec<_>>().join(", "))
}

fn columns(header: &str, cols: &[&[f64]]) -> String {
    let mut out = format!("atom,{header}\n");
    let n = cols.first().map_or(0, |c| c.len());
    for i in 0..n {
        let row: Vec<String> = cols.iter().map(|c| fmt12(c[i])).collect();
        let _ = writeln!(out, "{i},{}", row.join(","));
    }
    out
}

fn load(cli: &Cli, file: &Path) -> Result<Problem, Failure> {
    let text = fs::read_to_string(file)
        .map_err(|e| Failure { code: 2, message: format!("reading {}: {e}", file.display()) })?;
    let mut problem = Problem::parse(&text)?;
    if let Some(tol) = cli.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Validation(format!("tol must be positive, got {tol}")).into());
        }
        problem.options.tol = tol;
    }
    if let Some(seed) = cli.seed {
        problem.options.seed = seed;
    }
    Ok(problem)
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    match &cli.command {
        Command::Project { file } => {
            let p = load(cli, file)?;
            let phi = p.require_g()?;
            let f = project(p.set.as_ref(), &p.space, phi)?;
            let residual: Vec<f64> = phi.iter().zip(f.iter()).map(|(a, b)| a - b).collect();
            let gap = variational_gap(p.set.as_ref(), &p.space, phi, &f)?;
            let passed = gap <= p.options.tol;
            Ok(Output {
                summary: format!(
                    "projection: {}\nresidual norm: {}\nvariational gap: {} ({})\n",
                    vec12(&f),
                    fmt12(p.space.l2_dist_sq(phi, &f).sqrt()),
                    fmt12(gap),
                    if passed { "ok" } else { "FAILED" }
                ),
                csv: columns("phi,projection", &[phi, &f]),
                json: json!({
                    "projection": to_json(&f),
                    "residual": residual,
                    "residual_norm": p.space.l2_dist_sq(phi, &f).sqrt(),
                    "variational_check": {"gap": gap, "passed": passed},
                }),
                failed: false,
            })
        }
        Command::Lift { file } => {
            let p = load(cli, file)?;
            let f = p.require_g()?;
            let g = maximal_lift_with_tol(p.set.as_ref(), &p.space, f, p.options.tol.max(1e-8))?;
            Ok(Output {
                summary: format!("lifted: {}\n", vec12(&g)),
                csv: columns("f,lifted", &[f, &g]),
                json: json!({"input": to_json(f), "lifted": to_json(&g)}),
                failed: false,
            })
        }
        Command::IsMaximal { file } => {
            let p = load(cli, file)?;
            let g = p.require_g()?;
            let r = is_maximal(p.set.as_ref(), &p.space, g, p.options.tol)?;
            let mut summary = format!("maximal: {}\nslack: {}\n", r.is_maximal, vec12(&r.per_atom_slack));
            if let Some(w) = &r.witness {
                let _ = writeln!(summary, "dominating member: {}", vec12(w));
            }
            Ok(Output { summary, csv: columns("g,slack", &[g, &r.per_atom_slack]), json: to_json(&r), failed: false })
        }
        Command::CertifyOsp { file } => {
            let p = load(cli, file)?;
            let c = certify_osp(p.set.as_ref(), &p.space, p.require_g()?, p.require_mu()?, p.options.tol)?;
            Ok(Output {
                summary: format!("accepted: value {}, gap {}\n", fmt12(c.value), fmt12(c.gap)),
                csv: columns("g,mu", &[&c.g, &c.mu]),
                json: to_json(&c),
                failed: false,
            })
        }
        Command::Numeraire { file } => {
            let p = load(cli, file)?;
            let c = osp_numeraire(p.set.as_ref(), &p.space, p.options.tol)?;
            Ok(Output {
                summary: format!(
                    "numeraire: {}\ndensity: {}\nvalue {}, gap {}{}\n",
                    vec12(&c.g),
                    vec12(&c.mu),
                    fmt12(c.value),
                    fmt12(c.gap),
                    if c.conventional { " (set is {0})" } else { "" }
                ),
                csv: columns("g,mu", &[&c.g, &c.mu]),
                json: to_json(&c),
                failed: false,
            })
        }
        Command::BishopPhelps { file, steps } => {
            let p = load(cli, file)?;
            let opts = BishopPhelpsOptions { steps: steps.unwrap_or(p.options.steps), tol: p.options.tol };
            let t = bishop_phelps_sequence(p.set.as_ref(), &p.space, p.require_g()?, &opts)?;
            let mut csv = Vec::new();
            t.write_csv(&mut csv).map_err(|e| Failure { code: 3, message: e.to_string() })?;
            Ok(Output {
                summary: format!(
                    "steps: {}\nfinal dist: {}\nworst certificate gap: {}\n",
                    t.steps.len(),
                    fmt12(t.final_dist()),
                    fmt12(t.worst_gap())
                ),
                csv: String::from_utf8(csv).expect("CSV is UTF-8"),
                json: to_json(&t),
                failed: false,
            })
        }
        Command::MaximizeUtility { file } => {
            let p = load(cli, file)?;
            let u = p.require_utility()?;
            let opt = maximize_utility(
                p.set.as_ref(),
                &p.space,
                u,
                &UtilityOptions { tol: p.options.tol, ..UtilityOptions::default() },
            )?;
            Ok(Output {
                summary: format!(
                    "optimizer: {}\nobjective: {}\nfirst-order gap: {}\ncertificate: {}\n",
                    vec12(&opt.g),
                    fmt12(opt.objective),
                    fmt12(opt.first_order_gap),
                    if opt.certificate.is_some() { "accepted" } else { "none" }
                ),
                csv: columns("g,mu", &[&opt.g, &opt.mu]),
                json: to_json(&opt),
                failed: false,
            })
        }
        Command::Section24 { gamma, atoms } => {
            let tol = cli.tol.unwrap_or(1e-8);
            let r = gamma_report(*gamma, *atoms, tol)?;
            let obstruction = obstruction_report(*atoms, &GAMMA_GRID, 50, cli.seed.unwrap_or(0), tol)?;
            let summary = format!(
                "c_gamma: {}\nmaximizer over K: ({}, {})\nmaximum: {}\nidentity error: {}\ncertificate: {}\n\
                 obstruction: {} of {} candidates support the point one; ratio bound {}\n",
                fmt12(r.c_gamma),
                fmt12(r.k_argmax.alpha),
                fmt12(r.k_argmax.beta),
                fmt12(r.k_max),
                fmt12(r.identity_error),
                match (&r.certificate, &r.rejection) {
                    (Some(c), _) => format!("accepted (value {}, gap {})", fmt12(c.value), fmt12(c.gap)),
                    (None, Some(reason)) => format!("rejected: {reason}"),
                    (None, None) => "none".into(),
                },
                obstruction.supporting,
                obstruction.candidates.len(),
                fmt12(obstruction.ratio_bound),
            );
            let mut csv = String::from("label,ratio,support_gap,accepted\n");
            for c in &obstruction.candidates {
                let _ = writeln!(csv, "{},{},{},{}", c.label, fmt12(c.ratio), fmt12(c.support_gap), c.accepted);
            }
            let failed = !r.passes(tol) || !obstruction.holds;
            Ok(Output { summary, csv, json: json!({"report": to_json(&r), "obstruction": to_json(&obstruction)}), failed })
        }
        Command::Suite { fixtures, file } => {
            let ids = select(fixtures)?;
            let extra = file.as_deref().map(|f| load(cli, f)).transpose()?;
            let cfg = SuiteConfig { seed: cli.seed.unwrap_or(0), tol: cli.tol.unwrap_or(1e-8) };
            let mut report = run_suite(&cfg, &ids);
            if let Some(p) = &extra {
                report.criteria.push(fixture_file_check(p, &cfg));
                report.passed = report.criteria.iter().all(|c| c.passed);
            }
            let mut csv = String::from("id,name,passed\n");
            for c in &report.criteria {
                let _ = writeln!(csv, "{},{},{}", c.id, c.name, c.passed);
            }
            Ok(Output { summary: report.table(), csv, json: to_json(&report), failed: !report.passed })
        }
    }
}
