//! `lvr-lab`: batch front end for the Fuss-Catalan tools and the verification suites.
//!
//! Exit codes: 0 success, 1 usage or precondition error, 2 a check computed but missed its tolerance.

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lvr_core::fuss_catalan::{catalan_moment, cut_start, decay_bound_report, fc_number, moment_cross_check, FcEvaluator};
use lvr_core::lvr_action::ModelParams;
use lvr_core::verify::{oracle_at, run_suite, Criterion, Suite, VerifyOptions};
use lvr_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const SCHEMA: &str = "lvr-lab/1";

#[derive(Parser, Debug)]
#[command(name = "lvr-lab", version, about = "Loop vertex representation lab: evaluations and verification reports")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Omit the timestamp and wall-clock measurements so reports are reproducible.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Base seed for every random stream.
    #[arg(long, env = "LVR_LAB_SEED", default_value_t = 42, global = true)]
    seed: u64,
    /// Worker threads (0 uses all cores).
    #[arg(long, default_value_t = 0, global = true)]
    workers: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum LambdaForm {
    /// `modulus,arg_degrees`
    Polar,
    /// `re,im`
    Cartesian,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fuss-Catalan numbers and the generating function T_p.
    Fc {
        #[command(subcommand)]
        op: FcOp,
    },
    /// Run an acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Subcommand, Debug)]
enum FcOp {
    /// Evaluate T_p(z) on the principal branch.
    Eval {
        #[arg(long)]
        p: u32,
        /// `re` or `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
    },
    /// Exact Fuss-Catalan numbers FC_{p-1}(0..=n_max).
    Numbers {
        #[arg(long)]
        p: u32,
        #[arg(long, default_value_t = 10)]
        n_max: u32,
    },
    /// Fitted decay constant K for |T| and |T'| off the cut.
    Bounds {
        #[arg(long)]
        p: u32,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Moments of the p = 2 density against the Catalan numbers.
    Moments {
        #[arg(long, default_value_t = 10)]
        n_max: u32,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Fc,
    Action,
    Contour,
    Oracle,
    Perturb,
    Bkar,
    Lve,
    All,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: SuiteArg,
    /// Degree of the interaction (oracle point check).
    #[arg(long)]
    p: Option<u32>,
    /// Matrix size (oracle point check).
    #[arg(long = "N")]
    n: Option<usize>,
    /// Coupling as two comma-separated numbers, read per --lambda-form.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, value_enum, default_value_t = LambdaForm::Polar)]
    lambda_form: LambdaForm,
    /// Monte Carlo samples.
    #[arg(long, default_value_t = VerifyOptions::default().samples)]
    samples: usize,
    /// Largest p in the exact perturbative identities.
    #[arg(long, default_value_t = VerifyOptions::default().p_max)]
    p_max: u32,
}

/// A usage or precondition error (exit 1).
struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

struct Report {
    command: String,
    body: Value,
    csv: Vec<Vec<String>>,
    pass: bool,
    summary: Option<String>,
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64), Usage> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| Usage(format!("{what}: cannot parse '{t}' as a number")));
    let (a, b) = match parts.as_slice() {
        [a] => (num(a)?, 0.0),
        [a, b] => (num(a)?, num(b)?),
        _ => return Err(Usage(format!("{what}: expected one or two comma-separated numbers, got '{s}'"))),
    };
    if !(a.is_finite() && b.is_finite()) {
        return Err(Usage(format!("{what}: values must be finite")));
    }
    Ok((a, b))
}

fn parse_lambda(s: &str, form: LambdaForm) -> Result<C64, Usage> {
    let (a, b) = parse_pair(s, "--lambda")?;
    Ok(match form {
        LambdaForm::Polar => {
            if a < 0.0 {
                return Err(Usage("--lambda: modulus must be non-negative in polar form".into()));
            }
            C64::from_polar(a, b.to_radians())
        }
        LambdaForm::Cartesian => C64::new(a, b),
    })
}

fn check_p(p: u32) -> Result<(), Usage> {
    if !(2..=12).contains(&p) {
        return Err(Usage(format!("--p must satisfy 2 <= p <= 12 (got {p})")));
    }
    Ok(())
}

fn c64_json(z: C64) -> Value {
    json!([z.re, z.im])
}

fn fc(op: &FcOp, seed: u64) -> Result<Report, Usage> {
    match *op {
        FcOp::Eval { p, ref z } => {
            check_p(p)?;
            let (re, im) = parse_pair(z, "--z")?;
            let z = C64::new(re, im);
            let e = FcEvaluator::new(p)?;
            let t = e.eval_closure(z)?;
            let residual = e.residual(z, t);
            Ok(Report {
                command: "fc eval".into(),
                body: json!({"p": p, "z": c64_json(z), "value": c64_json(t), "residual": residual}),
                csv: vec![
                    vec!["p".into(), "z_re".into(), "z_im".into(), "t_re".into(), "t_im".into(), "residual".into()],
                    vec![p.to_string(), re.to_string(), im.to_string(), t.re.to_string(), t.im.to_string(), residual.to_string()],
                ],
                pass: true,
                summary: None,
            })
        }
        FcOp::Numbers { p, n_max } => {
            check_p(p)?;
            if n_max > 500 {
                return Err(Usage(format!("--n-max must be at most 500 (got {n_max})")));
            }
            let values = (0..=n_max).map(|n| fc_number(p, n).map(|v| v.to_string())).collect::<Result<Vec<_>, _>>()?;
            let mut csv = vec![vec!["p".into(), "n".into(), "value".into()]];
            csv.extend(values.iter().enumerate().map(|(n, v)| vec![p.to_string(), n.to_string(), v.clone()]));
            Ok(Report {
                command: "fc numbers".into(),
                // Exact values exceed f64, so they travel as decimal strings.
                body: json!({"p": p, "n_max": n_max, "values": values}),
                csv,
                pass: true,
                summary: None,
            })
        }
        FcOp::Bounds { p, samples } => {
            check_p(p)?;
            if samples == 0 {
                return Err(Usage("--samples must be positive".into()));
            }
            let e = FcEvaluator::new(p)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Log-uniform modulus in [1e-2, 1e4], arguments at least 0.1 rad away from the cut direction.
            let zs: Vec<C64> = (0..samples)
                .map(|_| {
                    let r = 10f64.powf(rng.random_range(-2.0..4.0));
                    let a = rng.random_range(0.1..PI) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                    C64::from_polar(r, a)
                })
                .collect();
            let rep = decay_bound_report(&e, &zs)?;
            Ok(Report {
                command: "fc bounds".into(),
                body: json!({"p": p, "samples": rep.samples, "k": rep.k, "worst_z": c64_json(rep.worst_z),
                    "cut_start": cut_start(p), "min_arg_from_cut": 0.1}),
                csv: vec![
                    vec!["p".into(), "samples".into(), "k".into(), "worst_re".into(), "worst_im".into()],
                    vec![p.to_string(), rep.samples.to_string(), rep.k.to_string(), rep.worst_z.re.to_string(), rep.worst_z.im.to_string()],
                ],
                pass: true,
                summary: None,
            })
        }
        FcOp::Moments { n_max } => {
            if n_max > 20 {
                return Err(Usage(format!("--n-max must be at most 20 (got {n_max})")));
            }
            let mut rows = Vec::new();
            let mut csv = vec![vec!["n".into(), "moment".into(), "catalan".into(), "rel_error".into(), "pass".into()]];
            let mut pass = true;
            for n in 0..=n_max {
                let moment = catalan_moment(n)?;
                let exact = fc_number(2, n)?.to_string();
                let check = moment_cross_check(n);
                let ok = check.is_ok();
                pass &= ok;
                let rel = match &check {
                    Ok(r) => json!(r),
                    Err(e) => json!(e.to_string()),
                };
                csv.push(vec![n.to_string(), moment.to_string(), exact.clone(), rel.to_string(), ok.to_string()]);
                rows.push(json!({"n": n, "moment": moment, "catalan": exact, "rel_error": rel, "pass": ok}));
            }
            Ok(Report { command: "fc moments".into(), body: json!({"rows": rows, "tol": 1e-8}), csv, pass, summary: None })
        }
    }
}

fn suites(arg: SuiteArg) -> Vec<Suite> {
    match arg {
        SuiteArg::Fc => vec![Suite::Fc],
        SuiteArg::Action => vec![Suite::Action],
        SuiteArg::Contour => vec![Suite::Contour],
        SuiteArg::Oracle => vec![Suite::Oracle],
        SuiteArg::Perturb => vec![Suite::Perturb],
        SuiteArg::Bkar => vec![Suite::Bkar],
        SuiteArg::Lve => vec![Suite::Lve],
        SuiteArg::All => Suite::ALL.to_vec(),
    }
}

fn verify(args: &VerifyArgs, g: &Global) -> Result<Report, Usage> {
    if args.samples < 2 {
        return Err(Usage("--samples must be at least 2".into()));
    }
    if !(2..=8).contains(&args.p_max) {
        return Err(Usage(format!("--p-max must satisfy 2 <= p-max <= 8 (got {})", args.p_max)));
    }
    let opts = VerifyOptions { seed: g.seed, samples: args.samples, workers: g.workers, p_max: args.p_max };
    let point = args.p.is_some() || args.n.is_some() || args.lambda.is_some();
    let mut criteria: Vec<Criterion> = if point {
        if args.suite != SuiteArg::Oracle {
            return Err(Usage("--p, --N and --lambda apply only to 'verify oracle'".into()));
        }
        let p = args.p.unwrap_or(2);
        let n = args.n.unwrap_or(2);
        check_p(p)?;
        if !(1..=6).contains(&n) {
            return Err(Usage(format!("--N must satisfy 1 <= N <= 6 (got {n})")));
        }
        let lambda = match &args.lambda {
            Some(s) => parse_lambda(s, args.lambda_form)?,
            None => C64::new(0.1, 0.0),
        };
        ModelParams::square(p, lambda, n)?;
        if lambda.re < 0.0 {
            return Err(Usage(format!("--lambda: the oracle integrals need Re(lambda) >= 0 (got {lambda})")));
        }
        vec![oracle_at(p, n, lambda, &opts)]
    } else {
        let mut out = Vec::new();
        for s in suites(args.suite) {
            out.extend(run_suite(s, &opts)?);
        }
        out
    };
    if g.no_timestamp {
        for r in criteria.iter_mut().flat_map(|c| c.records.iter_mut()) {
            r.redact_timing();
        }
    }
    let passed = criteria.iter().filter(|c| c.pass()).count();
    let records: usize = criteria.iter().map(|c| c.records.len()).sum();
    let failed_records = criteria.iter().flat_map(|c| &c.records).filter(|r| !r.pass).count();
    let pass = passed == criteria.len();
    let name = format!("verify {}", suites(args.suite).iter().map(|s| s.name()).collect::<Vec<_>>().join("+"));
    let mut csv = vec![["criterion", "check", "params", "expected", "got", "tol", "pass"].map(String::from).to_vec()];
    for c in &criteria {
        for r in &c.records {
            csv.push(vec![
                c.id.to_string(),
                r.check.clone(),
                r.params.to_string(),
                r.expected.to_string(),
                r.got.to_string(),
                r.tol.map_or(String::new(), |t| t.to_string()),
                r.pass.to_string(),
            ]);
        }
    }
    let summary = format!(
        "{}: {passed}/{} criteria passed, {failed_records} of {records} checks failed",
        if args.suite == SuiteArg::All { "verify all" } else { name.as_str() },
        criteria.len()
    );
    Ok(Report {
        command: name,
        body: json!({
            "options": {"seed": opts.seed, "samples": opts.samples, "workers": opts.workers, "p_max": opts.p_max},
            "criteria": criteria.iter().map(|c| json!({"id": c.id, "title": c.title, "pass": c.pass(), "records": c.records})).collect::<Vec<_>>(),
            "summary": {"criteria": criteria.len(), "passed": passed, "checks": records, "failed_checks": failed_records, "pass": pass},
        }),
        csv,
        pass,
        summary: Some(summary),
    })
}

fn render(report: &Report, g: &Global) -> Result<Vec<u8>, Usage> {
    match g.format {
        Format::Json => {
            let mut top = serde_json::Map::new();
            top.insert("schema".into(), json!(SCHEMA));
            top.insert("command".into(), json!(report.command));
            if !g.no_timestamp {
                let t = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
                top.insert("timestamp_unix".into(), json!(t));
            }
            top.insert("pass".into(), json!(report.pass));
            top.insert("result".into(), report.body.clone());
            let mut out = serde_json::to_vec_pretty(&Value::Object(top))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &report.csv {
                w.write_record(row)?;
            }
            Ok(w.into_inner().map_err(|e| Usage(e.to_string()))?)
        }
    }
}

fn run(cli: &Cli) -> Result<Report, Usage> {
    match &cli.command {
        Command::Fc { op } => fc(op, cli.global.seed),
        Command::Verify(args) => verify(args, &cli.global),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = run(&cli).and_then(|r| render(&r, &cli.global).map(|bytes| (r, bytes)));
    let (report, bytes) = match result {
        Ok(x) => x,
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let written = match &cli.global.output {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(&bytes).map_err(|e| e.to_string()),
    };
    if let Err(msg) = written {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    if let Some(s) = &report.summary {
        eprintln!("{s}");
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
