//! Command-line front end. Exit codes: 0 definitive verdict, 2 unknown or
//! budget exhausted, 1 usage or IO error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::automaton::DeltaKDfa;
use crate::cegis::{synthesize_b, synthesize_v, CegisConfig, CegisOutcome, CegisResult};
use crate::certificate::Template;
use crate::certificate::{check_certificate, CertKind, Certificate, CheckConfig, CheckVerdict};
use crate::diagnoser::{
    parse_stream, run_diagnoser, simulate, stream_to_string, DiagVerdict, GridConfig, Observation,
};
use crate::falsifier::{FalsifierConfig, Mode};
use crate::model::{load_system, SystemModel};
use crate::product_oracle::verify_exact;

#[derive(Debug, Parser)]
#[command(
    name = "diagcert",
    version,
    about = "Approximate diagnosability: oracle, certificates, diagnoser"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Print the (delta,K) automaton
    Dfa {
        #[arg(long)]
        delta: f64,
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        json: bool,
    },
    /// Exact diagnosability check of a finite model
    Oracle {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long = "K")]
        k: usize,
        /// where to write the witness when the model is not diagnosable
        #[arg(long)]
        witness: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Synthesize a certificate of diagnosability
    Verify(SynthArgs),
    /// Synthesize a certificate of non-diagnosability
    Refute(SynthArgs),
    /// Check a certificate file against a model
    CheckCertificate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        cert: PathBuf,
        #[arg(long, value_enum, default_value_t = CliMode::Certify)]
        mode: CliMode,
        #[command(flatten)]
        check: CheckArgs,
        #[arg(long)]
        json: bool,
    },
    /// Run the online diagnoser over a JSON-lines observation stream
    Diagnose {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        stream: PathBuf,
        /// grid points per input dimension for continuous models
        #[arg(long, default_value_t = 5)]
        input_grid: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Simulate a run and emit its observation stream
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// initial state, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        /// constant input, comma separated (used with --steps)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        input: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// JSON file with a list of inputs, overrides --input/--steps
        #[arg(long)]
        inputs: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// observations equal the exact outputs
        #[arg(long)]
        no_noise: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CliMode {
    Certify,
    Falsify,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 0.05)]
    pub eps_box: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub margin: f64,
    #[arg(long, default_value_t = 9)]
    pub input_grid: usize,
    #[arg(long, default_value_t = 200_000)]
    pub max_boxes: usize,
    /// single-threaded search (the default)
    #[arg(long, conflicts_with = "parallel")]
    pub serial: bool,
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub exclude_accepting_decrease: bool,
}

impl CheckArgs {
    fn config(&self) -> CheckConfig {
        CheckConfig {
            falsifier: FalsifierConfig {
                eps_box: self.eps_box,
                max_boxes: self.max_boxes,
                margin: self.margin,
                input_grid: self.input_grid,
                serial: !self.parallel,
                ..FalsifierConfig::default()
            },
            exclude_accepting_decrease: self.exclude_accepting_decrease,
            ..CheckConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub delta: f64,
    #[arg(long = "K")]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    /// JSON synthesis configuration; command-line flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// where to write the certificate
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub check: CheckArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug)]
pub struct CliError(pub String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(json: bool, value: &T, text: &str) {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(value).expect("reports serialize")
        );
    } else {
        println!("{text}");
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.cmd {
        Cmd::Dfa { delta, k, json } => {
            let dfa = DeltaKDfa::new(delta, k)?;
            let dump = dfa.dump();
            let mut text = format!(
                "(delta={delta}, K={k}) automaton, {} states\n",
                dfa.num_states()
            );
            for e in &dump.transitions {
                text.push_str(&format!("  {} --{}--> {}\n", e.from, e.symbol.name(), e.to));
            }
            emit(json, &dump, text.trim_end());
            Ok(0)
        }
        Cmd::Oracle {
            spec,
            delta,
            k,
            witness,
            json,
        } => {
            let model = load_system(&spec)?;
            let v = verify_exact(&model, delta, k)?;
            if let (Some(path), Some(w)) = (&witness, &v.witness) {
                write(path, &serde_json::to_string_pretty(w)?)?;
            }
            let word = if v.diagnosable {
                "DIAGNOSABLE"
            } else {
                "NOT DIAGNOSABLE"
            };
            let mut text = word.to_string();
            if let Some(w) = &v.witness {
                text.push_str(&format!(
                    "\nwitness: faulty run {:?}\n         clean run  {:?}\n         fault at step {}",
                    w.x_run, w.xh_run, w.fault_step
                ));
            }
            emit(
                json,
                &json!({"verdict": word, "delta": delta, "K": k, "witness": v.witness}),
                &text,
            );
            Ok(0)
        }
        Cmd::Verify(a) => synth(a, CertKind::B),
        Cmd::Refute(a) => synth(a, CertKind::V),
        Cmd::CheckCertificate {
            spec,
            cert,
            mode,
            check,
            json,
        } => {
            let model = load_system(&spec)?;
            let cert = Certificate::load(&cert)?;
            let mode = match mode {
                CliMode::Certify => Mode::Certify,
                CliMode::Falsify => Mode::Falsify,
            };
            let t0 = Instant::now();
            let rep = check_certificate(&model, &cert, mode, &check.config())?;
            let mut text = format!(
                "{} (margin {:e}, {})",
                rep.verdict.as_str(),
                rep.margin,
                if rep.exhaustive {
                    "exhaustive"
                } else {
                    "interval search"
                }
            );
            for c in &rep.conditions {
                text.push_str(&format!("\n  {:<24} {}", c.name, c.outcome.label()));
                if let crate::falsifier::FalsifyOutcome::Counterexample { point, violation } =
                    &c.outcome
                {
                    text.push_str(&format!(" at {point:?} by {violation:.3e}"));
                }
            }
            let mut val = serde_json::to_value(&rep)?;
            val["seconds"] = json!(t0.elapsed().as_secs_f64());
            emit(json, &val, &text);
            Ok(if rep.verdict == CheckVerdict::Unknown {
                2
            } else {
                0
            })
        }
        Cmd::Diagnose {
            spec,
            delta,
            k,
            stream,
            input_grid,
            seed,
            json,
        } => {
            let model = load_system(&spec)?;
            let obs = parse_stream(&read(&stream)?)?;
            let ys: Vec<Vec<f64>> = obs.into_iter().map(|o| o.y).collect();
            let grid = GridConfig {
                input_grid,
                seed,
                ..GridConfig::default()
            };
            let tr = run_diagnoser(&model, delta, k, &ys, &grid)?;
            let mut text = String::new();
            for (i, s) in tr.sizes.iter().enumerate() {
                text.push_str(&format!("k={i} |M|={s}"));
                if let Some(set) = tr.sets.get(i) {
                    text.push_str(&format!(" M={set:?}"));
                }
                text.push('\n');
            }
            text.push_str(&match &tr.verdict {
                DiagVerdict::Running => "NO FAULT (D=0)".to_string(),
                DiagVerdict::FaultDetected {
                    from,
                    to,
                    inconsistent_at_start,
                } => format!(
                    "FAULT DETECTED (D=1) window [{from},{to}]{}",
                    if *inconsistent_at_start {
                        " inconsistent-at-start"
                    } else {
                        ""
                    }
                ),
            });
            emit(json, &tr, &text);
            Ok(0)
        }
        Cmd::Simulate {
            spec,
            x0,
            input,
            steps,
            inputs,
            delta,
            seed,
            no_noise,
            out,
            json,
        } => {
            let model = load_system(&spec)?;
            let us: Vec<Vec<f64>> = match inputs {
                Some(p) => serde_json::from_str(&read(&p)?)?,
                None => vec![input; steps],
            };
            let run = simulate(
                &model,
                &x0,
                &us,
                delta,
                if no_noise { None } else { Some(seed) },
            )?;
            let obs: Vec<Observation> = run
                .observations
                .iter()
                .enumerate()
                .map(|(k, y)| Observation { k, y: y.clone() })
                .collect();
            let text = stream_to_string(&obs);
            match &out {
                Some(p) => write(p, &text)?,
                None if !json => print!("{text}"),
                None => {}
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&run)?);
            } else if out.is_some() {
                println!("fault step: {:?}", run.fault_step);
            }
            Ok(0)
        }
    }
}

fn synth(a: SynthArgs, kind: CertKind) -> Result<i32, CliError> {
    let model = load_system(&a.spec)?;
    let mut cfg: CegisConfig = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?)?,
        None => CegisConfig::default(),
    };
    cfg.seed = a.seed;
    cfg.check = a.check.config();
    let t = Template::uniform(model.state_dim(), a.k, a.degree);
    let t0 = Instant::now();
    let res: CegisResult = match kind {
        CertKind::B => synthesize_b(&model, a.delta, a.k, &t, &cfg),
        CertKind::V => synthesize_v(&model, a.delta, a.k, &t, None, &cfg),
    };
    if let (Some(p), Some(c)) = (&a.out, &res.certificate) {
        write(p, &c.to_json())?;
    }
    let status = match (&res.outcome, &model) {
        (CegisOutcome::Certified { exhaustive: true }, _) => "CERTIFIED",
        (CegisOutcome::Certified { exhaustive: false }, _) => "CERTIFIED AT RESOLUTION",
        (CegisOutcome::TemplateInfeasible, _) => "TEMPLATE INFEASIBLE",
        (CegisOutcome::Budget, _) => "BUDGET",
    };
    let claim = match (kind, &res.outcome) {
        (CertKind::B, CegisOutcome::Certified { .. }) => " (diagnosable)",
        (CertKind::V, CegisOutcome::Certified { .. }) => " (not diagnosable)",
        _ => "",
    };
    let mut text = format!("{status}{claim} after {} iterations", res.log.len());
    for l in &res.log {
        text.push_str(&format!(
            "\n  iter {:>3}: samples {:>5} inputs {:>4} rows {:>6} margin {:+.3e} counterexamples {}",
            l.iteration,
            l.pairs,
            l.inputs,
            l.rows,
            l.margin,
            l.counterexamples.len()
        ));
    }
    if let Some(c) = &res.certificate {
        if a.out.is_none() && matches!(res.outcome, CegisOutcome::Certified { .. }) {
            text.push('\n');
            text.push_str(&c.to_json());
        }
    }
    let mut val = serde_json::to_value(&res)?;
    val["certificate"] = res
        .certificate
        .as_ref()
        .map(|c| serde_json::to_value(c.to_doc()))
        .transpose()?
        .unwrap_or_default();
    val["seconds"] = json!(t0.elapsed().as_secs_f64());
    val["model"] = json!(match &model {
        SystemModel::Finite(_) => "finite",
        SystemModel::Continuous(_) => "continuous",
    });
    emit(a.json, &val, &text);
    Ok(match res.outcome {
        CegisOutcome::Certified { .. } => 0,
        _ => 2,
    })
}
