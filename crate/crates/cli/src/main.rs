use agreecsp::agree::{self, AgreementParams, DecodeOptions, FunctionFamily};
use agreecsp::csp::{self, Csp2Instance, CspBruteForce};
use agreecsp::dsn::{self, Construction, DsnBruteForce, DsnInstance};
use agreecsp::exec::Exec;
use agreecsp::formula::Assignment;
use agreecsp::ratio::{self, Rational};
use agreecsp::redblue::{self, RedBlueError, RedBlueGraph};
use agreecsp::reduction::{self, BuildOptions, ReductionArtifact};
use agreecsp::setsys::{self, BlockSearch, ConstructOptions, EnumOptions, SetSystem, WellBehavedTargets};
use agreecsp_cli::{
    exec_mode, read_cnf, read_json, read_labeling, write_json, write_text, CliError, ParamConfig, PipelineConfig,
    ReportFormat, EXIT_PASS, EXIT_VIOLATION,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "agreecsp", version, about = "3-SAT to 2-CSP reduction, agreement decoding and DSN tools")]
struct Cli {
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random 3-CNF with a planted satisfying assignment.
    Gen {
        #[arg(long)]
        vars: usize,
        #[arg(long)]
        clauses: usize,
        #[arg(long, default_value_t = 4)]
        delta: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the planted assignment.
        #[arg(long)]
        planted: Option<PathBuf>,
    },
    /// Sample or construct a clause-set system.
    Sets(SetsArgs),
    /// Build the 2-CSP of a formula and clause-set system.
    Reduce {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        sets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = reduction::DEFAULT_VAR_CAP)]
        var_cap: usize,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Optimal labeling of a reduction artifact (planted or star labeling past the cap).
    Label {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Restrict this assignment to every vertex instead of searching.
        #[arg(long)]
        assignment: Option<PathBuf>,
        #[arg(long, default_value_t = csp::DEFAULT_CSP_CAP as u64)]
        cap: u64,
    },
    /// Decode a labeling into an assignment and check the decoding bound.
    Decode {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        labeling: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        decode: DecodeArgs,
    },
    /// Randomized lemma suite over a range of seeds.
    VerifyLemmas {
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Directed Steiner network reduction and exact solver.
    #[command(subcommand)]
    Dsn(DsnCommand),
    /// Run the whole pipeline from a config file.
    Report {
        /// JSON pipeline config; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        cnf: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Blue walk and red-filled walk counts of a red/blue graph.
    Walks {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check (q, ell)-red/blue transitivity.
    Transitivity {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        q: u128,
        #[arg(long)]
        ell: usize,
    },
    /// Find dense non-red subgraphs.
    Dense {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        q0: u128,
        #[arg(long)]
        ell0: usize,
        #[arg(long)]
        d0: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Agreement decoding of a function family.
    #[command(subcommand)]
    Agree(AgreeCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SetsArgs {
    /// Universe size; taken from --cnf when omitted.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    cnf: Option<PathBuf>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "3/10")]
    alpha: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Block-wise construction with a certificate instead of plain sampling.
    #[arg(long)]
    construct: bool,
    #[arg(long, default_value_t = 2)]
    ell: usize,
    #[arg(long, default_value = "1/4")]
    eta: String,
    #[arg(long, default_value = "1/4")]
    mu: String,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    /// Block size below the formula value.
    #[arg(long)]
    unsafe_m0: Option<usize>,
    /// Enumerate every collection for blocks of at most this many bits.
    #[arg(long)]
    exhaustive_bits: Option<u32>,
    #[arg(long, default_value_t = 1000)]
    retries: u64,
    #[arg(long, default_value_t = 1 << 22)]
    enum_cap: u64,
    #[arg(long)]
    cert: Option<PathBuf>,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, value_enum, default_value_t = Schedule::Manual)]
    schedule: Schedule,
    #[arg(long, default_value = "3/10")]
    alpha: String,
    #[arg(long, default_value = "3/20")]
    gamma: String,
    #[arg(long, default_value = "3/10")]
    mu: String,
    #[arg(long, default_value = "1/48")]
    zeta: String,
    #[arg(long, default_value_t = 2)]
    ell: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 5)]
    h: usize,
    #[arg(long, default_value_t = 1 << 16)]
    eth_m: u64,
    #[arg(long, default_value_t = 0.0)]
    eth_c: f64,
    #[arg(long, default_value = "1/2")]
    eps: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Schedule {
    Manual,
    Eth,
    GapEth,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run the decoder even below the agreement threshold.
    #[arg(long)]
    best_effort: bool,
    #[arg(long, default_value_t = 1000)]
    retries: u64,
}

#[derive(Subcommand)]
enum DsnCommand {
    /// DSN instance of a 2-CSP (a bare instance or a reduction artifact).
    Reduce {
        #[arg(long)]
        csp: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        single_layer: bool,
    },
    /// Exact minimum-cost solution.
    Solve {
        #[arg(long)]
        dsn: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = dsn::DEFAULT_POSITIVE_ARC_CAP)]
        cap: usize,
    },
}

#[derive(Subcommand)]
enum AgreeCommand {
    /// Run the agreement decoder on a function family.
    Decode {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        h: usize,
        #[arg(long)]
        zeta: String,
        #[arg(long)]
        mu: String,
        #[arg(long)]
        gamma: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        decode: DecodeArgs,
    },
    /// Consistency graph G^{F,zeta,zeta'}.
    Graph {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value = "0")]
        zeta: String,
        #[arg(long)]
        zeta_prime: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the agreement lemmas on one family.
    VerifyLemmas {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        zeta: String,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        ell: usize,
        #[arg(long, default_value = "1/3")]
        gamma: String,
        #[arg(long, default_value = "1/5")]
        mu: String,
        #[arg(long, default_value_t = 1 << 22)]
        cap: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn rational(name: &str, s: &str) -> Result<Rational, CliError> {
    ratio::parse(s).map_err(|e| CliError::Usage(format!("--{name}: {e}")))
}

fn status(ok: bool) -> i32 {
    if ok {
        EXIT_PASS
    } else {
        EXIT_VIOLATION
    }
}

fn print_or_write(stage: &'static str, out: &Option<PathBuf>, value: &serde_json::Value) -> Result<(), CliError> {
    match out {
        Some(p) => write_json(stage, p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value).map_err(|e| CliError::stage(stage, e))?);
            Ok(())
        }
    }
}

fn graph_error(stage: &'static str, e: RedBlueError) -> CliError {
    match e {
        RedBlueError::InvalidParameter(_) | RedBlueError::TooFewBlueEdges { .. } => CliError::Usage(e.to_string()),
        e => CliError::stage(stage, e),
    }
}

fn params_config(p: &ParamArgs) -> Result<ParamConfig, CliError> {
    Ok(match p.schedule {
        Schedule::Manual => ParamConfig::Manual {
            alpha: rational("alpha", &p.alpha)?,
            gamma: rational("gamma", &p.gamma)?,
            mu: rational("mu", &p.mu)?,
            zeta: rational("zeta", &p.zeta)?,
            ell: p.ell,
            r: p.r,
            h: p.h,
        },
        Schedule::Eth => ParamConfig::Eth { m: p.eth_m, c: p.eth_c, eps: rational("eps", &p.eps)? },
        Schedule::GapEth => ParamConfig::GapEth { eps: rational("eps", &p.eps)? },
    })
}

fn decode_options(d: &DecodeArgs, exec: Exec) -> DecodeOptions {
    DecodeOptions { exec, seed: d.seed, best_effort: d.best_effort, subset_retries: d.retries, ..Default::default() }
}

fn sets(a: &SetsArgs, exec: Exec) -> Result<i32, CliError> {
    let m = match (a.m, &a.cnf) {
        (Some(m), _) => m,
        (None, Some(p)) => read_cnf("sets", p)?.num_clauses(),
        (None, None) => return Err(CliError::Usage("give --m or --cnf".into())),
    };
    let alpha = rational("alpha", &a.alpha)?;
    if !a.construct {
        let s =
            setsys::sample_random(m, a.k, ratio::to_f64(&alpha), a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
        write_json("sets", &a.out, &s)?;
        return Ok(EXIT_PASS);
    }
    let targets = WellBehavedTargets {
        alpha,
        ell: a.ell,
        eta: rational("eta", &a.eta)?,
        mu: rational("mu", &a.mu)?,
        r: a.r,
        h: a.h,
        unsafe_m0: a.unsafe_m0,
    };
    let opts = ConstructOptions {
        seed: a.seed,
        search: match a.exhaustive_bits {
            Some(max_bits) => BlockSearch::Exhaustive { max_bits },
            None => BlockSearch::Randomized { retries: a.retries },
        },
        enumeration: EnumOptions { cap: u128::from(a.enum_cap), exec },
    };
    let (s, cert) = setsys::construct_deterministic(m, a.k, &targets, &opts).map_err(|e| CliError::stage("sets", e))?;
    write_json("sets", &a.out, &s)?;
    if let Some(p) = &a.cert {
        write_json("sets", p, &cert)?;
    }
    Ok(EXIT_PASS)
}

/// A file holding either a bare 2-CSP or a reduction artifact.
#[derive(Deserialize)]
#[serde(untagged)]
enum CspInput {
    Artifact(Box<ReductionArtifact>),
    Instance(Csp2Instance),
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let exec = exec_mode(!cli.sequential);
    match cli.command {
        Command::Gen { vars, clauses, delta, seed, out, planted } => {
            let (f, a) =
                agreecsp_cli::gen_planted(vars, clauses, delta, seed).map_err(|e| CliError::stage("gen", e))?;
            write_text("gen", &out, &f.to_dimacs())?;
            if let Some(p) = planted {
                write_json("gen", &p, &a)?;
            }
            Ok(EXIT_PASS)
        }
        Command::Sets(a) => sets(&a, exec),
        Command::Reduce { cnf, sets, out, var_cap, params } => {
            let f = read_cnf("reduce", &cnf)?;
            let t: SetSystem = read_json("reduce", &sets)?;
            let mut a = reduction::build_2csp(&f, &t, &BuildOptions { var_cap, exec })
                .map_err(|e| CliError::stage("reduce", e))?;
            a.params = Some(params_config(&params)?.resolve(t.len(), f.occurrence_bound())?);
            write_json("reduce", &out, &a)?;
            Ok(EXIT_PASS)
        }
        Command::Label { artifact, out, assignment: Some(g), .. } => {
            let a: ReductionArtifact = read_json("label", &artifact)?;
            let g: Assignment = read_json("label", &g)?;
            let l = a.labeling_of(&g).ok_or_else(|| {
                CliError::input("label", "the assignment has the wrong length or violates a clause of some T_i")
            })?;
            write_json("label", &out, &l)?;
            Ok(EXIT_PASS)
        }
        Command::Label { artifact, out, cap, assignment: None } => {
            let a: ReductionArtifact = read_json("label", &artifact)?;
            let l = match csp::csp_opt_bruteforce(&a.instance, &CspBruteForce { cap: u128::from(cap), exec }) {
                Ok((_, l)) => l,
                Err(csp::CspError::CapExceeded { .. }) => {
                    csp::greedy_star_labeling(&a.instance).map_err(|e| CliError::stage("label", e))?
                }
                Err(e) => return Err(CliError::stage("label", e)),
            };
            write_json("label", &out, &l)?;
            Ok(EXIT_PASS)
        }
        Command::Decode { artifact, labeling, out, decode } => {
            let a: ReductionArtifact = read_json("decode", &artifact)?;
            let l = read_labeling("decode", &labeling)?;
            let (_, rep) = reduction::decode_assignment(&a, &l, &decode_options(&decode, exec))
                .map_err(|e| CliError::stage("decode", e))?;
            write_json("decode", &out, &rep)?;
            let violated = rep.t_star_uniform == Some(true) && rep.bound_holds == Some(false);
            Ok(status(!violated))
        }
        Command::VerifyLemmas { seeds, seed, out } => {
            let rep = agreecsp_cli::verify_lemmas(seed, seeds, exec)?;
            let v = serde_json::to_value(&rep).map_err(|e| CliError::stage("verify", e))?;
            print_or_write("verify", &out, &v)?;
            Ok(status(rep.passed))
        }
        Command::Dsn(DsnCommand::Reduce { csp, out, single_layer }) => {
            let inst = match read_json::<CspInput>("dsn", &csp)? {
                CspInput::Artifact(a) => a.instance,
                CspInput::Instance(i) => i,
            };
            let c = if single_layer { Construction::SingleLayer } else { Construction::Layered };
            write_json("dsn", &out, &dsn::build_dsn(&inst, c))?;
            Ok(EXIT_PASS)
        }
        Command::Dsn(DsnCommand::Solve { dsn: path, out, cap }) => {
            let d: DsnInstance = read_json("dsn", &path)?;
            let sol =
                dsn::dsn_opt_bruteforce(&d, &DsnBruteForce { cap, exec }).map_err(|e| CliError::stage("dsn", e))?;
            write_json("dsn", &out, &sol)?;
            Ok(EXIT_PASS)
        }
        Command::Report { config, out_dir, cnf, seed, format } => {
            let mut cfg: PipelineConfig = match &config {
                Some(p) => read_json("gen", p)?,
                None => PipelineConfig::default(),
            };
            cfg.parallel &= !cli.sequential;
            if let Some(d) = out_dir {
                cfg.out_dir = d;
            }
            if cnf.is_some() {
                cfg.cnf = cnf;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(f) = format {
                cfg.format = match f {
                    Format::Json => ReportFormat::Json,
                    Format::Csv => ReportFormat::Csv,
                };
            }
            let rep = agreecsp_cli::run_pipeline(&cfg)?;
            for c in &rep.checks {
                let mark = if c.holds {
                    "ok"
                } else if c.enforced {
                    "FAIL"
                } else {
                    "fails (not enforced)"
                };
                println!("{:<24} {mark:<20} measured {} bound {}", c.name, c.measured, c.bound);
            }
            Ok(status(rep.passed))
        }
        Command::Walks { graph, ell, out } => {
            let g: RedBlueGraph = read_json("walks", &graph)?;
            let c = redblue::walk_census(&g, ell, exec).map_err(|e| graph_error("walks", e))?;
            let v = serde_json::to_value(&c).map_err(|e| CliError::stage("walks", e))?;
            print_or_write("walks", &out, &v)?;
            Ok(EXIT_PASS)
        }
        Command::Transitivity { graph, q, ell } => {
            let g: RedBlueGraph = read_json("transitivity", &graph)?;
            let rep = redblue::check_transitivity(&g, q, ell, exec).map_err(|e| graph_error("transitivity", e))?;
            let v = serde_json::to_value(&rep).map_err(|e| CliError::stage("transitivity", e))?;
            print_or_write("transitivity", &None, &v)?;
            Ok(status(rep.holds))
        }
        Command::Dense { graph, q0, ell0, d0, out } => {
            let g: RedBlueGraph = read_json("dense", &graph)?;
            let res = redblue::find_dense_subgraphs(&g, q0, ell0, d0, exec).map_err(|e| graph_error("dense", e))?;
            let v = serde_json::to_value(&res).map_err(|e| CliError::stage("dense", e))?;
            print_or_write("dense", &out, &v)?;
            Ok(EXIT_PASS)
        }
        Command::Agree(AgreeCommand::Decode { family, r, ell, h, zeta, mu, gamma, out, decode }) => {
            let f: FunctionFamily = read_json("agree", &family)?;
            let p = AgreementParams {
                r,
                ell,
                h,
                zeta: rational("zeta", &zeta)?,
                mu: rational("mu", &mu)?,
                gamma: rational("gamma", &gamma)?,
            };
            match agree::agreement_decode(&f, &p, &decode_options(&decode, exec)) {
                Ok(res) => {
                    write_json("agree", &out, &res)?;
                    Ok(status(!res.within_theorem || res.checks.all()))
                }
                Err(e @ agree::AgreeError::BelowThreshold { .. }) => Err(CliError::Usage(e.to_string())),
                Err(e) => Err(CliError::stage("agree", e)),
            }
        }
        Command::Agree(AgreeCommand::Graph { family, zeta, zeta_prime, out }) => {
            let f: FunctionFamily = read_json("agree", &family)?;
            let g = agree::build_consistency_graph(
                &f,
                &rational("zeta", &zeta)?,
                &rational("zeta-prime", &zeta_prime)?,
                exec,
            )
            .map_err(|e| CliError::Usage(e.to_string()))?;
            write_json("agree", &out, &g)?;
            Ok(EXIT_PASS)
        }
        Command::Agree(AgreeCommand::VerifyLemmas { family, zeta, r, ell, gamma, mu, cap, out }) => {
            let f: FunctionFamily = read_json("agree", &family)?;
            let zeta = rational("zeta", &zeta)?;
            let gamma = rational("gamma", &gamma)?;
            let mu = rational("mu", &mu)?;
            let opts = EnumOptions { cap: u128::from(cap), exec };
            let err = |e: &dyn std::fmt::Display| CliError::stage("agree", e);
            let s = f.supports();
            let disperser = setsys::check_disperser(s, r, ell, &zeta, &opts).map_err(|e| err(&e))?;
            let q =
                AgreementParams { r, ell, h: 1, zeta: zeta.clone(), mu: mu.clone(), gamma: gamma.clone() }.walk_bound();
            let g = agree::build_consistency_graph(&f, &ratio::int(0), &zeta, exec).map_err(|e| err(&e))?;
            let trans = redblue::check_transitivity(&g, q, ell, exec).map_err(|e| err(&e))?;
            let zp = &mu + ratio::int(2) * &zeta / &gamma;
            let uniform = r <= s.len()
                && setsys::check_all_subcollections_uniform(s, r, &gamma, &mu, &opts).map_err(|e| err(&e))?;
            let g2 = agree::build_consistency_graph(&f, &zeta, &zp, exec).map_err(|e| err(&e))?;
            let trans2 = redblue::check_transitivity(&g2, r.saturating_sub(1) as u128, 2, exec).map_err(|e| err(&e))?;
            let all: Vec<usize> = (0..f.len()).collect();
            let maj = agree::check_majority_bound(&f, &all, &zp, exec).map_err(|e| err(&e))?;
            let ok = (!disperser || trans.holds) && (!uniform || trans2.holds) && maj.holds;
            let v = json!({
                "disperser": disperser,
                "transitivity": trans,
                "uniform": uniform,
                "transitivity_2": trans2,
                "majority": maj,
                "passed": ok,
            });
            print_or_write("agree", &out, &v)?;
            Ok(status(ok))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let stage = match &e {
                CliError::Stage { stage, .. } => *stage,
                CliError::Usage(_) => "usage",
            };
            eprintln!("error[{stage}]: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
