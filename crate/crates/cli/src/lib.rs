//! Pipeline orchestration behind the `agreecsp` binary.

use agreecsp::agree::{self, FunctionFamily};
use agreecsp::csp::{self, CspBruteForce, Labeling};
use agreecsp::dsn::{self, Construction, DsnBruteForce};
use agreecsp::exec::Exec;
use agreecsp::formula::{self, Assignment, CnfFormula};
use agreecsp::gen;
use agreecsp::ratio::{self, Rational};
use agreecsp::redblue;
use agreecsp::reduction::{
    self, BuildOptions, DecodeReport, DecodeStatus, ParamSource, ReductionArtifact, ReductionParams,
};
use agreecsp::setsys::{self, EnumOptions, SetSystem};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

pub use agreecsp::gen::gen_planted;

/// Exit status for a run whose checks all held.
pub const EXIT_PASS: i32 = 0;
/// Exit status when a checked inequality failed.
pub const EXIT_VIOLATION: i32 = 1;
/// Exit status for bad arguments or unreadable inputs.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// A stage could not run. `input` marks unreadable or malformed inputs.
    Stage {
        stage: &'static str,
        message: String,
        input: bool,
    },
}

impl CliError {
    pub fn stage(stage: &'static str, e: impl fmt::Display) -> Self {
        CliError::Stage { stage, message: e.to_string(), input: false }
    }

    pub fn input(stage: &'static str, e: impl fmt::Display) -> Self {
        CliError::Stage { stage, message: e.to_string(), input: true }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Stage { input: true, .. } => EXIT_USAGE,
            CliError::Stage { .. } => EXIT_VIOLATION,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Stage { stage, message, .. } => write!(f, "stage {stage}: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

pub fn read_text(stage: &'static str, path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(stage, format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(stage: &'static str, path: &Path) -> Result<T, CliError> {
    let text = read_text(stage, path)?;
    serde_json::from_str(&text).map_err(|e| CliError::input(stage, format!("{}: {e}", path.display())))
}

pub fn read_cnf(stage: &'static str, path: &Path) -> Result<CnfFormula, CliError> {
    let text = read_text(stage, path)?;
    formula::parse_dimacs(&text).map_err(|e| CliError::input(stage, format!("{}: {e}", path.display())))
}

pub fn write_text(stage: &'static str, path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::stage(stage, format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::stage(stage, format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(stage: &'static str, path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::stage(stage, e))?;
    write_text(stage, path, &(text + "\n"))
}

pub fn exec_mode(parallel: bool) -> Exec {
    if parallel {
        Exec::Parallel
    } else {
        Exec::Sequential
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub num_vars: usize,
    pub num_clauses: usize,
    pub delta: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { num_vars: 12, num_clauses: 16, delta: 4 }
    }
}

/// Where the reduction parameters come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum ParamConfig {
    Manual {
        #[serde(with = "ratio::serde_str")]
        alpha: Rational,
        #[serde(with = "ratio::serde_str")]
        gamma: Rational,
        #[serde(with = "ratio::serde_str")]
        mu: Rational,
        #[serde(with = "ratio::serde_str")]
        zeta: Rational,
        ell: usize,
        r: usize,
        h: usize,
    },
    Eth {
        m: u64,
        c: f64,
        #[serde(with = "ratio::serde_str")]
        eps: Rational,
    },
    GapEth {
        #[serde(with = "ratio::serde_str")]
        eps: Rational,
    },
}

impl Default for ParamConfig {
    fn default() -> Self {
        ParamConfig::Manual {
            alpha: ratio::frac(3, 10),
            gamma: ratio::frac(3, 20),
            mu: ratio::frac(3, 10),
            zeta: ratio::frac(1, 48),
            ell: 2,
            r: 1,
            h: 5,
        }
    }
}

impl ParamConfig {
    /// Concrete parameters for `k` clause sets over a formula with occurrence bound `delta`.
    pub fn resolve(&self, k: usize, delta: usize) -> Result<ReductionParams, CliError> {
        let delta = delta.max(1);
        match self {
            ParamConfig::Manual { alpha, gamma, mu, zeta, ell, r, h } => Ok(ReductionParams {
                alpha: alpha.clone(),
                gamma: gamma.clone(),
                mu: mu.clone(),
                zeta: zeta.clone(),
                ell: *ell,
                r: *r,
                h: *h,
                k: BigUint::from(k),
                eps: ratio::int(0),
                delta,
                source: ParamSource::Manual,
            }),
            ParamConfig::Eth { m, c, eps } => {
                reduction::instantiate_params_eth(*m, *c, eps, delta).map_err(|e| CliError::Usage(e.to_string()))
            }
            ParamConfig::GapEth { eps } => reduction::instantiate_params_gap_eth(&BigUint::from(k), eps, delta)
                .map_err(|e| CliError::Usage(e.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    /// Most variables a clause set may touch.
    pub vars: usize,
    /// Most labelings the exact 2-CSP search may cover.
    pub csp: u64,
    /// Most positive-weight arcs the exact DSN search may enumerate.
    pub dsn_arcs: usize,
    /// Most subcollections the set-system verifiers may enumerate.
    pub enumeration: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            vars: reduction::DEFAULT_VAR_CAP,
            csp: csp::DEFAULT_CSP_CAP as u64,
            dsn_arcs: dsn::DEFAULT_POSITIVE_ARC_CAP,
            enumeration: 1 << 22,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// DIMACS input; a planted formula is generated when absent.
    pub cnf: Option<PathBuf>,
    /// Clause-set system as JSON; sampled when absent.
    pub sets: Option<PathBuf>,
    /// Labeling as JSON; the exact optimum (or the star heuristic past the cap) when absent.
    pub labeling: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub format: ReportFormat,
    pub seed: u64,
    pub gen: GenConfig,
    pub num_sets: usize,
    pub set_alpha: f64,
    pub params: ParamConfig,
    pub caps: Caps,
    pub decode: bool,
    pub dsn: bool,
    pub best_effort: bool,
    pub parallel: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cnf: None,
            sets: None,
            labeling: None,
            out_dir: PathBuf::from("out"),
            format: ReportFormat::Json,
            seed: 0,
            gen: GenConfig::default(),
            num_sets: 40,
            set_alpha: 0.3,
            params: ParamConfig::default(),
            caps: Caps::default(),
            decode: true,
            dsn: true,
            best_effort: true,
            parallel: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let c = &self.caps;
        if c.vars == 0 || c.csp == 0 || c.dsn_arcs == 0 || c.enumeration == 0 {
            return Err(CliError::Usage("caps must be positive".into()));
        }
        if self.num_sets == 0 {
            return Err(CliError::Usage("num_sets must be positive".into()));
        }
        if !(self.set_alpha > 0.0 && self.set_alpha < 1.0) {
            return Err(CliError::Usage("set_alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn exec(&self) -> Exec {
        exec_mode(self.parallel)
    }
}

/// One compared inequality, with the bound written out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub formula: String,
    pub measured: String,
    pub bound: String,
    pub holds: bool,
    /// Unenforced checks are reported but do not affect the exit status.
    pub enforced: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    /// `file`, `optimum` or `star_heuristic`.
    pub source: String,
    pub labeling: Labeling,
    #[serde(with = "ratio::serde_str")]
    pub value: Rational,
    /// Set when the value is the exact optimum val(Γ).
    #[serde(with = "ratio::serde_str_opt")]
    pub optimum: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsnSummary {
    pub num_vertices: usize,
    pub demands: usize,
    pub positive_arcs: usize,
    #[serde(with = "ratio::serde_str_opt")]
    pub opt: Option<Rational>,
    /// Some demand has no path at all, so the optimum is infinite.
    pub infeasible: bool,
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub config: PipelineConfig,
    pub num_vars: usize,
    pub num_clauses: usize,
    pub occurrence_bound: usize,
    pub planted: Option<Assignment>,
    pub num_sets: usize,
    pub alphabet_sizes: Vec<usize>,
    pub unsat_trivial: Option<usize>,
    pub params: ReductionParams,
    pub label: Option<LabelSummary>,
    pub decode: Option<DecodeReport>,
    pub dsn: Option<DsnSummary>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn check(name: &str, formula: String, measured: String, bound: String, holds: bool, enforced: bool) -> Check {
    Check { name: name.into(), formula, measured, bound, holds, enforced }
}

fn fmt(x: &Rational) -> String {
    ratio::format(x)
}

/// gen → sets → reduce → label → decode → verify → dsn, writing every
/// intermediate artifact and the report into `cfg.out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport, CliError> {
    cfg.validate()?;
    let exec = cfg.exec();
    let out = &cfg.out_dir;

    let (f, planted) = match &cfg.cnf {
        Some(p) => (read_cnf("gen", p)?, None),
        None => {
            let g = &cfg.gen;
            let (f, a) =
                gen_planted(g.num_vars, g.num_clauses, g.delta, cfg.seed).map_err(|e| CliError::stage("gen", e))?;
            (f, Some(a))
        }
    };
    write_text("gen", &out.join("formula.cnf"), &f.to_dimacs())?;
    if let Some(a) = &planted {
        write_json("gen", &out.join("planted.json"), a)?;
    }

    let t: SetSystem = match &cfg.sets {
        Some(p) => read_json("sets", p)?,
        None => setsys::sample_random(f.num_clauses(), cfg.num_sets, cfg.set_alpha, cfg.seed)
            .map_err(|e| CliError::stage("sets", e))?,
    };
    write_json("sets", &out.join("sets.json"), &t)?;

    let mut artifact = reduction::build_2csp(&f, &t, &BuildOptions { var_cap: cfg.caps.vars, exec })
        .map_err(|e| CliError::stage("reduce", e))?;
    let params = cfg.params.resolve(t.len(), f.occurrence_bound())?;
    artifact.params = Some(params.clone());
    write_json("reduce", &out.join("artifact.json"), &artifact)?;

    let mut checks = Vec::new();
    let label = if artifact.unsat_trivial.is_some() {
        None
    } else {
        Some(label_stage(cfg, &artifact, planted.as_ref(), exec)?)
    };
    if let Some(l) = &label {
        write_json("label", &out.join("labeling.json"), &l.labeling)?;
        if let (Some(a), Some(opt)) = (&planted, &l.optimum) {
            let sat = f.eval_fraction(a).map_err(|e| CliError::stage("verify", e))?;
            checks.push(check(
                "completeness",
                "val(Gamma) = 1 when the formula is satisfiable".into(),
                fmt(opt),
                "1".into(),
                sat != ratio::int(1) || *opt == ratio::int(1),
                true,
            ));
        }
    }

    let decode = match (&label, cfg.decode) {
        (Some(l), true) => {
            let opts =
                agree::DecodeOptions { exec, seed: cfg.seed, best_effort: cfg.best_effort, ..Default::default() };
            let (g, rep) = reduction::decode_assignment(&artifact, &l.labeling, &opts)
                .map_err(|e| CliError::stage("decode", e))?;
            write_json("decode", &out.join("decoded.json"), &g)?;
            verify_decode(&artifact, l, &rep, exec, &mut checks)?;
            Some(rep)
        }
        _ => None,
    };

    let dsn = if cfg.dsn { Some(dsn_stage(cfg, &artifact, label.as_ref(), exec, &mut checks)?) } else { None };

    let passed = checks.iter().all(|c| c.holds || !c.enforced);
    let report = PipelineReport {
        seed: cfg.seed,
        config: cfg.clone(),
        num_vars: f.num_vars(),
        num_clauses: f.num_clauses(),
        occurrence_bound: f.occurrence_bound(),
        planted,
        num_sets: t.len(),
        alphabet_sizes: artifact.instance.alphabet_sizes(),
        unsat_trivial: artifact.unsat_trivial,
        params,
        label,
        decode,
        dsn,
        checks,
        passed,
    };
    write_report(out, cfg.format, &report)?;
    Ok(report)
}

fn label_stage(
    cfg: &PipelineConfig,
    a: &ReductionArtifact,
    planted: Option<&Assignment>,
    exec: Exec,
) -> Result<LabelSummary, CliError> {
    let inst = &a.instance;
    if let Some(p) = &cfg.labeling {
        let l: Labeling = read_json("label", p)?;
        let value = inst.labeling_value(&l).map_err(|e| CliError::input("label", e))?;
        return Ok(LabelSummary { source: "file".into(), labeling: l, value, optimum: None });
    }
    let solver = CspBruteForce { cap: u128::from(cfg.caps.csp), exec };
    match csp::csp_opt_bruteforce(inst, &solver) {
        Ok((v, l)) => Ok(LabelSummary { source: "optimum".into(), labeling: l, value: v.clone(), optimum: Some(v) }),
        Err(csp::CspError::CapExceeded { .. }) => {
            // Value 1 certifies the optimum without a search.
            if let Some(l) = planted.and_then(|g| a.labeling_of(g)) {
                let value = inst.labeling_value(&l).map_err(|e| CliError::stage("label", e))?;
                if value == ratio::int(1) {
                    return Ok(LabelSummary {
                        source: "planted".into(),
                        labeling: l,
                        value: value.clone(),
                        optimum: Some(value),
                    });
                }
            }
            let l = csp::greedy_star_labeling(inst).map_err(|e| CliError::stage("label", e))?;
            let value = inst.labeling_value(&l).map_err(|e| CliError::stage("label", e))?;
            let optimum = (value == ratio::int(1)).then(|| value.clone());
            Ok(LabelSummary { source: "star_heuristic".into(), labeling: l, value, optimum })
        }
        Err(e) => Err(CliError::stage("label", e)),
    }
}

fn verify_decode(
    a: &ReductionArtifact,
    l: &LabelSummary,
    rep: &DecodeReport,
    exec: Exec,
    checks: &mut Vec<Check>,
) -> Result<(), CliError> {
    if rep.status != DecodeStatus::Decoded {
        return Ok(());
    }
    let (Some(value), Some(bound), Some(nu)) = (&rep.value, &rep.decoding_bound, &rep.nu) else {
        return Ok(());
    };
    // The decoding lemma needs T* to be uniform; otherwise the bound is reported only.
    checks.push(check(
        "decoding_lemma",
        format!("val_F(g) >= 1 - mu - 3*nu*Delta/gamma with nu = {}", fmt(nu)),
        fmt(value),
        fmt(bound),
        rep.bound_holds == Some(true),
        rep.t_star_uniform == Some(true),
    ));
    let Some(res) = &rep.decoder else { return Ok(()) };
    let f: FunctionFamily = a.local_functions(&l.labeling).map_err(|e| CliError::stage("verify", e))?;
    let params = a.params.as_ref().expect("params attached before decoding");
    let zp = params.agreement_params(a.formula.occurrence_bound()).zeta_prime();
    let mb =
        agree::check_majority_bound(&f, &res.subcollection, &zp, exec).map_err(|e| CliError::stage("verify", e))?;
    checks.push(check(
        "majority_decoding",
        format!("mean^2 <= n^2*(kappa + zeta') with kappa = {}, zeta' = {}", fmt(&mb.kappa), fmt(&zp)),
        fmt(&(&mb.mean_disagreement * &mb.mean_disagreement)),
        fmt(&mb.squared_bound),
        mb.holds,
        true,
    ));
    let t = &res.thresholds;
    let within = res.within_theorem;
    checks.push(check(
        "subcollection_size",
        "|U'| >= delta*k/(128*l^2)".into(),
        res.subcollection.len().to_string(),
        fmt(&t.size_bound),
        res.checks.size,
        within,
    ));
    checks.push(check(
        "mean_disagreement",
        t.mean_bound_formula.clone(),
        fmt(&(&res.mean_disagreement * &res.mean_disagreement)),
        fmt(&(ratio::from_usize(f.universe_size().pow(2)) * &t.x)),
        res.checks.mean,
        within,
    ));
    Ok(())
}

fn dsn_stage(
    cfg: &PipelineConfig,
    a: &ReductionArtifact,
    label: Option<&LabelSummary>,
    exec: Exec,
    checks: &mut Vec<Check>,
) -> Result<DsnSummary, CliError> {
    let k = a.instance.num_vertices();
    let d = dsn::build_dsn(&a.instance, Construction::Layered);
    write_json("dsn", &cfg.out_dir.join("dsn.json"), &d)?;
    let positive = d.arcs().iter().filter(|x| x.weight > ratio::int(0)).count();
    let mut summary = DsnSummary {
        num_vertices: d.num_vertices(),
        demands: d.demands().len(),
        positive_arcs: positive,
        opt: None,
        infeasible: false,
        skipped: None,
    };
    checks.push(check(
        "dsn_demands",
        "k' = k^2 - k".into(),
        d.demands().len().to_string(),
        (k * k - k).to_string(),
        d.demands().len() == k * k - k,
        true,
    ));
    let sol = match dsn::dsn_opt_bruteforce(&d, &DsnBruteForce { cap: cfg.caps.dsn_arcs, exec }) {
        Ok(s) => s,
        Err(e @ (dsn::DsnError::CapExceeded { .. } | dsn::DsnError::TooManyVertices { .. })) => {
            summary.skipped = Some(e.to_string());
            return Ok(summary);
        }
        Err(dsn::DsnError::Infeasible) => {
            summary.infeasible = true;
            if let Some(val) = label.and_then(|l| l.optimum.as_ref()) {
                checks.push(check(
                    "dsn_completeness",
                    "val = 1 implies opt = 1".into(),
                    "inf".into(),
                    "1".into(),
                    *val != ratio::int(1),
                    true,
                ));
            }
            return Ok(summary);
        }
        Err(e) => return Err(CliError::stage("dsn", e)),
    };
    write_json("dsn", &cfg.out_dir.join("dsn_solution.json"), &sol)?;
    if let Some(val) = label.and_then(|l| l.optimum.as_ref()) {
        let one = ratio::int(1);
        checks.push(check(
            "dsn_completeness",
            "val = 1 implies opt = 1".into(),
            fmt(&sol.cost),
            "1".into(),
            *val != one || sol.cost == one,
            true,
        ));
        if *val > ratio::int(0) {
            // Contradicts completeness at val = 1, so it is reported but not enforced.
            checks.push(check(
                "dsn_soundness_squared",
                format!("opt^2 * val >= 2 with val = {}", fmt(val)),
                fmt(&(&sol.cost * &sol.cost * val)),
                "2".into(),
                dsn::soundness_squared_holds(&sol.cost, val),
                false,
            ));
        }
    }
    summary.opt = Some(sol.cost);
    Ok(summary)
}

pub fn write_report(out: &Path, format: ReportFormat, report: &PipelineReport) -> Result<(), CliError> {
    match format {
        ReportFormat::Json => write_json("report", &out.join("report.json"), report),
        ReportFormat::Csv => {
            let text = checks_csv(&report.checks, report.seed).map_err(|e| CliError::stage("report", e))?;
            write_text("report", &out.join("report.csv"), &text)
        }
    }
}

pub fn checks_csv(checks: &[Check], seed: u64) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "name", "measured", "bound", "holds", "enforced", "formula"])?;
    for c in checks {
        w.write_record([
            seed.to_string(),
            c.name.clone(),
            c.measured.clone(),
            c.bound.clone(),
            c.holds.to_string(),
            c.enforced.to_string(),
            c.formula.clone(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Tally of one lemma across seeds.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaTally {
    pub name: String,
    pub instances: usize,
    /// Instances whose preconditions were met, so a failure counts.
    pub applicable: usize,
    pub violations: Vec<u64>,
    pub enforced: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub seeds: u64,
    pub lemmas: Vec<LemmaTally>,
    pub passed: bool,
}

fn tally(name: &str, enforced: bool) -> LemmaTally {
    LemmaTally { name: name.into(), enforced, ..Default::default() }
}

fn record(t: &mut LemmaTally, seed: u64, applicable: bool, holds: bool) {
    t.instances += 1;
    if applicable {
        t.applicable += 1;
        if !holds {
            t.violations.push(seed);
        }
    }
}

/// Small randomized instances of each lemma, seeds `seed..seed + seeds`.
pub fn verify_lemmas(seed: u64, seeds: u64, exec: Exec) -> Result<LemmaReport, CliError> {
    let opts = EnumOptions { cap: 1 << 22, exec };
    let mut transitivity = tally("transitivity", true);
    let mut transitivity2 = tally("transitivity_2", true);
    let mut majority = tally("majority_decoding", true);
    let mut dense = tally("dense_subgraph", true);
    let mut dsn_complete = tally("dsn_completeness", true);
    let mut dsn_squared = tally("dsn_soundness_squared", false);
    let err = |e: &dyn fmt::Display| CliError::stage("verify", e);
    for s in seed..seed + seeds {
        let mut r = ChaCha8Rng::seed_from_u64(s);
        let supports = setsys::sample_random(10, 8, 0.8, s).map_err(|e| err(&e))?;
        let globals: Vec<Vec<bool>> = (0..2).map(|i| gen::random_global(10, s * 2 + i)).collect();
        let values: Vec<Vec<bool>> = (0..supports.len())
            .map(|i| {
                let g = &globals[r.gen_range(0..2)];
                supports.elements(i).iter().map(|&x| g[x] ^ r.gen_bool(0.05)).collect()
            })
            .collect();
        let f = FunctionFamily::new(supports.clone(), values).map_err(|e| err(&e))?;

        let zeta = ratio::frac(1, 5);
        let (rr, ell) = (2, 2);
        let disperser = setsys::check_disperser(&supports, rr, ell, &zeta, &opts).map_err(|e| err(&e))?;
        let g = agree::build_consistency_graph(&f, &ratio::int(0), &zeta, exec).map_err(|e| err(&e))?;
        let q = ((rr * ell) as u128).pow(2 * (ell as u32 - 1));
        let rep = redblue::check_transitivity(&g, q, ell, exec).map_err(|e| err(&e))?;
        record(&mut transitivity, s, disperser, rep.holds);

        let (gamma, mu, zeta2) = (ratio::frac(1, 3), ratio::frac(1, 5), ratio::frac(1, 40));
        let zp = &mu + ratio::int(2) * &zeta2 / &gamma;
        let uniform =
            setsys::check_all_subcollections_uniform(&supports, 3, &gamma, &mu, &opts).map_err(|e| err(&e))?;
        let g2 = agree::build_consistency_graph(&f, &zeta2, &zp, exec).map_err(|e| err(&e))?;
        let rep2 = redblue::check_transitivity(&g2, 2, 2, exec).map_err(|e| err(&e))?;
        record(&mut transitivity2, s, uniform, rep2.holds);

        let all: Vec<usize> = (0..f.len()).collect();
        let mb = agree::check_majority_bound(&f, &all, &zp, exec).map_err(|e| err(&e))?;
        record(&mut majority, s, true, mb.holds);

        let d0 = g.blue_edge_count() / (2 * g.num_vertices());
        if d0 > 0 {
            let q0 = redblue::check_transitivity(&g, 0, 2, exec).map_err(|e| err(&e))?.worst_count;
            let ok = match redblue::find_dense_subgraphs(&g, q0, 2, d0, exec) {
                Ok(ds) => redblue::non_red_fraction(&g, &ds.u1, &ds.u2) >= ds.threshold,
                Err(_) => false,
            };
            record(&mut dense, s, true, ok);
        }

        let inst = gen::random_csp(r.gen_range(2..=3), 2, r.gen_range(0.3..0.9), s).map_err(|e| err(&e))?;
        let (val, _) = csp::csp_opt_bruteforce(&inst, &CspBruteForce { cap: 1 << 20, exec }).map_err(|e| err(&e))?;
        let d = dsn::build_dsn(&inst, Construction::Layered);
        match dsn::dsn_opt_bruteforce(&d, &DsnBruteForce { cap: 24, exec }) {
            // Infinite optimum: sound for free, complete only if val < 1.
            Err(dsn::DsnError::Infeasible) => {
                record(&mut dsn_complete, s, val == ratio::int(1), false);
                record(&mut dsn_squared, s, val > ratio::int(0), true);
            }
            Err(e) => return Err(err(&e)),
            Ok(sol) => {
                record(&mut dsn_complete, s, val == ratio::int(1), sol.cost == ratio::int(1));
                record(&mut dsn_squared, s, val > ratio::int(0), dsn::soundness_squared_holds(&sol.cost, &val));
            }
        }
    }
    let lemmas = vec![transitivity, transitivity2, majority, dense, dsn_complete, dsn_squared];
    let passed = lemmas.iter().all(|t| !t.enforced || t.violations.is_empty());
    Ok(LemmaReport { seed, seeds, lemmas, passed })
}

/// Reads a labeling file, accepting either `{"labels": [...]}` or a bare array.
pub fn read_labeling(stage: &'static str, path: &Path) -> Result<Labeling, CliError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Wrapped(Labeling),
        Bare(Vec<usize>),
    }
    Ok(match read_json::<Raw>(stage, path)? {
        Raw::Wrapped(l) => l,
        Raw::Bare(v) => Labeling::new(v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dir: &Path) -> PipelineConfig {
        PipelineConfig { out_dir: dir.to_path_buf(), ..Default::default() }
    }

    #[test]
    fn planted_run_has_value_one_and_nu_zero() {
        let dir = tempfile::tempdir().unwrap();
        let rep = run_pipeline(&cfg(dir.path())).unwrap();
        assert_eq!(rep.label.as_ref().unwrap().optimum, Some(ratio::int(1)));
        let d = rep.decode.unwrap();
        assert_eq!(d.status, DecodeStatus::Decoded);
        assert_eq!(d.nu, Some(ratio::int(0)));
        assert!(rep.passed);
        assert!(dir.path().join("report.json").exists());
    }

    #[test]
    fn reports_are_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_pipeline(&cfg(a.path())).unwrap();
        let mut c = cfg(b.path());
        c.parallel = false;
        run_pipeline(&c).unwrap();
        let ra: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
        let mut rb: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(b.path().join("report.json")).unwrap()).unwrap();
        rb["config"]["parallel"] = true.into();
        rb["config"]["out_dir"] = ra["config"]["out_dir"].clone();
        assert_eq!(ra, rb);
    }

    #[test]
    fn missing_cnf_is_a_gen_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path());
        c.cnf = Some(dir.path().join("absent.cnf"));
        match run_pipeline(&c) {
            Err(e @ CliError::Stage { stage: "gen", .. }) => assert_ne!(e.exit_code(), EXIT_PASS),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_cap_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path());
        c.caps.csp = 0;
        assert_eq!(run_pipeline(&c).unwrap_err().exit_code(), EXIT_USAGE);
    }

    #[test]
    fn csv_quotes_formulas() {
        let c = check("x", "a, b".into(), "1".into(), "2".into(), false, true);
        let text = checks_csv(&[c], 7).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "7,x,1,2,false,true,\"a, b\"");
    }

    #[test]
    fn lemma_suite_passes() {
        let rep = verify_lemmas(0, 5, Exec::Sequential).unwrap();
        assert!(rep.passed, "{rep:?}");
    }
}
