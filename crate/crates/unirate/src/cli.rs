//! The `unirate-lab` command line. Every subcommand writes JSON (or CSV for
//! curves) to stdout or `--out`, and maps errors to exit codes 1/2/3.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::class::{FiniteClass, LabeledSample, RealizableDistribution};
use crate::constructions::{
    assemble_counterexample, dsl_branch_distribution, find_natarajan1_pseudocube, littlestone_branch_distribution,
    make_counterexample_class, make_lattice_linear_class, make_schedule, rate_samples,
};
use crate::curvelab::{
    canonical_configs, canonical_exp, canonical_poly, canonical_slow, fit_rate, run_config, trichotomy_report,
    CurveConfig, RateShape,
};
use crate::dimensions::DimReport;
use crate::error::{usage, Error, Result};
use crate::games::{run_avoidance, run_online, val_b, BPosition, DslGame};
use crate::learners::{
    exp_rate_learner, near_linear_learner, Erm, Estimate, Example1Learner, NearLinearOptions,
    UniformLearner,
};
use crate::pseudocube::{cap, enumerate_pseudo_cubes_with, EnumOptions};
use crate::trees::{
    max_dsl_depth, max_gl_depth, max_littlestone_depth, max_nl_depth, verify_tree, AnyTree, DslTree, GlTree,
    LittlestoneTree, NlTree,
};
use crate::verify::{run_suite, VerifyOptions};

#[derive(Parser, Debug)]
#[command(name = "unirate-lab", version, about = "Finite-class dimensions, games, learners and learning curves")]
pub struct Cli {
    /// Worker threads for Monte Carlo work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Natarajan, graph, DS and Littlestone dimensions of a class.
    Dims {
        #[arg(long)]
        class: PathBuf,
        /// Include witness sets.
        #[arg(long)]
        witnesses: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pseudo-cubes inside the projection onto a point tuple.
    Cube {
        #[arg(long)]
        class: PathBuf,
        /// Comma-separated point indices.
        #[arg(long, value_delimiter = ',', required = true)]
        points: Vec<usize>,
        #[arg(long)]
        maximal: bool,
        /// Overrides UNIRATELAB_CAP.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deepest tree of a kind, or check a tree file against the class.
    Tree {
        #[arg(long)]
        class: PathBuf,
        #[arg(long, value_enum)]
        kind: TreeKind,
        #[arg(long)]
        max_depth: Option<usize>,
        /// Tree file as written by this command.
        #[arg(long)]
        verify: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Root game value, optionally played along a sample.
    Game {
        #[arg(long)]
        class: PathBuf,
        #[arg(long, value_enum)]
        kind: GameKind,
        /// CSV sample (x,y) to play.
        #[arg(long)]
        sample: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a learner and print its prediction table.
    Learn(LearnArgs),
    /// Constructions: lattice classes, blocks, counterexamples, schedules, hard distributions.
    #[command(subcommand)]
    Construct(Construct),
    /// Estimate a learning curve and fit its rate.
    Curve {
        #[arg(long, required_unless_present = "canonical")]
        config: Option<PathBuf>,
        /// Built-in configurations instead of a file.
        #[arg(long, value_enum, conflicts_with = "config")]
        canonical: Option<Canonical>,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        /// CSV destination (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        fit_out: Option<PathBuf>,
    },
    /// Run property suites and print a pass/fail ledger.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Smaller sample counts.
        #[arg(long)]
        quick: bool,
        /// JSON copy of the ledger.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum TreeKind {
    Littlestone,
    Dsl,
    Nl,
    Gl,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum GameKind {
    B,
    Dsl,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Algo {
    Exp,
    Example1,
    NearLinear,
    Erm,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Canonical {
    Exp,
    Poly,
    Slow,
    Trichotomy,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Rate {
    InvLog,
    Inv,
    InvSqrt,
}

#[derive(Args, Debug)]
pub struct LearnArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    #[arg(long)]
    class: PathBuf,
    /// Distribution JSON; needed to draw a sample and by near-linear's exact estimate.
    #[arg(long)]
    dist: Option<PathBuf>,
    #[arg(long, conflicts_with = "n")]
    sample: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    n_guard: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Construct {
    /// Monotone lattice linear class on {0..bound}^d.
    Lattice {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        bound: u64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        weights: Vec<i64>,
        #[arg(long, value_delimiter = ',', required = true)]
        biases: Vec<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A pseudo-cube of Natarajan dimension 1.
    Block {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deep-DSL class of Natarajan dimension 1.
    Counterexample {
        #[arg(long)]
        depth: usize,
        /// Skip the exhaustive check.
        #[arg(long)]
        no_check: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mass schedule for a target rate, with its check report.
    Schedule {
        #[arg(long, value_enum)]
        rate: Rate,
        #[arg(long, default_value_t = 12)]
        cap: usize,
        /// Sample the rate at n = 2^1 .. 2^max_exp.
        #[arg(long, default_value_t = 40)]
        max_exp: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dyadic distribution along a Littlestone branch.
    LittlestoneDist {
        #[arg(long)]
        class: PathBuf,
        /// Branch bits, e.g. 0110.
        #[arg(long)]
        branch: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Schedule-weighted distribution along a branch of the counterexample tree.
    DslDist {
        #[arg(long)]
        depth: usize,
        /// Child index per level, comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        branch: Vec<usize>,
        #[arg(long, value_enum, default_value = "inv-log")]
        rate: Rate,
        #[arg(long, default_value_t = 12)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Tree files: the kind plus the tree's own fields.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", content = "tree", rename_all = "snake_case")]
enum TreeFile {
    Littlestone(LittlestoneTree),
    Dsl(DslTree),
    Nl(NlTree),
    Gl(GlTree),
}

impl From<TreeFile> for AnyTree {
    fn from(t: TreeFile) -> Self {
        match t {
            TreeFile::Littlestone(t) => AnyTree::Littlestone(t),
            TreeFile::Dsl(t) => AnyTree::Dsl(t),
            TreeFile::Nl(t) => AnyTree::Nl(t),
            TreeFile::Gl(t) => AnyTree::Gl(t),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_class(path: &Path) -> Result<FiniteClass> {
    FiniteClass::from_json_str(&read(path)?)
}

fn emit_text(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{}", text.trim_end()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn emit(v: &Value, out: &Option<PathBuf>) -> Result<()> {
    emit_text(&serde_json::to_string_pretty(v)?, out)
}

fn rate_fn(r: Rate) -> impl Fn(f64) -> f64 {
    move |n: f64| match r {
        Rate::InvLog => RateShape::InvLog.eval(n),
        Rate::Inv => RateShape::Inv.eval(n),
        Rate::InvSqrt => n.powf(-0.5),
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    let threads = cli.threads;
    match cli.cmd {
        Command::Dims { class, witnesses, out } => {
            let c = load_class(&class)?;
            emit(&serde_json::to_value(DimReport::compute(&c, witnesses))?, &out)?;
        }
        Command::Cube { class, points, maximal, cap: c, out } => {
            let cl = load_class(&class)?;
            let proj = cl.project(&points)?;
            let cubes = enumerate_pseudo_cubes_with(&proj, EnumOptions { cap: c.unwrap_or_else(cap), maximal_only: maximal })?;
            emit(&json!({"points": points, "count": cubes.len(), "cubes": cubes}), &out)?;
        }
        Command::Tree { class, kind, max_depth, verify, out } => {
            let c = load_class(&class)?;
            if let Some(path) = verify {
                let tree: AnyTree = serde_json::from_str::<TreeFile>(&read(&path)?)?.into();
                let v = verify_tree(&tree, &c)?;
                emit(&json!({"depth": tree.depth(), "ok": v.ok, "violation": v.violation}), &out)?;
                return Ok(if v.ok { 0 } else { 1 });
            }
            let file = match kind {
                TreeKind::Littlestone => TreeFile::Littlestone(max_littlestone_depth(&c, max_depth).1),
                TreeKind::Dsl => TreeFile::Dsl(max_dsl_depth(&c, max_depth).1),
                TreeKind::Nl => TreeFile::Nl(max_nl_depth(&c, max_depth).1),
                TreeKind::Gl => TreeFile::Gl(max_gl_depth(&c, max_depth).1),
            };
            let raw = serde_json::to_value(&file)?;
            let tree: AnyTree = file.into();
            let mut v = raw;
            v["depth"] = json!(tree.depth());
            v["graph"] = tree.to_json();
            emit(&v, &out)?;
        }
        Command::Game { class, kind, sample, out } => {
            let c = load_class(&class)?;
            let s = match &sample {
                Some(p) => Some(LabeledSample::read_csv(fs::File::open(p).map_err(|e| {
                    Error::Usage(format!("cannot read {}: {e}", p.display()))
                })?)?),
                None => None,
            };
            let v = match kind {
                GameKind::B => {
                    let root = val_b(&c, &BPosition::default())?.as_i64();
                    match s {
                        Some(s) => json!({"root_value": root, "online": run_online(&c, &s)?}),
                        None => json!({"root_value": root}),
                    }
                }
                GameKind::Dsl => {
                    let game = DslGame::new(&c);
                    let root = game.root_value()?.as_i64();
                    match s {
                        Some(s) => {
                            let states = run_avoidance(&game, &s.pairs)?;
                            json!({"root_value": root, "states": states})
                        }
                        None => json!({"root_value": root}),
                    }
                }
            };
            emit(&v, &out)?;
        }
        Command::Learn(a) => learn(a)?,
        Command::Construct(c) => construct(c)?,
        Command::Curve { config, canonical, reps, seed, out, fit_out } => {
            let here = Path::new(".");
            if let Some(Canonical::Trichotomy) = canonical {
                let r = trichotomy_report(&canonical_configs(reps, seed), here, threads)?;
                emit(&serde_json::to_value(&r)?, &out)?;
                return Ok(0);
            }
            let (cfg, base) = match (canonical, config) {
                (Some(Canonical::Exp), _) => (canonical_exp(reps, seed), here.to_path_buf()),
                (Some(Canonical::Poly), _) => (canonical_poly(reps, seed), here.to_path_buf()),
                (Some(Canonical::Slow), _) => (canonical_slow(reps, seed), here.to_path_buf()),
                (_, Some(p)) => {
                    let cfg = CurveConfig::from_json_str(&read(&p)?)?;
                    (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
                }
                _ => return usage("curve needs --config or --canonical"),
            };
            let curve = run_config(&cfg, &base, threads)?;
            emit_text(&curve.to_csv()?, &out)?;
            let fit = serde_json::to_value(fit_rate(&curve))?;
            match fit_out {
                Some(p) => emit(&fit, &Some(p))?,
                None => eprintln!("{}", serde_json::to_string(&fit)?),
            }
        }
        Command::Verify { suite, seed, quick, out } => {
            let checks = run_suite(&suite, &VerifyOptions { seed, quick, threads })?;
            let failed = checks.iter().filter(|c| !c.ok).count();
            let mut text: String = checks.iter().map(|c| c.line() + "\n").collect();
            text.push_str(&format!("{} checks, {} passed, {failed} failed", checks.len(), checks.len() - failed));
            emit_text(&text, &None)?;
            if let Some(p) = out {
                fs::write(&p, serde_json::to_string_pretty(&checks)?)?;
            }
            return Ok(if failed == 0 { 0 } else { 1 });
        }
    }
    Ok(0)
}

fn learn(a: LearnArgs) -> Result<()> {
    let c = load_class(&a.class)?;
    let dist = match &a.dist {
        Some(p) => Some(RealizableDistribution::from_json_str(&c, &read(p)?)?),
        None => None,
    };
    let sample = match (&a.sample, a.n, &dist) {
        (Some(p), _, _) => LabeledSample::read_csv(
            fs::File::open(p).map_err(|e| Error::Usage(format!("cannot read {}: {e}", p.display())))?,
        )?,
        (None, Some(n), Some(d)) => d.sample_iid(n, a.seed),
        (None, Some(_), None) => return usage("--n needs --dist to draw from"),
        (None, None, _) => return usage("learn needs --sample or --n with --dist"),
    };
    if let Some(&(x, y)) = sample.pairs.iter().find(|&&(x, y)| x >= c.domain_size() || y >= c.labels()) {
        return usage(format!("sample pair ({x}, {y}) is outside the class's domain or label set"));
    }
    let mut v = match a.algo {
        Algo::Erm => json!({"rule": Erm.learn(&c, &sample.pairs)}),
        Algo::Exp => json!({"rule": exp_rate_learner(&c, &sample)?}),
        Algo::Example1 => json!({"rule": Example1Learner::for_class(&c)?.learn(&c, &sample.pairs)}),
        Algo::NearLinear => {
            let estimate = if dist.is_some() { Estimate::Exact } else { Estimate::Empirical };
            let opts = NearLinearOptions { n_guard: a.n_guard, estimate, seed: a.seed };
            serde_json::to_value(near_linear_learner(&c, &sample, &Erm, opts, dist.as_ref())?)?
        }
    };
    if let Some(d) = &dist {
        let table: Vec<u32> = serde_json::from_value(v["rule"]["table"].clone())?;
        v["error"] = json!(d.er(&table) + 0.0);
    }
    v["n"] = json!(sample.len());
    emit(&v, &a.out)
}

fn construct(c: Construct) -> Result<()> {
    match c {
        Construct::Lattice { d, k, bound, weights, biases, out } => {
            emit_text(&make_lattice_linear_class(d, k, bound, &weights, &biases)?.to_json_string(), &out)
        }
        Construct::Block { d, k, out } => {
            let cube = find_natarajan1_pseudocube(d, k)?;
            emit(&json!({"d": cube.d, "size": cube.len(), "patterns": cube.patterns}), &out)
        }
        Construct::Counterexample { depth, no_check, out } => {
            let (cx, check) = if no_check {
                (assemble_counterexample(depth)?, None)
            } else {
                let cx = make_counterexample_class(depth)?;
                let ch = cx.check()?;
                (cx, Some(ch))
            };
            let class: Value = serde_json::from_str(&cx.class.to_json_string())?;
            let tree = serde_json::to_value(TreeFile::Dsl(cx.tree()))?;
            emit(&json!({"depth": depth, "star": cx.star, "class": class, "tree": tree, "check": check}), &out)
        }
        Construct::Schedule { rate, cap, max_exp, out } => {
            let s = make_schedule(&rate_samples(rate_fn(rate), max_exp), cap)?;
            let mut v = s.to_json();
            v["check"] = serde_json::to_value(s.check())?;
            emit(&v, &out)
        }
        Construct::LittlestoneDist { class, branch, out } => {
            let cl = load_class(&class)?;
            let bits = branch
                .chars()
                .map(|ch| match ch {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => usage(format!("branch must be a 0/1 string, got {branch:?}")),
                })
                .collect::<Result<Vec<bool>>>()?;
            let (_, tree) = max_littlestone_depth(&cl, Some(bits.len()));
            if tree.depth < bits.len() {
                return Err(Error::Domain(format!("no Littlestone tree of depth {} (max {})", bits.len(), tree.depth)));
            }
            let d = littlestone_branch_distribution(&cl, &tree, &bits)?;
            emit_text(&d.to_json_string(), &out)
        }
        Construct::DslDist { depth, branch, rate, cap, out } => {
            let cx = assemble_counterexample(depth)?;
            let s = make_schedule(&rate_samples(rate_fn(rate), 40), cap)?;
            let d = dsl_branch_distribution(&cx.class, &cx.tree(), &branch, &s)?;
            emit_text(&d.to_json_string(), &out)
        }
    }
}

/// Parses argv, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("unirate-lab: {e}");
            e.exit_code()
        }
    }
}
