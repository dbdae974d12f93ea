//! Monte Carlo learning curves, rate fitting and the trichotomy harness.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::class::{Atom, FiniteClass, Label, LabeledSample, RealizableDistribution};
use crate::constructions::{
    assemble_counterexample, dsl_branch_distribution, make_lattice_linear_class, make_schedule, rate_samples,
};
use crate::error::{usage, Error, Result};
use crate::games::{BGame, DslGame};
use crate::learners::{
    exp_rate_learner_with, ConstantLearner, Erm, Estimate, Example1Learner, NearLinear, NearLinearOptions, Rule,
    UniformLearner,
};

pub const DEFAULT_GRID: [usize; 7] = [8, 16, 32, 64, 128, 256, 512];

// ------------------------------------------------------------ configs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub d: usize,
    pub k: u32,
    pub bound: u64,
    pub weights: Vec<i64>,
    pub biases: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSpec {
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSpec {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingletonSpec {
    pub points: usize,
    #[serde(default)]
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSpec {
    File(FileSpec),
    Lattice(LatticeSpec),
    Counterexample(CounterexampleSpec),
    Singleton(SingletonSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateShape {
    /// 1 / log(n + 1)
    InvLog,
    /// 1 / n
    Inv,
}

impl RateShape {
    pub fn eval(self, n: f64) -> f64 {
        match self {
            RateShape::InvLog => 1.0 / (n + 1.0).ln(),
            RateShape::Inv => 1.0 / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomsSpec {
    /// (point, label, weight)
    pub atoms: Vec<(usize, Label, f64)>,
}

/// Weights 2^{-1}, 2^{-2}, ... on `points` (the last takes the remainder),
/// labels read off hypothesis `hypothesis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DyadicSpec {
    pub points: Vec<usize>,
    pub hypothesis: usize,
}

/// Branch distribution on the counterexample tree. Without `branch`, each
/// level takes the child on which first-consistent ERM makes the most
/// leave-one-coordinate-out mistakes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DslBranchSpec {
    #[serde(default)]
    pub branch: Option<Vec<usize>>,
    pub rate: RateShape,
    pub depth_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistSpec {
    File(FileSpec),
    Atoms(AtomsSpec),
    Dyadic(DyadicSpec),
    DslBranch(DslBranchSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubLearner {
    Erm,
    Constant(Label),
}

fn default_guard() -> usize {
    32
}

fn default_estimate() -> Estimate {
    Estimate::Exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NearLinearSpec {
    pub sub: SubLearner,
    #[serde(default = "default_guard")]
    pub n_guard: usize,
    #[serde(default = "default_estimate")]
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerSpec {
    Erm,
    Constant(Label),
    Exp,
    Example1,
    NearLinear(NearLinearSpec),
}

impl LearnerSpec {
    pub fn name(&self) -> String {
        match self {
            LearnerSpec::Erm => "erm".into(),
            LearnerSpec::Constant(y) => format!("constant({y})"),
            LearnerSpec::Exp => "exp".into(),
            LearnerSpec::Example1 => "example1".into(),
            LearnerSpec::NearLinear(s) => format!("near-linear({:?})", s.sub).to_lowercase(),
        }
    }
}

fn default_grid() -> Vec<usize> {
    DEFAULT_GRID.to_vec()
}

/// A `curve` run; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub class: ClassSpec,
    pub dist: DistSpec,
    pub learner: LearnerSpec,
    #[serde(default = "default_grid")]
    pub grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl CurveConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Usage(format!("bad curve config: {e}")))
    }

    fn resolve(base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    /// Class and distribution; relative paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<(FiniteClass, RealizableDistribution)> {
        if self.reps == 0 {
            return usage("reps must be >= 1");
        }
        if self.grid.is_empty() || self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return usage("grid must be non-empty and strictly increasing");
        }
        let class = match &self.class {
            ClassSpec::File(f) => FiniteClass::read_json(std::fs::File::open(Self::resolve(base, &f.path))?)?,
            ClassSpec::Lattice(l) => make_lattice_linear_class(l.d, l.k, l.bound, &l.weights, &l.biases)?,
            ClassSpec::Counterexample(c) => assemble_counterexample(c.depth)?.class,
            ClassSpec::Singleton(s) => FiniteClass::new(s.points, s.label + 1, vec![vec![s.label; s.points]])?,
        };
        let dist = match &self.dist {
            DistSpec::File(f) => {
                RealizableDistribution::from_json_str(&class, &std::fs::read_to_string(Self::resolve(base, &f.path))?)?
            }
            DistSpec::Atoms(a) => RealizableDistribution::with_found_witness(
                &class,
                a.atoms.iter().map(|&(point, label, weight)| Atom { point, label, weight }).collect(),
            )?,
            DistSpec::Dyadic(d) => {
                if d.hypothesis >= class.len() || d.points.is_empty() {
                    return usage("dyadic: hypothesis out of range or no points");
                }
                let h = class.hyp(d.hypothesis);
                let m = d.points.len();
                let atoms = d
                    .points
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let e = if i + 1 == m { i } else { i + 1 };
                        (x, h.get(x).copied().unwrap_or(0), crate::class::rat(1, 1i64 << e))
                    })
                    .collect::<Vec<_>>();
                if d.points.iter().any(|&x| x >= class.domain_size()) {
                    return usage("dyadic: point out of range");
                }
                RealizableDistribution::from_exact(&class, atoms, crate::class::Certificate::Witness(d.hypothesis))?
            }
            DistSpec::DslBranch(b) => {
                let depth = match &self.class {
                    ClassSpec::Counterexample(c) => c.depth,
                    _ => return usage("dsl_branch needs the counterexample class"),
                };
                let cx = assemble_counterexample(depth)?;
                let tree = cx.tree();
                let branch = match &b.branch {
                    Some(v) => v.clone(),
                    None => adversarial_branch(&class, &tree),
                };
                let sched = make_schedule(&rate_samples(|n| b.rate.eval(n), 40), b.depth_cap)?;
                dsl_branch_distribution(&class, &tree, &branch, &sched)?
            }
        };
        Ok((class, dist))
    }
}

fn adversarial_branch(class: &FiniteClass, tree: &crate::trees::DslTree) -> Vec<usize> {
    // score a child by how many of its coordinates first-consistent ERM gets
    // wrong when it has seen the path and every other coordinate
    let erm_miss = |pairs: &[(usize, Label)], x: usize, y: Label| {
        class.consistent_members(pairs).first().is_some_and(|&i| class.hyp(i)[x] != y)
    };
    let mut path: Vec<(usize, Label)> = Vec::new();
    let mut v = Vec::new();
    let mut idx = 0;
    for _ in 0..tree.depth {
        let node = &tree.nodes[idx];
        let score = |j: usize| {
            let pairs: Vec<(usize, Label)> = node.points.iter().copied().zip(node.cube[j].iter().copied()).collect();
            (0..pairs.len())
                .filter(|&c| {
                    let mut seen = path.clone();
                    seen.extend(pairs.iter().enumerate().filter(|&(i, _)| i != c).map(|(_, &p)| p));
                    erm_miss(&seen, pairs[c].0, pairs[c].1)
                })
                .count()
        };
        let j = (0..node.cube.len()).max_by_key(|&j| (score(j), std::cmp::Reverse(j))).unwrap_or(0);
        path.extend(node.points.iter().copied().zip(node.cube[j].iter().copied()));
        v.push(j);
        idx = node.children[j].unwrap_or(0);
    }
    v
}

// ------------------------------------------------------------ estimation

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningCurve {
    pub grid: Vec<usize>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    /// Trials whose learner call failed, per grid point; excluded from means.
    pub failures: Vec<usize>,
}

impl LearningCurve {
    /// Curve with given means and zero stderr (for calibration inputs).
    pub fn synthetic(grid: &[usize], f: impl Fn(f64) -> f64, reps: usize) -> Self {
        LearningCurve {
            grid: grid.to_vec(),
            mean: grid.iter().map(|&n| f(n as f64)).collect(),
            stderr: vec![0.0; grid.len()],
            reps,
            seed: 0,
            failures: vec![0; grid.len()],
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "mean_error", "stderr", "reps"])?;
        for i in 0..self.grid.len() {
            let reps = self.reps - self.failures[i];
            w.write_record([
                self.grid[i].to_string(),
                format!("{:.6e}", self.mean[i]),
                format!("{:.6e}", self.stderr[i]),
                reps.to_string(),
            ])
            ?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("ascii csv"))
    }

    pub fn is_all_zero(&self) -> bool {
        self.mean.iter().all(|&m| m == 0.0)
    }

    /// First n with mean <= eps, log-interpolated between grid points.
    pub fn n_to_reach(&self, eps: f64) -> Option<f64> {
        let i = self.mean.iter().position(|&m| m <= eps)?;
        if i == 0 {
            return Some(self.grid[0] as f64);
        }
        let (n0, n1) = ((self.grid[i - 1] as f64).ln(), (self.grid[i] as f64).ln());
        let (e0, e1) = (self.mean[i - 1], self.mean[i]);
        let frac = if e1 > 0.0 { (e0.ln() - eps.ln()) / (e0.ln() - e1.ln()) } else { (e0 - eps) / (e0 - e1) };
        Some((n0 + frac * (n1 - n0)).exp())
    }
}

/// Runs `body` with a per-thread learner closure (caches live per thread).
fn with_learner<T>(
    class: &FiniteClass,
    dist: &RealizableDistribution,
    spec: &LearnerSpec,
    body: impl FnOnce(&dyn Fn(&LabeledSample, u64) -> Result<Rule>) -> T,
) -> T {
    match spec {
        LearnerSpec::Erm => body(&|s, _| Ok(Erm.learn(class, &s.pairs))),
        LearnerSpec::Constant(y) => body(&|s, _| Ok(ConstantLearner(*y).learn(class, &s.pairs))),
        LearnerSpec::Exp => {
            let g = BGame::new(class);
            body(&|s, _| exp_rate_learner_with(&g, s))
        }
        LearnerSpec::Example1 => match Example1Learner::for_class(class) {
            Ok(l) => body(&|s, _| Ok(l.learn(class, &s.pairs))),
            Err(e) => {
                let msg = e.to_string();
                body(&move |_, _| Err(Error::Usage(msg.clone())))
            }
        },
        LearnerSpec::NearLinear(nl) => {
            let game = DslGame::new(class);
            let cache = NearLinear::new(&game);
            let sub: Box<dyn UniformLearner> = match nl.sub {
                SubLearner::Erm => Box::new(Erm),
                SubLearner::Constant(y) => Box::new(ConstantLearner(y)),
            };
            body(&|s, seed| {
                let opts = NearLinearOptions { n_guard: nl.n_guard, estimate: nl.estimate, seed };
                cache.learn(s, sub.as_ref(), opts, Some(dist)).map(|r| r.rule)
            })
        }
    }
}

fn trial_rng(seed: u64, n: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    rng.set_word_pos((rep as u128) << 40);
    rng
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// reps independent (sample, fresh test point) trials per grid point.
/// Trial randomness comes from (seed, n, rep) only, so results do not
/// depend on the thread count.
pub fn estimate_curve(
    class: &FiniteClass,
    dist: &RealizableDistribution,
    learner: &LearnerSpec,
    grid: &[usize],
    reps: usize,
    seed: u64,
    threads: usize,
) -> Result<LearningCurve> {
    if reps == 0 {
        return usage("reps must be >= 1");
    }
    let tasks: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..reps).map(move |r| (g, r))).collect();
    let threads = threads.max(1).min(tasks.len().max(1));
    let mut outcome: Vec<Option<f64>> = vec![None; tasks.len()];
    std::thread::scope(|sc| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let tasks = &tasks;
                sc.spawn(move || {
                    with_learner(class, dist, learner, |learn| {
                        let mut out = Vec::new();
                        for i in (t..tasks.len()).step_by(threads) {
                            let (g, rep) = tasks[i];
                            let n = grid[g];
                            let mut rng = trial_rng(seed, n, rep);
                            let sample = dist.sample_with(n, &mut rng);
                            let test = dist.sample_with(1, &mut rng).pairs[0];
                            let lseed: u64 = rng.gen();
                            let err = learn(&sample, lseed).ok().map(|r| (r.predict(test.0) != test.1) as u8 as f64);
                            out.push((i, err));
                        }
                        out
                    })
                })
            })
            .collect();
        for h in handles {
            for (i, e) in h.join().expect("trial thread panicked") {
                outcome[i] = e;
            }
        }
    });
    let mut mean = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    let mut failures = Vec::with_capacity(grid.len());
    for g in 0..grid.len() {
        let vals: Vec<f64> = outcome[g * reps..(g + 1) * reps].iter().flatten().copied().collect();
        failures.push(reps - vals.len());
        let m = vals.len() as f64;
        if vals.is_empty() {
            mean.push(f64::NAN);
            stderr.push(f64::NAN);
            continue;
        }
        let mu = vals.iter().sum::<f64>() / m;
        let var = if vals.len() > 1 { vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
        mean.push(mu);
        stderr.push((var / m).sqrt());
    }
    Ok(LearningCurve { grid: grid.to_vec(), mean, stderr, reps, seed, failures })
}

pub fn run_config(cfg: &CurveConfig, base: &Path, threads: Option<usize>) -> Result<LearningCurve> {
    let (class, dist) = cfg.build(base)?;
    let t = threads.or(cfg.threads).unwrap_or_else(default_threads);
    estimate_curve(&class, &dist, &cfg.learner, &cfg.grid, cfg.reps, cfg.seed, t)
}

// ------------------------------------------------------------ fitting

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClass {
    Exponential,
    Polynomial,
    UnclassifiedSlow,
    /// Every grid mean is zero: at or below the floor everywhere.
    ExponentialOrFaster,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub class: RateClass,
    /// (C, c) with e(n) ~ C R(c n): R = e^{-n} or n^{-alpha} (c = 1 there).
    pub constants: (f64, f64),
    /// Exponential decay constant c in log e = a - c n.
    pub exp_rate: f64,
    pub alpha: f64,
    /// alpha +- 1.96 standard errors of the slope
    pub alpha_band: (f64, f64),
    pub r2_exp: f64,
    pub r2_poly: f64,
    pub points_used: usize,
    pub floored: bool,
    pub low_confidence: bool,
}

pub const R2_THRESHOLD: f64 = 0.9;

struct Line {
    a: f64,
    b: f64,
    r2: f64,
    se_b: f64,
}

fn regress(x: &[f64], y: &[f64]) -> Line {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let sse: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 0.0 };
    let se_b = if x.len() > 2 && sxx > 0.0 { (sse / (m - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    Line { a, b, r2, se_b }
}

/// Log-linear fits in n and in log n. Uses the positive grid means when
/// there are at least 4 of them, else every mean floored at 1/(2 reps).
pub fn fit_rate(curve: &LearningCurve) -> RateFit {
    let low_confidence = curve.reps < 2;
    let floor = 1.0 / (2.0 * curve.reps as f64);
    let pts: Vec<(f64, f64)> = curve
        .grid
        .iter()
        .zip(&curve.mean)
        .filter(|(_, &m)| m.is_finite())
        .map(|(&n, &m)| (n as f64, m))
        .collect();
    if pts.iter().all(|p| p.1 == 0.0) {
        return RateFit {
            class: RateClass::ExponentialOrFaster,
            constants: (floor, 0.0),
            exp_rate: f64::INFINITY,
            alpha: f64::INFINITY,
            alpha_band: (f64::INFINITY, f64::INFINITY),
            r2_exp: 0.0,
            r2_poly: 0.0,
            points_used: 0,
            floored: true,
            low_confidence,
        };
    }
    let positive: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.1 > 0.0).collect();
    let (used, floored) = if positive.len() >= 4 {
        (positive, false)
    } else {
        (pts.iter().map(|&(n, m)| (n, m.max(floor))).collect(), true)
    };
    let y: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let xn: Vec<f64> = used.iter().map(|p| p.0).collect();
    let xl: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let e = regress(&xn, &y);
    let p = regress(&xl, &y);
    let (c, alpha) = (-e.b, -p.b);
    let class = if e.r2 >= p.r2 {
        if e.r2 >= R2_THRESHOLD && c > 0.0 {
            RateClass::Exponential
        } else {
            RateClass::UnclassifiedSlow
        }
    } else if p.r2 >= R2_THRESHOLD && alpha > 0.0 {
        RateClass::Polynomial
    } else {
        RateClass::UnclassifiedSlow
    };
    let constants = match class {
        RateClass::Exponential => (e.a.exp(), c),
        _ => (p.a.exp(), 1.0),
    };
    RateFit {
        class,
        constants,
        exp_rate: c,
        alpha,
        alpha_band: (alpha - 1.96 * p.se_b, alpha + 1.96 * p.se_b),
        r2_exp: e.r2,
        r2_poly: p.r2,
        points_used: used.len(),
        floored,
        low_confidence: low_confidence || used.len() < 4,
    }
}

/// Grid 2^1..2^40 used for fitter calibration; 1/log(n+1) is only told
/// apart from a small-alpha power law over a range this wide.
pub fn calibration_grid() -> Vec<usize> {
    (1..=40).map(|e| 1usize << e).collect()
}

// ------------------------------------------------------------ trichotomy

/// Thresholds on {0..12}, target step at 12, masses halving upwards.
pub fn canonical_poly(reps: usize, seed: u64) -> CurveConfig {
    CurveConfig {
        name: Some("near-linear".into()),
        class: ClassSpec::Lattice(LatticeSpec { d: 1, k: 2, bound: 12, weights: vec![1], biases: (1..=13).collect() }),
        dist: DistSpec::Dyadic(DyadicSpec { points: (0..=12).collect(), hypothesis: 12 }),
        learner: LearnerSpec::NearLinear(NearLinearSpec { sub: SubLearner::Erm, n_guard: 8, estimate: Estimate::Exact }),
        grid: default_grid(),
        reps,
        seed,
        threads: None,
    }
}

/// Thresholds on {0..4}; the light atom at 1 is the only one the learner
/// gets wrong before seeing it.
pub fn canonical_exp(reps: usize, seed: u64) -> CurveConfig {
    CurveConfig {
        name: Some("exponential".into()),
        class: ClassSpec::Lattice(LatticeSpec { d: 1, k: 2, bound: 4, weights: vec![1], biases: (1..=5).collect() }),
        dist: DistSpec::Atoms(AtomsSpec { atoms: vec![(0, 0, 0.485), (4, 1, 0.485), (1, 1, 0.03)] }),
        learner: LearnerSpec::Exp,
        grid: default_grid(),
        reps,
        seed,
        threads: None,
    }
}

pub fn canonical_slow(reps: usize, seed: u64) -> CurveConfig {
    CurveConfig {
        name: Some("slow".into()),
        class: ClassSpec::Counterexample(CounterexampleSpec { depth: 3 }),
        dist: DistSpec::DslBranch(DslBranchSpec { branch: None, rate: RateShape::InvLog, depth_cap: 12 }),
        learner: LearnerSpec::Erm,
        grid: default_grid(),
        reps,
        seed,
        threads: None,
    }
}

pub fn canonical_configs(reps: usize, seed: u64) -> [CurveConfig; 3] {
    [canonical_exp(reps, seed), canonical_poly(reps, seed + 1), canonical_slow(reps, seed + 2)]
}

#[derive(Debug, Clone, Serialize)]
pub struct TrichotomyRow {
    pub name: String,
    pub learner: String,
    pub curve: LearningCurve,
    pub fit: RateFit,
    pub n_eps: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrichotomyReport {
    pub eps: f64,
    pub rows: Vec<TrichotomyRow>,
    /// n_eps strictly increasing down the rows (None counts as infinite).
    pub ordered: bool,
    /// All three curves identically zero.
    pub degenerate: bool,
}

pub const TRICHOTOMY_EPS: f64 = 0.1;

pub fn trichotomy_report(configs: &[CurveConfig], base: &Path, threads: Option<usize>) -> Result<TrichotomyReport> {
    let mut rows = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let curve = run_config(cfg, base, threads)?;
        let fit = fit_rate(&curve);
        let n_eps = curve.n_to_reach(TRICHOTOMY_EPS);
        rows.push(TrichotomyRow {
            name: cfg.name.clone().unwrap_or_else(|| format!("config {i}")),
            learner: cfg.learner.name(),
            curve,
            fit,
            n_eps,
        });
    }
    let key = |r: &TrichotomyRow| r.n_eps.unwrap_or(f64::INFINITY);
    let ordered = rows.windows(2).all(|w| key(&w[0]) < key(&w[1]));
    let degenerate = rows.iter().all(|r| r.curve.is_all_zero());
    Ok(TrichotomyReport { eps: TRICHOTOMY_EPS, rows, ordered, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn singleton() -> (FiniteClass, RealizableDistribution) {
        let c = FiniteClass::new(3, 2, vec![vec![1, 1, 1]]).unwrap();
        let atoms = vec![Atom { point: 0, label: 1, weight: 0.5 }, Atom { point: 2, label: 1, weight: 0.5 }];
        let d = RealizableDistribution::with_found_witness(&c, atoms).unwrap();
        (c, d)
    }

    #[test]
    fn singleton_curve_is_zero() {
        let (c, d) = singleton();
        for l in [LearnerSpec::Erm, LearnerSpec::Exp] {
            let cur = estimate_curve(&c, &d, &l, &[1, 4, 16], 50, 1, 2).unwrap();
            assert!(cur.is_all_zero());
            assert_eq!(fit_rate(&cur).class, RateClass::ExponentialOrFaster);
        }
    }

    #[test]
    fn constant_learner_is_flat() {
        let c = FiniteClass::new(2, 2, vec![vec![0, 1], vec![0, 0]]).unwrap();
        let atoms = vec![Atom { point: 0, label: 0, weight: 0.7 }, Atom { point: 1, label: 1, weight: 0.3 }];
        let d = RealizableDistribution::with_found_witness(&c, atoms).unwrap();
        let cur = estimate_curve(&c, &d, &LearnerSpec::Constant(0), &DEFAULT_GRID, 2000, 5, 4).unwrap();
        for (m, s) in cur.mean.iter().zip(&cur.stderr) {
            assert!((m - 0.3).abs() <= 3.0 * s + 1e-12, "{m} {s}");
        }
    }

    #[test]
    fn thread_count_does_not_matter() {
        let cfg = canonical_exp(40, 9);
        let (c, d) = cfg.build(Path::new(".")).unwrap();
        let a = estimate_curve(&c, &d, &cfg.learner, &[4, 8, 16], 40, 9, 1).unwrap();
        let b = estimate_curve(&c, &d, &cfg.learner, &[4, 8, 16], 40, 9, 3).unwrap();
        assert_eq!(a, b);
    }

    fn spearman_negative(xs: &[f64]) -> bool {
        // ranks of the means against the grid order
        let m = xs.len();
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
        let mut rank = vec![0.0; m];
        for (r, &i) in idx.iter().enumerate() {
            rank[i] = r as f64;
        }
        let d2: f64 = rank.iter().enumerate().map(|(i, r)| (i as f64 - r).powi(2)).sum();
        let rho = 1.0 - 6.0 * d2 / (m as f64 * (m * m - 1) as f64);
        rho < 0.0
    }

    #[test]
    fn exp_learner_curve_decreases() {
        let cfg = canonical_exp(400, 3);
        let (c, d) = cfg.build(Path::new(".")).unwrap();
        let cur = estimate_curve(&c, &d, &LearnerSpec::Exp, &[1, 2, 4, 8, 16, 32], 400, 3, 4).unwrap();
        assert!(spearman_negative(&cur.mean), "{:?}", cur.mean);
    }

    #[test]
    fn synthetic_fits() {
        let g = calibration_grid();
        let f = fit_rate(&LearningCurve::synthetic(&DEFAULT_GRID, |n| 2f64.powf(-n), 1000));
        assert_eq!(f.class, RateClass::Exponential);
        assert!((f.exp_rate / 2f64.ln() - 1.0).abs() < 0.05);
        let f = fit_rate(&LearningCurve::synthetic(&g, |n| 1.0 / n, 1000));
        assert_eq!(f.class, RateClass::Polynomial);
        assert!((f.alpha - 1.0).abs() < 0.05);
        let f = fit_rate(&LearningCurve::synthetic(&g, |n| 1.0 / (n + 1.0).ln(), 1000));
        assert_eq!(f.class, RateClass::UnclassifiedSlow);
    }

    #[test]
    fn doubling_reps_shrinks_stderr() {
        let c = FiniteClass::new(2, 2, vec![vec![0, 1], vec![0, 0]]).unwrap();
        let atoms = vec![Atom { point: 0, label: 0, weight: 0.6 }, Atom { point: 1, label: 1, weight: 0.4 }];
        let d = RealizableDistribution::with_found_witness(&c, atoms).unwrap();
        let l = LearnerSpec::Constant(0);
        let a = estimate_curve(&c, &d, &l, &[4], 4000, 1, 4).unwrap();
        let b = estimate_curve(&c, &d, &l, &[4], 8000, 2, 4).unwrap();
        let ratio = a.stderr[0] / b.stderr[0];
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn smoke_and_degenerate_reports() {
        let one = |name: &str| CurveConfig {
            name: Some(name.into()),
            class: ClassSpec::Singleton(SingletonSpec { points: 3, label: 0 }),
            dist: DistSpec::Atoms(AtomsSpec { atoms: vec![(0, 0, 1.0)] }),
            learner: LearnerSpec::Erm,
            grid: default_grid(),
            reps: 3,
            seed: 1,
            threads: Some(1),
        };
        let r = trichotomy_report(&[one("a"), one("b"), one("c")], Path::new("."), None).unwrap();
        assert!(r.degenerate);
        let mut cfgs = canonical_configs(1, 4);
        for c in &mut cfgs {
            c.grid = vec![8, 16, 32, 64];
        }
        let r = trichotomy_report(&cfgs, Path::new("."), Some(2)).unwrap();
        assert!(r.rows.iter().all(|row| row.fit.low_confidence));
    }

    #[test]
    fn configs_reject_unknown_keys() {
        let good = serde_json::to_string(&canonical_slow(10, 1)).unwrap();
        assert_eq!(CurveConfig::from_json_str(&good).unwrap(), canonical_slow(10, 1));
        let bad = good.replacen("\"reps\"", "\"bogus\":1,\"reps\"", 1);
        assert!(matches!(CurveConfig::from_json_str(&bad), Err(Error::Usage(_))));
        let bad = good.replacen("\"depth\":3", "\"depth\":3,\"x\":1", 1);
        assert!(CurveConfig::from_json_str(&bad).is_err());
    }

    #[test]
    fn csv_layout() {
        let c = LearningCurve::synthetic(&[8, 16], |n| 1.0 / n, 10);
        let s = c.to_csv().unwrap();
        assert!(s.starts_with("n,mean_error,stderr,reps\n8,"));
        assert_eq!(s.lines().count(), 3);
    }

    #[test]
    fn n_to_reach_interpolates() {
        let c = LearningCurve::synthetic(&[8, 16, 32], |n| 1.6 / n, 10);
        let n = c.n_to_reach(0.1).unwrap();
        assert!((n - 16.0).abs() < 1e-9);
        let c = LearningCurve::synthetic(&[8, 16, 32], |n| 3.2 / n, 10);
        assert!((c.n_to_reach(0.1).unwrap() - 32.0).abs() < 1e-9);
        assert!(c.n_to_reach(0.01).is_none());
    }
}
