//! Property suites behind `verify` and the numbered acceptance criteria.
//! Every check reports a pass/fail line; nothing here panics on failure.

use std::path::Path;
use std::time::Instant;

use itertools::Itertools;
use num_rational::BigRational;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::class::{Atom, Certificate, FiniteClass, Label, LabeledSample, Pattern, Projection, RealizableDistribution};
use crate::constructions::{
    assemble_counterexample, dsl_branch_distribution, littlestone_branch_distribution, make_counterexample_class,
    make_lattice_linear_class, make_schedule, neq_prop_violations, rate_samples, Schedule,
};
use crate::curvelab::{
    calibration_grid, canonical_configs, canonical_exp, estimate_curve, fit_rate, trichotomy_report, LearnerSpec,
    LearningCurve, RateClass, DEFAULT_GRID,
};
use crate::dimensions::{ds_dim, graph_dim, littlestone_dim, natarajan_dim, DimReport};
use crate::error::{usage, Result};
use crate::games::{run_avoidance, run_online, val_b, avoidance_query, BMove, BPosition, DslGame, DslPosition, DslRound, GameValue, OnlineLearner};
use crate::learners::{
    build_avoiding_class, lattice_coords, partial_sample_sides, per_rate, Erm, Example1Predictor, LatticePoint,
    StateAvoider, UniformLearner,
};
use crate::pseudocube::{enumerate_pseudo_cubes_with, half_mass_check, project_fixing, EnumOptions};
use crate::trees::{littlestone_tree, max_dsl_depth, max_gl_depth, max_littlestone_depth, max_nl_depth, verify_tree, AnyTree};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub module: String,
    pub tag: String,
    pub name: String,
    pub ok: bool,
    pub detail: String,
    pub secs: f64,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "[{}] {} / {}: {} ({}; {:.1}s)",
            if self.ok { "PASS" } else { "FAIL" },
            self.module,
            self.tag,
            self.name,
            self.detail,
            self.secs
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Smaller counts, for smoke runs.
    pub quick: bool,
    pub threads: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 2024, quick: false, threads: None }
    }
}

impl VerifyOptions {
    fn count(&self, full: usize) -> usize {
        if self.quick {
            (full / 10).max(3)
        } else {
            full
        }
    }
}

fn run(module: &str, tag: &str, name: &str, limit: Option<f64>, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let start = Instant::now();
    let (mut ok, mut detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    if let Some(l) = limit {
        if secs > l {
            ok = false;
            detail.push_str(&format!("; over the {l:.0}s budget"));
        }
    }
    Check { module: module.into(), tag: tag.into(), name: name.into(), ok, detail, secs }
}

// ------------------------------------------------------------ generators

/// |X| <= 5, K <= 4, |H| <= 20, as used by the random-class criteria.
pub fn random_class(seed: u64) -> FiniteClass {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=5);
    let k = rng.gen_range(2..=4);
    let m = rng.gen_range(1..=20);
    let h = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0..k)).collect()).collect();
    FiniteClass::new(n, k, h).expect("non-empty")
}

fn random_classes(opts: &VerifyOptions, full: usize) -> Vec<FiniteClass> {
    (0..opts.count(full) as u64).map(|i| random_class(opts.seed.wrapping_add(i))).collect()
}

fn random_stream(rng: &mut ChaCha8Rng, class: &FiniteClass, len: usize) -> Vec<(usize, Label)> {
    let h = class.hyp(rng.gen_range(0..class.len())).to_vec();
    (0..len).map(|_| rng.gen_range(0..class.domain_size())).map(|x| (x, h[x])).collect()
}

fn all_tuples(d: usize, k: u32) -> Vec<Pattern> {
    (0..d).map(|_| 0..k).multi_cartesian_product().collect()
}

// direct definition, independent of the library predicate
fn naive_is_cube(s: &[Pattern], d: usize) -> bool {
    !s.is_empty()
        && s.iter().all(|p| {
            (0..d).all(|i| s.iter().any(|q| q[i] != p[i] && (0..d).all(|j| j == i || q[j] == p[j])))
        })
}

// ------------------------------------------------------------ criteria

pub const CRITERIA: usize = 13;

pub fn criterion(i: usize, opts: &VerifyOptions) -> Check {
    let name = format!("criterion {i}");
    match i {
        1 => run("pseudocube", "half-mass, fixed-coordinate projection", &name, Some(60.0), || {
            let mut cubes = 0;
            let mut bad = Vec::new();
            for d in 1..=3 {
                for k in 2..=3 {
                    let proj = Projection::from_patterns(d, all_tuples(d, k));
                    let list = enumerate_pseudo_cubes_with(&proj, EnumOptions { cap: 64, maximal_only: false })?;
                    cubes += list.len();
                    for c in &list {
                        for j in 0..d {
                            for y in 0..k {
                                let (cnt, half) = half_mass_check(c, j, y);
                                if cnt as f64 > half {
                                    bad.push(format!("half-mass d={d} K={k} j={j} y={y}"));
                                }
                            }
                        }
                        if d < 2 {
                            continue;
                        }
                        for g in &c.patterns {
                            for mask in 1u32..(1 << d) - 1 {
                                let jset: Vec<usize> = (0..d).filter(|b| mask >> b & 1 == 1).collect();
                                let p = project_fixing(c, g, &jset)?;
                                if p.d != d - jset.len() || !naive_is_cube(&p.patterns, p.d) {
                                    bad.push(format!("projection d={d} K={k} g={g:?} J={jset:?}"));
                                }
                            }
                        }
                    }
                }
            }
            Ok((bad.is_empty(), format!("{cubes} cubes over d<=3, K<=3; {} violations {:?}", bad.len(), bad.first())))
        }),
        2 => run("pseudocube", "binary closure", &name, Some(10.0), || {
            let mut detail = Vec::new();
            let mut ok = true;
            for d in 1..=3 {
                let all = all_tuples(d, 2);
                let found: Vec<Vec<Pattern>> = (1u32..1 << all.len())
                    .map(|m| all.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, p)| p.clone()).collect::<Vec<_>>())
                    .filter(|s| naive_is_cube(s, d))
                    .collect();
                ok &= found.len() == 1 && found[0] == all;
                detail.push(format!("d={d}: {} cube(s)", found.len()));
            }
            Ok((ok, detail.join(", ")))
        }),
        3 => run("dimensions", "dimension chain", &name, Some(300.0), || {
            let classes = random_classes(opts, 200);
            let mut chain = 0;
            let mut nat_ds = 0;
            for c in &classes {
                let r = DimReport::compute(c, false);
                let k = c.labels() as f64;
                if !(r.ds <= r.graph && r.graph as f64 <= 5.0 * k.log2() * r.natarajan as f64) {
                    chain += 1;
                }
                if r.natarajan > r.ds {
                    nat_ds += 1;
                }
            }
            Ok((chain + nat_ds == 0, format!("{} classes; chain violations {chain}, natarajan > ds {nat_ds}", classes.len())))
        }),
        4 => run("games", "game values = tree depths", &name, None, || {
            let classes = random_classes(opts, 200);
            let mut bad = 0;
            for c in &classes {
                let vb = val_b(c, &BPosition::default())?;
                let vd = DslGame::new(c).root_value()?;
                if vb != GameValue::Rounds(littlestone_dim(c) as u32) || vd != GameValue::Rounds(max_dsl_depth(c, None).0 as u32) {
                    bad += 1;
                }
            }
            Ok((bad == 0, format!("{} classes; {bad} mismatches", classes.len())))
        }),
        5 => run("games", "mistake bound", &name, None, || {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 5);
            let classes = random_classes(opts, 200);
            let streams = opts.count(1000);
            let mut bad = 0;
            for s in 0..streams {
                let c = &classes[s % classes.len()];
                let len = rng.gen_range(1..=15);
                let z = random_stream(&mut rng, c, len);
                if run_online(c, &LabeledSample::new(z))?.mistakes > littlestone_dim(c) {
                    bad += 1;
                }
            }
            Ok((bad == 0, format!("{streams} streams; {bad} violations")))
        }),
        6 => run("learners", "frozen after correct rounds", &name, None, || {
            let (v, rounds, perms) = example1_permutation_check(opts, Example1Rule::Min)?;
            Ok((v == 0, format!("{perms} permutations, {rounds} correct rounds; {v} state changes after a correct round")))
        }),
        7 => run("learners", "avoided windows, avoiding-class ds bound", &name, Some(300.0), || pattern_avoidance_check(opts)),
        8 => run("learners", "leave-one-out bound", &name, None, || {
            let (bad, n) = partial_sample_check(opts, false)?;
            Ok((bad == 0, format!("{n} instances, fixed index order; {bad} violations")))
        }),
        9 => run("constructions", "natarajan-1 deep DSL class", &name, Some(120.0), || {
            let cx = assemble_counterexample(3)?;
            let c = cx.check()?;
            Ok((
                c.holds(3),
                format!(
                    "|X|={}, |H|={}, K={}; natarajan {}, max dsl depth {}, tree verifies {}",
                    cx.class.domain_size(),
                    cx.class.len(),
                    cx.class.labels(),
                    c.natarajan,
                    c.dsl_depth,
                    c.tree_ok
                ),
            ))
        }),
        10 => run("constructions", "disagreement at least half", &name, None, || {
            let cx = assemble_counterexample(3)?;
            let tree = cx.tree();
            let v = neq_prop_violations(&tree, cx.class.labels())?;
            Ok((v.is_empty(), format!("{} nodes; {} violations {:?}", tree.nodes.len(), v.len(), v.first())))
        }),
        11 => run("curvelab", "trichotomy", &name, Some(1800.0), || {
            let reps = if opts.quick { 200 } else { 2000 };
            let r = trichotomy_report(&canonical_configs(reps, opts.seed), Path::new("."), opts.threads)?;
            let f: Vec<_> = r.rows.iter().map(|row| &row.fit).collect();
            let classes_ok = f[0].class == RateClass::Exponential
                && f[0].r2_exp >= 0.9
                && f[1].class == RateClass::Polynomial
                && (0.6..=1.4).contains(&f[1].alpha)
                && f[2].class == RateClass::UnclassifiedSlow;
            let detail = r
                .rows
                .iter()
                .map(|row| {
                    format!(
                        "{}: {:?} (R2 exp {:.3}, poly {:.3}, alpha {:.2}), n_0.1 {}",
                        row.name,
                        row.fit.class,
                        row.fit.r2_exp,
                        row.fit.r2_poly,
                        row.fit.alpha,
                        row.n_eps.map_or("never".into(), |n| format!("{n:.1}"))
                    )
                })
                .join("; ");
            Ok((classes_ok && r.ordered, format!("{detail}; ordered {}", r.ordered)))
        }),
        12 => run("curvelab", "rate fitter calibration", &name, Some(10.0), || {
            let f1 = fit_rate(&LearningCurve::synthetic(&DEFAULT_GRID, |n| 2f64.powf(-n), 1_000_000));
            let f2 = fit_rate(&LearningCurve::synthetic(&calibration_grid(), |n| 1.0 / n, 1_000_000));
            let f3 = fit_rate(&LearningCurve::synthetic(&calibration_grid(), |n| 1.0 / (n + 1.0).ln(), 1_000_000));
            let c_err = (f1.exp_rate / 2f64.ln() - 1.0).abs();
            let a_err = (f2.alpha - 1.0).abs();
            let ok = f1.class == RateClass::Exponential
                && c_err < 0.05
                && f2.class == RateClass::Polynomial
                && a_err < 0.05
                && f3.class == RateClass::UnclassifiedSlow;
            Ok((
                ok,
                format!(
                    "2^-n: {:?} c/ln2-1 = {c_err:.1e}; 1/n: {:?} alpha-1 = {a_err:.1e}; 1/log(n+1): {:?} (R2 {:.3}/{:.3})",
                    f1.class, f2.class, f3.class, f3.r2_exp, f3.r2_poly
                ),
            ))
        }),
        13 => run("constructions", "slow-rate schedule", &name, None, || {
            let rates: Vec<(&str, Box<dyn Fn(f64) -> f64>)> = vec![
                ("1/n", Box::new(|n| 1.0 / n)),
                ("1/log(n+1)", Box::new(|n| 1.0 / (n + 1.0).ln())),
                ("n^-1/2", Box::new(|n| n.powf(-0.5))),
                ("1/log^2(n+1)", Box::new(|n| (n + 1.0).ln().powi(-2).min(1.0))),
                ("0", Box::new(|_| 0.0)),
            ];
            let mut bad = Vec::new();
            let mut made = 0;
            for (name, r) in &rates {
                for cap in [4, 8, 12, 20] {
                    let s = make_schedule(&rate_samples(r, 40), cap)?;
                    made += 1;
                    let c = s.check();
                    if !c.ok || s.p.len() > cap {
                        bad.push(format!("{name} cap {cap}: {:?}", c.violations));
                    }
                }
            }
            Ok((bad.is_empty(), format!("{made} schedules; {} violations {:?}", bad.len(), bad.first())))
        }),
        _ => run("acceptance", "?", &name, None, || usage(format!("no criterion {i}"))),
    }
}

/// The max-Y variant of criterion 6, reported next to it.
pub fn criterion6_max_variant(opts: &VerifyOptions) -> Check {
    run("learners", "frozen after correct rounds, max Y variant", "criterion 6, informational", None, || {
        let (v, rounds, perms) = example1_permutation_check(opts, Example1Rule::Max)?;
        Ok((v == 0, format!("{perms} permutations, {rounds} correct rounds; {v} state changes")))
    })
}

/// Criterion 8 with exchangeable indices, reported next to it.
pub fn criterion8_exchangeable(opts: &VerifyOptions) -> Check {
    run("learners", "leave-one-out bound, exchangeable", "criterion 8, informational", None, || {
        let (bad, n) = partial_sample_check(opts, true)?;
        Ok((bad == 0, format!("{n} instances, random index order; {bad} violations")))
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Example1Rule {
    Min,
    Max,
}

fn e1_predict(p: &Example1Predictor, x: &[u64], rule: Example1Rule) -> u32 {
    let ys = p.y_set(x);
    match rule {
        Example1Rule::Min => ys.first().copied().unwrap_or(1),
        Example1Rule::Max => ys.last().copied().unwrap_or(1),
    }
}

/// (violations, correct rounds, permutations) over exhaustive orderings of
/// small consistent point sets of lattice classes with d <= 2, K <= 3.
fn example1_permutation_check(opts: &VerifyOptions, rule: Example1Rule) -> Result<(usize, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 6);
    let configs = [(1usize, 2u32, 7u64), (1, 3, 7), (2, 2, 2), (2, 3, 2)];
    let per = opts.count(5);
    let (mut bad, mut rounds, mut perms) = (0, 0, 0);
    for &(d, k, bound) in &configs {
        let class = make_lattice_linear_class(d, k, bound, &[0, 1, 2], &[1, 2, 4, 6])?;
        let box_pts = lattice_coords(&class)?;
        for _ in 0..per {
            let h = class.hyp(rng.gen_range(0..class.len())).to_vec();
            let size = rng.gen_range(3..=6usize).min(box_pts.len());
            let mut idx: Vec<usize> = (0..box_pts.len()).collect();
            idx.shuffle(&mut rng);
            let pts: Vec<(LatticePoint, u32)> = idx[..size].iter().map(|&x| (box_pts[x].clone(), h[x] + 1)).collect();
            for perm in pts.iter().permutations(size) {
                perms += 1;
                let mut p = Example1Predictor::default();
                for (x, y) in perm {
                    let before: Vec<u32> = box_pts.iter().map(|b| e1_predict(&p, b, rule)).collect();
                    let correct = before[box_pts.iter().position(|b| b == x).unwrap()] == *y;
                    p.add(x.clone(), *y);
                    if correct {
                        rounds += 1;
                        if box_pts.iter().zip(&before).any(|(b, &v)| e1_predict(&p, b, rule) != v) {
                            bad += 1;
                        }
                    }
                }
            }
        }
    }
    Ok((bad, rounds, perms))
}

fn pattern_avoidance_check(opts: &VerifyOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 7);
    let mut classes =
        vec![FiniteClass::new(2, 3, vec![vec![0, 0], vec![1, 1], vec![2, 2], vec![0, 1], vec![1, 2], vec![2, 0]])?];
    for _ in 0..opts.count(10) {
        let n = rng.gen_range(2..=4);
        let k = rng.gen_range(2..=3);
        let m = rng.gen_range(2..=12);
        let h = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0..k)).collect()).collect();
        classes.push(FiniteClass::new(n, k, h)?);
    }
    let streams = opts.count(100);
    let (mut commit_bad, mut window_bad, mut ds_bad, mut ds_checked, mut windows) = (0, 0, 0, 0, 0);
    for c in &classes {
        let game = DslGame::new(c);
        let depth = max_dsl_depth(c, None).0;
        let all: Vec<usize> = (0..c.domain_size()).collect();
        for _ in 0..streams {
            let z = random_stream(&mut rng, c, 40);
            let states = run_avoidance(&game, &z)?;
            let last = states.last().unwrap();
            if last.committed.len() > depth + 1 {
                commit_bad += 1;
            }
            let settle = states.iter().position(|s| s.committed.len() == last.committed.len()).unwrap();
            for s in &states[settle..] {
                if s.window.len() == s.tau {
                    windows += 1;
                    let xs: Vec<usize> = s.window.iter().map(|p| p.0).collect();
                    let ys: Pattern = s.window.iter().map(|p| p.1).collect();
                    if avoidance_query(&game, s, &xs)?.contains(&ys) {
                        window_bad += 1;
                    }
                }
            }
            if last.tau <= all.len() {
                let g = StateAvoider::new(&game, last.clone());
                if let Some(hc) = build_avoiding_class(c, &all, &g)?.to_class() {
                    ds_checked += 1;
                    if ds_dim(&hc) >= last.tau {
                        ds_bad += 1;
                    }
                }
            }
        }
    }
    Ok((
        commit_bad + window_bad + ds_bad == 0,
        format!(
            "{} classes x {streams} streams; commits over bound {commit_bad}; {windows} settled windows, {window_bad} in the avoided set; ds checks {ds_checked}, {ds_bad} violations",
            classes.len()
        ),
    ))
}

/// (violations, instances) of LHS <= 2 RHS + 3 stderr.
fn partial_sample_check(opts: &VerifyOptions, exchangeable: bool) -> Result<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 8);
    let instances = opts.count(50);
    let reps = if opts.quick { 2000 } else { 10_000 };
    let mut bad = 0;
    for _ in 0..instances {
        let n1 = rng.gen_range(2..=5);
        let k = rng.gen_range(2..=3);
        let m = rng.gen_range(1..=8);
        let rows: Vec<Pattern> = (0..m).map(|_| (0..n1).map(|_| rng.gen_range(0..k)).collect()).collect();
        let c = FiniteClass::new(n1, k, rows)?;
        let labels = c.hyp(rng.gen_range(0..c.len())).to_vec();
        let e = partial_sample_sides(&Erm, &c, &labels, reps, rng.gen(), exchangeable)?;
        let se = (e.lhs_se.powi(2) + 4.0 * e.rhs_se.powi(2)).sqrt();
        if e.lhs > 2.0 * e.rhs + 3.0 * se {
            bad += 1;
        }
    }
    Ok((bad, instances))
}

pub fn acceptance(opts: &VerifyOptions) -> Vec<Check> {
    let mut out = Vec::new();
    for i in 1..=CRITERIA {
        out.push(criterion(i, opts));
        if i == 6 {
            out.push(criterion6_max_variant(opts));
        }
        if i == 8 {
            out.push(criterion8_exchangeable(opts));
        }
    }
    out
}

// ------------------------------------------------------------ suites

pub const SUITES: [&str; 9] =
    ["class-core", "pseudocube", "dimensions", "trees", "games", "learners", "constructions", "curvelab", "acceptance"];

pub fn run_suite(name: &str, opts: &VerifyOptions) -> Result<Vec<Check>> {
    Ok(match name {
        "all" => {
            let mut v = Vec::new();
            for s in &SUITES[..SUITES.len() - 1] {
                v.extend(run_suite(s, opts)?);
            }
            v
        }
        "class-core" => class_core_suite(opts),
        "pseudocube" => pseudocube_suite(opts),
        "dimensions" => dimensions_suite(opts),
        "trees" => trees_suite(opts),
        "games" => games_suite(opts),
        "learners" => learners_suite(opts),
        "constructions" => constructions_suite(opts),
        "curvelab" => curvelab_suite(opts),
        "acceptance" => acceptance(opts),
        other => return usage(format!("unknown suite {other:?}; expected one of {} or all", SUITES.join(", "))),
    })
}

fn class_core_suite(opts: &VerifyOptions) -> Vec<Check> {
    let small: Vec<FiniteClass> = random_classes(opts, 200).into_iter().filter(|c| c.domain_size() <= 4).collect();
    vec![
        run("class-core", "restrict/project", "restrict then project = project then filter", None, || {
            let mut bad = 0;
            for c in &small {
                let n = c.domain_size();
                for x in 0..n {
                    for y in 0..c.labels() {
                        let rest: Vec<usize> = (0..n).filter(|&p| p != x).collect();
                        for r in 1..=rest.len() {
                            for pts in rest.iter().copied().combinations(r) {
                                let mut a = c.restrict(&[(x, y)])?.project(&pts)?.patterns;
                                let mut wide = vec![x];
                                wide.extend(&pts);
                                let mut b: Vec<Pattern> = c
                                    .project(&wide)?
                                    .patterns
                                    .into_iter()
                                    .filter(|p| p[0] == y)
                                    .map(|p| p[1..].to_vec())
                                    .collect();
                                a.sort();
                                b.sort();
                                b.dedup();
                                bad += (a != b) as usize;
                            }
                        }
                    }
                }
            }
            Ok((bad == 0, format!("{} classes; {bad} mismatches", small.len())))
        }),
        run("class-core", "projection size", "|H|_x| <= min(|H|, K^|x|)", None, || {
            let mut bad = 0;
            for c in &small {
                for r in 1..=c.domain_size() {
                    for pts in (0..c.domain_size()).combinations(r) {
                        let sz = c.project(&pts)?.len();
                        bad += (sz > c.len().min((c.labels() as usize).pow(r as u32))) as usize;
                    }
                }
            }
            Ok((bad == 0, format!("{bad} violations")))
        }),
        run("class-core", "consistency monotone", "is_consistent non-increasing under extension", None, || {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 11);
            let mut bad = 0;
            for c in &small {
                let z: Vec<(usize, Label)> =
                    (0..8).map(|_| (rng.gen_range(0..c.domain_size()), rng.gen_range(0..c.labels()))).collect();
                let flags: Vec<bool> = (0..=z.len()).map(|t| c.is_consistent(&LabeledSample::new(z[..t].to_vec()))).collect();
                bad += flags.windows(2).filter(|w| !w[0] && w[1]).count();
            }
            Ok((bad == 0, format!("{bad} violations")))
        }),
        run("class-core", "witness", "er(witness) = 0 exactly", None, || {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 12);
            let mut bad = 0;
            for c in &small {
                let w = rng.gen_range(0..c.len());
                let h = c.hyp(w).to_vec();
                let atoms: Vec<Atom> =
                    (0..c.domain_size()).map(|x| Atom { point: x, label: h[x], weight: 1.0 / c.domain_size() as f64 }).collect();
                let d = RealizableDistribution::new(c, atoms, Certificate::Witness(w))?;
                bad += (d.er(&h) != 0.0) as usize;
            }
            Ok((bad == 0, format!("{bad} violations")))
        }),
    ]
}

fn pseudocube_suite(opts: &VerifyOptions) -> Vec<Check> {
    let mut v = vec![criterion(2, opts), criterion(1, opts)];
    v.push(run("pseudocube", "products", "products of sets of size >= 2 are pseudo-cubes", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 13);
        let mut bad = 0;
        let trials = opts.count(200);
        for _ in 0..trials {
            let d = rng.gen_range(1..=3);
            let sets: Vec<Vec<Label>> = (0..d)
                .map(|_| {
                    let mut s: Vec<Label> = (0..5).collect();
                    s.shuffle(&mut rng);
                    s.truncate(rng.gen_range(2..=4));
                    s
                })
                .collect();
            let prod: Vec<Pattern> = sets.iter().map(|s| s.iter().copied()).multi_cartesian_product().collect();
            bad += (!naive_is_cube(&prod, d) || !crate::pseudocube::is_pseudo_cube(&prod, d)?) as usize;
        }
        Ok((bad == 0, format!("{trials} products; {bad} violations")))
    }));
    v
}

fn dimensions_suite(opts: &VerifyOptions) -> Vec<Check> {
    let classes = random_classes(opts, 200);
    vec![
        criterion(3, opts),
        run("dimensions", "littlestone bound", "ldim <= floor(log2 |H|)", None, || {
            let bad = classes.iter().filter(|c| (1usize << littlestone_dim(c)) > c.len()).count();
            Ok((bad == 0, format!("{bad} violations")))
        }),
        run("dimensions", "ds two ways", "ds_dim = largest d with an enumerated cube", None, || {
            let mut bad = 0;
            for c in &classes {
                let mut by_enum = 0;
                for d in 1..=c.domain_size() {
                    let mut hit = false;
                    for pts in (0..c.domain_size()).combinations(d) {
                        let opts = EnumOptions { cap: 24, maximal_only: false };
                        if !enumerate_pseudo_cubes_with(&c.project(&pts)?, opts)?.is_empty() {
                            hit = true;
                            break;
                        }
                    }
                    if !hit {
                        break;
                    }
                    by_enum = d;
                }
                bad += (by_enum != ds_dim(c)) as usize;
            }
            Ok((bad == 0, format!("{} classes; {bad} mismatches", classes.len())))
        }),
        run("dimensions", "inclusion", "dimensions monotone under class inclusion", None, || {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 14);
            let mut bad = 0;
            for c in &classes {
                let keep: Vec<usize> = (0..c.len()).filter(|_| rng.gen_bool(0.6)).collect();
                if keep.is_empty() {
                    continue;
                }
                let s = c.subclass(&keep)?;
                let le = natarajan_dim(&s) <= natarajan_dim(c)
                    && graph_dim(&s) <= graph_dim(c)
                    && ds_dim(&s) <= ds_dim(c)
                    && littlestone_dim(&s) <= littlestone_dim(c);
                bad += (!le) as usize;
            }
            Ok((bad == 0, format!("{bad} violations")))
        }),
    ]
}

fn trees_suite(opts: &VerifyOptions) -> Vec<Check> {
    let classes = random_classes(opts, 200);
    vec![
        run("trees", "littlestone two ways", "max_littlestone_depth = littlestone_dim", None, || {
            let bad = classes.iter().filter(|c| max_littlestone_depth(c, None).0 != littlestone_dim(c)).count();
            Ok((bad == 0, format!("{bad} mismatches")))
        }),
        run("trees", "NL <= DSL <= GL", "tree depth chain at depth <= 3", None, || {
            let mut bad = 0;
            for c in classes.iter().take(opts.count(80)) {
                let (nl, dsl, gl) = (max_nl_depth(c, Some(3)).0, max_dsl_depth(c, Some(3)).0.min(3), max_gl_depth(c, Some(3)).0);
                bad += !(nl <= dsl && dsl <= gl) as usize;
            }
            Ok((bad == 0, format!("{bad} violations")))
        }),
        run("trees", "dsl depth bound", "max_dsl_depth <= floor(log2 |H|)", None, || {
            let bad = classes.iter().filter(|c| (1usize << max_dsl_depth(c, None).0) > c.len()).count();
            Ok((bad == 0, format!("{bad} violations")))
        }),
        run("trees", "dsl path ds", "version spaces along DSL paths have ds >= node dimension", None, || {
            let mut bad = 0;
            let mut nodes = 0;
            for c in &classes {
                let (depth, tree) = max_dsl_depth(c, None);
                if depth == 0 {
                    continue;
                }
                bad += (!verify_tree(&AnyTree::Dsl(tree.clone()), c)?.ok) as usize;
                let mut stack = vec![(0usize, Vec::<(usize, Label)>::new())];
                while let Some((i, path)) = stack.pop() {
                    nodes += 1;
                    let node = &tree.nodes[i];
                    let sub = c.subclass(&c.consistent_members(&path))?;
                    if ds_dim(&sub) < node.points.len() {
                        bad += 1;
                    }
                    for (y, ch) in node.cube.iter().zip(&node.children) {
                        if let Some(ch) = ch {
                            let mut p = path.clone();
                            p.extend(node.points.iter().copied().zip(y.iter().copied()));
                            stack.push((*ch, p));
                        }
                    }
                }
            }
            Ok((bad == 0, format!("{nodes} nodes; {bad} violations")))
        }),
    ]
}

fn games_suite(opts: &VerifyOptions) -> Vec<Check> {
    let classes = random_classes(opts, 200);
    vec![
        criterion(4, opts),
        criterion(5, opts),
        run("games", "monotonicity", "appending a round never raises val", None, || {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 15);
            let mut bad = 0;
            for c in &classes {
                let n = c.domain_size();
                // Littlestone game
                let mut pos = BPosition::default();
                let mut prev = val_b(c, &pos)?;
                for _ in 0..3 {
                    let y0 = rng.gen_range(0..c.labels());
                    let y1 = (y0 + rng.gen_range(1..c.labels())) % c.labels();
                    pos.rounds.push(BMove { x: rng.gen_range(0..n), y0, y1, eta: rng.gen_range(0..2) });
                    let v = val_b(c, &pos)?;
                    bad += (v > prev) as usize;
                    prev = v;
                }
                // DSL game, rounds with y in C
                let game = DslGame::new(c);
                let mut pos = DslPosition::default();
                let mut prev = game.val_dsl(&pos)?;
                for r in 1..=n.min(3) {
                    let mut pts: Vec<usize> = (0..n).collect();
                    pts.shuffle(&mut rng);
                    pts.truncate(r);
                    let cubes = game.cubes_at(&pts)?;
                    let Some(cube) = cubes.choose(&mut rng) else { break };
                    let y = cube.patterns.choose(&mut rng).unwrap().clone();
                    pos.rounds.push(DslRound { x: pts, cube: cube.patterns.clone(), y });
                    let v = game.val_dsl(&pos)?;
                    bad += (v > prev) as usize;
                    prev = v;
                }
            }
            Ok((bad == 0, format!("{bad} violations")))
        }),
        run("games", "game value vs tree existence", "P_A survives d rounds iff a depth-d tree exists", None, || {
            let mut bad = 0;
            for c in &classes {
                let vb = val_b(c, &BPosition::default())?;
                let vd = DslGame::new(c).root_value()?;
                for d in 0..=4usize {
                    let tree_b = max_littlestone_depth(c, Some(d)).0 >= d;
                    let tree_d = max_dsl_depth(c, Some(d)).0 >= d;
                    bad += ((vb >= GameValue::Rounds(d as u32)) != tree_b) as usize;
                    bad += ((vd >= GameValue::Rounds(d as u32)) != tree_d) as usize;
                }
            }
            Ok((bad == 0, format!("{bad} mismatches")))
        }),
        run("games", "commit bound", "commits <= max_dsl_depth + 1 on consistent streams", None, || {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 16);
            let mut bad = 0;
            for c in classes.iter().take(opts.count(100)) {
                let game = DslGame::new(c);
                let depth = max_dsl_depth(c, None).0;
                for _ in 0..5 {
                    let z = random_stream(&mut rng, c, 30);
                    bad += (run_avoidance(&game, &z)?.last().unwrap().committed.len() > depth + 1) as usize;
                }
            }
            Ok((bad == 0, format!("{bad} violations")))
        }),
    ]
}

fn learners_suite(opts: &VerifyOptions) -> Vec<Check> {
    let classes = random_classes(opts, 200);
    vec![
        criterion(7, opts),
        run("learners", "per zero realizability", "per = 0 gives a realizable index-uniform sample", None, || {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 17);
            let (mut bad, mut checked) = (0, 0);
            for c in classes.iter().filter(|c| c.domain_size() >= 2).take(opts.count(100)) {
                let game = DslGame::new(c);
                let w = rng.gen_range(0..c.len());
                let h = c.hyp(w).to_vec();
                let n = c.domain_size();
                let atoms: Vec<Atom> = (0..n).map(|x| Atom { point: x, label: h[x], weight: 1.0 / n as f64 }).collect();
                let d = RealizableDistribution::new(c, atoms, Certificate::Witness(w))?;
                let z = d.sample_iid(30, rng.gen()).pairs;
                let last = run_avoidance(&game, &z)?.pop().unwrap();
                let g = StateAvoider::new(&game, last.clone());
                if last.tau > 4 || per_rate(&g, &d, last.tau)?.value > 0.0 {
                    continue;
                }
                let s: Vec<usize> = z[..6].iter().map(|p| p.0).collect();
                if s.len() < last.tau {
                    continue;
                }
                checked += 1;
                let want: Pattern = z[..6].iter().map(|p| p.1).collect();
                bad += (!build_avoiding_class(c, &s, &g)?.patterns.contains(&want)) as usize;
            }
            Ok((bad == 0 && checked > 0, format!("{checked} runs with per = 0; {bad} violations")))
        }),
        criterion(8, opts),
        criterion8_exchangeable(opts),
        run("learners", "exp-rate rule frozen", "correct predictions leave the exp-rate rule unchanged", None, || {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 18);
            let mut bad = 0;
            for c in &classes {
                let z = random_stream(&mut rng, c, 10);
                let mut l = OnlineLearner::new(c);
                for &(x, y) in &z {
                    let before = l.table().to_vec();
                    let mistake = l.observe(x, y);
                    if !mistake && l.table() != before.as_slice() {
                        bad += 1;
                    }
                }
            }
            Ok((bad == 0, format!("{bad} violations")))
        }),
        criterion(6, opts),
        criterion6_max_variant(opts),
        run("learners", "consistency interface", "ERM is consistent on realizable samples", None, || {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 19);
            let mut bad = 0;
            for c in &classes {
                let z = random_stream(&mut rng, c, 6);
                let r = Erm.learn(c, &z);
                bad += z.iter().any(|&(x, y)| r.predict(x) != y) as usize;
            }
            Ok((bad == 0, format!("{bad} violations")))
        }),
    ]
}

fn constructions_suite(opts: &VerifyOptions) -> Vec<Check> {
    vec![
        run("constructions", "natarajan-1 deep DSL class", "counterexample D = 1, 2, 3", Some(120.0), || {
            let mut detail = Vec::new();
            for d in 1..=3 {
                let cx = make_counterexample_class(d)?;
                detail.push(format!("D={d}: |X|={} |H|={}", cx.class.domain_size(), cx.class.len()));
            }
            Ok((true, detail.join(", ")))
        }),
        criterion(9, opts),
        criterion(10, opts),
        run("constructions", "exact weights", "branch distributions sum to 1 exactly", None, || {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 20);
            let mut made = 0;
            let mut bad = 0;
            for c in random_classes(opts, 200).iter().filter(|c| littlestone_dim(c) > 0) {
                let t = littlestone_tree(c);
                let u: Vec<bool> = (0..t.depth).map(|_| rng.gen()).collect();
                let d = littlestone_branch_distribution(c, &t, &u)?;
                let s: BigRational = d.exact.unwrap().into_iter().sum();
                bad += (s != BigRational::one()) as usize;
                made += 1;
            }
            let cx = assemble_counterexample(3)?;
            let tree = cx.tree();
            let sched = make_schedule(&rate_samples(|n| 1.0 / (n + 1.0).ln(), 40), 12)?;
            let flat = Schedule::from_masses(vec![crate::class::rat(1, 3); 3])?;
            for _ in 0..opts.count(50) {
                let mut branch = Vec::new();
                let mut idx = 0;
                for _ in 0..tree.depth {
                    let node = &tree.nodes[idx];
                    let j = rng.gen_range(0..node.cube.len());
                    branch.push(j);
                    idx = node.children[j].unwrap_or(0);
                }
                for s in [&sched, &flat] {
                    let d = dsl_branch_distribution(&cx.class, &tree, &branch, s)?;
                    let total: BigRational = d.exact.unwrap().into_iter().sum();
                    bad += (total != BigRational::one()) as usize;
                    made += 1;
                }
            }
            Ok((bad == 0, format!("{made} distributions; {bad} violations")))
        }),
        run("constructions", "lattice monotone", "lattice hypotheses are coordinatewise label-monotone", None, || {
            let mut bad = 0;
            for (d, k, b) in [(1, 3, 7), (2, 2, 3), (2, 3, 2)] {
                let c = make_lattice_linear_class(d, k, b, &[0, 1, 2], &[1, 2, 4])?;
                let xs = lattice_coords(&c)?;
                for h in c.iter() {
                    for (a, xa) in xs.iter().enumerate() {
                        for (bb, xb) in xs.iter().enumerate() {
                            if xa.iter().zip(xb).all(|(p, q)| p <= q) && h[a] > h[bb] {
                                bad += 1;
                            }
                        }
                    }
                }
            }
            Ok((bad == 0, format!("{bad} violations")))
        }),
        criterion(13, opts),
    ]
}

fn curvelab_suite(opts: &VerifyOptions) -> Vec<Check> {
    vec![
        run("curvelab", "reproducibility", "estimate_curve is bit-for-bit reproducible", None, || {
            let cfg = canonical_exp(200, opts.seed);
            let (c, d) = cfg.build(Path::new("."))?;
            let a = estimate_curve(&c, &d, &cfg.learner, &[4, 8, 16, 32], 200, opts.seed, 1)?;
            let b = estimate_curve(&c, &d, &cfg.learner, &[4, 8, 16, 32], 200, opts.seed, 3)?;
            Ok((a == b, "1 thread vs 3 threads".into()))
        }),
        criterion(12, opts),
        criterion(11, opts),
        run("curvelab", "stderr scaling", "doubling reps shrinks stderr by sqrt 2 +- 10%", None, || {
            let c = FiniteClass::new(2, 2, vec![vec![0, 1], vec![0, 0]])?;
            let atoms = vec![Atom { point: 0, label: 0, weight: 0.6 }, Atom { point: 1, label: 1, weight: 0.4 }];
            let d = RealizableDistribution::with_found_witness(&c, atoms)?;
            let l = LearnerSpec::Constant(0);
            let a = estimate_curve(&c, &d, &l, &[4], 4000, opts.seed, 2)?;
            let b = estimate_curve(&c, &d, &l, &[4], 8000, opts.seed + 1, 2)?;
            let ratio = a.stderr[0] / b.stderr[0] / 2f64.sqrt();
            Ok(((ratio - 1.0).abs() < 0.1, format!("ratio / sqrt2 = {ratio:.3}")))
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_cube_predicate() {
        assert!(naive_is_cube(&all_tuples(2, 2), 2));
        assert!(!naive_is_cube(&[vec![0, 0], vec![1, 1]], 2));
        assert!(!naive_is_cube(&[], 1));
    }

    #[test]
    fn quick_suites_run() {
        let opts = VerifyOptions { quick: true, ..Default::default() };
        for s in ["class-core", "pseudocube", "dimensions", "trees"] {
            for c in run_suite(s, &opts).unwrap() {
                assert!(c.ok, "{}", c.line());
            }
        }
        assert!(run_suite("nope", &opts).is_err());
    }

    #[test]
    fn lines_name_module_and_tag() {
        let c = criterion(2, &VerifyOptions::default());
        assert!(c.line().starts_with("[PASS] pseudocube / binary closure: criterion 2"));
        assert!(!criterion(99, &VerifyOptions::default()).ok);
    }
}
