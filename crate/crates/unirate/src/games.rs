//! Game engines on finite classes: the Littlestone game, its value-guided
//! online learner, and the DSL game with the pattern-avoidance procedure.

use std::cell::RefCell;
use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;

use itertools::Itertools;
use serde::{Deserialize, Serialize, Serializer};

use crate::class::{FiniteClass, Label, LabeledSample, Pattern};
use crate::error::{usage, Error, Result};
use crate::pseudocube::{cap, enumerate_pseudo_cubes_with, peel, EnumOptions, PseudoCube};

/// Finite game value. `Lost` is the learner's win (-1), `Unbounded` plays
/// the role of Ω: the adversary can never be stopped by the label rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GameValue {
    Lost,
    Rounds(u32),
    Unbounded,
}

impl GameValue {
    pub fn as_i64(self) -> Option<i64> {
        match self {
            GameValue::Lost => Some(-1),
            GameValue::Rounds(n) => Some(n as i64),
            GameValue::Unbounded => None,
        }
    }
}

impl fmt::Display for GameValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GameValue::Lost => write!(f, "-1"),
            GameValue::Rounds(n) => write!(f, "{n}"),
            GameValue::Unbounded => write!(f, "unbounded"),
        }
    }
}

impl Serialize for GameValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.as_i64() {
            Some(v) => s.serialize_i64(v),
            None => s.serialize_str("unbounded"),
        }
    }
}

fn members_matching(class: &FiniteClass, v: &[u32], pairs: &[(usize, Label)]) -> Vec<u32> {
    v.iter()
        .copied()
        .filter(|&h| {
            let row = class.hyp(h as usize);
            pairs.iter().all(|&(x, y)| row[x] == y)
        })
        .collect()
}

fn all_members(class: &FiniteClass) -> Vec<u32> {
    (0..class.len() as u32).collect()
}

// ------------------------------------------------------- Littlestone game

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BMove {
    pub x: usize,
    pub y0: Label,
    pub y1: Label,
    pub eta: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BPosition {
    pub rounds: Vec<BMove>,
}

impl BPosition {
    /// The (point, chosen label) constraints of the position.
    pub fn constraints(&self) -> Result<Vec<(usize, Label)>> {
        self.rounds
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if r.y0 == r.y1 {
                    return usage(format!("round {}: y0 == y1", i + 1));
                }
                if r.eta > 1 {
                    return usage(format!("round {}: eta must be 0 or 1", i + 1));
                }
                Ok((r.x, if r.eta == 1 { r.y1 } else { r.y0 }))
            })
            .collect()
    }
}

/// Backward induction for the Littlestone game, memoized on version spaces.
/// Clones share the memo.
#[derive(Clone)]
pub struct BGame<'a> {
    class: &'a FiniteClass,
    memo: Rc<RefCell<HashMap<Vec<u32>, u32>>>,
}

impl<'a> BGame<'a> {
    pub fn new(class: &'a FiniteClass) -> Self {
        BGame { class, memo: Rc::new(RefCell::new(HashMap::new())) }
    }

    pub fn class(&self) -> &'a FiniteClass {
        self.class
    }

    /// Value of the position whose version space is `v` (sorted indices).
    pub fn value_of(&self, v: &[u32]) -> GameValue {
        if v.is_empty() {
            GameValue::Lost
        } else {
            GameValue::Rounds(self.rank(v))
        }
    }

    // P_A proposes (x, y0, y1), P_L answers with the worse branch for P_A.
    fn rank(&self, v: &[u32]) -> u32 {
        if v.len() < 2 {
            return 0;
        }
        if let Some(&r) = self.memo.borrow().get(v) {
            return r;
        }
        let mut best = 0;
        for x in 0..self.class.domain_size() {
            let mut labels: Vec<Label> = v.iter().map(|&h| self.class.hyp(h as usize)[x]).collect();
            labels.sort_unstable();
            labels.dedup();
            for (i, &y0) in labels.iter().enumerate() {
                let a = members_matching(self.class, v, &[(x, y0)]);
                for &y1 in &labels[i + 1..] {
                    let b = members_matching(self.class, v, &[(x, y1)]);
                    best = best.max(1 + self.rank(&a).min(self.rank(&b)));
                }
            }
        }
        self.memo.borrow_mut().insert(v.to_vec(), best);
        best
    }

    pub fn val_b(&self, pos: &BPosition) -> Result<GameValue> {
        let pairs = pos.constraints()?;
        self.check(&pairs)?;
        Ok(self.value_of(&members_matching(self.class, &all_members(self.class), &pairs)))
    }

    /// Value after an (x, y) history.
    pub fn val_history(&self, z: &[(usize, Label)]) -> GameValue {
        self.value_of(&members_matching(self.class, &all_members(self.class), z))
    }

    fn check(&self, pairs: &[(usize, Label)]) -> Result<()> {
        for &(x, y) in pairs {
            if x >= self.class.domain_size() || y >= self.class.labels() {
                return usage(format!("({x}, {y}) out of range"));
            }
        }
        Ok(())
    }

    /// Smallest label keeping the value at min(val(z), val(∅)); 0 if none does.
    pub fn g_t(&self, z: &[(usize, Label)], x: usize) -> Label {
        let root = self.val_history(&[]);
        let v = members_matching(self.class, &all_members(self.class), z);
        self.g_from(&v, x, root)
    }

    fn g_from(&self, v: &[u32], x: usize, root: GameValue) -> Label {
        let bar = self.value_of(v).min(root);
        (0..self.class.labels())
            .find(|&y| self.value_of(&members_matching(self.class, v, &[(x, y)])) >= bar)
            .unwrap_or(0)
    }
}

pub fn val_b(class: &FiniteClass, pos: &BPosition) -> Result<GameValue> {
    BGame::new(class).val_b(pos)
}

pub fn g_t(class: &FiniteClass, z: &[(usize, Label)], x: usize) -> Label {
    BGame::new(class).g_t(z, x)
}

/// The mistake-driven learner: predicts with a cached table f and rebuilds
/// it only after a mistake.
pub struct OnlineLearner<'a> {
    game: BGame<'a>,
    root: GameValue,
    mistakes: Vec<(usize, Label)>,
    v: Vec<u32>,
    f: Vec<Label>,
}

impl<'a> OnlineLearner<'a> {
    pub fn new(class: &'a FiniteClass) -> Self {
        OnlineLearner::from_game(BGame::new(class))
    }

    /// Starts from the empty history, reusing `game`'s memo.
    pub fn from_game(game: BGame<'a>) -> Self {
        let class = game.class;
        let root = game.val_history(&[]);
        let v = all_members(class);
        let mut l = OnlineLearner { game, root, mistakes: Vec::new(), v, f: Vec::new() };
        l.refresh();
        l
    }

    fn refresh(&mut self) {
        let n = self.game.class.domain_size();
        self.f = (0..n).map(|x| self.game.g_from(&self.v, x, self.root)).collect();
    }

    pub fn predict(&self, x: usize) -> Label {
        self.f[x]
    }

    pub fn table(&self) -> &[Label] {
        &self.f
    }

    pub fn mistakes(&self) -> usize {
        self.mistakes.len()
    }

    /// Feeds the true label; returns whether the prediction was wrong.
    pub fn observe(&mut self, x: usize, y: Label) -> bool {
        if self.f[x] == y {
            return false;
        }
        self.mistakes.push((x, y));
        self.v = members_matching(self.game.class, &self.v, &[(x, y)]);
        self.refresh();
        true
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OnlineRound {
    pub t: usize,
    pub x: usize,
    pub y: Label,
    pub prediction: Label,
    pub mistake: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OnlineReport {
    pub mistakes: usize,
    pub transcript: Vec<OnlineRound>,
}

/// First prefix length at which the sample stops being consistent.
pub fn first_inconsistent_prefix(class: &FiniteClass, sample: &LabeledSample) -> Option<usize> {
    let mut v = all_members(class);
    for (t, &(x, y)) in sample.pairs.iter().enumerate() {
        if x >= class.domain_size() || y >= class.labels() {
            return Some(t + 1);
        }
        v = members_matching(class, &v, &[(x, y)]);
        if v.is_empty() {
            return Some(t + 1);
        }
    }
    None
}

pub fn run_online(class: &FiniteClass, sample: &LabeledSample) -> Result<OnlineReport> {
    if let Some(t) = first_inconsistent_prefix(class, sample) {
        return Err(Error::Domain(format!("sample prefix of length {t} is inconsistent with the class")));
    }
    let mut l = OnlineLearner::new(class);
    let mut transcript = Vec::with_capacity(sample.len());
    for (t, &(x, y)) in sample.pairs.iter().enumerate() {
        let prediction = l.predict(x);
        let mistake = l.observe(x, y);
        transcript.push(OnlineRound { t: t + 1, x, y, prediction, mistake });
    }
    Ok(OnlineReport { mistakes: l.mistakes(), transcript })
}

// --------------------------------------------------------------- DSL game

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DslRound {
    pub x: Vec<usize>,
    #[serde(rename = "C")]
    pub cube: Vec<Pattern>,
    pub y: Pattern,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DslPosition {
    pub rounds: Vec<DslRound>,
}

/// Exact solver for the DSL game. Pseudo-cube lists are cached per tuple and
/// values per (version space, round).
pub struct DslGame<'a> {
    class: &'a FiniteClass,
    opts: EnumOptions,
    cubes: RefCell<HashMap<Vec<usize>, Rc<Vec<PseudoCube>>>>,
    memo: RefCell<HashMap<(Vec<u32>, usize), u32>>,
}

impl<'a> DslGame<'a> {
    pub fn new(class: &'a FiniteClass) -> Self {
        DslGame::with_cap(class, cap())
    }

    pub fn with_cap(class: &'a FiniteClass, cap: usize) -> Self {
        DslGame {
            class,
            opts: EnumOptions { cap, maximal_only: false },
            cubes: RefCell::new(HashMap::new()),
            memo: RefCell::new(HashMap::new()),
        }
    }

    pub fn class(&self) -> &'a FiniteClass {
        self.class
    }

    /// PC(H|_x) in canonical order.
    pub fn cubes_at(&self, x: &[usize]) -> Result<Rc<Vec<PseudoCube>>> {
        if let Some(c) = self.cubes.borrow().get(x) {
            return Ok(c.clone());
        }
        let proj = self.class.project(x)?;
        let list = Rc::new(enumerate_pseudo_cubes_with(&proj, self.opts)?);
        self.cubes.borrow_mut().insert(x.to_vec(), list.clone());
        Ok(list)
    }

    /// Rounds the adversary can still force from a live position with
    /// version space `v` when the next round uses r-tuples.
    pub fn remaining(&self, v: &[u32], r: usize) -> Result<u32> {
        // a cube of dimension r has at least 2^r members, each needing a hypothesis
        if r >= 40 || v.len() < (1usize << r) {
            return Ok(0);
        }
        let key = (v.to_vec(), r);
        if let Some(&w) = self.memo.borrow().get(&key) {
            return Ok(w);
        }
        let n = self.class.domain_size();
        let active: Vec<usize> = (0..n)
            .filter(|&x| {
                let y = self.class.hyp(v[0] as usize)[x];
                v.iter().any(|&h| self.class.hyp(h as usize)[x] != y)
            })
            .collect();
        let ceiling = crate::dimensions::log2_floor(v.len()) as u32;
        let mut best = 0u32;
        'moves: for x in active.into_iter().combinations(r) {
            let cubes = self.cubes_at(&x)?;
            for c in cubes.iter() {
                // P_L answers with the element worst for P_A
                let mut worst = u32::MAX;
                for y in &c.patterns {
                    let pairs: Vec<(usize, Label)> = x.iter().copied().zip(y.iter().copied()).collect();
                    let sub = members_matching(self.class, v, &pairs);
                    let got = if sub.is_empty() { 0 } else { 1 + self.remaining(&sub, r + 1)? };
                    worst = worst.min(got);
                    if worst <= best {
                        break;
                    }
                }
                if worst > best {
                    best = worst;
                    if best >= ceiling {
                        break 'moves;
                    }
                }
            }
        }
        self.memo.borrow_mut().insert(key, best);
        Ok(best)
    }

    /// Value of a position under the winning rule of the DSL game.
    pub fn val_dsl(&self, pos: &DslPosition) -> Result<GameValue> {
        let mut v = all_members(self.class);
        let mut escaped = false;
        for (s, round) in pos.rounds.iter().enumerate() {
            let tau = s + 1;
            if round.x.len() != tau || round.y.len() != tau || round.cube.iter().any(|c| c.len() != tau) {
                return usage(format!("round {tau}: tuples must have length {tau}"));
            }
            let pairs: Vec<(usize, Label)> = round.x.iter().copied().zip(round.y.iter().copied()).collect();
            for &(x, y) in &pairs {
                if x >= self.class.domain_size() || y >= self.class.labels() {
                    return usage(format!("round {tau}: ({x}, {y}) out of range"));
                }
            }
            let mut c = round.cube.clone();
            c.sort();
            c.dedup();
            let proj = self.class.project(&round.x)?;
            let legal = crate::pseudocube::is_pseudo_cube(&c, tau)? && c.iter().all(|p| proj.contains(p));
            if !legal {
                return Ok(GameValue::Lost);
            }
            v = members_matching(self.class, &v, &pairs);
            if c.binary_search(&round.y).is_err() {
                escaped = true;
            }
            if !escaped && v.is_empty() {
                return Ok(GameValue::Lost);
            }
        }
        if escaped {
            return Ok(GameValue::Unbounded);
        }
        Ok(GameValue::Rounds(self.remaining(&v, pos.rounds.len() + 1)?))
    }

    pub fn root_value(&self) -> Result<GameValue> {
        self.val_dsl(&DslPosition::default())
    }
}

pub fn val_dsl(class: &FiniteClass, pos: &DslPosition) -> Result<GameValue> {
    DslGame::new(class).val_dsl(pos)
}

// ------------------------------------------------------ pattern avoidance

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AvoidanceState {
    pub tau: usize,
    pub committed: Vec<DslRound>,
    pub window: VecDeque<(usize, Label)>,
    /// Number of pairs seen.
    pub t: usize,
    /// Version space of the committed rounds.
    #[serde(skip)]
    members: Vec<u32>,
    /// min(val(committed), val(∅)), cached.
    #[serde(skip)]
    bar: Option<GameValue>,
}

impl AvoidanceState {
    pub fn new(class: &FiniteClass) -> Self {
        AvoidanceState {
            tau: 1,
            committed: Vec::new(),
            window: VecDeque::new(),
            t: 0,
            members: all_members(class),
            bar: None,
        }
    }

    pub fn position(&self) -> DslPosition {
        DslPosition { rounds: self.committed.clone() }
    }

    /// (τ, committed version space): determines Ŷ completely.
    pub(crate) fn key(&self) -> (usize, Vec<u32>) {
        (self.tau, self.members.clone())
    }

    fn bar(&self, game: &DslGame) -> Result<GameValue> {
        if let Some(b) = self.bar {
            return Ok(b);
        }
        let here = GameValue::Rounds(game.remaining(&self.members, self.tau)?);
        Ok(here.min(game.root_value()?))
    }

    // value of the committed position extended by (x, C, y) with y in C
    fn next_value(&self, game: &DslGame, x: &[usize], y: &[Label]) -> Result<GameValue> {
        let pairs: Vec<(usize, Label)> = x.iter().copied().zip(y.iter().copied()).collect();
        let sub = members_matching(game.class, &self.members, &pairs);
        if sub.is_empty() {
            return Ok(GameValue::Lost);
        }
        Ok(GameValue::Rounds(game.remaining(&sub, self.tau + 1)?))
    }
}

/// One step of the online pattern-avoidance procedure.
pub fn avoidance_step(game: &DslGame, state: &AvoidanceState, x: usize, y: Label) -> Result<AvoidanceState> {
    if x >= game.class.domain_size() || y >= game.class.labels() {
        return usage(format!("({x}, {y}) out of range"));
    }
    let mut next = state.clone();
    next.t += 1;
    next.window.push_back((x, y));
    while next.window.len() > next.tau {
        next.window.pop_front();
    }
    if next.window.len() < next.tau {
        return Ok(next);
    }
    let wx: Vec<usize> = next.window.iter().map(|p| p.0).collect();
    let wy: Pattern = next.window.iter().map(|p| p.1).collect();
    let proj = game.class.project(&wx)?;
    let core = peel(&proj.patterns, wx.len());
    if core.binary_search(&wy).is_err() {
        // no cube contains the window labels, so no C makes eta = 1
        return Ok(next);
    }
    let bar = next.bar(game)?;
    let after = next.next_value(game, &wx, &wy)?;
    if after >= bar {
        return Ok(next);
    }
    let cube = match game.cubes_at(&wx) {
        Ok(list) => list.iter().find(|c| c.contains(&wy)).expect("core is a union of cubes").patterns.clone(),
        Err(Error::Resource(_)) => core,
        Err(e) => return Err(e),
    };
    let pairs: Vec<(usize, Label)> = wx.iter().copied().zip(wy.iter().copied()).collect();
    next.members = members_matching(game.class, &next.members, &pairs);
    next.committed.push(DslRound { x: wx, cube, y: wy });
    next.tau += 1;
    next.bar = Some(after.min(game.root_value()?));
    Ok(next)
}

/// Ŷ_t on a τ_t-tuple: labels in some cube whose play would lower the value.
pub fn avoidance_query(game: &DslGame, state: &AvoidanceState, points: &[usize]) -> Result<Vec<Pattern>> {
    if points.len() != state.tau {
        return usage(format!("query tuple has length {}, expected {}", points.len(), state.tau));
    }
    let proj = game.class.project(points)?;
    let bar = state.bar(game)?;
    let mut out = Vec::new();
    for y in peel(&proj.patterns, points.len()) {
        if state.next_value(game, points, &y)? < bar {
            out.push(y);
        }
    }
    Ok(out)
}

/// Runs the procedure over a whole stream, returning every intermediate state.
pub fn run_avoidance(game: &DslGame, sample: &[(usize, Label)]) -> Result<Vec<AvoidanceState>> {
    let mut s = AvoidanceState::new(game.class);
    let mut out = Vec::with_capacity(sample.len() + 1);
    out.push(s.clone());
    for &(x, y) in sample {
        s = avoidance_step(game, &s, x, y)?;
        out.push(s.clone());
    }
    Ok(out)
}
