//! Pairwise placement study: records for the four placement methods,
//! exclusion bookkeeping, blinded comparison schedules, judgments and
//! win/tie/lose summaries.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::SceneImage;

/// Indoor objects placed in the study.
pub const DEFAULT_OBJECTS: [&str; 15] = [
    "apple", "cake", "cup", "plate", "vase", "stool", "painting", "lamp", "book", "bag",
    "computer", "pencil", "shoes", "cushion", "cat",
];

pub fn default_object_list() -> Vec<String> {
    DEFAULT_OBJECTS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("({image_id}, {object}) is excluded for some methods but not others")]
    InconsistentExclusion { image_id: String, object: String },
    #[error("({image_id}, {object}) has more than one {method} record")]
    DuplicateRecord {
        image_id: String,
        object: String,
        method: Method,
    },
    #[error("({image_id}, {object}) is usable but has no {method} record")]
    MissingMethod {
        image_id: String,
        object: String,
        method: Method,
    },
    #[error("({image_id}, {object}) {method} record is not excluded but has no pixel")]
    MissingPixel {
        image_id: String,
        object: String,
        method: Method,
    },
    #[error("{comparison} asks for {requested} pairs but only {available} are usable")]
    ScheduleTooLarge {
        comparison: Comparison,
        requested: usize,
        available: usize,
    },
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("unknown comparison {0:?}")]
    UnknownComparison(String),
    #[error("unknown side {0:?}")]
    UnknownSide(String),
    #[error("{comparison} cannot compare {left} with {right}")]
    InvalidTask {
        comparison: Comparison,
        left: Method,
        right: Method,
    },
    #[error("task {task_id} was already judged by {evaluator}")]
    AlreadyJudged { task_id: String, evaluator: String },
    #[error("no judgments for {0}")]
    EmptyComparison(Comparison),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Natural,
    Unnatural,
    Random,
    Octopus,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Natural, Method::Unnatural, Method::Random, Method::Octopus];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Natural => "natural",
            Method::Unnatural => "unnatural",
            Method::Random => "random",
            Method::Octopus => "octopus",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim().to_lowercase())
            .ok_or_else(|| EvalError::UnknownMethod(s.to_string()))
    }
}

/// The five method duels. Unnatural vs random is never run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    NaturalVsUnnatural,
    NaturalVsRandom,
    OctopusVsUnnatural,
    OctopusVsRandom,
    OctopusVsNatural,
}

impl Comparison {
    /// In report order.
    pub const ALL: [Comparison; 5] = [
        Comparison::NaturalVsUnnatural,
        Comparison::NaturalVsRandom,
        Comparison::OctopusVsUnnatural,
        Comparison::OctopusVsRandom,
        Comparison::OctopusVsNatural,
    ];

    pub fn methods(self) -> (Method, Method) {
        match self {
            Comparison::NaturalVsUnnatural => (Method::Natural, Method::Unnatural),
            Comparison::NaturalVsRandom => (Method::Natural, Method::Random),
            Comparison::OctopusVsUnnatural => (Method::Octopus, Method::Unnatural),
            Comparison::OctopusVsRandom => (Method::Octopus, Method::Random),
            Comparison::OctopusVsNatural => (Method::Octopus, Method::Natural),
        }
    }

    pub fn first(self) -> Method {
        self.methods().0
    }

    pub fn second(self) -> Method {
        self.methods().1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Comparison::NaturalVsUnnatural => "natural-vs-unnatural",
            Comparison::NaturalVsRandom => "natural-vs-random",
            Comparison::OctopusVsUnnatural => "octopus-vs-unnatural",
            Comparison::OctopusVsRandom => "octopus-vs-random",
            Comparison::OctopusVsNatural => "octopus-vs-natural",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Comparison {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Comparison::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| EvalError::UnknownComparison(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub x: u32,
    pub y: u32,
}

/// One method's placement for an (image, object) combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub image_id: String,
    pub object: String,
    pub method: Method,
    /// Absent only for excluded combinations.
    pub pixel: Option<Pixel>,
    pub excluded: bool,
}

impl PlacementRecord {
    pub fn within(&self, width: u32, height: u32) -> bool {
        self.excluded || self.pixel.is_some_and(|p| p.x < width && p.y < height)
    }
}

/// Uniformly random placement pixel, reproducible from `seed`.
pub fn random_placement(image: &SceneImage, object: &str, seed: u64) -> PlacementRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = rng.random_range(0..image.width());
    let y = rng.random_range(0..image.height());
    PlacementRecord {
        image_id: image.id().to_string(),
        object: object.to_string(),
        method: Method::Random,
        pixel: Some(Pixel { x, y }),
        excluded: false,
    }
}

/// A non-excluded (image, object) combination with a pixel for every method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsablePair {
    pub image_id: String,
    pub object: String,
    pixels: [Pixel; 4],
}

impl UsablePair {
    pub fn pixel(&self, method: Method) -> Pixel {
        self.pixels[method.index()]
    }
}

/// Usable combinations sorted by (image id, object).
pub fn usable_set(records: &[PlacementRecord]) -> Result<Vec<UsablePair>, EvalError> {
    let mut grid: BTreeMap<(&str, &str), [Option<&PlacementRecord>; 4]> = BTreeMap::new();
    for r in records {
        let slot = grid.entry((&r.image_id, &r.object)).or_default();
        if slot[r.method.index()].replace(r).is_some() {
            return Err(EvalError::DuplicateRecord {
                image_id: r.image_id.clone(),
                object: r.object.clone(),
                method: r.method,
            });
        }
    }

    let mut usable = Vec::new();
    for ((image_id, object), slot) in grid {
        let mut flags = slot.iter().flatten().map(|r| r.excluded);
        let excluded = flags.next().unwrap_or(true);
        if flags.any(|f| f != excluded) {
            return Err(EvalError::InconsistentExclusion {
                image_id: image_id.to_string(),
                object: object.to_string(),
            });
        }
        if excluded {
            continue;
        }
        let mut pixels = [Pixel { x: 0, y: 0 }; 4];
        for method in Method::ALL {
            let record = slot[method.index()].ok_or_else(|| EvalError::MissingMethod {
                image_id: image_id.to_string(),
                object: object.to_string(),
                method,
            })?;
            pixels[method.index()] = record.pixel.ok_or_else(|| EvalError::MissingPixel {
                image_id: image_id.to_string(),
                object: object.to_string(),
                method,
            })?;
        }
        usable.push(UsablePair {
            image_id: image_id.to_string(),
            object: object.to_string(),
            pixels,
        });
    }
    Ok(usable)
}

/// Usable (image, object) combinations per method.
///
/// Exclusion is per combination, so every method gets the same count.
pub fn usable_pairs(records: &[PlacementRecord]) -> Result<BTreeMap<Method, usize>, EvalError> {
    let n = usable_set(records)?.len();
    Ok(Method::ALL.into_iter().map(|m| (m, n)).collect())
}

/// Number of pairs to sample per comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleSizes([usize; 5]);

impl ScheduleSizes {
    pub fn uniform(n: usize) -> Self {
        Self([n; 5])
    }

    pub fn with(mut self, comparison: Comparison, n: usize) -> Self {
        self.0[comparison.index()] = n;
        self
    }

    pub fn get(&self, comparison: Comparison) -> usize {
        self.0[comparison.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl Default for ScheduleSizes {
    /// 100 octopus-vs-natural pairs and 50 for every other duel.
    fn default() -> Self {
        Self::uniform(50).with(Comparison::OctopusVsNatural, 100)
    }
}

/// One side of a blinded pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shown {
    pub method: Method,
    pub x: u32,
    pub y: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTask {
    pub task_id: String,
    pub comparison: Comparison,
    pub object: String,
    pub image_id: String,
    pub left: Shown,
    pub right: Shown,
    pub left_is_first_method: bool,
}

impl PairTask {
    pub fn new(
        task_id: impl Into<String>,
        comparison: Comparison,
        pair: &UsablePair,
        left_is_first_method: bool,
    ) -> Self {
        let (first, second) = comparison.methods();
        let (l, r) = if left_is_first_method { (first, second) } else { (second, first) };
        let shown = |m: Method| {
            let p = pair.pixel(m);
            Shown { method: m, x: p.x, y: p.y }
        };
        Self {
            task_id: task_id.into(),
            comparison,
            object: pair.object.clone(),
            image_id: pair.image_id.clone(),
            left: shown(l),
            right: shown(r),
            left_is_first_method,
        }
    }

    /// Checks the left/right methods against the comparison and blinding flag.
    pub fn validate(&self) -> Result<(), EvalError> {
        let (first, second) = self.comparison.methods();
        let expected = if self.left_is_first_method { (first, second) } else { (second, first) };
        if (self.left.method, self.right.method) != expected {
            return Err(EvalError::InvalidTask {
                comparison: self.comparison,
                left: self.left.method,
                right: self.right.method,
            });
        }
        Ok(())
    }

    /// The same task with left and right swapped.
    pub fn mirrored(&self) -> Self {
        Self {
            left: self.right,
            right: self.left,
            left_is_first_method: !self.left_is_first_method,
            ..self.clone()
        }
    }
}

/// Samples pairs without replacement for each comparison, randomizes the
/// left/right order of every task and shuffles the whole schedule.
///
/// Task ids are `t0001`, `t0002`, ... in final order and carry no method
/// information.
pub fn build_schedule(
    pairs: &[UsablePair],
    sizes: &ScheduleSizes,
    seed: u64,
) -> Result<Vec<PairTask>, EvalError> {
    for comparison in Comparison::ALL {
        let requested = sizes.get(comparison);
        if requested > pairs.len() {
            return Err(EvalError::ScheduleTooLarge {
                comparison,
                requested,
                available: pairs.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(sizes.total());
    for comparison in Comparison::ALL {
        for i in index::sample(&mut rng, pairs.len(), sizes.get(comparison)) {
            let left_first = rng.random_bool(0.5);
            tasks.push(PairTask::new(String::new(), comparison, &pairs[i], left_first));
        }
    }
    tasks.shuffle(&mut rng);
    for (i, task) in tasks.iter_mut().enumerate() {
        task.task_id = format!("t{:04}", i + 1);
    }
    Ok(tasks)
}

/// What the evaluator clicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Tie,
}

impl Side {
    pub fn flipped(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::Tie => Side::Tie,
        }
    }
}

impl FromStr for Side {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            "tie" => Ok(Side::Tie),
            _ => Err(EvalError::UnknownSide(s.to_string())),
        }
    }
}

/// A verdict in method order, after un-blinding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    FirstMethodWins,
    SecondMethodWins,
    Tie,
}

pub fn unblind(task: &PairTask, side: Side) -> Outcome {
    match (side, task.left_is_first_method) {
        (Side::Tie, _) => Outcome::Tie,
        (Side::Left, true) | (Side::Right, false) => Outcome::FirstMethodWins,
        (Side::Left, false) | (Side::Right, true) => Outcome::SecondMethodWins,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub task_id: String,
    pub comparison: Comparison,
    pub outcome: Outcome,
    pub evaluator: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

/// In-memory judgment ledger enforcing one verdict per (task, evaluator).
#[derive(Debug, Clone, Default)]
pub struct JudgmentBook {
    judged: BTreeSet<(String, String)>,
    records: Vec<JudgmentRecord>,
}

impl JudgmentBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a book from previously persisted records.
    pub fn replay(records: impl IntoIterator<Item = JudgmentRecord>) -> Result<Self, EvalError> {
        let mut book = Self::new();
        for r in records {
            book.insert(r)?;
        }
        Ok(book)
    }

    pub fn is_judged(&self, task_id: &str, evaluator: &str) -> bool {
        self.judged.contains(&(task_id.to_string(), evaluator.to_string()))
    }

    /// Un-blinds `side` and stores the verdict.
    pub fn record(
        &mut self,
        task: &PairTask,
        side: Side,
        evaluator: &str,
        timestamp: u64,
    ) -> Result<JudgmentRecord, EvalError> {
        let record = JudgmentRecord {
            task_id: task.task_id.clone(),
            comparison: task.comparison,
            outcome: unblind(task, side),
            evaluator: evaluator.to_string(),
            timestamp,
        };
        self.insert(record.clone())?;
        Ok(record)
    }

    /// Stores an already un-blinded verdict.
    pub fn insert(&mut self, record: JudgmentRecord) -> Result<(), EvalError> {
        if !self.judged.insert((record.task_id.clone(), record.evaluator.clone())) {
            return Err(EvalError::AlreadyJudged {
                task_id: record.task_id,
                evaluator: record.evaluator,
            });
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[JudgmentRecord] {
        &self.records
    }
}

/// Win/tie/lose of the first-listed method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub comparison: Comparison,
    pub n: usize,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub win: f64,
    pub tie: f64,
    pub lose: f64,
}

impl ComparisonSummary {
    pub fn from_counts(
        comparison: Comparison,
        wins: usize,
        ties: usize,
        losses: usize,
    ) -> Result<Self, EvalError> {
        let n = wins + ties + losses;
        if n == 0 {
            return Err(EvalError::EmptyComparison(comparison));
        }
        let total = n as f64;
        Ok(Self {
            comparison,
            n,
            wins,
            ties,
            losses,
            win: wins as f64 / total,
            tie: ties as f64 / total,
            lose: losses as f64 / total,
        })
    }
}

/// Pools every judgment of `comparison`, across evaluators.
pub fn summarize(
    judgments: &[JudgmentRecord],
    comparison: Comparison,
) -> Result<ComparisonSummary, EvalError> {
    let (mut wins, mut ties, mut losses) = (0, 0, 0);
    for j in judgments.iter().filter(|j| j.comparison == comparison) {
        match j.outcome {
            Outcome::FirstMethodWins => wins += 1,
            Outcome::Tie => ties += 1,
            Outcome::SecondMethodWins => losses += 1,
        }
    }
    ComparisonSummary::from_counts(comparison, wins, ties, losses)
}

/// Share of judgments where the first method was at least as good
/// (wins plus ties), computed from counts so it is exact for exact inputs.
pub fn at_least_as_natural(summary: &ComparisonSummary) -> f64 {
    (summary.wins + summary.ties) as f64 / summary.n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn grid(images: usize, objects: usize, excluded: impl Fn(usize, usize) -> bool) -> Vec<PlacementRecord> {
        let mut out = Vec::new();
        for i in 0..images {
            for o in 0..objects {
                for m in Method::ALL {
                    let ex = excluded(i, o);
                    out.push(PlacementRecord {
                        image_id: format!("img{i:03}"),
                        object: format!("obj{o:02}"),
                        method: m,
                        pixel: (!ex).then_some(Pixel { x: (i + m.index()) as u32, y: o as u32 }),
                        excluded: ex,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn object_list() {
        let list = default_object_list();
        assert_eq!(list.len(), 15);
        assert!(list.iter().any(|o| o == "cat"));
        assert!(!list.iter().any(|o| o == "table"));
        assert_eq!(list[0], "apple");
        assert_eq!(list[14], "cat");
    }

    #[test]
    fn random_placement_is_seeded() {
        let one = SceneImage::filled("one", 1, 1, [0, 0, 0]).unwrap();
        for seed in 0..20 {
            assert_eq!(random_placement(&one, "cup", seed).pixel, Some(Pixel { x: 0, y: 0 }));
        }
        let img = SceneImage::filled("big", 100, 100, [0, 0, 0]).unwrap();
        assert_eq!(random_placement(&img, "cup", 42), random_placement(&img, "cup", 42));
    }

    #[test]
    fn usable_counts() {
        let counts = usable_pairs(&grid(2, 3, |_, _| false)).unwrap();
        assert!(Method::ALL.iter().all(|m| counts[m] == 6));
        let counts = usable_pairs(&grid(2, 3, |i, o| i == 1 && o < 2)).unwrap();
        assert!(Method::ALL.iter().all(|m| counts[m] == 4));
    }

    #[test]
    fn inconsistent_exclusion_is_rejected() {
        let mut records = grid(1, 1, |_, _| false);
        records[0].excluded = true; // natural only
        assert!(matches!(usable_pairs(&records), Err(EvalError::InconsistentExclusion { .. })));
    }

    #[test]
    fn incomplete_records_are_rejected() {
        let mut records = grid(1, 1, |_, _| false);
        records.retain(|r| r.method != Method::Octopus);
        assert!(matches!(
            usable_pairs(&records),
            Err(EvalError::MissingMethod { method: Method::Octopus, .. })
        ));
        let mut records = grid(1, 1, |_, _| false);
        records[1].pixel = None;
        assert!(matches!(usable_pairs(&records), Err(EvalError::MissingPixel { .. })));
        let mut records = grid(1, 1, |_, _| false);
        records.push(records[0].clone());
        assert!(matches!(usable_pairs(&records), Err(EvalError::DuplicateRecord { .. })));
    }

    #[test]
    fn schedule_sizes_and_determinism() {
        let pairs = usable_set(&grid(10, 12, |_, _| false)).unwrap();
        let a = build_schedule(&pairs, &ScheduleSizes::default(), 7).unwrap();
        assert_eq!(a.len(), 300);
        assert_eq!(a, build_schedule(&pairs, &ScheduleSizes::default(), 7).unwrap());
        assert_ne!(a, build_schedule(&pairs, &ScheduleSizes::default(), 8).unwrap());
        for c in Comparison::ALL {
            let of_c: Vec<_> = a.iter().filter(|t| t.comparison == c).collect();
            let expected = if c == Comparison::OctopusVsNatural { 100 } else { 50 };
            assert_eq!(of_c.len(), expected);
            let distinct: BTreeSet<_> = of_c.iter().map(|t| (&t.image_id, &t.object)).collect();
            assert_eq!(distinct.len(), expected, "sampled with replacement");
        }
        assert!(a.iter().all(|t| t.validate().is_ok()));
        assert!(a.iter().any(|t| t.left_is_first_method) && a.iter().any(|t| !t.left_is_first_method));
        assert_eq!(a[0].task_id, "t0001");
    }

    #[test]
    fn schedule_larger_than_pool() {
        let pairs = usable_set(&grid(5, 1, |_, _| false)).unwrap();
        assert!(matches!(
            build_schedule(&pairs, &ScheduleSizes::uniform(10), 1),
            Err(EvalError::ScheduleTooLarge { requested: 10, available: 5, .. })
        ));
    }

    fn task(left_first: bool) -> PairTask {
        let pairs = usable_set(&grid(1, 1, |_, _| false)).unwrap();
        PairTask::new("t1", Comparison::OctopusVsNatural, &pairs[0], left_first)
    }

    #[test]
    fn unblinding() {
        assert_eq!(unblind(&task(true), Side::Left), Outcome::FirstMethodWins);
        assert_eq!(unblind(&task(false), Side::Left), Outcome::SecondMethodWins);
        assert_eq!(unblind(&task(true), Side::Tie), Outcome::Tie);
        assert_eq!(unblind(&task(false), Side::Tie), Outcome::Tie);
        assert_eq!(task(false).left.method, Method::Natural);
    }

    #[test]
    fn duplicate_judgment_conflicts() {
        let mut book = JudgmentBook::new();
        let t = task(true);
        book.record(&t, Side::Left, "e1", 0).unwrap();
        assert!(matches!(book.record(&t, Side::Tie, "e1", 1), Err(EvalError::AlreadyJudged { .. })));
        book.record(&t, Side::Tie, "e2", 2).unwrap();
        assert_eq!(book.records().len(), 2);
        assert!(JudgmentBook::replay(book.records().iter().cloned().chain([book.records()[0].clone()])).is_err());
    }

    fn judgments(c: Comparison, w: usize, t: usize, l: usize) -> Vec<JudgmentRecord> {
        let mk = |i: usize, outcome| JudgmentRecord {
            task_id: format!("t{i}"),
            comparison: c,
            outcome,
            evaluator: "e".into(),
            timestamp: 0,
        };
        (0..w)
            .map(|i| mk(i, Outcome::FirstMethodWins))
            .chain((w..w + t).map(|i| mk(i, Outcome::Tie)))
            .chain((w + t..w + t + l).map(|i| mk(i, Outcome::SecondMethodWins)))
            .collect()
    }

    #[test]
    fn summaries() {
        let s = summarize(&judgments(Comparison::OctopusVsNatural, 6, 51, 43), Comparison::OctopusVsNatural).unwrap();
        assert_eq!((s.win, s.tie, s.lose), (0.06, 0.51, 0.43));
        assert_eq!(at_least_as_natural(&s), 0.57);

        let s = summarize(&judgments(Comparison::OctopusVsRandom, 43, 6, 1), Comparison::OctopusVsRandom).unwrap();
        assert_eq!((s.n, s.win, s.tie, s.lose), (50, 0.86, 0.12, 0.02));

        let s = summarize(&judgments(Comparison::NaturalVsRandom, 1, 0, 1), Comparison::NaturalVsRandom).unwrap();
        assert_eq!((s.win, s.tie, s.lose), (0.5, 0.0, 0.5));

        assert_eq!(
            summarize(&judgments(Comparison::NaturalVsRandom, 1, 0, 1), Comparison::OctopusVsNatural),
            Err(EvalError::EmptyComparison(Comparison::OctopusVsNatural))
        );

        let all_win = ComparisonSummary::from_counts(Comparison::OctopusVsNatural, 3, 0, 0).unwrap();
        assert_eq!(at_least_as_natural(&all_win), 1.0);
        let all_lose = ComparisonSummary::from_counts(Comparison::OctopusVsNatural, 0, 0, 3).unwrap();
        assert_eq!(at_least_as_natural(&all_lose), 0.0);
    }

    #[test]
    fn labels_round_trip() {
        for c in Comparison::ALL {
            assert_eq!(c.as_str().parse::<Comparison>().unwrap(), c);
        }
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!(!Comparison::ALL.iter().any(|c| c.methods() == (Method::Unnatural, Method::Random)
            || c.methods() == (Method::Random, Method::Unnatural)));
    }

    proptest! {
        #[test]
        fn proportions_sum_to_one(w in 0usize..200, t in 0usize..200, l in 0usize..200) {
            prop_assume!(w + t + l > 0);
            let s = ComparisonSummary::from_counts(Comparison::OctopusVsNatural, w, t, l).unwrap();
            prop_assert!((s.win + s.tie + s.lose - 1.0).abs() < 1e-9);
            for p in [s.win, s.tie, s.lose] {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }

        #[test]
        fn mirrored_tasks_unblind_identically(left_first: bool, side in prop::sample::select(vec![Side::Left, Side::Right, Side::Tie])) {
            let t = task(left_first);
            prop_assert_eq!(unblind(&t, side), unblind(&t.mirrored(), side.flipped()));
            prop_assert!(t.mirrored().validate().is_ok());
        }

        #[test]
        fn random_placement_in_bounds(w in 1u32..500, h in 1u32..500, seed: u64) {
            let img = SceneImage::filled("r", w, h, [0, 0, 0]).unwrap();
            let r = random_placement(&img, "cup", seed);
            prop_assert!(r.within(w, h));
        }
    }

    #[test]
    fn random_placement_quadrants_are_balanced() {
        let img = SceneImage::filled("q", 100, 100, [0, 0, 0]).unwrap();
        let mut counts = [0usize; 4];
        for seed in 0..10_000 {
            let p = random_placement(&img, "cup", seed).pixel.unwrap();
            counts[(p.x >= 50) as usize + 2 * (p.y >= 50) as usize] += 1;
        }
        for c in counts {
            assert!((2300..=2700).contains(&c), "{counts:?}");
        }
    }
}
