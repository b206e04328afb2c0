//! Placement orchestrator.
//!
//! `place()` runs segment → boxes → crop + caption → POS tag + noun
//! extraction → floor injection → VQA filtering → selection prompt +
//! completion + parsing → grounding + argmax, and records every
//! intermediate in a [`PlacementTrace`] together with per-stage timings.
//!
//! Captioning, tagging and VQA fan out over a bounded pool of scoped
//! threads. Results are reassembled by input index, so a run is identical to
//! a sequential one.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use octoplace_core::capability::YesNoAnswer;
use octoplace_core::pipeline::{
    brightest_pixel, build_selection_prompt, build_vqa_question, collect_candidates,
    dedup_candidates, extract_nouns, inject_floor, parse_selection, regions_to_boxes,
    NounCandidate, StepError, DEFAULT_MIN_AREA, FLOOR,
};
use octoplace_core::scene::{BoundingBox, Placement2D, Placement3D, SceneError, SceneImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{
    BackendError, BackendSpec, Backends, Capability, Completer, YesNoAnswerer,
};

pub const DEFAULT_RETRIES: usize = 1;
pub const DEFAULT_MAX_CONCURRENCY: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Segment,
    Regions,
    Caption,
    Nouns,
    Filter,
    Select,
    Ground,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Input => "input",
            Stage::Segment => "segment",
            Stage::Regions => "regions",
            Stage::Caption => "caption",
            Stage::Nouns => "nouns",
            Stage::Filter => "filter",
            Stage::Select => "select",
            Stage::Ground => "ground",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// Regions with fewer mask pixels are not captioned.
    pub min_area: usize,
    /// Extra completion attempts when the answer names no candidate.
    pub retries: usize,
    pub max_concurrency: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            min_area: DEFAULT_MIN_AREA,
            retries: DEFAULT_RETRIES,
            max_concurrency: DEFAULT_MAX_CONCURRENCY,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("cannot load fixture {path}: {message}")]
    Fixture { path: PathBuf, message: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    backends: BTreeMap<String, BackendSpec>,
    #[serde(default = "default_min_area")]
    min_area: usize,
    #[serde(default = "default_retries")]
    retries: usize,
    #[serde(default = "default_concurrency")]
    max_concurrency: usize,
}

fn default_min_area() -> usize {
    DEFAULT_MIN_AREA
}

fn default_retries() -> usize {
    DEFAULT_RETRIES
}

fn default_concurrency() -> usize {
    DEFAULT_MAX_CONCURRENCY
}

/// Pipeline config file.
///
/// ```json
/// {
///   "backends": { "default": "fixture:golden.json", "complete": "http" },
///   "min_area": 100,
///   "retries": 1,
///   "max_concurrency": 8
/// }
/// ```
///
/// `backends` maps capability names (or `default`) to `http` or
/// `fixture:<path>`; fixture paths are relative to the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub backends: BTreeMap<Capability, BackendSpec>,
    pub options: PipelineOptions,
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, String> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let default = file.backends.get("default").cloned();
        let mut backends = BTreeMap::new();
        for (name, spec) in &file.backends {
            if name != "default" {
                backends.insert(name.parse::<Capability>()?, spec.clone());
            }
        }
        for capability in Capability::ALL {
            backends
                .entry(capability)
                .or_insert_with(|| default.clone().unwrap_or(BackendSpec::Http));
        }
        Ok(Self {
            backends,
            options: PipelineOptions {
                min_area: file.min_area,
                retries: file.retries,
                max_concurrency: file.max_concurrency.max(1),
            },
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn build_backends(&self) -> Result<Backends, ConfigError> {
        Backends::from_specs(&self.backends, &self.base_dir)
    }
}

/// Everything one successful run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementTrace {
    pub image_id: String,
    pub object: String,
    pub boxes: Vec<BoundingBox>,
    /// One caption per box.
    pub captions: Vec<String>,
    /// All candidates after floor injection, with their VQA outcome.
    pub candidates: Vec<NounCandidate>,
    pub selection_prompt: String,
    /// Raw completions, one per attempt.
    pub selection_responses: Vec<String>,
    pub selected_noun: String,
    /// True when no completion named a candidate.
    pub selection_fallback: bool,
    pub placement: Placement2D,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub placement_3d: Option<Placement3D>,
    /// Seconds per stage.
    pub stage_latencies: BTreeMap<String, f64>,
    pub total_seconds: f64,
}

impl PlacementTrace {
    pub fn verified_nouns(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().filter(|c| c.verified).map(|c| c.noun.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    /// The trace with timing fields zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        Self {
            stage_latencies: self.stage_latencies.keys().map(|k| (k.clone(), 0.0)).collect(),
            total_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// What a run had produced before it failed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PartialTrace {
    pub image_id: String,
    pub object: String,
    pub boxes: Vec<BoundingBox>,
    pub captions: Vec<String>,
    pub candidates: Vec<NounCandidate>,
    pub selection_prompt: Option<String>,
    pub selection_responses: Vec<String>,
    pub selected_noun: Option<String>,
    pub stage_latencies: BTreeMap<String, f64>,
}

#[derive(Debug, Error)]
pub enum PipelineFailure {
    #[error("object name must be non-empty")]
    EmptyObject,
    #[error("{source}{}", noun.as_ref().map(|n| format!(" (noun {n:?})")).unwrap_or_default())]
    Backend {
        noun: Option<String>,
        #[source]
        source: BackendError,
    },
    #[error("no candidate noun survived VQA filtering")]
    NoVerifiedNouns,
    #[error("heatmap is {got_w}x{got_h} but the image is {w}x{h}")]
    HeatmapSize { w: u32, h: u32, got_w: u32, got_h: u32 },
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {failure}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub failure: PipelineFailure,
    pub trace: Box<PartialTrace>,
}

impl PipelineError {
    pub fn is_backend(&self) -> bool {
        matches!(self.failure, PipelineFailure::Backend { .. })
    }
}

/// A VQA failure for one noun.
#[derive(Debug, Error)]
#[error("VQA for {noun:?} failed: {source}")]
pub struct NounError {
    pub noun: String,
    #[source]
    pub source: BackendError,
}

/// Runs `f` over `items` on up to `workers` threads.
///
/// Output order follows input order. On failure, the error of the lowest
/// failing index is returned together with that index.
pub fn fan_out<T, R, E, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>, (usize, E)>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync,
{
    let workers = workers.max(1).min(items.len());
    if workers <= 1 {
        return items
            .iter()
            .enumerate()
            .map(|(i, item)| f(item).map_err(|e| (i, e)))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<R, E>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .enumerate()
        .map(|(i, slot)| {
            slot.into_inner()
                .unwrap()
                .expect("every index is processed")
                .map_err(|e| (i, e))
        })
        .collect()
}

/// Asks the VQA model about every distinct noun and records the outcome in
/// `verified`. Each distinct noun is queried exactly once.
pub fn verify_nouns(
    vqa: &dyn YesNoAnswerer,
    image: &SceneImage,
    candidates: Vec<NounCandidate>,
    workers: usize,
) -> Result<Vec<NounCandidate>, NounError> {
    let candidates = dedup_candidates(candidates);
    let answers: Vec<YesNoAnswer> = fan_out(&candidates, workers, |c| {
        let question = build_vqa_question(&c.noun).map_err(|e| BackendError::Contract {
            capability: Capability::AnswerYesNo,
            message: e.to_string(),
        })?;
        vqa.answer_yes_no(image, &question)
    })
    .map_err(|(i, source)| NounError {
        noun: candidates[i].noun.clone(),
        source,
    })?;
    Ok(candidates
        .into_iter()
        .zip(answers)
        .map(|(c, a)| NounCandidate {
            verified: a.is_yes(),
            ..c
        })
        .collect())
}

/// Keeps only the candidates the VQA model confirms, in order.
pub fn filter_nouns(
    vqa: &dyn YesNoAnswerer,
    image: &SceneImage,
    candidates: Vec<NounCandidate>,
    workers: usize,
) -> Result<Vec<NounCandidate>, NounError> {
    Ok(verify_nouns(vqa, image, candidates, workers)?
        .into_iter()
        .filter(|c| c.verified)
        .collect())
}

/// Outcome of the selection prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub noun: String,
    /// Raw completions in order.
    pub responses: Vec<String>,
    pub fallback: bool,
}

/// A completion call failed; `responses` holds the ones received before it.
#[derive(Debug)]
pub struct SelectionError {
    pub responses: Vec<String>,
    pub source: BackendError,
}

/// Prompts for a noun, retrying `retries` times with the identical prompt.
///
/// When no completion names a candidate the result is `floor` if it is an
/// option, else the first option.
pub fn select_noun(
    completer: &dyn Completer,
    prompt: &str,
    options: &[&str],
    retries: usize,
) -> Result<Selection, SelectionError> {
    let mut responses = Vec::new();
    for _ in 0..=retries {
        let response = match completer.complete(prompt) {
            Ok(r) => r,
            Err(source) => return Err(SelectionError { responses, source }),
        };
        let parsed = parse_selection(&response, options);
        responses.push(response);
        if let Ok(noun) = parsed {
            return Ok(Selection { noun, responses, fallback: false });
        }
    }
    let noun = if options.contains(&FLOOR) { FLOOR } else { options[0] };
    Ok(Selection { noun: noun.to_string(), responses, fallback: true })
}

struct Run {
    trace: PartialTrace,
    start: Instant,
    lap: Instant,
}

impl Run {
    fn new(image: &SceneImage, object: &str) -> Self {
        let now = Instant::now();
        Self {
            trace: PartialTrace {
                image_id: image.id().to_string(),
                object: object.to_string(),
                ..PartialTrace::default()
            },
            start: now,
            lap: now,
        }
    }

    fn finish_stage(&mut self, stage: Stage) {
        let now = Instant::now();
        self.trace
            .stage_latencies
            .insert(stage.as_str().to_string(), (now - self.lap).as_secs_f64());
        self.lap = now;
    }

    fn fail(mut self, stage: Stage, failure: PipelineFailure) -> PipelineError {
        self.finish_stage(stage);
        PipelineError {
            stage,
            failure,
            trace: Box::new(self.trace),
        }
    }
}

fn backend_failure(source: BackendError) -> PipelineFailure {
    PipelineFailure::Backend { noun: None, source }
}

/// Chooses where `object` should go in `image`.
pub fn place(
    backends: &Backends,
    image: &SceneImage,
    object: &str,
    options: &PipelineOptions,
) -> Result<PlacementTrace, PipelineError> {
    let mut run = Run::new(image, object);
    if object.trim().is_empty() {
        return Err(run.fail(Stage::Input, PipelineFailure::EmptyObject));
    }
    let workers = options.max_concurrency;

    let regions = match backends.segmenter.segment(image) {
        Ok(r) => r,
        Err(e) => return Err(run.fail(Stage::Segment, backend_failure(e))),
    };
    run.finish_stage(Stage::Segment);

    run.trace.boxes = regions_to_boxes(&regions, options.min_area);
    let patches = match run.trace.boxes.iter().map(|b| image.crop(*b)).collect::<Result<Vec<_>, _>>() {
        Ok(p) => p,
        Err(e) => return Err(run.fail(Stage::Regions, e.into())),
    };
    run.finish_stage(Stage::Regions);

    let captioner = &*backends.captioner;
    match fan_out(&patches, workers, |p| captioner.caption(p)) {
        Ok(c) => run.trace.captions = c,
        Err((_, e)) => return Err(run.fail(Stage::Caption, backend_failure(e))),
    }
    run.finish_stage(Stage::Caption);

    let tagger = &*backends.tagger;
    let per_caption = match fan_out(&run.trace.captions, workers, |c| {
        tagger.tag_pos(c).map(|tags| extract_nouns(&tags))
    }) {
        Ok(n) => n,
        Err((_, e)) => return Err(run.fail(Stage::Nouns, backend_failure(e))),
    };
    let mut candidates = collect_candidates(&per_caption);
    inject_floor(&mut candidates);
    run.trace.candidates = candidates.clone();
    run.finish_stage(Stage::Nouns);

    match verify_nouns(&*backends.vqa, image, candidates, workers) {
        Ok(c) => run.trace.candidates = c,
        Err(NounError { noun, source }) => {
            return Err(run.fail(Stage::Filter, PipelineFailure::Backend { noun: Some(noun), source }))
        }
    }
    let options_list: Vec<String> = run
        .trace
        .candidates
        .iter()
        .filter(|c| c.verified)
        .map(|c| c.noun.clone())
        .collect();
    if options_list.is_empty() {
        return Err(run.fail(Stage::Filter, PipelineFailure::NoVerifiedNouns));
    }
    run.finish_stage(Stage::Filter);

    let option_refs: Vec<&str> = options_list.iter().map(String::as_str).collect();
    let prompt = match build_selection_prompt(&option_refs, object) {
        Ok(p) => p,
        Err(e) => return Err(run.fail(Stage::Select, e.into())),
    };
    run.trace.selection_prompt = Some(prompt.clone());
    let Selection { noun: selected, responses, fallback } =
        match select_noun(&*backends.completer, &prompt, &option_refs, options.retries) {
            Ok(s) => s,
            Err(e) => {
                run.trace.selection_responses = e.responses;
                return Err(run.fail(Stage::Select, backend_failure(e.source)));
            }
        };
    run.trace.selection_responses = responses;
    run.trace.selected_noun = Some(selected.clone());
    run.finish_stage(Stage::Select);

    let heatmap = match backends.grounder.ground(image, &selected) {
        Ok(h) => h,
        Err(e) => return Err(run.fail(Stage::Ground, backend_failure(e))),
    };
    if heatmap.width() != image.width() || heatmap.height() != image.height() {
        let failure = PipelineFailure::HeatmapSize {
            w: image.width(),
            h: image.height(),
            got_w: heatmap.width(),
            got_h: heatmap.height(),
        };
        return Err(run.fail(Stage::Ground, failure));
    }
    let (x, y, heat) = brightest_pixel(&heatmap);

    let Run { trace, start, .. } = run;
    let mut out = PlacementTrace {
        image_id: trace.image_id,
        object: trace.object,
        boxes: trace.boxes,
        captions: trace.captions,
        candidates: trace.candidates,
        selection_prompt: prompt,
        selection_responses: trace.selection_responses,
        selected_noun: selected.clone(),
        selection_fallback: fallback,
        placement: Placement2D { x, y, noun: selected, heat },
        placement_3d: None,
        stage_latencies: trace.stage_latencies,
        total_seconds: 0.0,
    };
    let lap = Instant::now();
    out.stage_latencies
        .insert(Stage::Ground.as_str().to_string(), (lap - run.lap).as_secs_f64());
    out.total_seconds = (lap - start).as_secs_f64();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{FixtureBackend, FixtureStore, Request};
    use crate::golden;
    use std::sync::Arc;
    use std::time::Duration;

    fn run(scene: &golden::GoldenScene) -> (PlacementTrace, Arc<FixtureBackend>) {
        let backend = Arc::new(FixtureBackend::new(scene.fixtures.clone()));
        let backends = Backends::uniform(backend.clone());
        let trace = place(&backends, &scene.image, scene.object, &scene.options()).unwrap();
        (trace, backend)
    }

    fn nouns(trace: &PlacementTrace) -> Vec<(&str, bool)> {
        trace.candidates.iter().map(|c| (c.noun.as_str(), c.verified)).collect()
    }

    #[test]
    fn kitchen_walkthrough() {
        let (t, backend) = run(&golden::kitchen());
        let boxes: Vec<String> = t.boxes.iter().map(|b| b.to_string()).collect();
        assert_eq!(boxes, ["1,1,4,3", "4,3,8,6"]);
        assert_eq!(t.captions, ["a plate on a table", "a cat sitting on a rug"]);
        assert_eq!(
            nouns(&t),
            [("plate", true), ("table", true), ("cat", false), ("rug", false), ("floor", true)]
        );
        assert!(t.candidates[4].injected);
        assert_eq!(t.candidates[1].sources, [0]);
        assert_eq!(
            t.selection_prompt,
            "Give a one word response to fill in the blank using only one of these options: \
             {plate, table, floor}. The cupcake was located on the ____."
        );
        assert_eq!(t.selection_responses, ["Plate"]);
        assert_eq!(t.selected_noun, "plate");
        assert!(!t.selection_fallback);
        assert_eq!((t.placement.x, t.placement.y, t.placement.heat), (2, 1, 1.0));
        assert_eq!(backend.call_count(Capability::AnswerYesNo), 5);
        assert_eq!(backend.call_count(Capability::Complete), 1);
    }

    #[test]
    fn shelf_falls_to_floor_only_option() {
        let (t, _) = run(&golden::shelf());
        assert_eq!(nouns(&t), [("vase", false), ("floor", true)]);
        assert!(t.selection_prompt.contains("options: {floor}. The lamp was"));
        assert_eq!((t.placement.x, t.placement.y, t.placement.heat), (3, 3, 1.0));
    }

    #[test]
    fn empty_room_retries_then_falls_back() {
        let (t, backend) = run(&golden::empty_room());
        assert!(t.boxes.is_empty() && t.captions.is_empty());
        assert_eq!(nouns(&t), [("floor", true)]);
        assert_eq!(t.selection_responses, ["I'm not sure.", "I'm not sure."]);
        assert!(t.selection_fallback);
        assert_eq!(t.selected_noun, "floor");
        assert_eq!((t.placement.x, t.placement.y, t.placement.heat), (0, 0, 0.0));
        assert_eq!(backend.call_count(Capability::Complete), 2);
        assert_eq!(backend.call_count(Capability::Caption), 0);
    }

    #[test]
    fn dining_dedups_and_breaks_ties() {
        let (t, backend) = run(&golden::dining());
        assert_eq!(
            nouns(&t),
            [("cup", true), ("table", true), ("cups", false), ("floor", true)]
        );
        assert_eq!(t.candidates[1].sources, [0, 1]);
        assert_eq!(backend.call_count(Capability::AnswerYesNo), 4);
        assert_eq!(t.selected_noun, "table");
        assert_eq!((t.placement.x, t.placement.y), (3, 0));
    }

    #[test]
    fn stage_latencies_cover_the_run() {
        let scene = golden::dining();
        let backend = Arc::new(FixtureBackend::new(scene.fixtures.clone()).with_delay(Duration::from_millis(3)));
        let t = place(&Backends::uniform(backend), &scene.image, scene.object, &scene.options()).unwrap();
        let keys: Vec<&str> = t.stage_latencies.keys().map(String::as_str).collect();
        assert_eq!(keys, ["caption", "filter", "ground", "nouns", "regions", "segment", "select"]);
        let sum: f64 = t.stage_latencies.values().sum();
        assert!((sum - t.total_seconds).abs() <= 1e-9 + t.total_seconds * 1e-6, "{sum} vs {}", t.total_seconds);
        assert!(t.stage_latencies["ground"] >= 0.003);
    }

    #[test]
    fn concurrency_does_not_change_the_trace() {
        let scene = golden::dining();
        let backends = Backends::uniform(Arc::new(FixtureBackend::new(scene.fixtures.clone())));
        let serial = PipelineOptions { max_concurrency: 1, ..scene.options() };
        let a = place(&backends, &scene.image, scene.object, &serial).unwrap();
        let b = place(&backends, &scene.image, scene.object, &scene.options()).unwrap();
        assert_eq!(a.without_timings().to_json(), b.without_timings().to_json());
    }

    #[test]
    fn missing_fixture_reports_stage_and_noun() {
        let mut scene = golden::kitchen();
        let full = scene.fixtures.clone();
        scene.fixtures = FixtureStore::new();
        let req = Request::image(&scene.image);
        let digest = crate::backends::request_digest(Capability::Segment, &req);
        scene.fixtures.insert(Capability::Segment, req, full.get(&digest).unwrap().clone());
        let backends = Backends::uniform(Arc::new(FixtureBackend::new(scene.fixtures.clone())));
        let err = place(&backends, &scene.image, scene.object, &scene.options()).unwrap_err();
        assert_eq!(err.stage, Stage::Caption);
        assert!(err.is_backend());
        assert_eq!(err.trace.boxes.len(), 2);
        assert!(err.to_string().starts_with("caption stage failed"));
    }

    #[test]
    fn vqa_failure_names_the_noun() {
        let scene = golden::kitchen();
        struct NoCats(Arc<FixtureBackend>);
        impl crate::backends::RawBackend for NoCats {
            fn call(&self, c: Capability, r: &Request<'_>) -> Result<serde_json::Value, BackendError> {
                if c == Capability::AnswerYesNo && r.text.is_some_and(|t| t.contains(" cat ")) {
                    return Err(BackendError::Unavailable { capability: c, message: "down".into() });
                }
                self.0.call(c, r)
            }
        }
        let inner = Arc::new(FixtureBackend::new(scene.fixtures.clone()));
        let backends = Backends::uniform(Arc::new(NoCats(inner)));
        let err = place(&backends, &scene.image, scene.object, &scene.options()).unwrap_err();
        assert_eq!(err.stage, Stage::Filter);
        match err.failure {
            PipelineFailure::Backend { noun, .. } => assert_eq!(noun.as_deref(), Some("cat")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_rejected_is_an_error() {
        let scene = golden::shelf();
        let mut store = scene.fixtures.clone();
        store.insert(
            Capability::AnswerYesNo,
            Request::image_text(&scene.image, "Is there a floor in the image?"),
            crate::backends::wire::answer_response("no", None),
        );
        let backends = Backends::uniform(Arc::new(FixtureBackend::new(store)));
        let err = place(&backends, &scene.image, scene.object, &scene.options()).unwrap_err();
        assert!(matches!(err.failure, PipelineFailure::NoVerifiedNouns));
        assert_eq!(err.trace.candidates.len(), 2);
    }

    #[test]
    fn empty_object_is_rejected_before_any_call() {
        let scene = golden::kitchen();
        let backend = Arc::new(FixtureBackend::new(scene.fixtures.clone()));
        let err = place(&Backends::uniform(backend.clone()), &scene.image, " ", &scene.options()).unwrap_err();
        assert_eq!(err.stage, Stage::Input);
        assert!(backend.calls().is_empty());
    }

    #[test]
    fn fan_out_keeps_order_and_lowest_error() {
        let items: Vec<u32> = (0..20).collect();
        let out = fan_out(&items, 4, |&i| Ok::<_, ()>(i * 2)).unwrap();
        assert_eq!(out, items.iter().map(|i| i * 2).collect::<Vec<_>>());
        let err = fan_out(&items, 4, |&i| if i % 7 == 5 { Err(i) } else { Ok(i) }).unwrap_err();
        assert_eq!(err, (5, 5));
        assert!(fan_out(&[] as &[u32], 4, |&i| Ok::<_, ()>(i)).unwrap().is_empty());
    }

    #[test]
    fn fallback_prefers_floor_then_first() {
        struct Shrug;
        impl crate::backends::RawBackend for Shrug {
            fn call(&self, _: Capability, _: &Request<'_>) -> Result<serde_json::Value, BackendError> {
                Ok(crate::backends::wire::text_response("no idea"))
            }
        }
        let s = select_noun(&Shrug, "p", &["desk", "floor"], 2).unwrap();
        assert_eq!((s.noun.as_str(), s.responses.len(), s.fallback), ("floor", 3, true));
        let s = select_noun(&Shrug, "p", &["desk", "shelf"], 0).unwrap();
        assert_eq!(s.noun, "desk");
    }

    #[test]
    fn config_defaults_and_routing() {
        let c = PipelineConfig::parse("{}", Path::new("/x")).unwrap();
        assert_eq!(c.options, PipelineOptions::default());
        assert!(c.backends.values().all(|s| *s == BackendSpec::Http));
        let c = PipelineConfig::parse(
            r#"{"backends": {"default": "fixture:f.json", "complete": "http"}, "retries": 3}"#,
            Path::new("/x"),
        )
        .unwrap();
        assert_eq!(c.backends[&Capability::Complete], BackendSpec::Http);
        assert_eq!(c.backends[&Capability::Ground], BackendSpec::Fixture("f.json".into()));
        assert_eq!(c.options.retries, 3);
        assert!(PipelineConfig::parse(r#"{"backends": {"paint": "http"}}"#, Path::new(".")).is_err());
        assert!(PipelineConfig::parse(r#"{"min_aera": 3}"#, Path::new(".")).is_err());
    }

    #[test]
    fn missing_fixture_file_is_a_config_error() {
        let c = PipelineConfig::parse(r#"{"backends": {"default": "fixture:nope.json"}}"#, Path::new("/nonexistent"))
            .unwrap();
        assert!(matches!(c.build_backends(), Err(ConfigError::Fixture { .. })));
    }
}
