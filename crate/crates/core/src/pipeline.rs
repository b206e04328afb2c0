//! Pure steps of the placement pipeline that sit between model calls.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capability::{Heatmap, PosTaggedToken, RegionMask, YesNoAnswer};
use crate::scene::BoundingBox;

/// The noun appended to every candidate list before VQA filtering.
pub const FLOOR: &str = "floor";

/// Regions smaller than this many pixels are not captioned by default.
pub const DEFAULT_MIN_AREA: usize = 100;

const ARTICLES: [&str; 3] = ["the", "a", "an"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("noun must be non-empty")]
    EmptyNoun,
    #[error("object name must be non-empty")]
    EmptyObject,
    #[error("selection needs at least one candidate noun")]
    NoOptions,
    #[error("completion {response:?} names none of the candidate nouns")]
    SelectionMismatch { response: String },
    #[error("got {answers} VQA answers for {candidates} candidates")]
    AnswerCount { candidates: usize, answers: usize },
}

/// A noun surfaced by captioning (or injected), with its VQA outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NounCandidate {
    pub noun: String,
    /// Indices of the captions the noun came from.
    pub sources: Vec<usize>,
    pub verified: bool,
    pub injected: bool,
}

impl NounCandidate {
    pub fn new(noun: impl Into<String>) -> Self {
        Self {
            noun: noun.into(),
            sources: Vec::new(),
            verified: false,
            injected: false,
        }
    }

    fn floor() -> Self {
        Self {
            injected: true,
            ..Self::new(FLOOR)
        }
    }
}

/// Tight bounding box of every region with at least `min_area` pixels, in
/// input order.
pub fn regions_to_boxes(regions: &[RegionMask], min_area: usize) -> Vec<BoundingBox> {
    regions
        .iter()
        .filter(|r| r.area() >= min_area)
        .filter_map(tight_box)
        .collect()
}

fn tight_box(region: &RegionMask) -> Option<BoundingBox> {
    let (w, h) = (region.width(), region.height());
    let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
    for (i, &set) in region.as_slice().iter().enumerate() {
        if set {
            let (x, y) = ((i % w as usize) as u32, (i / w as usize) as u32);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x + 1);
            y1 = y1.max(y + 1);
        }
    }
    BoundingBox::new(x0, y0, x1, y1).ok()
}

/// Lowercased noun tokens, first occurrence only.
pub fn extract_nouns(tagged: &[PosTaggedToken]) -> Vec<String> {
    let mut nouns: Vec<String> = Vec::new();
    for token in tagged.iter().filter(|t| t.is_noun()) {
        let noun = token.token.to_lowercase();
        if !noun.is_empty() && !nouns.contains(&noun) {
            nouns.push(noun);
        }
    }
    nouns
}

/// Merges per-caption noun lists into candidates in first-appearance order.
pub fn collect_candidates(per_caption: &[Vec<String>]) -> Vec<NounCandidate> {
    let mut candidates: Vec<NounCandidate> = Vec::new();
    for (caption, nouns) in per_caption.iter().enumerate() {
        for noun in nouns {
            match candidates.iter_mut().find(|c| &c.noun == noun) {
                Some(c) => {
                    if c.sources.last() != Some(&caption) {
                        c.sources.push(caption);
                    }
                }
                None => candidates.push(NounCandidate {
                    sources: alloc::vec![caption],
                    ..NounCandidate::new(noun.clone())
                }),
            }
        }
    }
    candidates
}

/// Ensures a `floor` candidate exists and marks it as injected.
pub fn inject_floor(candidates: &mut Vec<NounCandidate>) {
    match candidates.iter_mut().find(|c| c.noun == FLOOR) {
        Some(c) => c.injected = true,
        None => candidates.push(NounCandidate::floor()),
    }
}

/// Collapses repeated nouns into one candidate, merging sources.
pub fn dedup_candidates(candidates: Vec<NounCandidate>) -> Vec<NounCandidate> {
    let mut out: Vec<NounCandidate> = Vec::with_capacity(candidates.len());
    for c in candidates {
        match out.iter_mut().find(|o| o.noun == c.noun) {
            Some(o) => {
                for s in c.sources {
                    if !o.sources.contains(&s) {
                        o.sources.push(s);
                    }
                }
                o.injected |= c.injected;
            }
            None => out.push(c),
        }
    }
    out
}

/// Keeps the candidates whose answer is yes and marks them verified.
///
/// `answers[i]` belongs to `candidates[i]`.
pub fn retain_verified(
    candidates: Vec<NounCandidate>,
    answers: &[YesNoAnswer],
) -> Result<Vec<NounCandidate>, StepError> {
    if candidates.len() != answers.len() {
        return Err(StepError::AnswerCount {
            candidates: candidates.len(),
            answers: answers.len(),
        });
    }
    Ok(candidates
        .into_iter()
        .zip(answers)
        .filter(|(_, a)| a.is_yes())
        .map(|(c, _)| NounCandidate { verified: true, ..c })
        .collect())
}

pub fn build_vqa_question(noun: &str) -> Result<String, StepError> {
    if noun.is_empty() {
        return Err(StepError::EmptyNoun);
    }
    Ok(format!("Is there a {noun} in the image?"))
}

pub fn build_selection_prompt<S: AsRef<str>>(nouns: &[S], object: &str) -> Result<String, StepError> {
    if nouns.is_empty() {
        return Err(StepError::NoOptions);
    }
    if object.is_empty() {
        return Err(StepError::EmptyObject);
    }
    let options = nouns.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(", ");
    Ok(format!(
        "Give a one word response to fill in the blank using only one of these options: {{{options}}}. The {object} was located on the ____."
    ))
}

/// Picks the first word of an LLM completion that names a candidate.
///
/// The completion is lowercased, punctuation is trimmed from each word and
/// articles are skipped.
pub fn parse_selection<S: AsRef<str>>(response: &str, nouns: &[S]) -> Result<String, StepError> {
    if nouns.is_empty() {
        return Err(StepError::NoOptions);
    }
    let lowered = response.to_lowercase();
    lowered
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty() && !ARTICLES.contains(w))
        .find(|w| nouns.iter().any(|n| n.as_ref() == *w))
        .map(ToString::to_string)
        .ok_or_else(|| StepError::SelectionMismatch {
            response: response.to_string(),
        })
}

/// Location and value of the heatmap maximum.
///
/// Ties go to the lowest row-major index.
pub fn brightest_pixel(heatmap: &Heatmap) -> (u32, u32, f64) {
    let mut best = 0;
    for (i, &v) in heatmap.values().iter().enumerate() {
        if v > heatmap.values()[best] {
            best = i;
        }
    }
    let w = heatmap.width() as usize;
    ((best % w) as u32, (best / w) as u32, heatmap.values()[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capability::Answer;
    use alloc::vec;
    use proptest::prelude::*;

    fn tags(pairs: &[(&str, &str)]) -> Vec<PosTaggedToken> {
        pairs.iter().map(|(t, g)| PosTaggedToken::new(*t, *g).unwrap()).collect()
    }

    fn yes() -> YesNoAnswer {
        YesNoAnswer::new(Answer::Yes, 0.9).unwrap()
    }

    fn no() -> YesNoAnswer {
        YesNoAnswer::new(Answer::No, 0.8).unwrap()
    }

    #[test]
    fn tight_boxes() {
        // (row, col) = (1,1), (1,2), (2,1) -> x in 1..3, y in 1..3
        let m = RegionMask::from_pixels(4, 4, [(1, 1), (2, 1), (1, 2)]).unwrap();
        assert_eq!(regions_to_boxes(core::slice::from_ref(&m), 1), vec![BoundingBox::new(1, 1, 3, 3).unwrap()]);
        assert!(regions_to_boxes(core::slice::from_ref(&m), 10).is_empty());

        let other = RegionMask::from_pixels(4, 4, [(0, 3), (3, 3)]).unwrap();
        assert_eq!(
            regions_to_boxes(&[other, m], 1),
            vec![BoundingBox::new(0, 3, 4, 4).unwrap(), BoundingBox::new(1, 1, 3, 3).unwrap()]
        );
        assert!(regions_to_boxes(&[], 1).is_empty());
    }

    #[test]
    fn noun_extraction() {
        let t = tags(&[("a", "DT"), ("plate", "NN"), ("on", "IN"), ("a", "DT"), ("table", "NN")]);
        assert_eq!(extract_nouns(&t), vec!["plate", "table"]);
        assert_eq!(extract_nouns(&tags(&[("the", "DT"), ("Cats", "NNS")])), vec!["cats"]);
        assert!(extract_nouns(&tags(&[("red", "JJ"), ("and", "CC"), ("blue", "JJ")])).is_empty());
        let dup = tags(&[("Plate", "NN"), ("plate", "NN"), ("cup", "NN")]);
        assert_eq!(extract_nouns(&dup), vec!["plate", "cup"]);
    }

    #[test]
    fn candidates_merge_sources() {
        let per = vec![
            vec!["plate".to_string(), "table".to_string()],
            vec!["cat".to_string()],
            vec!["table".to_string()],
        ];
        let mut c = collect_candidates(&per);
        assert_eq!(c.iter().map(|c| c.noun.as_str()).collect::<Vec<_>>(), ["plate", "table", "cat"]);
        assert_eq!(c[1].sources, vec![0, 2]);
        inject_floor(&mut c);
        assert_eq!(c.last().unwrap(), &NounCandidate { sources: vec![], verified: false, injected: true, noun: "floor".into() });

        let mut with_floor = collect_candidates(&[vec!["floor".to_string(), "rug".to_string()]]);
        inject_floor(&mut with_floor);
        assert_eq!(with_floor.len(), 2);
        assert!(with_floor[0].injected && with_floor[0].sources == vec![0]);
    }

    #[test]
    fn vqa_templates() {
        assert_eq!(build_vqa_question("plate").unwrap(), "Is there a plate in the image?");
        assert_eq!(build_vqa_question("floor").unwrap(), "Is there a floor in the image?");
        assert_eq!(build_vqa_question("cup").unwrap(), "Is there a cup in the image?");
        assert_eq!(build_vqa_question(""), Err(StepError::EmptyNoun));
    }

    #[test]
    fn selection_templates() {
        assert_eq!(
            build_selection_prompt(&["plate", "floor"], "cupcake").unwrap(),
            "Give a one word response to fill in the blank using only one of these options: {plate, floor}. The cupcake was located on the ____."
        );
        assert_eq!(
            build_selection_prompt(&["wall"], "painting").unwrap(),
            "Give a one word response to fill in the blank using only one of these options: {wall}. The painting was located on the ____."
        );
        assert_eq!(build_selection_prompt::<&str>(&[], "cup"), Err(StepError::NoOptions));
        assert_eq!(build_selection_prompt(&["wall"], ""), Err(StepError::EmptyObject));
    }

    #[test]
    fn selection_parsing() {
        let opts = ["plate", "floor"];
        assert_eq!(parse_selection("plate", &opts).unwrap(), "plate");
        assert_eq!(parse_selection("The floor.", &opts).unwrap(), "floor");
        assert_eq!(parse_selection("  PLATE!\n", &opts).unwrap(), "plate");
        assert_eq!(
            parse_selection("countertop", &opts),
            Err(StepError::SelectionMismatch { response: "countertop".into() })
        );
        assert_eq!(parse_selection("on the floor, not the plate", &opts).unwrap(), "floor");
    }

    #[test]
    fn filtering_keeps_yes() {
        let mut c = collect_candidates(&[vec!["plate".into(), "unicorn".into()]]);
        inject_floor(&mut c);
        let kept = retain_verified(c.clone(), &[yes(), no(), yes()]).unwrap();
        assert_eq!(kept.iter().map(|c| c.noun.as_str()).collect::<Vec<_>>(), ["plate", "floor"]);
        assert!(kept.iter().all(|c| c.verified));
        assert!(retain_verified(c.clone(), &[no(), no(), no()]).unwrap().is_empty());
        assert!(matches!(retain_verified(c, &[yes()]), Err(StepError::AnswerCount { .. })));
    }

    #[test]
    fn dedup_merges() {
        let a = NounCandidate { sources: vec![0], ..NounCandidate::new("cup") };
        let b = NounCandidate { sources: vec![2], ..NounCandidate::new("cup") };
        let d = dedup_candidates(vec![a, NounCandidate::new("mug"), b]);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].sources, vec![0, 2]);
    }

    #[test]
    fn argmax() {
        let h = Heatmap::new(2, 2, vec![0.1, 0.9, 0.3, 0.2]).unwrap();
        assert_eq!(brightest_pixel(&h), (1, 0, 0.9));
        let z = Heatmap::new(2, 2, vec![0.0; 4]).unwrap();
        assert_eq!(brightest_pixel(&z), (0, 0, 0.0));
        let one = Heatmap::new(1, 1, vec![1.0]).unwrap();
        assert_eq!(brightest_pixel(&one), (0, 0, 1.0));
        let tie = Heatmap::new(3, 2, vec![0.1, 0.5, 0.2, 0.5, 0.5, 0.0]).unwrap();
        assert_eq!(brightest_pixel(&tie), (1, 0, 0.5));
    }

    proptest! {
        #[test]
        fn argmax_invariant_under_monotone_maps(
            (w, h, vals) in (1u32..7, 1u32..7).prop_flat_map(|(w, h)| {
                (Just(w), Just(h), prop::collection::vec(
                    prop::sample::select(vec![0.0, 0.125, 0.25, 0.5, 0.75, 1.0]),
                    (w * h) as usize,
                ))
            }),
        ) {
            let base = Heatmap::new(w, h, vals.clone()).unwrap();
            let squashed = Heatmap::new(w, h, vals.iter().map(|v| v * v * 0.5 + 0.1).collect()).unwrap();
            let rooted = Heatmap::new(w, h, vals.iter().map(|v| libm::sqrt(*v)).collect()).unwrap();
            let (x, y, _) = brightest_pixel(&base);
            let (sx, sy, _) = brightest_pixel(&squashed);
            let (rx, ry, _) = brightest_pixel(&rooted);
            prop_assert_eq!((x, y), (sx, sy));
            prop_assert_eq!((x, y), (rx, ry));
        }

        #[test]
        fn selection_prompt_embeds_every_option(
            nouns in prop::collection::vec("[a-z]{1,10}", 1..6),
            object in "[a-z]{1,12}",
        ) {
            let p = build_selection_prompt(&nouns, &object).unwrap();
            let expected = format!(
                "Give a one word response to fill in the blank using only one of these options: {{{}}}. The {} was located on the ____.",
                nouns.join(", "),
                object
            );
            prop_assert_eq!(p, expected);
        }
    }
}
