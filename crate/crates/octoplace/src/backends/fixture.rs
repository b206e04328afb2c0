use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde_json::Value;

use super::{request_digest, BackendError, Capability, RawBackend, Request};

/// Canned responses keyed by request digest.
///
/// Serialized as a JSON object mapping digest to wire-format response.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureStore {
    entries: BTreeMap<String, Value>,
}

impl FixtureStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        let entries = serde_json::from_slice(&bytes)?;
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    /// Pretty JSON with sorted keys.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("fixture values are plain JSON")
    }

    pub fn insert(&mut self, capability: Capability, request: Request<'_>, response: Value) -> &mut Self {
        self.entries.insert(request_digest(capability, &request), response);
        self
    }

    pub fn get(&self, digest: &str) -> Option<&Value> {
        self.entries.get(digest)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn merge(&mut self, other: FixtureStore) {
        self.entries.extend(other.entries);
    }
}

/// Serves responses from a [`FixtureStore`] and logs every call.
#[derive(Debug, Default)]
pub struct FixtureBackend {
    store: FixtureStore,
    delay: Option<Duration>,
    calls: Mutex<Vec<(Capability, String)>>,
}

impl FixtureBackend {
    pub fn new(store: FixtureStore) -> Self {
        Self {
            store,
            ..Self::default()
        }
    }

    /// Sleeps this long on every call, to stand in for model latency.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn calls(&self) -> Vec<(Capability, String)> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self, capability: Capability) -> usize {
        self.calls.lock().unwrap().iter().filter(|(c, _)| *c == capability).count()
    }
}

impl RawBackend for FixtureBackend {
    fn call(&self, capability: Capability, request: &Request<'_>) -> Result<Value, BackendError> {
        let digest = request_digest(capability, request);
        self.calls.lock().unwrap().push((capability, digest.clone()));
        if let Some(d) = self.delay {
            std::thread::sleep(d);
        }
        self.store
            .get(&digest)
            .cloned()
            .ok_or(BackendError::FixtureMiss { capability, digest })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{wire, Captioner, Completer, Grounder, PosTagger, Segmenter, YesNoAnswerer};
    use octoplace_core::capability::{Answer, RegionMask, YesNoAnswer};
    use octoplace_core::scene::SceneImage;

    fn img(seed: u8, w: u32, h: u32) -> SceneImage {
        let px = (0..w * h * 3).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
        SceneImage::new(format!("i{seed}"), w, h, px).unwrap()
    }

    fn backend() -> (FixtureBackend, SceneImage, SceneImage, SceneImage) {
        let t1 = img(1, 4, 4);
        let p1 = img(2, 2, 2);
        let p2 = img(3, 2, 2);
        let blank = SceneImage::filled("blank", 1, 1, [0, 0, 0]).unwrap();
        let masks: Vec<RegionMask> = (0..3)
            .map(|k| RegionMask::from_pixels(4, 4, [(k, k), (k + 1, k)]).unwrap())
            .collect();
        let mut heat = vec![0.1; 16];
        heat[4 + 2] = 0.8; // (x=2, y=1)
        let mut s = FixtureStore::new();
        s.insert(Capability::Segment, Request::image(&t1), wire::segment_response(&masks))
            .insert(Capability::Segment, Request::image(&blank), wire::segment_response(&[]))
            .insert(Capability::Caption, Request::image(&p1), wire::text_response("a plate on a table"))
            .insert(Capability::Caption, Request::image(&p2), wire::text_response("a cat"))
            .insert(
                Capability::TagPos,
                Request::text("a plate on a table"),
                wire::tokens_response(&[("a", "DT"), ("plate", "NN"), ("on", "IN"), ("a", "DT"), ("table", "NN")]),
            )
            .insert(Capability::TagPos, Request::text("cat"), wire::tokens_response(&[("cat", "NN")]))
            .insert(
                Capability::AnswerYesNo,
                Request::image_text(&t1, "Is there a plate in the image?"),
                wire::answer_response("yes", Some(0.9)),
            )
            .insert(Capability::Complete, Request::text("H1"), wire::text_response("plate"))
            .insert(Capability::Complete, Request::text("H2"), wire::text_response("The floor."))
            .insert(Capability::Ground, Request::image_text(&t1, "plate"), wire::heatmap_response(4, 4, &heat));
        (FixtureBackend::new(s), t1, p1, p2)
    }

    #[test]
    fn read_back() {
        let (b, t1, p1, p2) = backend();
        assert_eq!(b.segment(&t1).unwrap().len(), 3);
        let blank = SceneImage::filled("blank", 1, 1, [0, 0, 0]).unwrap();
        assert!(b.segment(&blank).unwrap().is_empty());
        assert_eq!(b.caption(&p1).unwrap(), "a plate on a table");
        assert_eq!(b.caption(&p2).unwrap(), "a cat");
        let tags = b.tag_pos("a plate on a table").unwrap();
        assert_eq!(
            tags.iter().map(|t| (t.token.as_str(), t.tag.as_str())).collect::<Vec<_>>(),
            [("a", "DT"), ("plate", "NN"), ("on", "IN"), ("a", "DT"), ("table", "NN")]
        );
        assert_eq!(b.tag_pos("cat").unwrap()[0].tag, "NN");
        assert_eq!(
            b.answer_yes_no(&t1, "Is there a plate in the image?").unwrap(),
            YesNoAnswer { answer: Answer::Yes, confidence: 0.9 }
        );
        assert_eq!(b.complete("H1").unwrap(), "plate");
        assert_eq!(b.complete("H2").unwrap(), "The floor.");
        let heat = b.ground(&t1, "plate").unwrap();
        assert_eq!(octoplace_core::pipeline::brightest_pixel(&heat), (2, 1, 1.0));
    }

    #[test]
    fn miss_names_digest() {
        let (b, ..) = backend();
        let missing = img(9, 2, 2);
        let err = b.caption(&missing).unwrap_err();
        let digest = request_digest(Capability::Caption, &Request::image(&missing));
        assert_eq!(err, BackendError::FixtureMiss { capability: Capability::Caption, digest: digest.clone() });
        assert!(err.to_string().contains(&digest));
    }

    #[test]
    fn empty_text_is_contract_violation() {
        let (b, t1, ..) = backend();
        assert!(matches!(b.tag_pos(""), Err(BackendError::Contract { capability: Capability::TagPos, .. })));
        assert!(matches!(b.complete(""), Err(BackendError::Contract { .. })));
        assert!(matches!(b.ground(&t1, ""), Err(BackendError::Contract { .. })));
        assert!(matches!(b.answer_yes_no(&t1, ""), Err(BackendError::Contract { .. })));
        // rejected before reaching the transport
        assert!(b.calls().is_empty());
    }

    #[test]
    fn repeated_calls_are_identical_and_logged() {
        let (b, t1, ..) = backend();
        let first = b.call(Capability::Segment, &Request::image(&t1)).unwrap();
        let second = b.call(Capability::Segment, &Request::image(&t1)).unwrap();
        assert_eq!(serde_json::to_vec(&first).unwrap(), serde_json::to_vec(&second).unwrap());
        assert_eq!(b.call_count(Capability::Segment), 2);
    }

    #[test]
    fn invalid_fixture_responses_rejected() {
        let t = img(5, 2, 2);
        let mut s = FixtureStore::new();
        s.insert(Capability::Caption, Request::image(&t), wire::text_response("  "))
            .insert(Capability::AnswerYesNo, Request::image_text(&t, "q"), wire::answer_response("maybe", None))
            .insert(Capability::Ground, Request::image_text(&t, "x"), serde_json::json!({"heatmap": {"w": 2, "h": 2, "values": [0.1]}}));
        let b = FixtureBackend::new(s);
        assert!(matches!(b.caption(&t), Err(BackendError::Protocol { .. })));
        assert!(matches!(b.answer_yes_no(&t, "q"), Err(BackendError::Protocol { .. })));
        assert!(matches!(b.ground(&t, "x"), Err(BackendError::Protocol { .. })));
    }

    #[test]
    fn store_file_round_trip() {
        let (b, ..) = backend();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("f.json");
        b.store.save(&path).unwrap();
        assert_eq!(FixtureStore::load(&path).unwrap(), b.store);
    }
}
