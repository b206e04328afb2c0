//! Model capabilities behind uniform interfaces.
//!
//! The pipeline talks to six capabilities: region segmentation, patch
//! captioning, part-of-speech tagging, yes/no visual question answering,
//! text completion and text grounding. Each has a typed trait. Any
//! [`RawBackend`] (a transport that exchanges wire-format JSON) implements
//! all six, with responses validated at this boundary so malformed data
//! never reaches the pipeline.
//!
//! Two transports ship: [`FixtureBackend`] (content-addressed canned
//! responses) and [`HttpBackend`].

mod digest;
mod fixture;
mod http;
pub mod wire;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use octoplace_core::capability::{Heatmap, PosTaggedToken, RegionMask, YesNoAnswer};
use octoplace_core::scene::SceneImage;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use digest::request_digest;
pub use fixture::{FixtureBackend, FixtureStore};
pub use http::{Endpoint, HttpBackend, DEFAULT_TIMEOUT_S};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Segment,
    Caption,
    TagPos,
    AnswerYesNo,
    Complete,
    Ground,
}

impl Capability {
    pub const ALL: [Capability; 6] = [
        Capability::Segment,
        Capability::Caption,
        Capability::TagPos,
        Capability::AnswerYesNo,
        Capability::Complete,
        Capability::Ground,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Capability::Segment => "segment",
            Capability::Caption => "caption",
            Capability::TagPos => "tag_pos",
            Capability::AnswerYesNo => "answer_yes_no",
            Capability::Complete => "complete",
            Capability::Ground => "ground",
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Capability {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Capability::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown capability {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("{capability} backend unavailable: {message}")]
    Unavailable { capability: Capability, message: String },
    #[error("{capability} backend sent an invalid response: {message}")]
    Protocol { capability: Capability, message: String },
    #[error("{capability} fixture has no entry for request digest {digest}")]
    FixtureMiss { capability: Capability, digest: String },
    #[error("{capability} request violates its contract: {message}")]
    Contract { capability: Capability, message: String },
}

impl BackendError {
    pub fn capability(&self) -> Capability {
        match self {
            BackendError::Unavailable { capability, .. }
            | BackendError::Protocol { capability, .. }
            | BackendError::FixtureMiss { capability, .. }
            | BackendError::Contract { capability, .. } => *capability,
        }
    }

    pub(crate) fn protocol(capability: Capability, message: impl ToString) -> Self {
        BackendError::Protocol {
            capability,
            message: message.to_string(),
        }
    }

    fn contract(capability: Capability, message: impl ToString) -> Self {
        BackendError::Contract {
            capability,
            message: message.to_string(),
        }
    }
}

/// Inputs of one capability call; which fields are set depends on the
/// capability.
#[derive(Debug, Clone, Copy, Default)]
pub struct Request<'a> {
    pub image: Option<&'a SceneImage>,
    pub text: Option<&'a str>,
}

impl<'a> Request<'a> {
    pub fn image(image: &'a SceneImage) -> Self {
        Self { image: Some(image), text: None }
    }

    pub fn text(text: &'a str) -> Self {
        Self { image: None, text: Some(text) }
    }

    pub fn image_text(image: &'a SceneImage, text: &'a str) -> Self {
        Self { image: Some(image), text: Some(text) }
    }
}

/// A transport that answers capability calls with wire-format JSON.
pub trait RawBackend: Send + Sync {
    fn call(&self, capability: Capability, request: &Request<'_>) -> Result<Value, BackendError>;
}

impl<T: RawBackend + ?Sized> RawBackend for Arc<T> {
    fn call(&self, capability: Capability, request: &Request<'_>) -> Result<Value, BackendError> {
        (**self).call(capability, request)
    }
}

pub trait Segmenter: Send + Sync {
    fn segment(&self, image: &SceneImage) -> Result<Vec<RegionMask>, BackendError>;
}

pub trait Captioner: Send + Sync {
    fn caption(&self, patch: &SceneImage) -> Result<String, BackendError>;
}

pub trait PosTagger: Send + Sync {
    fn tag_pos(&self, text: &str) -> Result<Vec<PosTaggedToken>, BackendError>;
}

pub trait YesNoAnswerer: Send + Sync {
    fn answer_yes_no(&self, image: &SceneImage, question: &str) -> Result<YesNoAnswer, BackendError>;
}

pub trait Completer: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

pub trait Grounder: Send + Sync {
    fn ground(&self, image: &SceneImage, text: &str) -> Result<Heatmap, BackendError>;
}

fn non_empty(capability: Capability, what: &str, text: &str) -> Result<(), BackendError> {
    if text.is_empty() {
        return Err(BackendError::contract(capability, format!("{what} must be non-empty")));
    }
    Ok(())
}

impl<T: RawBackend + ?Sized> Segmenter for T {
    fn segment(&self, image: &SceneImage) -> Result<Vec<RegionMask>, BackendError> {
        let cap = Capability::Segment;
        let value = self.call(cap, &Request::image(image))?;
        wire::parse_segment(&value, image.width(), image.height())
            .map_err(|e| BackendError::protocol(cap, e))
    }
}

impl<T: RawBackend + ?Sized> Captioner for T {
    fn caption(&self, patch: &SceneImage) -> Result<String, BackendError> {
        let cap = Capability::Caption;
        let value = self.call(cap, &Request::image(patch))?;
        let text = wire::parse_text(&value).map_err(|e| BackendError::protocol(cap, e))?;
        if text.trim().is_empty() {
            return Err(BackendError::protocol(cap, "empty caption"));
        }
        Ok(text)
    }
}

impl<T: RawBackend + ?Sized> PosTagger for T {
    fn tag_pos(&self, text: &str) -> Result<Vec<PosTaggedToken>, BackendError> {
        let cap = Capability::TagPos;
        non_empty(cap, "text", text)?;
        let value = self.call(cap, &Request::text(text))?;
        wire::parse_tokens(&value).map_err(|e| BackendError::protocol(cap, e))
    }
}

impl<T: RawBackend + ?Sized> YesNoAnswerer for T {
    fn answer_yes_no(&self, image: &SceneImage, question: &str) -> Result<YesNoAnswer, BackendError> {
        let cap = Capability::AnswerYesNo;
        non_empty(cap, "question", question)?;
        let value = self.call(cap, &Request::image_text(image, question))?;
        wire::parse_answer(&value).map_err(|e| BackendError::protocol(cap, e))
    }
}

impl<T: RawBackend + ?Sized> Completer for T {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let cap = Capability::Complete;
        non_empty(cap, "prompt", prompt)?;
        let value = self.call(cap, &Request::text(prompt))?;
        wire::parse_text(&value).map_err(|e| BackendError::protocol(cap, e))
    }
}

impl<T: RawBackend + ?Sized> Grounder for T {
    fn ground(&self, image: &SceneImage, text: &str) -> Result<Heatmap, BackendError> {
        let cap = Capability::Ground;
        non_empty(cap, "text", text)?;
        let value = self.call(cap, &Request::image_text(image, text))?;
        wire::parse_heatmap(&value, image.width(), image.height())
            .map_err(|e| BackendError::protocol(cap, e))
    }
}

/// One provider per capability.
#[derive(Clone)]
pub struct Backends {
    pub segmenter: Arc<dyn Segmenter>,
    pub captioner: Arc<dyn Captioner>,
    pub tagger: Arc<dyn PosTagger>,
    pub vqa: Arc<dyn YesNoAnswerer>,
    pub completer: Arc<dyn Completer>,
    pub grounder: Arc<dyn Grounder>,
}

impl Backends {
    /// Routes every capability to the same transport.
    pub fn uniform<B: RawBackend + 'static>(backend: Arc<B>) -> Self {
        Self {
            segmenter: backend.clone(),
            captioner: backend.clone(),
            tagger: backend.clone(),
            vqa: backend.clone(),
            completer: backend.clone(),
            grounder: backend,
        }
    }

    fn route(&mut self, capability: Capability, backend: Arc<dyn RawBackend>) {
        match capability {
            Capability::Segment => self.segmenter = Arc::new(backend),
            Capability::Caption => self.captioner = Arc::new(backend),
            Capability::TagPos => self.tagger = Arc::new(backend),
            Capability::AnswerYesNo => self.vqa = Arc::new(backend),
            Capability::Complete => self.completer = Arc::new(backend),
            Capability::Ground => self.grounder = Arc::new(backend),
        }
    }

    /// Builds the routing described by a pipeline config.
    ///
    /// Relative fixture paths resolve against `base_dir`; each fixture file
    /// is loaded once even when several capabilities share it.
    pub fn from_specs(
        specs: &BTreeMap<Capability, BackendSpec>,
        base_dir: &Path,
    ) -> Result<Self, crate::pipeline::ConfigError> {
        let mut fixtures: BTreeMap<std::path::PathBuf, Arc<dyn RawBackend>> = BTreeMap::new();
        let mut http: Option<Arc<dyn RawBackend>> = None;
        let mut backends = Backends::uniform(Arc::new(Unconfigured));
        for (&capability, spec) in specs {
            let backend = match spec {
                BackendSpec::Http => http
                    .get_or_insert_with(|| Arc::new(HttpBackend::from_env()))
                    .clone(),
                BackendSpec::Fixture(path) => {
                    let path = base_dir.join(path);
                    match fixtures.get(&path) {
                        Some(b) => b.clone(),
                        None => {
                            let store = FixtureStore::load(&path).map_err(|e| {
                                crate::pipeline::ConfigError::Fixture { path: path.clone(), message: e.to_string() }
                            })?;
                            let b: Arc<dyn RawBackend> = Arc::new(FixtureBackend::new(store));
                            fixtures.insert(path, b.clone());
                            b
                        }
                    }
                }
            };
            backends.route(capability, backend);
        }
        Ok(backends)
    }
}

struct Unconfigured;

impl RawBackend for Unconfigured {
    fn call(&self, capability: Capability, _: &Request<'_>) -> Result<Value, BackendError> {
        Err(BackendError::Unavailable {
            capability,
            message: "no backend configured".into(),
        })
    }
}

/// `http` or `fixture:<path>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Http,
    Fixture(std::path::PathBuf),
}

impl FromStr for BackendSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "http" {
            Ok(BackendSpec::Http)
        } else if let Some(path) = s.strip_prefix("fixture:") {
            if path.is_empty() {
                return Err("fixture backend needs a path".into());
            }
            Ok(BackendSpec::Fixture(path.into()))
        } else {
            Err(format!("backend must be \"http\" or \"fixture:<path>\", got {s:?}"))
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Http => f.write_str("http"),
            BackendSpec::Fixture(p) => write!(f, "fixture:{}", p.display()),
        }
    }
}

impl Serialize for BackendSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BackendSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_specs_parse() {
        assert_eq!("http".parse::<BackendSpec>().unwrap(), BackendSpec::Http);
        assert_eq!(
            "fixture:a/b.json".parse::<BackendSpec>().unwrap(),
            BackendSpec::Fixture("a/b.json".into())
        );
        assert!("fixture:".parse::<BackendSpec>().is_err());
        assert!("grpc".parse::<BackendSpec>().is_err());
    }

    #[test]
    fn capability_names() {
        for c in Capability::ALL {
            assert_eq!(c.as_str().parse::<Capability>().unwrap(), c);
        }
    }

    #[test]
    fn unconfigured_capability_errors() {
        let b = Backends::uniform(Arc::new(Unconfigured));
        let err = b.completer.complete("hi").unwrap_err();
        assert_eq!(err.capability(), Capability::Complete);
    }
}
