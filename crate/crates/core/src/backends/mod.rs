//! Clients for the model services the pipeline consumes: captioner, VQA,
//! zero-shot verifier, language model and image generator.
//!
//! Every service speaks JSON over HTTP POST. [`Backends`] owns one
//! [`Transport`] per service and turns raw replies into validated types;
//! nothing unvalidated leaves this module. [`mock`] provides a fixture-driven
//! implementation of all routes, both in-process and as a loopback server.

mod http;
pub mod mock;
pub mod wire;

pub use http::{BackendEndpoint, HttpTransport, ServiceEndpoints};

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::prompt::PromptTemplate;
use wire::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Caption,
    Vqa,
    ZeroShot,
    Elaborate,
    Fuse,
    Generate,
}

impl Route {
    pub const ALL: [Route; 6] = [
        Route::Caption,
        Route::Vqa,
        Route::ZeroShot,
        Route::Elaborate,
        Route::Fuse,
        Route::Generate,
    ];

    pub fn path(self) -> &'static str {
        match self {
            Route::Caption => "/caption",
            Route::Vqa => "/vqa",
            Route::ZeroShot => "/zeroshot",
            Route::Elaborate => "/llm/elaborate",
            Route::Fuse => "/llm/fuse",
            Route::Generate => "/generate",
        }
    }

    /// Short name used as a key in fixture files.
    pub fn key(self) -> &'static str {
        match self {
            Route::Caption => "caption",
            Route::Vqa => "vqa",
            Route::ZeroShot => "zeroshot",
            Route::Elaborate => "elaborate",
            Route::Fuse => "fuse",
            Route::Generate => "generate",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("{route}: transport failure after {attempts} attempt(s): {message}")]
    Transport {
        route: &'static str,
        attempts: u32,
        message: String,
    },
    #[error("{route}: timed out after {attempts} attempt(s)")]
    Timeout { route: &'static str, attempts: u32 },
    #[error("{route}: service error {status} {code}: {message}")]
    Service {
        route: &'static str,
        status: u16,
        code: String,
        message: String,
    },
    #[error("{route}: malformed reply: {message}")]
    Schema { route: &'static str, message: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Moves one JSON request to a service and returns the JSON reply.
pub trait Transport: Send + Sync {
    fn post(&self, route: Route, body: &Value) -> Result<Value, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionResult {
    pub caption: String,
    pub conditioned: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectLocation {
    pub name: String,
    /// Free-form spatial phrase such as "left" or "center".
    pub position: String,
}

impl ObjectLocation {
    pub fn new(name: impl Into<String>, position: impl Into<String>) -> Self {
        ObjectLocation {
            name: name.into(),
            position: position.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotScores {
    pub labels: Vec<String>,
    pub scores: Vec<f64>,
}

impl ZeroShotScores {
    /// Smallest score, `None` when there are no labels.
    pub fn min_score(&self) -> Option<f64> {
        self.scores.iter().copied().reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub seed: u64,
    pub total_steps: usize,
    pub gate_step: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_condition_ref: Option<String>,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.trim().is_empty() {
            return Err(BackendError::Precondition("generation prompt is empty".into()));
        }
        if self.gate_step > self.total_steps {
            return Err(BackendError::Precondition(format!(
                "gate_step {} exceeds total_steps {}",
                self.gate_step, self.total_steps
            )));
        }
        Ok(())
    }
}

/// Fused prompt text plus the object names it failed to mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusedText {
    pub text: String,
    pub missing_objects: Vec<String>,
}

/// Object names that do not occur (case-insensitively) in `text`.
pub fn missing_object_names(text: &str, objects: &[ObjectLocation]) -> Vec<String> {
    let haystack = text.to_lowercase();
    objects
        .iter()
        .filter(|o| !haystack.contains(&o.name.to_lowercase()))
        .map(|o| o.name.clone())
        .collect()
}

fn decode<T: DeserializeOwned>(route: Route, value: Value) -> Result<T, BackendError> {
    serde_json::from_value(value).map_err(|e| BackendError::Schema {
        route: route.path(),
        message: e.to_string(),
    })
}

fn schema(route: Route, message: impl Into<String>) -> BackendError {
    BackendError::Schema {
        route: route.path(),
        message: message.into(),
    }
}

fn encode<T: Serialize>(body: &T) -> Value {
    serde_json::to_value(body).expect("request bodies serialize")
}

/// Typed access to the five services.
#[derive(Clone)]
pub struct Backends {
    pub captioner: Arc<dyn Transport>,
    pub vqa: Arc<dyn Transport>,
    pub verifier: Arc<dyn Transport>,
    pub llm: Arc<dyn Transport>,
    pub generator: Arc<dyn Transport>,
}

impl std::fmt::Debug for Backends {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backends").finish_non_exhaustive()
    }
}

impl Backends {
    /// All five services behind one transport.
    pub fn uniform(transport: Arc<dyn Transport>) -> Self {
        Backends {
            captioner: transport.clone(),
            vqa: transport.clone(),
            verifier: transport.clone(),
            llm: transport.clone(),
            generator: transport,
        }
    }

    pub fn http(endpoints: &ServiceEndpoints) -> Result<Self, BackendError> {
        Ok(Backends {
            captioner: Arc::new(HttpTransport::new(endpoints.captioner.clone())?),
            vqa: Arc::new(HttpTransport::new(endpoints.vqa.clone())?),
            verifier: Arc::new(HttpTransport::new(endpoints.verifier.clone())?),
            llm: Arc::new(HttpTransport::new(endpoints.llm.clone())?),
            generator: Arc::new(HttpTransport::new(endpoints.generator.clone())?),
        })
    }

    pub fn caption(&self, image_ref: &str, condition: Option<&str>) -> Result<CaptionResult, BackendError> {
        let route = Route::Caption;
        let body = encode(&CaptionRequest {
            image_ref: image_ref.to_string(),
            condition: condition.map(str::to_string),
        });
        let reply: CaptionResponse = decode(route, self.captioner.post(route, &body)?)?;
        if reply.caption.trim().is_empty() {
            return Err(schema(route, "empty caption"));
        }
        Ok(CaptionResult {
            caption: reply.caption,
            conditioned: condition.is_some(),
        })
    }

    pub fn locate_objects(&self, image_ref: &str) -> Result<Vec<ObjectLocation>, BackendError> {
        let route = Route::Vqa;
        let body = encode(&VqaRequest {
            image_ref: image_ref.to_string(),
        });
        let reply: VqaResponse = decode(route, self.vqa.post(route, &body)?)?;
        if let Some(bad) = reply.objects.iter().position(|o| o.name.trim().is_empty()) {
            return Err(schema(route, format!("object {bad} has an empty name")));
        }
        Ok(reply.objects)
    }

    pub fn zero_shot_verify(
        &self,
        image_ref: &str,
        labels: &[String],
        caption: Option<&str>,
    ) -> Result<ZeroShotScores, BackendError> {
        let route = Route::ZeroShot;
        if labels.is_empty() {
            return Err(BackendError::Precondition(
                "zero-shot verification needs at least one label".into(),
            ));
        }
        let body = encode(&ZeroShotRequest {
            image_ref: image_ref.to_string(),
            labels: labels.to_vec(),
            caption: caption.map(str::to_string),
        });
        let reply: ZeroShotResponse = decode(route, self.verifier.post(route, &body)?)?;
        if reply.scores.len() != labels.len() {
            return Err(schema(
                route,
                format!("{} scores for {} labels", reply.scores.len(), labels.len()),
            ));
        }
        if let Some(bad) = reply.scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(schema(route, format!("score {bad} outside [0, 1]")));
        }
        Ok(ZeroShotScores {
            labels: labels.to_vec(),
            scores: reply.scores,
        })
    }

    pub fn elaborate_style(&self, style_keyword: &str, template: &PromptTemplate) -> Result<String, BackendError> {
        let route = Route::Elaborate;
        if style_keyword.trim().is_empty() {
            return Err(BackendError::Precondition("style keyword is empty".into()));
        }
        if !template.has_exemplars() {
            return Err(BackendError::Precondition(
                "elaboration template has no exemplars".into(),
            ));
        }
        let body = encode(&ElaborateRequest {
            style: style_keyword.to_string(),
            exemplars: template.exemplars.clone(),
        });
        let reply: TextResponse = decode(route, self.llm.post(route, &body)?)?;
        if reply.text.trim().is_empty() {
            return Err(schema(route, "empty style description"));
        }
        Ok(reply.text)
    }

    /// Fuses content and style into one prompt. Object names the reply
    /// leaves out are reported, not rejected.
    pub fn fuse_prompt(
        &self,
        caption: &str,
        objects: &[ObjectLocation],
        style_description: &str,
        template: &PromptTemplate,
    ) -> Result<FusedText, BackendError> {
        let route = Route::Fuse;
        if caption.trim().is_empty() {
            return Err(BackendError::Precondition("caption is empty".into()));
        }
        let body = encode(&FuseRequest {
            caption: caption.to_string(),
            objects: objects.to_vec(),
            style_text: style_description.to_string(),
            exemplars: template.exemplars.clone(),
        });
        let reply: TextResponse = decode(route, self.llm.post(route, &body)?)?;
        if reply.text.trim().is_empty() {
            return Err(schema(route, "empty fused prompt"));
        }
        let missing_objects = missing_object_names(&reply.text, objects);
        Ok(FusedText {
            text: reply.text,
            missing_objects,
        })
    }

    pub fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError> {
        let route = Route::Generate;
        req.validate()?;
        let reply: GenerateResponse = decode(route, self.generator.post(route, &encode(req))?)?;
        if reply.image_ref.trim().is_empty() {
            return Err(schema(route, "empty image_ref"));
        }
        Ok(reply.image_ref)
    }
}
