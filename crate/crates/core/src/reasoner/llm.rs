//! LLM-service backend: chat-completions client with structured prompts,
//! schema-validated JSON responses, and one repair retry.
//!
//! Endpoint configuration comes from the environment: `AFT_LLM_URL` (base
//! URL), `AFT_LLM_TOKEN` (bearer token), `AFT_LLM_MODEL` (model name).
//! Prompts are versioned text assets with three sections: problem and data,
//! required output, and formatting instructions.

use std::collections::VecDeque;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EntrySummary, ProxyChoice, ReasonerBackend, SlabSummary, TaskPlan, TaskRequest};
use crate::error::{Error, Result};

pub const ENV_URL: &str = "AFT_LLM_URL";
pub const ENV_TOKEN: &str = "AFT_LLM_TOKEN";
pub const ENV_MODEL: &str = "AFT_LLM_MODEL";

const PLAN_TASK_PROMPT: &str = include_str!("prompts/plan_task.txt");
const LABEL_REGIONS_PROMPT: &str = include_str!("prompts/label_regions.txt");
const CHOOSE_PROXY_PROMPT: &str = include_str!("prompts/choose_proxy.txt");

#[cfg(test)]
pub(super) const PLAN_TASK_PROMPT_FOR_TESTS: &str = PLAN_TASK_PROMPT;
#[cfg(test)]
pub(super) const LABEL_REGIONS_PROMPT_FOR_TESTS: &str = LABEL_REGIONS_PROMPT;
#[cfg(test)]
pub(super) const CHOOSE_PROXY_PROMPT_FOR_TESTS: &str = CHOOSE_PROXY_PROMPT;

#[derive(Debug, Serialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ChatResponseMessage {
    content: String,
}

/// Transport for chat-completion requests; the HTTP client in production,
/// a scripted mock in tests.
pub trait LlmTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String>;
}

/// POSTs to `<base url>` with a bearer token.
pub struct HttpTransport {
    pub url: String,
    pub token: Option<String>,
}

impl LlmTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        let mut req = ureq::post(&self.url);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let response = req
            .send_json(request)
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", self.url)))?;
        let body: ChatResponse = response
            .into_body()
            .read_json()
            .map_err(|e| Error::SchemaViolation(format!("malformed completion response: {e}")))?;
        body.choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or_else(|| Error::SchemaViolation("completion response has no choices".into()))
    }
}

/// Scripted transport for tests: pops canned responses and records prompts.
#[derive(Default)]
pub struct MockTransport {
    responses: Mutex<VecDeque<String>>,
    pub prompts: Mutex<Vec<String>>,
}

impl MockTransport {
    pub fn new(responses: Vec<&str>) -> Self {
        Self {
            responses: Mutex::new(responses.into_iter().map(String::from).collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.prompts.lock().unwrap().len()
    }
}

impl LlmTransport for MockTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String> {
        self.prompts
            .lock()
            .unwrap()
            .push(request.messages.last().map(|m| m.content.clone()).unwrap_or_default());
        self.responses
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| Error::BackendUnavailable("mock transport exhausted".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Text,
    TextArray,
    PairArray,
}

#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub name: &'static str,
    pub kind: FieldKind,
}

/// Required fields of a structured response.
#[derive(Debug, Clone)]
pub struct ResponseSchema {
    pub fields: Vec<FieldSpec>,
}

impl ResponseSchema {
    fn check(&self, value: &Value) -> std::result::Result<(), String> {
        let obj = value
            .as_object()
            .ok_or_else(|| "response is not a JSON object".to_string())?;
        for field in &self.fields {
            let v = obj
                .get(field.name)
                .ok_or_else(|| format!("missing field '{}'", field.name))?;
            let ok = match field.kind {
                FieldKind::Text => v.is_string(),
                FieldKind::TextArray => {
                    v.as_array().is_some_and(|a| a.iter().all(Value::is_string))
                }
                FieldKind::PairArray => v.as_array().is_some_and(|a| {
                    a.iter().all(|p| {
                        p.as_array()
                            .is_some_and(|q| q.len() == 2 && q.iter().all(Value::is_string))
                    })
                }),
            };
            if !ok {
                return Err(format!("field '{}' has the wrong shape", field.name));
            }
        }
        Ok(())
    }
}

/// Extract the first JSON object from a completion (tolerating code fences
/// and surrounding prose).
fn extract_json(text: &str) -> std::result::Result<Value, String> {
    let start = text.find('{').ok_or("no JSON object in response")?;
    let end = text.rfind('}').ok_or("no closing brace in response")?;
    if end < start {
        return Err("malformed braces in response".into());
    }
    serde_json::from_str(&text[start..=end]).map_err(|e| e.to_string())
}

/// Send a structured prompt and parse the reply against `schema`, retrying
/// once with a repair instruction on parse or schema failure.
pub fn llm_query(
    transport: &dyn LlmTransport,
    model: &str,
    prompt: &str,
    schema: &ResponseSchema,
) -> Result<Value> {
    let ask = |content: String| -> Result<String> {
        transport.complete(&ChatRequest {
            model: model.to_string(),
            messages: vec![ChatMessage {
                role: "user".to_string(),
                content,
            }],
        })
    };

    let first = ask(prompt.to_string())?;
    let first_err = match extract_json(&first).and_then(|v| schema.check(&v).map(|_| v)) {
        Ok(v) => return Ok(v),
        Err(e) => e,
    };

    log::warn!("LLM response failed validation ({first_err}); retrying once");
    let repair = format!(
        "{prompt}\n\nYour previous reply could not be used ({first_err}). \
         Reply again with ONLY the JSON object described above."
    );
    let second = ask(repair)?;
    extract_json(&second)
        .and_then(|v| schema.check(&v).map(|_| v))
        .map_err(Error::SchemaViolation)
}

/// Snap a free-form part name onto a vocabulary term by case-insensitive
/// exact match (after trimming); `None` when nothing matches.
fn snap_to_vocabulary<'a>(name: &str, vocabulary: &'a [String]) -> Option<&'a str> {
    let needle = name.trim();
    vocabulary
        .iter()
        .find(|v| v.eq_ignore_ascii_case(needle))
        .map(|v| v.as_str())
}

pub struct LlmBackend {
    transport: Box<dyn LlmTransport>,
    model: String,
}

impl LlmBackend {
    pub fn new(transport: Box<dyn LlmTransport>, model: impl Into<String>) -> Self {
        Self {
            transport,
            model: model.into(),
        }
    }

    /// Configure from `AFT_LLM_URL` / `AFT_LLM_TOKEN` / `AFT_LLM_MODEL`.
    pub fn from_env() -> Result<Self> {
        let url = std::env::var(ENV_URL)
            .map_err(|_| Error::BackendUnavailable(format!("{ENV_URL} not set")))?;
        let model = std::env::var(ENV_MODEL)
            .map_err(|_| Error::BackendUnavailable(format!("{ENV_MODEL} not set")))?;
        let token = std::env::var(ENV_TOKEN).ok();
        Ok(Self::new(Box::new(HttpTransport { url, token }), model))
    }

    fn query(&self, prompt: &str, schema: &ResponseSchema) -> Result<Value> {
        llm_query(self.transport.as_ref(), &self.model, prompt, schema)
    }
}

/// The generic part names accepted in addition to an object's own
/// vocabulary when snapping LLM output.
fn extended_vocabulary(base: &[String]) -> Vec<String> {
    let mut v: Vec<String> = base.to_vec();
    for extra in ["handle", "functional end", "middle"] {
        if !v.iter().any(|x| x.eq_ignore_ascii_case(extra)) {
            v.push(extra.to_string());
        }
    }
    v
}

impl ReasonerBackend for LlmBackend {
    fn name(&self) -> &'static str {
        "llm"
    }

    fn plan_task(&self, request: &TaskRequest) -> Result<TaskPlan> {
        let vocab = extended_vocabulary(&super::rule::part_vocabulary(&request.object_name));
        let prompt = PLAN_TASK_PROMPT
            .replace("{object}", &request.object_name)
            .replace("{task}", &request.task)
            .replace("{free_text}", request.free_text.as_deref().unwrap_or("(none)"))
            .replace("{vocabulary}", &vocab.join(", "));
        let schema = ResponseSchema {
            fields: vec![
                FieldSpec {
                    name: "grasp_part",
                    kind: FieldKind::Text,
                },
                FieldSpec {
                    name: "free_part",
                    kind: FieldKind::Text,
                },
                FieldSpec {
                    name: "rationale",
                    kind: FieldKind::Text,
                },
            ],
        };
        let v = self.query(&prompt, &schema)?;
        let grasp = snap_to_vocabulary(v["grasp_part"].as_str().unwrap(), &vocab)
            .ok_or_else(|| Error::SchemaViolation("grasp_part outside vocabulary".into()))?;
        let free = snap_to_vocabulary(v["free_part"].as_str().unwrap(), &vocab)
            .ok_or_else(|| Error::SchemaViolation("free_part outside vocabulary".into()))?;
        if grasp == free {
            return Err(Error::SchemaViolation("grasp_part equals free_part".into()));
        }
        Ok(TaskPlan {
            grasp_part: grasp.to_string(),
            free_part: free.to_string(),
            rationale: v["rationale"].as_str().unwrap().to_string(),
        })
    }

    fn label_regions(&self, request: &TaskRequest, slabs: &[SlabSummary]) -> Result<Vec<String>> {
        let vocab = extended_vocabulary(&super::rule::part_vocabulary(&request.object_name));
        let table: String = slabs
            .iter()
            .map(|s| {
                format!(
                    "- region {}: center ({:.3}, {:.3}, {:.3}), {:.1}% of points, axis span {:.2}-{:.2}\n",
                    s.index,
                    s.center[0],
                    s.center[1],
                    s.center[2],
                    100.0 * s.point_count as f64 / s.total_points.max(1) as f64,
                    s.span[0],
                    s.span[1],
                )
            })
            .collect();
        let prompt = LABEL_REGIONS_PROMPT
            .replace("{object}", &request.object_name)
            .replace("{task}", &request.task)
            .replace("{vocabulary}", &vocab.join(", "))
            .replace("{slab_table}", &table);
        let schema = ResponseSchema {
            fields: vec![FieldSpec {
                name: "labels",
                kind: FieldKind::TextArray,
            }],
        };
        let v = self.query(&prompt, &schema)?;
        let raw: Vec<String> = v["labels"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s.as_str().unwrap().to_string())
            .collect();
        if raw.len() != slabs.len() {
            return Err(Error::SchemaViolation(format!(
                "expected {} labels, got {}",
                slabs.len(),
                raw.len()
            )));
        }
        raw.iter()
            .map(|l| {
                snap_to_vocabulary(l, &vocab)
                    .map(String::from)
                    .ok_or_else(|| Error::SchemaViolation(format!("label '{l}' outside vocabulary")))
            })
            .collect()
    }

    fn choose_proxy(
        &self,
        request: &TaskRequest,
        labels: &[String],
        entries: &[EntrySummary],
    ) -> Result<ProxyChoice> {
        let table: String = entries
            .iter()
            .map(|e| {
                let parts: Vec<String> = e
                    .subparts
                    .iter()
                    .map(|(n, r)| format!("{n} ({r:?})"))
                    .collect();
                format!("- {} / {}: subparts {}\n", e.object_class, e.task, parts.join(", "))
            })
            .collect();
        let prompt = CHOOSE_PROXY_PROMPT
            .replace("{object}", &request.object_name)
            .replace("{task}", &request.task)
            .replace("{free_text}", request.free_text.as_deref().unwrap_or("(none)"))
            .replace("{labels}", &labels.join(", "))
            .replace("{db_table}", &table);
        let schema = ResponseSchema {
            fields: vec![
                FieldSpec {
                    name: "object_class",
                    kind: FieldKind::Text,
                },
                FieldSpec {
                    name: "task",
                    kind: FieldKind::Text,
                },
                FieldSpec {
                    name: "pairs",
                    kind: FieldKind::PairArray,
                },
            ],
        };
        let v = self.query(&prompt, &schema)?;
        let class = v["object_class"].as_str().unwrap();
        let task = v["task"].as_str().unwrap();
        let entry_index = entries
            .iter()
            .position(|e| {
                e.object_class.eq_ignore_ascii_case(class.trim())
                    && e.task.eq_ignore_ascii_case(task.trim())
            })
            .ok_or_else(|| {
                Error::SchemaViolation(format!("({class}, {task}) is not a database entry"))
            })?;
        let subpart_names: Vec<String> = entries[entry_index]
            .subparts
            .iter()
            .map(|(n, _)| n.clone())
            .collect();
        let label_vec = labels.to_vec();
        let mut pairs = Vec::new();
        for pair in v["pairs"].as_array().unwrap() {
            let q = pair[0].as_str().unwrap();
            let p = pair[1].as_str().unwrap();
            let q = snap_to_vocabulary(q, &label_vec)
                .ok_or_else(|| Error::SchemaViolation(format!("query part '{q}' unknown")))?;
            let p = snap_to_vocabulary(p, &subpart_names)
                .ok_or_else(|| Error::SchemaViolation(format!("proxy part '{p}' unknown")))?;
            pairs.push((q.to_string(), p.to_string()));
        }
        if pairs.is_empty() {
            return Err(Error::SchemaViolation("no part pairs returned".into()));
        }
        Ok(ProxyChoice { entry_index, pairs })
    }
}
