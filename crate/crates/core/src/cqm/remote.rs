//! Adapter for external samplers speaking a small JSON wire format.
//!
//! Request:
//!
//! ```json
//! {"vars": 3,
//!  "objective": {"linear": [[0, -10.0]], "quadratic": [[0, 1, 2.0]], "offset": 0.0},
//!  "constraints": [{"linear": [[0, 5.0]], "quadratic": [], "sense": "<=", "bound": 7.0, "label": "cap"}]}
//! ```
//!
//! Response: `{"samples": [{"assignment": [0, 1, 1], "info": {}}]}`.
//! Returned energies and feasibility are always recomputed locally.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    initial_penalties, lower_to_qubo, Constraint, CqmError, CqmModel, QuadForm, Sample, SampleInfo,
    SampleSet, Sense,
};

/// Environment variable holding the bearer token for the remote endpoint.
pub const TOKEN_ENV: &str = "BITTP_REMOTE_TOKEN";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemoteError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error(transparent)]
    Model(#[from] CqmError),
}

impl RemoteError {
    /// Every failure leaves no remote state behind, so a retry is safe for the
    /// transport-level errors.
    pub fn is_retryable(&self) -> bool {
        matches!(self, RemoteError::Transport(_) | RemoteError::Timeout(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireForm {
    pub linear: Vec<(usize, f64)>,
    pub quadratic: Vec<(usize, usize, f64)>,
    pub offset: f64,
}

impl From<&QuadForm> for WireForm {
    fn from(q: &QuadForm) -> Self {
        WireForm {
            linear: q.linear().collect(),
            quadratic: q.quadratic().collect(),
            offset: q.offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireConstraint {
    pub linear: Vec<(usize, f64)>,
    pub quadratic: Vec<(usize, usize, f64)>,
    pub sense: Sense,
    pub bound: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireModel {
    pub vars: usize,
    pub objective: WireForm,
    pub constraints: Vec<WireConstraint>,
}

impl WireModel {
    pub fn from_model(model: &CqmModel) -> Self {
        WireModel {
            vars: model.num_vars(),
            objective: WireForm::from(&model.objective),
            constraints: model
                .constraints()
                .iter()
                .map(|c: &Constraint| WireConstraint {
                    linear: c.expr.linear().collect(),
                    quadratic: c.expr.quadratic().collect(),
                    sense: c.sense,
                    // constant terms move to the right-hand side
                    bound: c.bound - c.expr.offset,
                    label: c.label.clone(),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<CqmModel, CqmError> {
        let form = |lin: &[(usize, f64)], quad: &[(usize, usize, f64)], offset: f64| {
            let mut q = QuadForm::constant(offset);
            for &(i, c) in lin {
                q.add_linear(i, c);
            }
            for &(i, j, c) in quad {
                q.add_quadratic(i, j, c);
            }
            q
        };
        let o = &self.objective;
        let mut m = CqmModel::with_objective(self.vars, form(&o.linear, &o.quadratic, o.offset))?;
        for c in &self.constraints {
            m.add_constraint(Constraint::new(
                form(&c.linear, &c.quadratic, 0.0),
                c.sense,
                c.bound,
                c.label.clone(),
            ))?;
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireSample {
    pub assignment: Vec<u8>,
    #[serde(default)]
    pub info: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub samples: Vec<WireSample>,
}

/// Sends a request body and returns the raw response body.
pub trait Transport {
    fn submit(&self, body: &str) -> Result<String, RemoteError>;
}

impl<F> Transport for F
where
    F: Fn(&str) -> Result<String, RemoteError>,
{
    fn submit(&self, body: &str) -> Result<String, RemoteError> {
        self(body)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout_secs: u64,
    /// Penalty multiplier used when recomputing energies locally.
    pub lambda_init_multiplier: f64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: String::new(),
            timeout_secs: 300,
            lambda_init_multiplier: 2.0,
        }
    }
}

pub fn parse_response(model: &CqmModel, body: &str, multiplier: f64) -> Result<SampleSet, RemoteError> {
    let resp: WireResponse =
        serde_json::from_str(body).map_err(|e| RemoteError::MalformedResponse(e.to_string()))?;
    let penalties = initial_penalties(model, multiplier);
    let lowered = lower_to_qubo(model, &penalties)?;
    let mut samples = Vec::with_capacity(resp.samples.len());
    for (k, s) in resp.samples.iter().enumerate() {
        if s.assignment.len() != model.num_vars() {
            return Err(RemoteError::MalformedResponse(format!(
                "sample {k} has {} entries for {} variables",
                s.assignment.len(),
                model.num_vars()
            )));
        }
        if let Some(bad) = s.assignment.iter().find(|&&v| v > 1) {
            return Err(RemoteError::MalformedResponse(format!("sample {k} has non-binary value {bad}")));
        }
        let assignment: Vec<bool> = s.assignment.iter().map(|&v| v == 1).collect();
        samples.push(Sample {
            energy: lowered.model_energy(&assignment),
            feasible: model.is_feasible(&assignment),
            assignment,
        });
    }
    Ok(SampleSet::new(
        samples,
        SampleInfo {
            penalties: vec![penalties],
            slack_vars: 0,
            source: "remote".into(),
        },
    ))
}

/// Serializes `model`, submits it, and converts the reply.
pub fn remote_sample(
    model: &CqmModel,
    transport: &dyn Transport,
    config: &RemoteConfig,
) -> Result<SampleSet, RemoteError> {
    let body = serde_json::to_string(&WireModel::from_model(model))
        .map_err(|e| RemoteError::Transport(e.to_string()))?;
    let reply = transport.submit(&body)?;
    parse_response(model, &reply, config.lambda_init_multiplier)
}

/// Blocking HTTP POST transport. Sends `Authorization: Bearer $BITTP_REMOTE_TOKEN`
/// when the variable is set.
#[cfg(feature = "http")]
pub struct HttpTransport {
    endpoint: String,
    timeout: Duration,
    token: Option<String>,
}

#[cfg(feature = "http")]
impl HttpTransport {
    pub fn new(config: &RemoteConfig) -> Self {
        HttpTransport {
            endpoint: config.endpoint.clone(),
            timeout: Duration::from_secs(config.timeout_secs),
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
        }
    }
}

#[cfg(feature = "http")]
impl Transport for HttpTransport {
    fn submit(&self, body: &str) -> Result<String, RemoteError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut req = agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let map = |e: ureq::Error| match e {
            ureq::Error::Timeout(_) => RemoteError::Timeout(self.timeout),
            other => RemoteError::Transport(other.to_string()),
        };
        let mut resp = req.send(body).map_err(map)?;
        resp.body_mut().read_to_string().map_err(map)
    }
}
