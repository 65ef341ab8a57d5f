//! JSON request and response payloads for rating, explanation, suggestion
//! and what-if queries. The HTTP service, the batch CLI and the browser demo
//! all go through these functions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, RatingClass, SchemaEntry};
use crate::error::Error;
use crate::explain::{compute_explanation, AttributionMethod, TOP_NEGATIVE, TOP_POSITIVE};
use crate::ordinal::{label_from_probabilities, OrdinalModel, N_CLASSIFIERS};
use crate::suggest::{compute_suggestions, Suggestion};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApiError {
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("unknown feature \"{0}\"")]
    UnknownFeature(String),
    #[error("features do not match the schema: {0}")]
    SchemaMismatch(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    /// HTTP status code for the error.
    pub fn status(&self) -> u16 {
        match self {
            ApiError::Malformed(_) | ApiError::UnknownFeature(_) => 400,
            ApiError::SchemaMismatch(_) => 422,
            ApiError::Internal(_) => 500,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownFeature(name) => ApiError::UnknownFeature(name),
            Error::MissingFeature(_)
            | Error::InvalidFeatureValue { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonFinite(_) => ApiError::SchemaMismatch(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesRequest {
    pub features: BTreeMap<String, f64>,
    /// Return every nonzero attribution instead of the presentation cut.
    #[serde(default)]
    pub full: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub features: BTreeMap<String, f64>,
    #[serde(default)]
    pub flips: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePayload {
    pub rating: RatingClass,
    pub probabilities: [f64; N_CLASSIFIERS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionItem {
    pub feature: String,
    pub shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationPayload {
    pub rating: RatingClass,
    pub responsible_k: usize,
    pub base_value: f64,
    pub items: Vec<AttributionItem>,
    pub probability: f64,
    pub method: AttributionMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionPayload {
    pub current_rating: RatingClass,
    pub items: Vec<Suggestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfPayload {
    pub before: RatePayload,
    pub after: RatePayload,
    pub delta_per_classifier: [f64; N_CLASSIFIERS],
}

pub fn features_from_map(model: &OrdinalModel, map: &BTreeMap<String, f64>) -> Result<Vec<f64>, ApiError> {
    Ok(model.schema.vector_from_map(map.iter().map(|(k, &v)| (k.as_str(), v)))?)
}

pub fn schema(model: &OrdinalModel) -> Vec<SchemaEntry> {
    model.schema.entries()
}

pub fn rate(model: &OrdinalModel, x: &[f64]) -> Result<RatePayload, ApiError> {
    let probabilities = model.probabilities(x)?;
    Ok(RatePayload { rating: label_from_probabilities(&probabilities, &model.thresholds), probabilities })
}

pub fn explain(model: &OrdinalModel, x: &[f64], full: bool) -> Result<ExplanationPayload, ApiError> {
    let rating = rate(model, x)?.rating;
    let e = compute_explanation(model, x, rating)?;
    let (pos, neg) = if full { (usize::MAX, usize::MAX) } else { (TOP_POSITIVE, TOP_NEGATIVE) };
    let items = e
        .presented(pos, neg)
        .into_iter()
        .map(|a| AttributionItem { feature: a.feature.clone(), shap: a.shap })
        .collect();
    Ok(ExplanationPayload {
        rating,
        responsible_k: e.responsible.get(),
        base_value: e.base_value,
        items,
        probability: e.probability,
        method: e.method,
    })
}

pub fn suggest(model: &OrdinalModel, x: &[f64]) -> Result<SuggestionPayload, ApiError> {
    let rating = rate(model, x)?.rating;
    Ok(SuggestionPayload { current_rating: rating, items: compute_suggestions(model, x, rating)? })
}

/// Toggles each named binary feature and reports both ratings.
pub fn whatif(model: &OrdinalModel, x: &[f64], flips: &[String]) -> Result<WhatIfPayload, ApiError> {
    let before = rate(model, x)?;
    let mut flipped = x.to_vec();
    let mut seen = BTreeSet::new();
    for name in flips {
        let id = model.schema.id_of(name).ok_or_else(|| ApiError::UnknownFeature(name.clone()))?;
        if model.schema.features()[id].kind != FeatureKind::Binary {
            return Err(ApiError::SchemaMismatch(format!("cannot flip numeric feature \"{name}\"")));
        }
        if !seen.insert(id) {
            return Err(ApiError::SchemaMismatch(format!("feature \"{name}\" flipped twice")));
        }
        flipped[id] = 1.0 - flipped[id];
    }
    let after = rate(model, &flipped)?;
    let delta_per_classifier = std::array::from_fn(|k| after.probabilities[k] - before.probabilities[k]);
    Ok(WhatIfPayload { before, after, delta_per_classifier })
}

fn parse<T: for<'de> Deserialize<'de>>(body: &str) -> Result<T, ApiError> {
    serde_json::from_str(body).map_err(|e| ApiError::Malformed(e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, ApiError> {
    serde_json::to_string(value).map_err(|e| ApiError::Internal(e.to_string()))
}

/// POST /v1/rate body → response body.
pub fn rate_json(model: &OrdinalModel, body: &str) -> Result<String, ApiError> {
    let req: FeaturesRequest = parse(body)?;
    to_json(&rate(model, &features_from_map(model, &req.features)?)?)
}

pub fn explain_json(model: &OrdinalModel, body: &str) -> Result<String, ApiError> {
    let req: FeaturesRequest = parse(body)?;
    to_json(&explain(model, &features_from_map(model, &req.features)?, req.full)?)
}

pub fn suggest_json(model: &OrdinalModel, body: &str) -> Result<String, ApiError> {
    let req: FeaturesRequest = parse(body)?;
    to_json(&suggest(model, &features_from_map(model, &req.features)?)?)
}

pub fn whatif_json(model: &OrdinalModel, body: &str) -> Result<String, ApiError> {
    let req: WhatIfRequest = parse(body)?;
    to_json(&whatif(model, &features_from_map(model, &req.features)?, &req.flips)?)
}

pub fn schema_json(model: &OrdinalModel) -> Result<String, ApiError> {
    to_json(&schema(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSchema;
    use crate::learners::{BinaryScorer, BoostedClassifier, TreeNode};
    use crate::ordinal::BaseKind;

    fn model() -> OrdinalModel {
        let schema = FeatureSchema::new(vec![
            SchemaEntry { name: "pool".into(), kind: FeatureKind::Binary, monotone: 1, suggestible: true },
            SchemaEntry { name: "size".into(), kind: FeatureKind::Numeric, monotone: 1, suggestible: false },
        ])
        .unwrap();
        let stump = TreeNode::Split {
            feature: 0,
            threshold: 0.5,
            cover: 4.0,
            left: Box::new(TreeNode::Leaf { value: -1.0, cover: 3.0 }),
            right: Box::new(TreeNode::Leaf { value: 1.0, cover: 1.0 }),
        };
        let c =
            |b: f64, t: Vec<TreeNode>| BinaryScorer::Gbt(BoostedClassifier { base_margin: b, trees: t, n_features: 2 });
        OrdinalModel::new(
            BaseKind::Gbt,
            vec![c(3.0, vec![]), c(0.0, vec![stump]), c(-3.0, vec![]), c(-3.0, vec![])],
            [0.5; 4],
            schema,
        )
        .unwrap()
    }

    #[test]
    fn error_statuses() {
        let m = model();
        assert_eq!(rate_json(&m, "{").unwrap_err().status(), 400);
        let unknown = rate_json(&m, r#"{"features":{"spa":1,"size":3}}"#).unwrap_err();
        assert_eq!(unknown, ApiError::UnknownFeature("spa".into()));
        assert_eq!(unknown.status(), 400);
        assert_eq!(rate_json(&m, r#"{"features":{"pool":1}}"#).unwrap_err().status(), 422);
        assert_eq!(rate_json(&m, r#"{"features":{"pool":2,"size":1}}"#).unwrap_err().status(), 422);
        let numeric_flip = whatif_json(&m, r#"{"features":{"size":1},"flips":["size"]}"#).unwrap_err();
        assert_eq!(numeric_flip.status(), 422);
    }

    #[test]
    fn whatif_identity_and_flip() {
        let m = model();
        let x = features_from_map(&m, &BTreeMap::from([("size".to_string(), 30.0)])).unwrap();
        let same = whatif(&m, &x, &[]).unwrap();
        assert_eq!(same.before, same.after);
        assert_eq!(same.delta_per_classifier, [0.0; 4]);
        let up = whatif(&m, &x, &["pool".to_string()]).unwrap();
        assert_eq!(up.before.rating.get(), 2);
        assert_eq!(up.after.rating.get(), 3);
        assert!(up.delta_per_classifier[1] > 0.0);
        assert!(whatif(&m, &x, &["pool".into(), "pool".into()]).is_err());
    }

    #[test]
    fn payload_shapes() {
        let m = model();
        let body = r#"{"features":{"pool":0,"size":10}}"#;
        let rate: serde_json::Value = serde_json::from_str(&rate_json(&m, body).unwrap()).unwrap();
        assert_eq!(rate["rating"], 2);
        assert_eq!(rate["probabilities"].as_array().unwrap().len(), 4);
        let ex: serde_json::Value = serde_json::from_str(&explain_json(&m, body).unwrap()).unwrap();
        assert_eq!(ex["responsible_k"], 1);
        let sg: serde_json::Value = serde_json::from_str(&suggest_json(&m, body).unwrap()).unwrap();
        assert_eq!(sg["current_rating"], 2);
        assert_eq!(sg["items"][0]["feature"], "pool");
        assert!(sg["items"][0]["increment"].as_f64().unwrap() > 0.0);
        let schema: serde_json::Value = serde_json::from_str(&schema_json(&m).unwrap()).unwrap();
        assert_eq!(schema[1]["kind"], "numeric");
    }
}
