//! Improvement suggestions: absent facilities ranked by how much adding each
//! one raises the probability of reaching the next class.

use serde::{Deserialize, Serialize};

use crate::data::{FeatureSchema, RatingClass};
use crate::error::{Error, Result};
use crate::ordinal::{consistent_label, responsible_classifier, OrdinalModel, ResponsibleIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    #[serde(skip)]
    pub feature_id: usize,
    pub feature: String,
    pub increment: f64,
}

/// Classifier scoring suggestions: r(ŷ + 1) below class 5, r(5) at class 5.
pub fn target_classifier(rating: RatingClass) -> ResponsibleIndex {
    if rating.get() < 5 {
        responsible_classifier(RatingClass::from_index(rating.index() + 1))
    } else {
        responsible_classifier(rating)
    }
}

/// Copy of `x` with a suggestible, absent feature switched on.
pub fn apply_suggestion(schema: &FeatureSchema, x: &[f64], feature: usize) -> Result<Vec<f64>> {
    schema.validate_vector(x)?;
    let spec =
        schema.get(feature).ok_or_else(|| Error::Precondition(format!("feature {feature} is not in the schema")))?;
    if !spec.suggestible {
        return Err(Error::Precondition(format!("feature \"{}\" is not suggestible", spec.name)));
    }
    if x[feature] != 0.0 {
        return Err(Error::Precondition(format!("feature \"{}\" is already present", spec.name)));
    }
    let mut flipped = x.to_vec();
    flipped[feature] = 1.0;
    Ok(flipped)
}

/// Positive probability increments for every eligible flip, largest first,
/// ties by feature id.
pub fn compute_suggestions(model: &OrdinalModel, x: &[f64], rating: RatingClass) -> Result<Vec<Suggestion>> {
    let predicted = consistent_label(model, x)?;
    if predicted != rating {
        return Err(Error::Precondition(format!("rating {rating} does not match the model's rating {predicted}")));
    }
    let classifier = model.classifier(target_classifier(rating));
    let current = classifier.probability(x);
    let mut suggestions = Vec::new();
    for spec in model.schema.features().iter().filter(|f| f.suggestible && x[f.id] == 0.0) {
        let flipped = apply_suggestion(&model.schema, x, spec.id)?;
        let increment = classifier.probability(&flipped) - current;
        if increment > 0.0 {
            suggestions.push(Suggestion { feature_id: spec.id, feature: spec.name.clone(), increment });
        }
    }
    suggestions.sort_by(|a, b| b.increment.total_cmp(&a.increment).then(a.feature_id.cmp(&b.feature_id)));
    Ok(suggestions)
}
