//! Line-oriented batch outputs and the evaluation input reader.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vr_rating::api::{self, ApiError, ExplanationPayload, SuggestionPayload};
use vr_rating::{Dataset, Error, EvalReport, OrdinalModel, RatingClass};

/// One line of `preds.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub id: String,
    pub rating: RatingClass,
    pub probs: [f64; 4],
}

/// One line of `explanations.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationLine {
    pub id: String,
    #[serde(flatten)]
    pub explanation: ExplanationPayload,
}

/// One line of `suggestions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionLine {
    pub id: String,
    #[serde(flatten)]
    pub suggestions: SuggestionPayload,
}

fn per_record<T, F>(ds: &Dataset, f: F) -> Result<Vec<T>, ApiError>
where
    T: Send,
    F: Fn(&str, &[f64]) -> Result<T, ApiError> + Sync,
{
    ds.records.par_iter().map(|r| f(&r.id, &r.features)).collect()
}

pub fn predict(model: &OrdinalModel, ds: &Dataset) -> Result<Vec<PredictionLine>, ApiError> {
    per_record(ds, |id, x| {
        let r = api::rate(model, x)?;
        Ok(PredictionLine { id: id.to_string(), rating: r.rating, probs: r.probabilities })
    })
}

pub fn explain(model: &OrdinalModel, ds: &Dataset, full: bool) -> Result<Vec<ExplanationLine>, ApiError> {
    per_record(ds, |id, x| Ok(ExplanationLine { id: id.to_string(), explanation: api::explain(model, x, full)? }))
}

pub fn suggest(model: &OrdinalModel, ds: &Dataset) -> Result<Vec<SuggestionLine>, ApiError> {
    per_record(ds, |id, x| Ok(SuggestionLine { id: id.to_string(), suggestions: api::suggest(model, x)? }))
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, lines: &[T]) -> Result<(), Error> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in lines {
        serde_json::to_writer(&mut out, line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>, Error> {
    let mut items = Vec::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| Error::Parse { line: n + 1, message: e.to_string() })?);
    }
    Ok(items)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionLine>, Error> {
    read_jsonl(path)
}

/// Any line carrying an id and either "label" or "stars"; covers
/// `labels.jsonl`, `truth.jsonl` and `properties.jsonl`.
#[derive(Debug, Deserialize)]
struct TruthLine {
    id: String,
    #[serde(default)]
    label: Option<RatingClass>,
    #[serde(default)]
    stars: Option<RatingClass>,
}

/// Ids with a known class. Lines without one (unrated properties) are skipped.
pub fn read_truth(path: impl AsRef<Path>) -> Result<HashMap<String, RatingClass>, Error> {
    let mut truth = HashMap::new();
    for line in read_jsonl::<TruthLine>(path)? {
        if let Some(class) = line.label.or(line.stars) {
            if truth.insert(line.id.clone(), class).is_some() {
                return Err(Error::DuplicateId(line.id));
            }
        }
    }
    Ok(truth)
}

/// Scores the predictions that have a truth class.
pub fn evaluate(preds: &[PredictionLine], truth: &HashMap<String, RatingClass>) -> Result<EvalReport, Error> {
    let (p, t): (Vec<_>, Vec<_>) = preds.iter().filter_map(|l| truth.get(&l.id).map(|&c| (l.rating, c))).unzip();
    if p.len() < preds.len() {
        log::info!("{} of {} predictions have no truth class and are skipped", preds.len() - p.len(), preds.len());
    }
    EvalReport::compute(&p, &t)
}
