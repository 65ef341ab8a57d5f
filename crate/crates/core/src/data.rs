//! Feature schema, property records and the JSON-lines property format.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of rating classes.
pub const N_CLASSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Binary,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpec {
    pub id: usize,
    pub name: String,
    pub kind: FeatureKind,
    /// Presence (or a larger value) may never lower any classifier margin.
    pub monotone: bool,
    /// Eligible for improvement suggestions; implies binary and monotone.
    pub suggestible: bool,
}

impl FeatureSpec {
    pub fn is_binary(&self) -> bool {
        self.kind == FeatureKind::Binary
    }
}

/// One entry of `schema.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaEntry {
    pub name: String,
    pub kind: FeatureKind,
    pub monotone: u8,
    pub suggestible: bool,
}

/// Ordered feature catalog. Feature ids are positions in the vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SchemaEntry>", into = "Vec<SchemaEntry>")]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
    index: BTreeMap<String, usize>,
}

impl FeatureSchema {
    pub fn new(entries: Vec<SchemaEntry>) -> Result<Self> {
        let mut features = Vec::with_capacity(entries.len());
        let mut index = BTreeMap::new();
        for (id, e) in entries.into_iter().enumerate() {
            if e.name.is_empty() {
                return Err(Error::InvalidSchema(format!("feature {id} has an empty name")));
            }
            let monotone = match e.monotone {
                0 => false,
                1 => true,
                m => {
                    return Err(Error::InvalidSchema(format!(
                        "feature \"{}\": monotone must be 0 or 1, got {m}",
                        e.name
                    )))
                }
            };
            if e.suggestible && !(e.kind == FeatureKind::Binary && monotone) {
                return Err(Error::InvalidSchema(format!(
                    "feature \"{}\" is suggestible but not a monotone binary feature",
                    e.name
                )));
            }
            if index.insert(e.name.clone(), id).is_some() {
                return Err(Error::InvalidSchema(format!("duplicate feature name \"{}\"", e.name)));
            }
            features.push(FeatureSpec { id, name: e.name, kind: e.kind, monotone, suggestible: e.suggestible });
        }
        Ok(Self { features, index })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn get(&self, id: usize) -> Option<&FeatureSpec> {
        self.features.get(id)
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.features[id].name
    }

    pub fn entries(&self) -> Vec<SchemaEntry> {
        self.features
            .iter()
            .map(|f| SchemaEntry {
                name: f.name.clone(),
                kind: f.kind,
                monotone: u8::from(f.monotone),
                suggestible: f.suggestible,
            })
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    /// Builds a dense vector from a sparse name → value map. Absent binary
    /// features are 0; absent numeric features are an error.
    pub fn vector_from_map<'a, I>(&self, values: I) -> Result<Vec<f64>>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut x = vec![0.0; self.len()];
        let mut seen = vec![false; self.len()];
        for (name, value) in values {
            let id = self.id_of(name).ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
            x[id] = value;
            seen[id] = true;
        }
        for f in &self.features {
            if !seen[f.id] && f.kind == FeatureKind::Numeric {
                return Err(Error::MissingFeature(f.name.clone()));
            }
        }
        self.validate_vector(&x)?;
        Ok(x)
    }

    /// Checks length, finiteness and binary domains of a feature vector.
    pub fn validate_vector(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: x.len() });
        }
        for (f, &v) in self.features.iter().zip(x) {
            if !v.is_finite() {
                return Err(Error::InvalidFeatureValue { name: f.name.clone(), value: v });
            }
            if f.kind == FeatureKind::Binary && v != 0.0 && v != 1.0 {
                return Err(Error::InvalidFeatureValue { name: f.name.clone(), value: v });
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<SchemaEntry>> for FeatureSchema {
    type Error = Error;

    fn try_from(entries: Vec<SchemaEntry>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<FeatureSchema> for Vec<SchemaEntry> {
    fn from(schema: FeatureSchema) -> Self {
        schema.entries()
    }
}

/// An integer star class in 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct RatingClass(u8);

impl RatingClass {
    pub const MIN: RatingClass = RatingClass(1);
    pub const MAX: RatingClass = RatingClass(5);

    pub fn new(value: i64) -> Result<Self> {
        if (1..=5).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(Error::ClassOutOfRange(value))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based position, for indexing per-class arrays.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < N_CLASSES, "class index {index} out of range");
        Self(index as u8 + 1)
    }

    pub fn all() -> impl Iterator<Item = RatingClass> {
        (1..=5).map(RatingClass)
    }
}

impl TryFrom<i64> for RatingClass {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<RatingClass> for u8 {
    fn from(c: RatingClass) -> u8 {
        c.0
    }
}

impl std::fmt::Display for RatingClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PropertyKind {
    #[serde(rename = "hotel")]
    Hotel,
    #[serde(rename = "vr")]
    VacationRental,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyRecord {
    pub id: String,
    pub kind: PropertyKind,
    pub official_stars: Option<RatingClass>,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub records: Vec<PropertyRecord>,
    pub labels: Option<Vec<RatingClass>>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, records: Vec<PropertyRecord>) -> Self {
        Self { schema, records, labels: None }
    }

    pub fn with_labels(schema: FeatureSchema, records: Vec<PropertyRecord>, labels: Vec<RatingClass>) -> Result<Self> {
        if labels.len() != records.len() {
            return Err(Error::Precondition(format!("{} labels for {} records", labels.len(), records.len())));
        }
        Ok(Self { schema, records, labels: Some(labels) })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Result<&[RatingClass]> {
        self.labels.as_deref().ok_or_else(|| Error::Precondition("dataset is not labeled".into()))
    }

    pub fn rows(&self) -> Vec<&[f64]> {
        self.records.iter().map(|r| r.features.as_slice()).collect()
    }

    /// Records carrying official stars, labeled with them.
    pub fn star_labeled(&self) -> Dataset {
        let (records, labels): (Vec<_>, Vec<_>) =
            self.records.iter().filter_map(|r| r.official_stars.map(|s| (r.clone(), s))).unzip();
        Dataset { schema: self.schema.clone(), records, labels: Some(labels) }
    }

    /// Keeps records whose id appears in `labels`, labeled accordingly.
    pub fn attach_labels(&self, labels: &HashMap<String, RatingClass>) -> Dataset {
        let (records, labels): (Vec<_>, Vec<_>) =
            self.records.iter().filter_map(|r| labels.get(&r.id).map(|&l| (r.clone(), l))).unzip();
        Dataset { schema: self.schema.clone(), records, labels: Some(labels) }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropertyLine {
    id: String,
    kind: PropertyKind,
    #[serde(default)]
    stars: Option<i64>,
    #[serde(default)]
    features: BTreeMap<String, f64>,
}

/// Reads `properties.jsonl`.
pub fn load_properties(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    read_properties(File::open(path)?, schema)
}

pub fn read_properties(reader: impl Read, schema: &FeatureSchema) -> Result<Dataset> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |e: Error| Error::Parse { line: line_no, message: e.to_string() };
        let parsed: PropertyLine = serde_json::from_str(&line).map_err(|e| at(e.into()))?;
        let official_stars = match parsed.stars {
            Some(s) if !(1..=5).contains(&s) => return Err(at(Error::StarsOutOfRange(s))),
            Some(s) => Some(RatingClass::new(s).map_err(at)?),
            None => None,
        };
        let features = schema.vector_from_map(parsed.features.iter().map(|(k, &v)| (k.as_str(), v))).map_err(at)?;
        if !ids.insert(parsed.id.clone()) {
            return Err(at(Error::DuplicateId(parsed.id)));
        }
        records.push(PropertyRecord { id: parsed.id, kind: parsed.kind, official_stars, features });
    }
    Ok(Dataset::new(schema.clone(), records))
}

/// Writes `properties.jsonl`, one object per record with every feature listed.
pub fn write_properties(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_properties_to(&mut out, ds)?;
    out.flush()?;
    Ok(())
}

pub fn write_properties_to(mut out: impl Write, ds: &Dataset) -> Result<()> {
    for r in &ds.records {
        let line = PropertyLine {
            id: r.id.clone(),
            kind: r.kind,
            stars: r.official_stars.map(|s| i64::from(s.get())),
            features: ds.schema.features().iter().map(|f| (f.name.clone(), r.features[f.id])).collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Stratified, seeded train/holdout partition of a labeled dataset.
pub fn split_dataset(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let labels = ds.labels()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for class in RatingClass::all() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let n_train = (members.len() as f64 * train_fraction).round() as usize;
        train.extend_from_slice(&members[..n_train]);
        holdout.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    holdout.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&holdout)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_feature_schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            SchemaEntry { name: "balcony".into(), kind: FeatureKind::Binary, monotone: 1, suggestible: true },
            SchemaEntry { name: "size_m2".into(), kind: FeatureKind::Numeric, monotone: 0, suggestible: false },
        ])
        .unwrap()
    }

    #[test]
    fn missing_numeric_feature_is_an_error() {
        let line = r#"{"id":"p1","kind":"hotel","stars":4,"features":{"balcony":1}}"#;
        let err = read_properties(line.as_bytes(), &two_feature_schema()).unwrap_err();
        assert!(err.to_string().contains("size_m2"), "{err}");
        assert!(err.to_string().starts_with("line 1"), "{err}");
    }

    #[test]
    fn complete_line_parses() {
        let line = r#"{"id":"p1","kind":"hotel","stars":4,"features":{"balcony":1,"size_m2":40.0}}"#;
        let ds = read_properties(line.as_bytes(), &two_feature_schema()).unwrap();
        assert_eq!(ds.records[0].features, vec![1.0, 40.0]);
        assert_eq!(ds.records[0].official_stars, Some(RatingClass::new(4).unwrap()));
    }

    #[test]
    fn missing_binary_defaults_to_zero() {
        let line = r#"{"id":"p1","kind":"vr","stars":null,"features":{"size_m2":12.5}}"#;
        let ds = read_properties(line.as_bytes(), &two_feature_schema()).unwrap();
        assert_eq!(ds.records[0].features, vec![0.0, 12.5]);
        assert_eq!(ds.records[0].official_stars, None);
    }

    #[test]
    fn stars_out_of_range() {
        let line = r#"{"id":"p1","kind":"hotel","stars":6,"features":{"size_m2":40.0}}"#;
        let err = read_properties(line.as_bytes(), &two_feature_schema()).unwrap_err();
        assert!(err.to_string().contains("stars out of range"), "{err}");
    }

    #[test]
    fn rejects_bad_lines() {
        let schema = two_feature_schema();
        let unknown = r#"{"id":"p1","kind":"hotel","features":{"pool":1,"size_m2":1}}"#;
        assert!(matches!(read_properties(unknown.as_bytes(), &schema), Err(Error::Parse { line: 1, .. })));
        let dup = "{\"id\":\"a\",\"kind\":\"vr\",\"features\":{\"size_m2\":1}}\n\
                   {\"id\":\"a\",\"kind\":\"vr\",\"features\":{\"size_m2\":2}}";
        let err = read_properties(dup.as_bytes(), &schema).unwrap_err();
        assert!(err.to_string().contains("line 2") && err.to_string().contains("duplicate"), "{err}");
        let garbage = "{\"id\":\"a\",\"kind\":\"vr\",\"features\":{\"size_m2\":1}}\nnot json";
        assert!(matches!(read_properties(garbage.as_bytes(), &schema), Err(Error::Parse { line: 2, .. })));
        let non_binary = r#"{"id":"p1","kind":"vr","features":{"balcony":0.5,"size_m2":1}}"#;
        assert!(read_properties(non_binary.as_bytes(), &schema).is_err());
    }

    #[test]
    fn schema_invariants() {
        let bad = FeatureSchema::new(vec![SchemaEntry {
            name: "size".into(),
            kind: FeatureKind::Numeric,
            monotone: 1,
            suggestible: true,
        }]);
        assert!(bad.is_err());
        let dup = FeatureSchema::new(vec![
            SchemaEntry { name: "a".into(), kind: FeatureKind::Binary, monotone: 0, suggestible: false },
            SchemaEntry { name: "a".into(), kind: FeatureKind::Binary, monotone: 0, suggestible: false },
        ]);
        assert!(dup.is_err());
        let json = serde_json::to_string(&two_feature_schema()).unwrap();
        assert_eq!(
            json,
            r#"[{"name":"balcony","kind":"binary","monotone":1,"suggestible":true},{"name":"size_m2","kind":"numeric","monotone":0,"suggestible":false}]"#
        );
        let back: FeatureSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(back, two_feature_schema());
    }

    fn labeled(n_per_class: [usize; 5]) -> Dataset {
        let schema = two_feature_schema();
        let mut records = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in n_per_class.iter().enumerate() {
            for i in 0..n {
                records.push(PropertyRecord {
                    id: format!("p{c}_{i}"),
                    kind: PropertyKind::VacationRental,
                    official_stars: None,
                    features: vec![0.0, i as f64],
                });
                labels.push(RatingClass::from_index(c));
            }
        }
        Dataset::with_labels(schema, records, labels).unwrap()
    }

    #[test]
    fn stratified_split() {
        let ds = labeled([5, 18, 45, 25, 7]);
        let (train, test) = split_dataset(&ds, 0.8, 3).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
        for class in RatingClass::all() {
            let total = ds.labels().unwrap().iter().filter(|&&l| l == class).count() as f64;
            let got = train.labels().unwrap().iter().filter(|&&l| l == class).count() as f64;
            assert!((got - 0.8 * total).abs() <= 1.0, "class {class}: {got} of {total}");
        }
        let ids: HashSet<_> = train.records.iter().map(|r| &r.id).collect();
        assert!(test.records.iter().all(|r| !ids.contains(&r.id)));

        let (again, _) = split_dataset(&ds, 0.8, 3).unwrap();
        assert_eq!(train, again);
        assert!(split_dataset(&ds, 1.0, 3).is_err());
        assert!(split_dataset(&ds, 0.0, 3).is_err());
    }
}
