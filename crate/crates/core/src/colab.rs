//! Collaborative labeling: hotel stars flow to vacation rentals through the
//! guests who stayed in both.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PropertyKind, RatingClass, N_CLASSES};
use crate::error::{Error, Result};

pub const DEFAULT_MIN_SUPPORT: f64 = 3.0;

/// Guest stays, one row per stay. Repeated rows are repeated stays.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StayTable {
    rows: Vec<(String, String)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StayRow {
    guest_id: String,
    property_id: String,
}

impl StayTable {
    pub fn push(&mut self, guest_id: impl Into<String>, property_id: impl Into<String>) {
        self.rows.push((guest_id.into(), property_id.into()));
    }

    pub fn rows(&self) -> &[(String, String)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(File::open(path)?)
    }

    pub fn read(reader: impl Read) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        let headers = csv.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["guest_id", "property_id"] {
            return Err(Error::Parse { line: 1, message: "expected header guest_id,property_id".into() });
        }
        let mut table = Self::default();
        for row in csv.deserialize() {
            let row: StayRow = row?;
            table.push(row.guest_id, row.property_id);
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut csv = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        for (g, p) in &self.rows {
            csv.serialize(StayRow { guest_id: g.clone(), property_id: p.clone() })?;
        }
        if self.rows.is_empty() {
            csv.write_record(["guest_id", "property_id"])?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Bipartite co-stay graph keyed by record indices of the source dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StayGraph {
    /// (vacation rental index, hotel index) → weight.
    edges: BTreeMap<(usize, usize), u64>,
}

impl StayGraph {
    pub fn weight(&self, vr: usize, hotel: usize) -> u64 {
        self.edges.get(&(vr, hotel)).copied().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), u64)> + '_ {
        self.edges.iter().map(|(&k, &w)| (k, w))
    }

    pub fn edges_of(&self, vr: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.edges.range((vr, 0)..(vr + 1, 0)).map(|(&(_, h), &w)| (h, w))
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Vacation rentals with at least one edge, ascending.
    pub fn connected_vrs(&self) -> BTreeSet<usize> {
        self.edges.keys().map(|&(v, _)| v).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarDistribution {
    pub weights: [f64; N_CLASSES],
}

impl StarDistribution {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

struct GuestStays {
    hotels: BTreeMap<usize, u64>,
    vrs: BTreeSet<usize>,
}

fn index_stays<'a>(stays: &'a StayTable, ds: &Dataset) -> Result<BTreeMap<&'a str, GuestStays>> {
    let index: HashMap<&str, usize> = ds.records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    let mut guests: BTreeMap<&str, GuestStays> = BTreeMap::new();
    for (guest, property) in stays.rows() {
        let &p = index.get(property.as_str()).ok_or_else(|| Error::UnknownProperty(property.clone()))?;
        let record = &ds.records[p];
        let entry = guests
            .entry(guest.as_str())
            .or_insert_with(|| GuestStays { hotels: BTreeMap::new(), vrs: BTreeSet::new() });
        match record.kind {
            PropertyKind::Hotel => {
                if record.official_stars.is_none() {
                    return Err(Error::HotelWithoutStars(record.id.clone()));
                }
                *entry.hotels.entry(p).or_default() += 1;
            }
            PropertyKind::VacationRental => {
                entry.vrs.insert(p);
            }
        }
    }
    Ok(guests)
}

/// weight(v, h) sums, over every guest who stayed in `v` at least once, that
/// guest's number of stays in `h`.
pub fn build_stay_graph(stays: &StayTable, ds: &Dataset) -> Result<StayGraph> {
    let guests = index_stays(stays, ds)?;
    let mut edges = BTreeMap::new();
    for g in guests.values() {
        for &v in &g.vrs {
            for (&h, &n) in &g.hotels {
                *edges.entry((v, h)).or_insert(0) += n;
            }
        }
    }
    Ok(StayGraph { edges })
}

/// Star histogram of a vacation rental's edges; `None` when it has none.
pub fn star_distribution(graph: &StayGraph, vr: usize, ds: &Dataset) -> Option<StarDistribution> {
    let mut weights = [0.0; N_CLASSES];
    let mut any = false;
    for (h, w) in graph.edges_of(vr) {
        let stars = ds.records[h].official_stars.expect("graph hotels carry stars");
        weights[stars.index()] += w as f64;
        any = true;
    }
    any.then_some(StarDistribution { weights })
}

/// Mode of the distribution, ties toward the lower class. `None` when the
/// total weight is below `min_support`.
pub fn collaborative_label(dist: &StarDistribution, min_support: f64) -> Option<RatingClass> {
    let total = dist.total();
    if total <= 0.0 || total < min_support {
        return None;
    }
    let mut best = 0;
    for (i, &w) in dist.weights.iter().enumerate() {
        if w > dist.weights[best] {
            best = i;
        }
    }
    Some(RatingClass::from_index(best))
}

#[derive(Debug, Clone)]
pub struct LabelingOutcome {
    /// Labeled vacation rentals only.
    pub labeled: Dataset,
    /// Total edge weight behind each label, aligned with `labeled.records`.
    pub support: Vec<f64>,
    /// Labeled vacation rentals over all vacation rentals.
    pub coverage: f64,
}

pub fn label_dataset(ds: &Dataset, stays: &StayTable, min_support: f64) -> Result<LabelingOutcome> {
    let graph = build_stay_graph(stays, ds)?;
    let mut records = Vec::new();
    let mut labels = Vec::new();
    let mut support = Vec::new();
    let mut n_vrs = 0usize;
    for (i, r) in ds.records.iter().enumerate() {
        if r.kind != PropertyKind::VacationRental {
            continue;
        }
        n_vrs += 1;
        let Some(dist) = star_distribution(&graph, i, ds) else { continue };
        if let Some(label) = collaborative_label(&dist, min_support) {
            records.push(r.clone());
            labels.push(label);
            support.push(dist.total());
        }
    }
    let coverage = if n_vrs == 0 { 0.0 } else { records.len() as f64 / n_vrs as f64 };
    log::info!("collaborative labels: {} of {} vacation rentals", records.len(), n_vrs);
    Ok(LabelingOutcome { labeled: Dataset::with_labels(ds.schema.clone(), records, labels)?, support, coverage })
}

/// Collaborative labels for hotels, each treated as if unrated: the
/// distribution counts co-stays in every *other* hotel. Used to validate the
/// labeling scheme against known stars. Returns (hotel index, label).
pub fn hotel_holdout_labels(
    stays: &StayTable,
    ds: &Dataset,
    min_support: f64,
) -> Result<Vec<(usize, Option<RatingClass>)>> {
    let guests = index_stays(stays, ds)?;
    let mut dists: BTreeMap<usize, [f64; N_CLASSES]> = BTreeMap::new();
    for g in guests.values() {
        for &h in g.hotels.keys() {
            let d = dists.entry(h).or_insert([0.0; N_CLASSES]);
            for (&other, &n) in &g.hotels {
                if other != h {
                    let stars = ds.records[other].official_stars.expect("checked while indexing");
                    d[stars.index()] += n as f64;
                }
            }
        }
    }
    Ok(ds
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.kind == PropertyKind::Hotel)
        .map(|(i, _)| {
            let label = dists.get(&i).and_then(|w| collaborative_label(&StarDistribution { weights: *w }, min_support));
            (i, label)
        })
        .collect())
}

/// One line of `labels.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelLine {
    pub id: String,
    pub label: RatingClass,
    pub support: f64,
}

pub fn write_labels(path: impl AsRef<Path>, outcome: &LabelingOutcome) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let labels = outcome.labeled.labels()?;
    for ((r, &label), &support) in outcome.labeled.records.iter().zip(labels).zip(&outcome.support) {
        serde_json::to_writer(&mut out, &LabelLine { id: r.id.clone(), label, support })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<LabelLine>> {
    let mut lines = Vec::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push(serde_json::from_str(&line).map_err(|e| Error::Parse { line: n + 1, message: e.to_string() })?);
    }
    Ok(lines)
}
