//! Seeded synthetic marketplace: hotels with official stars, unrated
//! vacation rentals, and guests whose stays cluster around a preferred class.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::colab::StayTable;
use crate::data::{Dataset, FeatureKind, FeatureSchema, PropertyKind, PropertyRecord, RatingClass, SchemaEntry};
use crate::error::{Error, Result};

/// Star distribution of officially rated hotels, classes 1 through 5. The
/// published shares add up to 99%, so they are rescaled to sum to one.
pub const HOTEL_CLASS_PRIOR: [f64; 5] = [5.0 / 99.0, 18.0 / 99.0, 45.0 / 99.0, 24.0 / 99.0, 7.0 / 99.0];

#[derive(Debug, Clone, PartialEq)]
pub struct AmenityLift {
    pub name: String,
    /// Probability of the amenity being present for each true class.
    pub lift: [f64; 5],
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_properties: usize,
    pub hotel_fraction: f64,
    pub class_prior: [f64; 5],
    pub amenity_lift: Vec<AmenityLift>,
    /// Chance that a present monotone amenity is dropped from a class 4-5 listing.
    pub underreport_rate: f64,
    pub n_guests: usize,
    pub stays_per_guest: usize,
    pub guest_noise: f64,
    pub seed: u64,
}

pub struct SynthOutput {
    pub dataset: Dataset,
    pub stays: StayTable,
    pub ground_truth: Vec<RatingClass>,
}

// (name, class from which the amenity is typical)
const TIERED_AMENITIES: [(&str, usize); 28] = [
    ("wifi", 2),
    ("heating", 2),
    ("towels", 2),
    ("bed_linen", 2),
    ("tv", 2),
    ("electric_kettle", 2),
    ("hair_dryer", 3),
    ("washing_machine", 3),
    ("microwave", 3),
    ("coffee_machine", 3),
    ("balcony", 3),
    ("garden", 3),
    ("desk", 3),
    ("parking", 3),
    ("dishwasher", 4),
    ("air_conditioning", 4),
    ("cable_channels", 4),
    ("terrace", 4),
    ("barbecue", 4),
    ("children_crib", 4),
    ("streaming_service", 4),
    ("swimming_pool", 5),
    ("spa", 5),
    ("sauna", 5),
    ("hot_tub", 5),
    ("fitness_center", 5),
    ("concierge", 5),
    ("wine_cellar", 5),
];

fn tiered_lift(tier: usize) -> [f64; 5] {
    let mut lift = [0.0; 5];
    for (i, p) in lift.iter_mut().enumerate() {
        let class = i + 1;
        *p = if class < tier { 0.10 + 0.05 * i as f64 } else { (0.45 + 0.10 * (class - tier) as f64).min(0.85) };
    }
    lift
}

impl SynthConfig {
    pub fn default_amenities() -> Vec<AmenityLift> {
        let mut amenities: Vec<AmenityLift> = TIERED_AMENITIES
            .iter()
            .map(|&(name, tier)| AmenityLift { name: name.into(), lift: tiered_lift(tier), monotone: true })
            .collect();
        amenities.push(AmenityLift {
            name: "shared_bathroom".into(),
            lift: [0.55, 0.35, 0.15, 0.05, 0.02],
            monotone: false,
        });
        amenities.push(AmenityLift {
            name: "no_wardrobe".into(),
            lift: [0.45, 0.30, 0.12, 0.06, 0.03],
            monotone: false,
        });
        amenities
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_properties == 0 {
            return bad("n_properties must be positive".into());
        }
        for (name, v) in [
            ("hotel_fraction", self.hotel_fraction),
            ("underreport_rate", self.underreport_rate),
            ("guest_noise", self.guest_noise),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.class_prior.iter().any(|&p| p.is_nan() || p < 0.0) {
            return bad("class_prior entries must be nonnegative".into());
        }
        let total: f64 = self.class_prior.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("class_prior sums to {total}, expected 1"));
        }
        for a in &self.amenity_lift {
            if a.lift.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return bad(format!("amenity {}: probabilities must lie in [0, 1]", a.name));
            }
            if a.monotone && a.lift.windows(2).any(|w| w[1] < w[0]) {
                return bad(format!("amenity {}: monotone lift must be nondecreasing", a.name));
            }
        }
        Ok(())
    }

    /// Schema of the generated data: every amenity, then `size_m2` and `rooms`.
    pub fn schema(&self) -> Result<FeatureSchema> {
        let mut entries: Vec<SchemaEntry> = self
            .amenity_lift
            .iter()
            .map(|a| SchemaEntry {
                name: a.name.clone(),
                kind: FeatureKind::Binary,
                monotone: u8::from(a.monotone),
                suggestible: a.monotone,
            })
            .collect();
        entries.push(SchemaEntry {
            name: "size_m2".into(),
            kind: FeatureKind::Numeric,
            monotone: 1,
            suggestible: false,
        });
        entries.push(SchemaEntry { name: "rooms".into(), kind: FeatureKind::Numeric, monotone: 0, suggestible: false });
        FeatureSchema::new(entries)
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_properties: 20_000,
            hotel_fraction: 0.5,
            class_prior: HOTEL_CLASS_PRIOR,
            amenity_lift: Self::default_amenities(),
            underreport_rate: 0.15,
            n_guests: 5_000,
            stays_per_guest: 8,
            guest_noise: 0.1,
            seed: 0,
        }
    }
}

// Budget hostels and large villas both have many rooms.
const ROOMS_BY_CLASS: [f64; 5] = [8.0, 3.0, 1.5, 3.0, 7.0];

/// Generates properties, stays and the latent true class of every property.
pub fn generate_synthetic(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let schema = config.schema()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let prior = WeightedIndex::new(config.class_prior).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let size_noise = Normal::new(0.0, 0.35).expect("valid normal");
    let room_noise = Normal::new(0.0, 0.8).expect("valid normal");

    let n_hotels = (config.n_properties as f64 * config.hotel_fraction).round() as usize;
    let mut records = Vec::with_capacity(config.n_properties);
    let mut truth = Vec::with_capacity(config.n_properties);
    let mut by_class: [Vec<usize>; 5] = Default::default();

    for i in 0..config.n_properties {
        let z = RatingClass::from_index(prior.sample(&mut rng));
        let mut features = Vec::with_capacity(schema.len());
        for a in &config.amenity_lift {
            let mut present = rng.random::<f64>() < a.lift[z.index()];
            if present && a.monotone && z.get() >= 4 && rng.random::<f64>() < config.underreport_rate {
                present = false;
            }
            features.push(if present { 1.0 } else { 0.0 });
        }
        let class_step = z.index() as f64;
        let log_size = (28.0f64).ln() + 0.28 * class_step + size_noise.sample(&mut rng);
        features.push((log_size.exp() * 10.0).round() / 10.0);
        let rooms = (ROOMS_BY_CLASS[z.index()] + room_noise.sample(&mut rng)).round().max(1.0);
        features.push(rooms);

        let (kind, id, official_stars) = if i < n_hotels {
            (PropertyKind::Hotel, format!("h{i:06}"), Some(z))
        } else {
            (PropertyKind::VacationRental, format!("v{i:06}"), None)
        };
        by_class[z.index()].push(i);
        records.push(PropertyRecord { id, kind, official_stars, features });
        truth.push(z);
    }

    let mut stays = StayTable::default();
    for g in 0..config.n_guests {
        let guest = format!("g{g:06}");
        let preferred = prior.sample(&mut rng);
        for _ in 0..config.stays_per_guest {
            let class = if rng.random::<f64>() < config.guest_noise { rng.random_range(0..5) } else { preferred };
            let pool = &by_class[class];
            if pool.is_empty() {
                continue;
            }
            let p = pool[rng.random_range(0..pool.len())];
            stays.push(guest.clone(), records[p].id.clone());
        }
    }

    Ok(SynthOutput { dataset: Dataset::new(schema, records), stays, ground_truth: truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig { n_properties: 2_000, n_guests: 500, seed, ..SynthConfig::default() }
    }

    #[test]
    fn default_lifts_are_valid() {
        SynthConfig::default().validate().unwrap();
        let schema = SynthConfig::default().schema().unwrap();
        assert_eq!(schema.len(), 32);
        assert_eq!(schema.features().iter().filter(|f| f.is_binary()).count(), 30);
    }

    #[test]
    fn rejects_bad_prior_and_lift() {
        let mut cfg = small(1);
        cfg.class_prior = [0.2; 5];
        cfg.class_prior[0] = 0.3;
        assert!(generate_synthetic(&cfg).is_err());
        let mut cfg = small(1);
        cfg.amenity_lift[0].lift = [0.5, 0.4, 0.6, 0.7, 0.8];
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(&small(9)).unwrap();
        let b = generate_synthetic(&small(9)).unwrap();
        let c = generate_synthetic(&small(10)).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.stays, b.stays);
        assert_eq!(a.ground_truth, b.ground_truth);
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn degenerate_lift_places_amenity_on_top_classes() {
        let mut cfg = small(4);
        cfg.underreport_rate = 0.0;
        cfg.amenity_lift[0].lift = [0.0, 0.0, 0.0, 1.0, 1.0];
        let out = generate_synthetic(&cfg).unwrap();
        for (r, z) in out.dataset.records.iter().zip(&out.ground_truth) {
            assert_eq!(r.features[0] == 1.0, z.get() >= 4);
        }
    }

    #[test]
    fn noiseless_guests_stay_in_their_class() {
        let mut cfg = small(5);
        cfg.guest_noise = 0.0;
        let out = generate_synthetic(&cfg).unwrap();
        let class_of: std::collections::HashMap<_, _> =
            out.dataset.records.iter().zip(&out.ground_truth).map(|(r, z)| (r.id.as_str(), *z)).collect();
        let mut guest_class = std::collections::HashMap::new();
        for (g, p) in out.stays.rows() {
            let c = class_of[p.as_str()];
            assert_eq!(*guest_class.entry(g.clone()).or_insert(c), c);
        }
        assert_eq!(out.stays.len(), 500 * 8);
    }

    #[test]
    fn hotels_carry_true_stars() {
        let out = generate_synthetic(&small(2)).unwrap();
        for (r, z) in out.dataset.records.iter().zip(&out.ground_truth) {
            match r.kind {
                PropertyKind::Hotel => assert_eq!(r.official_stars, Some(*z)),
                PropertyKind::VacationRental => assert_eq!(r.official_stars, None),
            }
        }
        let hotels = out.dataset.records.iter().filter(|r| r.kind == PropertyKind::Hotel).count();
        assert_eq!(hotels, 1_000);
    }
}
