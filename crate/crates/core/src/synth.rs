//! Synthetic event logs with planted time-of-day and ordering structure.
//!
//! Specs are TOML:
//!
//! ```toml
//! days = 60
//! seed = 7
//! start_date = "2020-01-01"   # optional
//!
//! [[sensors]]
//! name = "bedroom door"
//! events_per_day = 4.0
//! components = [
//!   { weight = 0.76, mu = 2.05, kappa = 3.85 },          # mu in radians
//!   { weight = 0.24, mean_hours = 22.7, kappa = 1.56 },  # or in hours
//! ]
//!
//! [[sensors]]
//! name = "fridge"
//! events_per_day = 6.0        # no components: uniform over the day
//!
//! [ordering]                   # optional first-order Markov chain
//! initial = [0.5, 0.5]         # optional, uniform by default
//! transitions = [[0.1, 0.9], [0.6, 0.4]]
//! ```
//!
//! Without `ordering`, each sensor fires a Poisson number of times per day
//! and events are ordered by time. With it, a Poisson number of events per
//! day (mean: the summed rates) follows the chain, each event draws a time
//! from its sensor's profile, and the sorted times are handed out along the
//! chain so the trace order is exactly the chain's.

use chrono::{Duration, NaiveDate, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circstats::{radians_to_hours, TAU};
use crate::eventlog::{partition, AttrValue, Event, EventLog, PartitionSpec};
use crate::mixture::{VonMisesComponent, VonMisesMixture};

const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("spec: {0}")]
    Parse(String),
    #[error("spec field '{field}': {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SynthError {
    SynthError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    /// Mean direction in radians; give this or `mean_hours`.
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub mean_hours: Option<f64>,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub name: String,
    pub events_per_day: f64,
    /// Empty means uniform over the day.
    #[serde(default)]
    pub components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingSpec {
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    /// Row `i` gives the next-sensor distribution after sensor `i`.
    pub transitions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub days: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub start_date: Option<String>,
    /// Written as a `household` attribute on every event when present.
    #[serde(default)]
    pub household: Option<String>,
    pub sensors: Vec<SensorSpec>,
    #[serde(default)]
    pub ordering: Option<OrderingSpec>,
}

fn check_distribution(field: &str, row: &[f64], n: usize) -> Result<(), SynthError> {
    if row.len() != n {
        return Err(invalid(field, format!("expected {n} entries, found {}", row.len())));
    }
    if let Some(j) = row.iter().position(|p| !p.is_finite() || *p < 0.0) {
        return Err(invalid(format!("{field}[{j}]"), "probabilities must be finite and non-negative"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(invalid(field, format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

impl SyntheticSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let spec: Self = toml::from_str(text).map_err(|e| SynthError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn start(&self) -> Result<NaiveDate, SynthError> {
        match &self.start_date {
            None => Ok(NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date")),
            Some(s) => NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .map_err(|e| invalid("start_date", format!("'{s}': {e}"))),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.days < 1 {
            return Err(invalid("days", "must be at least 1"));
        }
        self.start()?;
        if self.sensors.is_empty() {
            return Err(invalid("sensors", "at least one sensor is required"));
        }
        let mut names = std::collections::BTreeSet::new();
        for (i, s) in self.sensors.iter().enumerate() {
            let field = format!("sensors[{i}]");
            if s.name.is_empty() || !names.insert(s.name.as_str()) {
                return Err(invalid(format!("{field}.name"), "names must be non-empty and unique"));
            }
            if !(s.events_per_day.is_finite() && s.events_per_day > 0.0) {
                return Err(invalid(format!("{field}.events_per_day"), "must be positive"));
            }
            self.sensor_profile(i)?;
        }
        if let Some(o) = &self.ordering {
            let n = self.sensors.len();
            if o.transitions.len() != n {
                return Err(invalid(
                    "ordering.transitions",
                    format!("expected {n} rows, found {}", o.transitions.len()),
                ));
            }
            for (i, row) in o.transitions.iter().enumerate() {
                check_distribution(&format!("ordering.transitions[{i}]"), row, n)?;
            }
            if let Some(init) = &o.initial {
                check_distribution("ordering.initial", init, n)?;
            }
        }
        Ok(())
    }

    /// The time profile of sensor `i`; `None` is uniform.
    pub fn sensor_profile(&self, i: usize) -> Result<Option<VonMisesMixture>, SynthError> {
        let s = &self.sensors[i];
        if s.components.is_empty() {
            return Ok(None);
        }
        let mut comps = Vec::with_capacity(s.components.len());
        for (j, c) in s.components.iter().enumerate() {
            let field = format!("sensors[{i}].components[{j}]");
            let mu = match (c.mu, c.mean_hours) {
                (Some(mu), None) => mu,
                (None, Some(h)) => h / 24.0 * TAU,
                _ => return Err(invalid(field, "give exactly one of 'mu' and 'mean_hours'")),
            };
            comps.push(
                VonMisesComponent::new(c.weight, mu, c.kappa).map_err(|e| invalid(&field, e.to_string()))?,
            );
        }
        let mixture = VonMisesMixture::from_components(comps)
            .map_err(|e| invalid(format!("sensors[{i}].components"), e.to_string()))?;
        Ok(Some(mixture))
    }
}

fn draw_angle(profile: &Option<VonMisesMixture>, rng: &mut ChaCha8Rng) -> f64 {
    match profile {
        Some(m) => m.sample(1, rng)[0].1,
        None => rng.random::<f64>() * TAU,
    }
}

fn pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding left a sliver above the last cumulative weight.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> usize {
    Poisson::new(mean).expect("validated positive rate").sample(rng) as usize
}

/// (sensor index, angle) pairs of one day, in trace order.
fn simulate_day(spec: &SyntheticSpec, profiles: &[Option<VonMisesMixture>], day: u32) -> Vec<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(u64::from(day));
    match &spec.ordering {
        None => {
            let mut out = Vec::new();
            for (i, s) in spec.sensors.iter().enumerate() {
                for _ in 0..poisson(s.events_per_day, &mut rng) {
                    out.push((i, draw_angle(&profiles[i], &mut rng)));
                }
            }
            out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            out
        }
        Some(o) => {
            let total: f64 = spec.sensors.iter().map(|s| s.events_per_day).sum();
            let n = poisson(total, &mut rng);
            let uniform = vec![1.0 / spec.sensors.len() as f64; spec.sensors.len()];
            let mut chain: Vec<usize> = Vec::with_capacity(n);
            for step in 0..n {
                let next = match step {
                    0 => pick(o.initial.as_deref().unwrap_or(&uniform), &mut rng),
                    _ => pick(o.transitions[chain[step - 1]].as_slice(), &mut rng),
                };
                chain.push(next);
            }
            let mut times: Vec<f64> = chain.iter().map(|&i| draw_angle(&profiles[i], &mut rng)).collect();
            times.sort_by(f64::total_cmp);
            chain.into_iter().zip(times).collect()
        }
    }
}

/// Generates the log; identical specs give identical logs.
pub fn generate(spec: &SyntheticSpec) -> Result<EventLog, SynthError> {
    spec.validate()?;
    let start = spec.start()?;
    let profiles: Vec<Option<VonMisesMixture>> =
        (0..spec.sensors.len()).map(|i| spec.sensor_profile(i)).collect::<Result<_, _>>()?;
    let days: Vec<Vec<(usize, f64)>> =
        (0..spec.days).into_par_iter().map(|d| simulate_day(spec, &profiles, d)).collect();
    let mut events = Vec::new();
    for (d, day) in days.into_iter().enumerate() {
        let date = start + Duration::days(d as i64);
        let mut last_secs = 0;
        for (j, (sensor, angle)) in day.into_iter().enumerate() {
            // Whole seconds, kept non-decreasing so timestamp order is trace order.
            let secs = ((radians_to_hours(angle) * 3600.0).floor() as u32).min(86_399).max(last_secs);
            last_secs = secs;
            let time = NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).expect("within a day");
            let mut e =
                Event::new(format!("{date}-{j:04}"), date.and_time(time), spec.sensors[sensor].name.clone());
            if let Some(h) = &spec.household {
                e = e.with_attribute("household", AttrValue::Text(h.clone()));
            }
            events.push(e);
        }
    }
    Ok(partition(events, &PartitionSpec::daily()).expect("daily spec needs no attributes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"
days = 5
seed = 3
[[sensors]]
name = "a"
events_per_day = 3.0
[[sensors]]
name = "b"
events_per_day = 2.0
components = [{ weight = 1.0, mean_hours = 6.0, kappa = 4.0 }]
"#;

    #[test]
    fn parses_and_generates() {
        let spec = SyntheticSpec::from_toml_str(TWO).unwrap();
        let log = generate(&spec).unwrap();
        assert!(log.traces().len() <= 5);
        assert_eq!(log.label_alphabet().len(), 2);
        assert_eq!(generate(&spec).unwrap(), log);
    }

    #[test]
    fn bad_markov_row_names_the_row() {
        let text = format!("{TWO}\n[ordering]\ntransitions = [[0.5, 0.5], [0.5, 0.4]]\n");
        let err = SyntheticSpec::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("ordering.transitions[1]"), "{err}");
    }

    #[test]
    fn markov_rows_within_tolerance_are_accepted() {
        let text = format!("{TWO}\n[ordering]\ntransitions = [[0.3, 0.7000000000001], [1.0, 0.0]]\n");
        assert!(SyntheticSpec::from_toml_str(&text).is_ok());
    }

    #[test]
    fn field_errors() {
        let cases = [
            (TWO.replace("days = 5", "days = 0"), "days"),
            (TWO.replace("events_per_day = 3.0", "events_per_day = 0.0"), "sensors[0].events_per_day"),
            (TWO.replace("mean_hours = 6.0", "mean_hours = 6.0, mu = 1.0"), "sensors[1].components[0]"),
            (TWO.replace("weight = 1.0", "weight = 0.9"), "sensors[1].components"),
            (TWO.replace("name = \"b\"", "name = \"a\""), "sensors[1].name"),
        ];
        for (text, field) in cases {
            let err = SyntheticSpec::from_toml_str(&text).unwrap_err();
            assert!(matches!(&err, SynthError::Invalid { field: f, .. } if f == field), "{err}");
        }
        assert!(matches!(SyntheticSpec::from_toml_str("days = "), Err(SynthError::Parse(_))));
        assert!(matches!(
            SyntheticSpec::from_toml_str(&format!("{TWO}\nbogus = 1")),
            Err(SynthError::Parse(_))
        ));
    }

    #[test]
    fn markov_order_is_the_chain() {
        // A deterministic cycle a -> b -> a.
        let text =
            format!("{TWO}\n[ordering]\ninitial = [1.0, 0.0]\ntransitions = [[0.0, 1.0], [1.0, 0.0]]\n");
        let log = generate(&SyntheticSpec::from_toml_str(&text).unwrap()).unwrap();
        for seq in log.label_sequences() {
            for (i, l) in seq.iter().enumerate() {
                assert_eq!(*l, if i % 2 == 0 { "a" } else { "b" });
            }
        }
    }

    #[test]
    fn household_attribute() {
        let mut spec = SyntheticSpec::from_toml_str(TWO).unwrap();
        spec.household = Some("h1".into());
        let log = generate(&spec).unwrap();
        assert!(log.events().all(|e| e.attribute("household") == Some(&AttrValue::Text("h1".into()))));
    }
}
