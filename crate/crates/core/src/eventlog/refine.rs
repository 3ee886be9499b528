use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{EventLog, EventLogError};

/// Replacement labels for the clusters of one original label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelabelingMap {
    pub covered_label: String,
    /// Cluster index to refined label.
    pub entries: BTreeMap<usize, String>,
}

impl RelabelingMap {
    /// `"<label> 1"`, `"<label> 2"`, ... for `clusters` clusters.
    pub fn numbered(label: &str, clusters: usize) -> Self {
        Self {
            covered_label: label.to_string(),
            entries: (0..clusters).map(|i| (i, format!("{label} {}", i + 1))).collect(),
        }
    }

    pub fn refined_labels(&self) -> impl Iterator<Item = &str> {
        self.entries.values().map(String::as_str)
    }
}

/// A relabeling map together with the per-event cluster assignment it is
/// applied with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refinement {
    pub map: RelabelingMap,
    /// Event id to cluster index, for every event carrying the covered label.
    pub assignment: BTreeMap<String, usize>,
}

impl Refinement {
    pub fn label(&self) -> &str {
        &self.map.covered_label
    }

    pub fn apply(&self, log: &EventLog) -> Result<EventLog, EventLogError> {
        apply_refinement(log, &self.map, &self.assignment)
    }
}

/// Relabels every event carrying `map.covered_label` according to its
/// cluster in `assignment` (event id to cluster index).
///
/// Ids, timestamps and trace structure are untouched. A map whose label does
/// not occur leaves the log unchanged.
pub fn apply_refinement(
    log: &EventLog,
    map: &RelabelingMap,
    assignment: &BTreeMap<String, usize>,
) -> Result<EventLog, EventLogError> {
    let alphabet = log.label_alphabet();
    if !alphabet.contains(&map.covered_label) {
        return Ok(log.clone());
    }
    let mut distinct = BTreeSet::new();
    for refined in map.refined_labels() {
        let clashes = refined != map.covered_label && alphabet.contains(refined);
        if clashes || !distinct.insert(refined) {
            return Err(EventLogError::LabelCollision(refined.to_string()));
        }
    }
    let mut used = 0;
    for e in log.events() {
        if e.label == map.covered_label {
            let cluster =
                *assignment.get(&e.id).ok_or_else(|| EventLogError::MissingAssignment(e.id.clone()))?;
            if !map.entries.contains_key(&cluster) {
                return Err(EventLogError::UnmappedCluster { label: map.covered_label.clone(), cluster });
            }
            used += 1;
        }
    }
    if used != assignment.len() {
        let covered: BTreeSet<&str> =
            log.events().filter(|e| e.label == map.covered_label).map(|e| e.id.as_str()).collect();
        let stray = assignment.keys().filter(|id| !covered.contains(id.as_str())).min();
        return Err(EventLogError::UnexpectedAssignment(stray.cloned().unwrap_or_default()));
    }
    Ok(log.map_labels(|e| {
        if e.label == map.covered_label {
            map.entries[&assignment[&e.id]].clone()
        } else {
            e.label.clone()
        }
    }))
}

/// True when `fine` refines `coarse`: events sharing a fine label always
/// share their coarse label.
pub fn check_refinement_order(fine: &EventLog, coarse: &EventLog) -> Result<bool, EventLogError> {
    let coarse_labels: HashMap<&str, &str> =
        coarse.events().map(|e| (e.id.as_str(), e.label.as_str())).collect();
    if coarse_labels.len() != fine.event_count() {
        return Err(EventLogError::IdMismatch);
    }
    let mut image: HashMap<&str, &str> = HashMap::new();
    let mut refines = true;
    for e in fine.events() {
        let coarse_label = *coarse_labels.get(e.id.as_str()).ok_or(EventLogError::IdMismatch)?;
        let seen = *image.entry(e.label.as_str()).or_insert(coarse_label);
        refines &= seen == coarse_label;
    }
    Ok(refines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::{Event, Trace};
    use chrono::NaiveDate;

    fn fridge_log() -> EventLog {
        let day = NaiveDate::from_ymd_opt(2015, 3, 11).unwrap();
        let events = (0..6)
            .map(|i| {
                let label = if i % 2 == 0 { "fridge" } else { "door" };
                Event::new(format!("e{i}"), day.and_hms_opt(i * 3, 0, 0).unwrap(), label)
            })
            .collect();
        EventLog::from_traces(vec![Trace { case_id: "d".into(), events }]).unwrap()
    }

    fn three_way() -> BTreeMap<String, usize> {
        [("e0", 0), ("e2", 1), ("e4", 2)].iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn three_way_split() {
        let log = fridge_log();
        let refined = apply_refinement(&log, &RelabelingMap::numbered("fridge", 3), &three_way()).unwrap();
        assert_eq!(
            refined.label_sequences(),
            vec![vec!["fridge 1", "door", "fridge 2", "door", "fridge 3", "door"]]
        );
        assert!(check_refinement_order(&refined, &log).unwrap());
        assert!(!check_refinement_order(&log, &refined).unwrap());
        assert!(check_refinement_order(&log, &log).unwrap());
        let ids: Vec<_> = refined.events().map(|e| (&e.id, e.timestamp)).collect();
        let orig: Vec<_> = log.events().map(|e| (&e.id, e.timestamp)).collect();
        assert_eq!(ids, orig);
    }

    #[test]
    fn absent_label_is_a_no_op() {
        let log = fridge_log();
        let out = apply_refinement(&log, &RelabelingMap::numbered("oven", 2), &BTreeMap::new()).unwrap();
        assert_eq!(out, log);
    }

    #[test]
    fn missing_assignment() {
        let mut a = three_way();
        a.remove("e2");
        let err = apply_refinement(&fridge_log(), &RelabelingMap::numbered("fridge", 3), &a).unwrap_err();
        assert!(matches!(err, EventLogError::MissingAssignment(id) if id == "e2"));
    }

    #[test]
    fn stray_assignment() {
        let mut a = three_way();
        a.insert("e1".into(), 0);
        let err = apply_refinement(&fridge_log(), &RelabelingMap::numbered("fridge", 3), &a).unwrap_err();
        assert!(matches!(err, EventLogError::UnexpectedAssignment(id) if id == "e1"));
    }

    #[test]
    fn collision_with_existing_label() {
        let mut map = RelabelingMap::numbered("fridge", 3);
        map.entries.insert(2, "door".into());
        let err = apply_refinement(&fridge_log(), &map, &three_way()).unwrap_err();
        assert!(matches!(err, EventLogError::LabelCollision(l) if l == "door"));
    }

    #[test]
    fn differing_ids_are_an_error() {
        let log = fridge_log();
        let other = log.map_labels(|e| e.label.clone());
        assert!(check_refinement_order(&log, &other).unwrap());
        let smaller = EventLog::from_traces(vec![Trace {
            case_id: "d".into(),
            events: log.events().take(3).cloned().collect(),
        }])
        .unwrap();
        assert!(check_refinement_order(&log, &smaller).is_err());
    }
}
