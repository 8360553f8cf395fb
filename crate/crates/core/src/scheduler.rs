//! Creation of annotation instances and per-annotator presentation
//! sequences.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{AnnotationInstance, InstanceId, PairKey, Use, UseId};

/// One instance per unordered pair of distinct uses, in input order.
pub fn generate_full_pairing(uses: &[Use]) -> Result<Vec<AnnotationInstance>> {
    if let Some(first) = uses.first() {
        if let Some(other) = uses.iter().find(|u| u.lemma != first.lemma) {
            return Err(Error::MixedLemmas(first.lemma.clone(), other.lemma.clone()));
        }
    }
    let mut out = Vec::with_capacity(uses.len() * uses.len().saturating_sub(1) / 2);
    for (i, a) in uses.iter().enumerate() {
        for b in &uses[i + 1..] {
            out.push(AnnotationInstance::new(out.len(), a.id.clone(), b.id.clone())?);
        }
    }
    Ok(out)
}

/// Turns a user-supplied pair list into instances, dropping repeats of the
/// same unordered pair.
pub fn accept_uploaded_pairs(uses: &[Use], pairs: &[(UseId, UseId)]) -> Result<Vec<AnnotationInstance>> {
    let known: HashSet<&UseId> = uses.iter().map(|u| &u.id).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (a, b) in pairs {
        for id in [a, b] {
            if !known.contains(id) {
                return Err(Error::UnknownUse(id.clone()));
            }
        }
        let key = PairKey::new(a.clone(), b.clone())?;
        if seen.insert(key) {
            out.push(AnnotationInstance::new(out.len(), a.clone(), b.clone())?);
        }
    }
    Ok(out)
}

/// Derives a stream seed from the project seed, a scope (usually the lemma)
/// and a name (annotator or computational annotator).
pub fn derive_seed(project_seed: u64, scope: &str, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(project_seed.to_le_bytes());
    h.update((scope.len() as u64).to_le_bytes());
    h.update(scope.as_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub instance: InstanceId,
    pub swapped: bool,
}

/// The order in which one annotator sees a word's instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorSequence {
    pub annotator: String,
    pub entries: Vec<SequenceEntry>,
    pub cursor: usize,
}

/// An instance with the presentation order applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presented {
    pub instance: InstanceId,
    pub left: UseId,
    pub right: UseId,
    pub swapped: bool,
    pub position: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Next {
    Instance(Presented),
    Done,
}

pub fn build_sequence(instances: &[AnnotationInstance], annotator: &str, seed: u64) -> AnnotatorSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<InstanceId> = instances.iter().map(|i| i.id).collect();
    ids.shuffle(&mut rng);
    let entries = ids
        .into_iter()
        .map(|instance| SequenceEntry {
            instance,
            swapped: rng.random_bool(0.5),
        })
        .collect();
    AnnotatorSequence {
        annotator: annotator.to_owned(),
        entries,
        cursor: 0,
    }
}

impl AnnotatorSequence {
    /// Rebuilds the cursor from persisted judgments: it points at the first
    /// entry whose pair the annotator has not judged yet.
    pub fn resume(&mut self, instances: &[AnnotationInstance], judged: &HashSet<PairKey>) {
        let by_id: HashMap<InstanceId, &AnnotationInstance> = instances.iter().map(|i| (i.id, i)).collect();
        self.cursor = self
            .entries
            .iter()
            .position(|e| by_id.get(&e.instance).is_none_or(|i| !judged.contains(&i.pair)))
            .unwrap_or(self.entries.len());
    }

    pub fn is_done(&self) -> bool {
        self.cursor >= self.entries.len()
    }

    /// Advances past `instance` if it is the current one.
    pub fn submit(&mut self, instance: InstanceId) -> Result<()> {
        match self.entries.get(self.cursor) {
            Some(e) if e.instance == instance => {
                self.cursor += 1;
                Ok(())
            }
            _ => Err(Error::OutOfOrder(instance)),
        }
    }

    /// True if `instance` was already presented and answered.
    pub fn answered(&self, instance: InstanceId) -> bool {
        self.entries[..self.cursor.min(self.entries.len())]
            .iter()
            .any(|e| e.instance == instance)
    }
}

/// The instance at the cursor, with presentation order applied. Viewing does
/// not advance the cursor.
pub fn next_instance(sequence: &AnnotatorSequence, instances: &[AnnotationInstance]) -> Next {
    let Some(entry) = sequence.entries.get(sequence.cursor) else {
        return Next::Done;
    };
    let Some(inst) = instances.iter().find(|i| i.id == entry.instance) else {
        return Next::Done;
    };
    let (left, right) = if entry.swapped {
        (inst.second.clone(), inst.first.clone())
    } else {
        (inst.first.clone(), inst.second.clone())
    };
    Next::Instance(Presented {
        instance: inst.id,
        left,
        right,
        swapped: entry.swapped,
        position: sequence.cursor,
        total: sequence.entries.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Span;

    fn uses(n: usize) -> Vec<Use> {
        (0..n)
            .map(|i| Use::new(format!("u{i:02}"), "w", "word", Span::new(0, 4).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn full_pairing_counts() {
        assert_eq!(generate_full_pairing(&uses(6)).unwrap().len(), 15);
        assert_eq!(generate_full_pairing(&uses(10)).unwrap().len(), 45);
        assert!(generate_full_pairing(&uses(1)).unwrap().is_empty());
        assert!(generate_full_pairing(&[]).unwrap().is_empty());
        let mut mixed = uses(2);
        mixed[1].lemma = "other".into();
        assert!(matches!(generate_full_pairing(&mixed), Err(Error::MixedLemmas(..))));
    }

    #[test]
    fn uploaded_pairs() {
        let us = uses(6);
        let id = |i: usize| us[i].id.clone();
        let one = accept_uploaded_pairs(&us, &[(id(1), id(2)), (id(2), id(1))]).unwrap();
        assert_eq!(one.len(), 1);
        assert!(matches!(
            accept_uploaded_pairs(&us, &[(id(1), id(1))]),
            Err(Error::SelfPair(_))
        ));
        assert!(matches!(
            accept_uploaded_pairs(&us, &[(id(1), UseId::new("nope"))]),
            Err(Error::UnknownUse(_))
        ));
        let three = accept_uploaded_pairs(&us, &[(id(0), id(1)), (id(2), id(3)), (id(4), id(5))]).unwrap();
        assert_eq!(three.len(), 3);
    }

    #[test]
    fn sequences_are_deterministic_and_salted() {
        let inst = generate_full_pairing(&uses(10)).unwrap();
        let s1 = build_sequence(&inst, "ann", derive_seed(7, "w", "ann"));
        let s2 = build_sequence(&inst, "ann", derive_seed(7, "w", "ann"));
        assert_eq!(s1, s2);
        let s3 = build_sequence(&inst, "bob", derive_seed(7, "w", "bob"));
        assert_ne!(s1.entries, s3.entries);
    }

    #[test]
    fn annotator_names_give_distinct_permutations() {
        let inst = generate_full_pairing(&uses(10)).unwrap();
        let perms: HashSet<Vec<InstanceId>> = (0..100)
            .map(|i| {
                let name = format!("annotator{i}");
                build_sequence(&inst, &name, derive_seed(1, "w", &name))
                    .entries
                    .iter()
                    .map(|e| e.instance)
                    .collect()
            })
            .collect();
        assert_eq!(perms.len(), 100);
    }

    #[test]
    fn walk_and_resume() {
        let inst = generate_full_pairing(&uses(6)).unwrap();
        let mut seq = build_sequence(&inst, "a", 3);
        let Next::Instance(first) = next_instance(&seq, &inst) else {
            panic!()
        };
        assert_eq!(first.position, 0);
        assert!(seq.submit(first.instance + 100).is_err());
        let mut judged = HashSet::new();
        for _ in 0..7 {
            let Next::Instance(p) = next_instance(&seq, &inst) else {
                panic!()
            };
            judged.insert(PairKey::new(p.left.clone(), p.right.clone()).unwrap());
            seq.submit(p.instance).unwrap();
        }
        let expected = next_instance(&seq, &inst);
        let mut rebuilt = build_sequence(&inst, "a", 3);
        rebuilt.resume(&inst, &judged);
        assert_eq!(next_instance(&rebuilt, &inst), expected);
        while let Next::Instance(p) = next_instance(&seq, &inst) {
            seq.submit(p.instance).unwrap();
        }
        assert!(seq.is_done());
        assert_eq!(seq.cursor, 15);
    }
}
