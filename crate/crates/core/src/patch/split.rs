use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patch::extract::{PatchEntry, Provenance, CORNER_MARGIN, PATCH_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub subjects: usize,
    pub centered: usize,
    pub augmented: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionParams {
    pub patch_size: usize,
    pub augment: bool,
    pub corner_margin: usize,
    pub seed: u64,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            patch_size: PATCH_SIZE,
            augment: false,
            corner_margin: CORNER_MARGIN,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPatch {
    pub split: Split,
    #[serde(flatten)]
    pub entry: PatchEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub parameters: ExtractionParams,
    /// Subject → split.
    pub subjects: BTreeMap<String, Split>,
    pub counts: BTreeMap<Split, SplitCounts>,
    /// Sorted by split, then patch id.
    pub patches: Vec<ManifestPatch>,
}

impl DatasetManifest {
    /// Re-checks that subjects are disjoint across splits and that counts
    /// agree with the patch list.
    pub fn validate(&self) -> Result<()> {
        let mut counts: BTreeMap<Split, SplitCounts> =
            [(Split::Train, SplitCounts::default()), (Split::Test, SplitCounts::default())].into();
        for split in self.subjects.values() {
            counts.get_mut(split).expect("both splits present").subjects += 1;
        }
        for p in &self.patches {
            match self.subjects.get(&p.entry.subject_id) {
                Some(s) if *s == p.split => {}
                Some(_) => {
                    return Err(Error::OverlappingSplit(format!(
                        "subject {} has patches in both splits",
                        p.entry.subject_id
                    )))
                }
                None => return Err(Error::UnassignedSubject(p.entry.subject_id.clone())),
            }
            let c = counts.get_mut(&p.split).expect("both splits present");
            c.total += 1;
            if p.entry.provenance == Provenance::Centered {
                c.centered += 1;
            } else {
                c.augmented += 1;
            }
        }
        if counts != self.counts {
            return Err(Error::InvalidData(format!(
                "manifest counts {:?} disagree with its patch list {counts:?}",
                self.counts
            )));
        }
        Ok(())
    }
}

/// Assigns every patch to the split of its subject.
pub fn split_by_subject(
    entries: &[PatchEntry],
    train_subjects: &BTreeSet<String>,
    test_subjects: &BTreeSet<String>,
    parameters: ExtractionParams,
) -> Result<DatasetManifest> {
    if let Some(s) = train_subjects.intersection(test_subjects).next() {
        return Err(Error::OverlappingSplit(format!(
            "subject {s} is listed for both train and test"
        )));
    }
    let subjects: BTreeMap<String, Split> = train_subjects
        .iter()
        .map(|s| (s.clone(), Split::Train))
        .chain(test_subjects.iter().map(|s| (s.clone(), Split::Test)))
        .collect();
    let mut patches = entries
        .iter()
        .map(|e| {
            let split = *subjects
                .get(&e.subject_id)
                .ok_or_else(|| Error::UnassignedSubject(e.subject_id.clone()))?;
            Ok(ManifestPatch {
                split,
                entry: e.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    patches.sort_by(|a, b| (a.split, &a.entry.patch_id).cmp(&(b.split, &b.entry.patch_id)));

    let mut counts: BTreeMap<Split, SplitCounts> =
        [(Split::Train, SplitCounts::default()), (Split::Test, SplitCounts::default())].into();
    for split in subjects.values() {
        counts.get_mut(split).expect("both splits present").subjects += 1;
    }
    for p in &patches {
        let c = counts.get_mut(&p.split).expect("both splits present");
        c.total += 1;
        if p.entry.provenance == Provenance::Centered {
            c.centered += 1;
        } else {
            c.augmented += 1;
        }
    }
    let manifest = DatasetManifest {
        parameters,
        subjects,
        counts,
        patches,
    };
    manifest.validate()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(subjects: &[&str], per: usize) -> Vec<PatchEntry> {
        subjects
            .iter()
            .flat_map(|s| {
                (0..per).map(move |i| PatchEntry {
                    patch_id: format!("{s}-{i}"),
                    subject_id: s.to_string(),
                    annotation_index: i,
                    origin: (i, 0),
                    provenance: if i % 5 == 0 {
                        Provenance::Centered
                    } else {
                        Provenance::CornerTl
                    },
                })
            })
            .collect()
    }

    fn set(names: &[String]) -> BTreeSet<String> {
        names.iter().cloned().collect()
    }

    #[test]
    fn twelve_train_three_test() {
        let names: Vec<String> = (1..=15).map(|i| format!("S{i:02}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let e = entries(&refs, 10);
        let m = split_by_subject(&e, &set(&names[..12]), &set(&names[12..]), ExtractionParams::default())
            .unwrap();
        assert_eq!(m.counts[&Split::Train].subjects, 12);
        assert_eq!(m.counts[&Split::Test].subjects, 3);
        assert_eq!(m.counts[&Split::Train].total, 120);
        assert_eq!(m.counts[&Split::Test].total, 30);
        assert_eq!(m.counts[&Split::Test].centered, 6);
        let train: BTreeSet<_> = m.patches.iter().filter(|p| p.split == Split::Train).map(|p| &p.entry.subject_id).collect();
        let test: BTreeSet<_> = m.patches.iter().filter(|p| p.split == Split::Test).map(|p| &p.entry.subject_id).collect();
        assert!(train.is_disjoint(&test));
    }

    #[test]
    fn overlap_is_rejected() {
        let names = vec!["A".to_string(), "B".to_string()];
        let err = split_by_subject(&entries(&["A"], 1), &set(&names), &set(&names[1..]), ExtractionParams::default());
        assert!(matches!(err, Err(Error::OverlappingSplit(_))));
    }

    #[test]
    fn unassigned_subject_is_rejected() {
        let err = split_by_subject(
            &entries(&["A", "C"], 1),
            &set(&["A".to_string()]),
            &BTreeSet::new(),
            ExtractionParams::default(),
        );
        assert!(matches!(err, Err(Error::UnassignedSubject(s)) if s == "C"));
    }

    #[test]
    fn empty_test_split() {
        let m = split_by_subject(
            &entries(&["A"], 3),
            &set(&["A".to_string()]),
            &BTreeSet::new(),
            ExtractionParams::default(),
        )
        .unwrap();
        assert_eq!(m.counts[&Split::Test], SplitCounts::default());
        assert_eq!(m.counts[&Split::Train].total, 3);
    }

    #[test]
    fn tampered_manifest_fails_validation() {
        let mut m = split_by_subject(
            &entries(&["A", "B"], 2),
            &set(&["A".to_string()]),
            &set(&["B".to_string()]),
            ExtractionParams::default(),
        )
        .unwrap();
        m.patches[0].split = Split::Test;
        assert!(m.validate().is_err());
    }
}
