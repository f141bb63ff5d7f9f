use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{Dataset, SAMPLE_RATE_HZ};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    /// Recording name; `None` for dataset-level issues.
    pub recording: Option<String>,
    pub bout: Option<usize>,
    pub chew: Option<usize>,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.recording {
            Some(r) => write!(f, "{r}")?,
            None => write!(f, "dataset")?,
        }
        if let Some(b) = self.bout {
            write!(f, " bout {b}")?;
        }
        if let Some(c) = self.chew {
            write!(f, " chew {c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Checks every dataset invariant and reports all violations.
pub fn validate(ds: &Dataset) -> ValidationReport {
    let mut issues = Vec::new();
    let mut push = |rec: &str, bout: Option<usize>, chew: Option<usize>, msg: String| {
        issues.push(ValidationIssue {
            recording: Some(rec.to_string()),
            bout,
            chew,
            message: msg,
        })
    };

    let mut names = BTreeSet::new();
    for rec in &ds.recordings {
        let name = rec.name.as_str();
        if !names.insert(name) {
            push(name, None, None, "duplicate recording name".into());
        }
        if rec.sample_rate_hz != SAMPLE_RATE_HZ {
            push(
                name,
                None,
                None,
                format!(
                    "sample rate {} Hz (expected {SAMPLE_RATE_HZ})",
                    rec.sample_rate_hz
                ),
            );
        }
        let duration = rec.duration_s();
        for (bi, bout) in rec.bouts.iter().enumerate() {
            let b = Some(bi);
            if bout.subject_id != rec.subject_id {
                push(
                    name,
                    b,
                    None,
                    format!(
                        "subject '{}' differs from recording subject '{}'",
                        bout.subject_id, rec.subject_id
                    ),
                );
            }
            if !(bout.weight_g > 0.0) || !bout.weight_g.is_finite() {
                push(name, b, None, "non-positive weight".into());
            }
            if bout.chews.is_empty() {
                push(name, b, None, "bout has no chews".into());
            }
            for (ci, chew) in bout.chews.iter().enumerate() {
                let c = Some(ci);
                if !chew.start_s.is_finite() || !chew.stop_s.is_finite() {
                    push(name, b, c, "non-finite time-stamp".into());
                    continue;
                }
                if chew.stop_s <= chew.start_s {
                    push(name, b, c, "chew interval inverted".into());
                }
                if chew.start_s < 0.0 || chew.stop_s > duration {
                    push(
                        name,
                        b,
                        c,
                        format!(
                            "chew [{}, {}] s beyond audio duration {duration} s",
                            chew.start_s, chew.stop_s
                        ),
                    );
                }
                if ci > 0 && chew.start_s < bout.chews[ci - 1].stop_s {
                    push(name, b, c, "overlapping chews".into());
                }
            }
        }
    }

    if ds.subjects().len() < 2 {
        issues.push(ValidationIssue {
            recording: None,
            bout: None,
            chew: None,
            message: "LOSO requires ≥ 2 subjects".into(),
        });
    }
    ValidationReport { issues }
}
