//! Budgeted access to candidate feature values.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::Write;

use super::CandidateTable;
use crate::error::{Error, Result};

/// One charging event. Repeat queries of an already-paid pair do not
/// produce records, so the log is exactly the set of purchases and its
/// length equals the spend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    /// 1-based position in the charge sequence.
    pub sequence: u64,
    pub sample_id: String,
    pub sample_index: usize,
    pub feature_id: usize,
    /// Always 1: one query buys one sample's block of one feature.
    pub cost: u64,
}

/// Metered gateway to a [`CandidateTable`].
///
/// Invariants maintained across any call sequence:
/// * `initial() == remaining() + spent()`;
/// * `spent()` equals the number of audit records, each of cost 1;
/// * no `(sample, feature)` pair is ever charged twice.
#[derive(Debug, Clone)]
pub struct FeatureOracle {
    table: CandidateTable,
    sample_ids: Vec<String>,
    budget_initial: u64,
    budget_remaining: u64,
    charged: HashSet<(usize, usize)>,
    audit: Vec<AuditRecord>,
}

impl FeatureOracle {
    pub fn new(table: CandidateTable, sample_ids: Vec<String>, budget: u64) -> Result<Self> {
        if sample_ids.len() != table.num_samples() {
            return Err(Error::InvalidInput(format!(
                "{} sample ids for a table of {} samples",
                sample_ids.len(),
                table.num_samples()
            )));
        }
        super::check_unique_ids(&sample_ids)?;
        Ok(Self {
            table,
            sample_ids,
            budget_initial: budget,
            budget_remaining: budget,
            charged: HashSet::new(),
            audit: Vec::new(),
        })
    }

    /// Returns the feature block for `(sample, feature)`, charging one
    /// budget unit the first time the pair is seen and nothing afterwards.
    pub fn query(&mut self, sample: usize, feature: usize) -> Result<&[f64]> {
        if sample >= self.table.num_samples() {
            return Err(Error::InvalidInput(format!(
                "sample index {sample} out of range ({} samples)",
                self.table.num_samples()
            )));
        }
        if feature >= self.table.num_features() {
            return Err(Error::InvalidInput(format!(
                "feature id {feature} out of range ({} features)",
                self.table.num_features()
            )));
        }
        if !self.charged.contains(&(sample, feature)) {
            if self.budget_remaining == 0 {
                return Err(Error::BudgetExhausted {
                    initial: self.budget_initial,
                    spent: self.spent(),
                });
            }
            self.budget_remaining -= 1;
            self.charged.insert((sample, feature));
            self.audit.push(AuditRecord {
                sequence: self.audit.len() as u64 + 1,
                sample_id: self.sample_ids[sample].clone(),
                sample_index: sample,
                feature_id: feature,
                cost: 1,
            });
        }
        Ok(self.table.value(sample, feature))
    }

    pub fn num_features(&self) -> usize {
        self.table.num_features()
    }

    pub fn num_samples(&self) -> usize {
        self.table.num_samples()
    }

    pub fn feature_names(&self) -> &[String] {
        self.table.feature_names()
    }

    pub fn column_labels(&self, feature: usize) -> &[String] {
        self.table.column_labels(feature)
    }

    pub fn width(&self, feature: usize) -> usize {
        self.table.width(feature)
    }

    pub fn initial(&self) -> u64 {
        self.budget_initial
    }

    pub fn remaining(&self) -> u64 {
        self.budget_remaining
    }

    pub fn spent(&self) -> u64 {
        self.budget_initial - self.budget_remaining
    }

    pub fn is_charged(&self, sample: usize, feature: usize) -> bool {
        self.charged.contains(&(sample, feature))
    }

    pub fn audit(&self) -> &[AuditRecord] {
        &self.audit
    }

    /// Writes the audit log as CSV (`sequence,sample_id,feature_id,cost`).
    pub fn write_audit_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sequence,sample_id,feature_id,cost")?;
        for rec in &self.audit {
            writeln!(
                out,
                "{},{},{},{}",
                rec.sequence, rec.sample_id, rec.feature_id, rec.cost
            )?;
        }
        Ok(())
    }
}
