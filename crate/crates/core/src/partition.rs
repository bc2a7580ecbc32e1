//! Master source list handling: seeded shuffle and K-way disjoint split.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{fisher_yates, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub ratios: Vec<f64>,
    pub seed: u64,
}

impl PartitionPlan {
    pub fn new(ratios: Vec<f64>, seed: u64) -> Result<Self> {
        let plan = PartitionPlan { ratios, seed };
        plan.validate()?;
        Ok(plan)
    }

    pub fn k(&self) -> usize {
        self.ratios.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() {
            return Err(Error::validation("partition plan needs K >= 1 ratios"));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::validation(format!("ratio {r} outside (0, 1]")));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcePartition {
    pub segments: Vec<Vec<String>>,
    pub seed: u64,
}

impl SourcePartition {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("partition serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("partition", e))
    }
}

pub fn shuffle_and_partition(ids: &[String], plan: &PartitionPlan) -> Result<SourcePartition> {
    plan.validate()?;
    if ids.is_empty() {
        return Err(Error::validation("source list is empty"));
    }
    let mut seen = HashSet::with_capacity(ids.len());
    let dups: Vec<&str> = ids
        .iter()
        .filter(|id| !seen.insert(id.as_str()))
        .map(String::as_str)
        .collect();
    if !dups.is_empty() {
        return Err(Error::validation(format!(
            "duplicate source ids: {}",
            dups.join(", ")
        )));
    }

    let mut order = ids.to_vec();
    fisher_yates(&mut order, &mut rng_from_seed(plan.seed));

    let n = order.len();
    let mut segments = Vec::with_capacity(plan.k());
    let mut start = 0usize;
    let mut cumulative = 0.0;
    for (k, r) in plan.ratios.iter().enumerate() {
        cumulative += r;
        let end = if k + 1 == plan.k() {
            n
        } else {
            ((n as f64 * cumulative).round() as usize).clamp(start, n)
        };
        segments.push(order[start..end].to_vec());
        start = end;
    }
    Ok(SourcePartition {
        segments,
        seed: plan.seed,
    })
}

pub fn read_source_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

pub fn write_source_list(ids: &[String], path: &Path) -> Result<()> {
    let mut text = ids.join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
