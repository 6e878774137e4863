//! Labeled feature matrix shared by training, evaluation and the harnesses.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::records::format_value;
use crate::schema::FeatureSchema;
use crate::types::{DrivingContext, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    RealCrash,
    SyntheticSafe,
    /// Rows drawn from a planted-signal generator.
    Planted,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::RealCrash => "real-crash",
            Provenance::SyntheticSafe => "synthetic-safe",
            Provenance::Planted => "planted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Provenance::RealCrash, Provenance::SyntheticSafe, Provenance::Planted]
            .into_iter()
            .find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub schema: Arc<FeatureSchema>,
    pub contexts: Vec<DrivingContext>,
    pub labels: Vec<Label>,
    pub provenance: Vec<Provenance>,
    /// Optional group id per row. Rows sharing an id (a crash and its safe
    /// clone) always land on the same side of a split or fold.
    pub groups: Option<Vec<usize>>,
}

impl LabeledDataset {
    pub fn new(
        schema: Arc<FeatureSchema>,
        contexts: Vec<DrivingContext>,
        labels: Vec<Label>,
        provenance: Vec<Provenance>,
    ) -> Result<Self> {
        if contexts.len() != labels.len() || labels.len() != provenance.len() {
            return Err(Error::Load(format!(
                "dataset columns disagree: {} contexts, {} labels, {} provenance tags",
                contexts.len(),
                labels.len(),
                provenance.len()
            )));
        }
        for (i, c) in contexts.iter().enumerate() {
            if c.len() != schema.len() {
                return Err(Error::Load(format!(
                    "row {i} has {} values, schema `{}` has {}",
                    c.len(),
                    schema.schema_id(),
                    schema.len()
                )));
            }
        }
        Ok(Self {
            schema,
            contexts,
            labels,
            provenance,
            groups: None,
        })
    }

    pub fn with_groups(mut self, groups: Vec<usize>) -> Result<Self> {
        if groups.len() != self.len() {
            return Err(Error::Load(format!("{} group ids for {} rows", groups.len(), self.len())));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    /// Build from raw rows, tagging every row with one provenance.
    pub fn from_rows(
        schema: Arc<FeatureSchema>,
        rows: Vec<Vec<f64>>,
        labels: Vec<Label>,
        provenance: Provenance,
    ) -> Result<Self> {
        let id = schema.schema_id();
        let contexts = rows.into_iter().map(|r| DrivingContext::new(id.clone(), r)).collect();
        let n = labels.len();
        Self::new(schema, contexts, labels, vec![provenance; n])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn class_indices(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.contexts[i].values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.contexts.iter().map(|c| c.values[j]).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            contexts: indices.iter().map(|&i| self.contexts[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            provenance: indices.iter().map(|&i| self.provenance[i]).collect(),
            groups: self.groups.as_ref().map(|g| indices.iter().map(|&i| g[i]).collect()),
        }
    }

    /// Keep only the listed feature columns under a new schema.
    pub fn project(&self, schema: Arc<FeatureSchema>, kept: &[usize]) -> Result<Self> {
        if schema.len() != kept.len() {
            return Err(Error::Schema("projection schema does not match kept columns".into()));
        }
        let id = schema.schema_id();
        let contexts = self
            .contexts
            .iter()
            .map(|c| DrivingContext::new(id.clone(), kept.iter().map(|&j| c.values[j]).collect()))
            .collect();
        Ok(Self {
            schema,
            contexts,
            labels: self.labels.clone(),
            provenance: self.provenance.clone(),
            groups: self.groups.clone(),
        })
    }

    /// Concatenate two datasets over the same schema.
    pub fn concat(mut self, other: LabeledDataset) -> Result<Self> {
        if self.schema.schema_id() != other.schema.schema_id() {
            return Err(Error::Load("cannot concatenate datasets with different schemas".into()));
        }
        self.groups = match (self.groups.take(), other.groups) {
            (None, None) => None,
            (a, b) => {
                let singletons = |n: usize| (0..n).collect::<Vec<_>>();
                let mut a = a.unwrap_or_else(|| singletons(self.len()));
                let offset = a.iter().max().map_or(0, |m| m + 1);
                let b = b.unwrap_or_else(|| singletons(other.labels.len()));
                a.extend(b.into_iter().map(|g| g + offset));
                Some(a)
            }
        };
        self.contexts.extend(other.contexts);
        self.labels.extend(other.labels);
        self.provenance.extend(other.provenance);
        Ok(self)
    }

    pub fn is_balanced(&self) -> bool {
        self.count(Label::Crash) == self.count(Label::Safe)
    }

    /// CSV with one column per feature followed by `label` and `provenance`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.names();
        header.push("label");
        header.push("provenance");
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.row(i).iter().map(|&v| format_value(v)).collect();
            row.push(self.labels[i].as_u8().to_string());
            row.push(self.provenance[i].name().to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Load(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, schema: Arc<FeatureSchema>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let cols: Vec<usize> = schema.names().iter().map(|n| find(n)).collect::<Result<_>>()?;
        let label_col = find("label")?;
        let prov_col = headers.iter().position(|h| h == "provenance");
        let id = schema.schema_id();
        let (mut contexts, mut labels, mut provenance) = (Vec::new(), Vec::new(), Vec::new());
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i + 2;
            let values = cols
                .iter()
                .map(|&c| {
                    let cell = row.get(c).unwrap_or_default();
                    cell.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Load(format!("line {line}: bad value `{cell}` in `{}`", headers[c])))
                })
                .collect::<Result<Vec<f64>>>()?;
            let label = match row.get(label_col).unwrap_or_default() {
                "1" => Label::Crash,
                "0" => Label::Safe,
                other => return Err(Error::Load(format!("line {line}: bad label `{other}`"))),
            };
            let prov = match prov_col {
                Some(c) => {
                    let s = row.get(c).unwrap_or_default();
                    Provenance::parse(s)
                        .ok_or_else(|| Error::Load(format!("line {line}: bad provenance `{s}`")))?
                }
                None => match label {
                    Label::Crash => Provenance::RealCrash,
                    Label::Safe => Provenance::SyntheticSafe,
                },
            };
            contexts.push(DrivingContext::new(id.clone(), values));
            labels.push(label);
            provenance.push(prov);
        }
        Self::new(schema, contexts, labels, provenance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{FeatureGroup, FeatureKind, FeatureSpec};

    fn tiny() -> LabeledDataset {
        let schema = Arc::new(
            FeatureSchema::new(
                "tiny",
                vec![
                    FeatureSpec::raw("a", FeatureGroup::Temporal, FeatureKind::Numeric),
                    FeatureSpec::raw("b", FeatureGroup::Location, FeatureKind::Binary),
                ],
            )
            .unwrap(),
        );
        LabeledDataset::from_rows(
            schema,
            vec![vec![0.25, 1.0], vec![3.0, 0.0], vec![-1.5, 1.0]],
            vec![Label::Crash, Label::Safe, Label::Crash],
            Provenance::Planted,
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let d = tiny();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = LabeledDataset::read_csv(buf.as_slice(), d.schema.clone()).unwrap();
        assert_eq!(back.contexts, d.contexts);
        assert_eq!(back.labels, d.labels);
        assert_eq!(back.provenance, d.provenance);
    }

    #[test]
    fn projection_and_subset() {
        let d = tiny();
        let (sub_schema, kept) = d.schema.without(&[0], "a").unwrap();
        let p = d.project(Arc::new(sub_schema), &kept).unwrap();
        assert_eq!(p.row(1), &[0.0]);
        let s = d.subset(&[2, 0]);
        assert_eq!(s.row(0), &[-1.5, 1.0]);
        assert_eq!(s.count(Label::Crash), 2);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let d = tiny();
        assert!(LabeledDataset::new(d.schema.clone(), d.contexts.clone(), vec![Label::Safe], vec![Provenance::Planted]).is_err());
    }
}
